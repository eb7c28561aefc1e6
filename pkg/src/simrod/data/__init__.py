from .corruption import (
    CORRUPTION_KINDS,
    SEVERITY_PARAMS,
    CorruptionSpec,
    apply_corruption,
    corrupt_dataset_mixed,
    corrupt_dataset_single,
    corrupt_dataset_sweep,
    full_suite,
    parse_suite,
    save_suite,
)
from .datasets import (
    MIXED,
    SOURCE,
    TARGET,
    Dataset,
    LabeledImage,
    load_dataset,
    parse_label_file,
    parse_label_record,
    quantize_pixels,
    save_dataset,
)
from .shapes import SHAPE_KINDS, ShapesConfig, generate_shapes_dataset

__all__ = [
    "CORRUPTION_KINDS", "SEVERITY_PARAMS", "CorruptionSpec", "apply_corruption",
    "corrupt_dataset_mixed", "corrupt_dataset_single",
    "corrupt_dataset_sweep", "full_suite",
    "parse_suite", "save_suite", "MIXED", "SOURCE", "TARGET", "Dataset",
    "LabeledImage", "load_dataset", "parse_label_file", "parse_label_record",
    "quantize_pixels", "save_dataset", "SHAPE_KINDS", "ShapesConfig",
    "generate_shapes_dataset",
]
