from .config import DetectorConfig, student_config, teacher_config
from .decode import (
    EVAL_CONF_THRESHOLD,
    NMS_IOU_THRESHOLD,
    PSEUDO_CONF_THRESHOLD,
    Detection,
    decode,
    decode_raw,
    predict_dataset,
    to_input,
)
from .losses import (
    assign_cell,
    build_targets,
    compute_loss,
    detection_loss,
    focal_loss,
    giou,
)
from .model import (
    TAG_BN_AFFINE,
    TAG_BN_RUNNING,
    TAG_CONV,
    Detector,
    ModelParams,
    init_params,
    load_checkpoint,
    partition_params,
    save_checkpoint,
)

__all__ = [
    "DetectorConfig", "student_config", "teacher_config",
    "EVAL_CONF_THRESHOLD", "NMS_IOU_THRESHOLD", "PSEUDO_CONF_THRESHOLD",
    "Detection", "decode", "decode_raw", "predict_dataset", "to_input",
    "assign_cell", "build_targets", "compute_loss", "detection_loss",
    "focal_loss", "giou", "TAG_BN_AFFINE", "TAG_BN_RUNNING", "TAG_CONV",
    "Detector", "ModelParams", "init_params", "load_checkpoint",
    "partition_params", "save_checkpoint",
]
