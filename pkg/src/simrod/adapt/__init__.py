from .config import MODES, AdaptConfig, flags_to_mode
from .loop import (
    AblationResult,
    AdaptRunRecord,
    EpochStats,
    adapt_self,
    adapt_teacher_guided,
    run_ablation,
    train_source,
)
from .optim import SGD, lr_at

__all__ = [
    "MODES", "AdaptConfig", "flags_to_mode", "AblationResult",
    "AdaptRunRecord", "EpochStats", "adapt_self", "adapt_teacher_guided",
    "run_ablation", "train_source", "SGD", "lr_at",
]
