"""Online adaptation: drift monitor, replay stores and the two update stages."""
from .augmentation import (
    augment_sample,
    augmentation_gap,
    explicit_gap_norm,
    max_admissible_xi,
    random_orthonormal,
    verify_appendix,
)
from .learner import (
    BatchRecord,
    OnlineConfig,
    OnlineLearner,
    OnlineResult,
    StageLosses,
    aggressive_update,
    fine_tune_step,
    online_loop,
)
from .monitor import DriftMonitor, DriftVerdict, monitor_check
from .replay import ReplayStores, Sample

__all__ = [
    "BatchRecord", "DriftMonitor", "DriftVerdict", "OnlineConfig", "OnlineLearner",
    "OnlineResult", "ReplayStores", "Sample", "StageLosses", "aggressive_update",
    "augment_sample", "augmentation_gap", "explicit_gap_norm", "fine_tune_step",
    "max_admissible_xi", "monitor_check", "online_loop", "random_orthonormal", "verify_appendix",
]
