"""The spatial-temporal forecasting network and its training loop."""
from .attention import multi_head_attention
from .config import ModelConfig
from .model import MGSTC, cgta_forward, decode, fgsa_forward, init_params, mae, mse, mse_loss
from .training import TrainResult, evaluate_mse, train_offline

__all__ = [
    "MGSTC", "ModelConfig", "TrainResult", "cgta_forward", "decode", "evaluate_mse",
    "fgsa_forward", "init_params", "mae", "mse", "mse_loss", "multi_head_attention",
    "train_offline",
]
