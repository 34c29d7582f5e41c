from .layers import (
    LinearHead,
    LstmLayer,
    LstmStack,
    LstmState,
    ReconstructionLayer,
    lstm_cell_forward,
    reconstruction_forward,
)
from .model import Model, forward_predict
from .optim import AdamState, CosineRestartSchedule, adam_step, lr_at
from .tensor import Tensor, mse_loss

__all__ = [
    "AdamState",
    "CosineRestartSchedule",
    "LinearHead",
    "LstmLayer",
    "LstmStack",
    "LstmState",
    "Model",
    "ReconstructionLayer",
    "Tensor",
    "adam_step",
    "forward_predict",
    "lr_at",
    "lstm_cell_forward",
    "mse_loss",
    "reconstruction_forward",
]
