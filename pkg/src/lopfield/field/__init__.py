"""Neural field: heads, losses, training, and checkpoints."""

from .checkpoint import checkpoint_hash, load_checkpoint, save_checkpoint
from .core import FieldGradients, LopField, total_loss
from .heads import FieldHeads, HIDDEN_SIZE
from .loss import LossConfig, TAU_INIT, contrastive_loss, contrastive_loss_grads
from .train import TrainConfig, TrainResult, train

__all__ = [
    "FieldGradients",
    "FieldHeads",
    "HIDDEN_SIZE",
    "LopField",
    "LossConfig",
    "TAU_INIT",
    "TrainConfig",
    "TrainResult",
    "checkpoint_hash",
    "contrastive_loss",
    "contrastive_loss_grads",
    "load_checkpoint",
    "save_checkpoint",
    "total_loss",
    "train",
]
