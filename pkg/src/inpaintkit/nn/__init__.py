"""From-scratch differentiable network kernel for the context encoders."""

from .network import (
    LayerSpec,
    NetworkSpec,
    activation,
    backward,
    context_encoder_spec,
    conv,
    cwfc,
    discriminator_spec,
    encode,
    forward,
    init_params,
    param_count,
    tconv,
)
from .losses import adversarial_losses, joint_loss, masked_rec_loss, masked_rec_loss_batch
from .optim import Adam
from .gradcheck import grad_check, check_param_gradients
from .checkpoint import Checkpoint, read_checkpoint, write_checkpoint
from .train import TrainConfig, TrainResult, evaluate_masked_mse, train_context_encoder

__all__ = [
    "Adam",
    "Checkpoint",
    "LayerSpec",
    "NetworkSpec",
    "TrainConfig",
    "TrainResult",
    "activation",
    "adversarial_losses",
    "backward",
    "check_param_gradients",
    "context_encoder_spec",
    "conv",
    "cwfc",
    "discriminator_spec",
    "encode",
    "evaluate_masked_mse",
    "forward",
    "grad_check",
    "init_params",
    "joint_loss",
    "masked_rec_loss",
    "masked_rec_loss_batch",
    "param_count",
    "read_checkpoint",
    "tconv",
    "train_context_encoder",
    "write_checkpoint",
]
