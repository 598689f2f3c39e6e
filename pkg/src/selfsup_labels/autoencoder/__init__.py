from .layers import Conv1dLayer, conv1d_backward, conv1d_forward
from .model import (
    Architecture,
    AutoencoderModel,
    DenoisedSeries,
    TrainConfig,
    load_checkpoint,
    loss_descent,
    predict_matrix,
    reconstruct,
    save_checkpoint,
    train,
    write_loss_csv,
)

__all__ = [
    "Architecture",
    "AutoencoderModel",
    "Conv1dLayer",
    "DenoisedSeries",
    "TrainConfig",
    "conv1d_backward",
    "conv1d_forward",
    "load_checkpoint",
    "loss_descent",
    "predict_matrix",
    "reconstruct",
    "save_checkpoint",
    "train",
    "write_loss_csv",
]
