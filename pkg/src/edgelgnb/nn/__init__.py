"""Small float64 neural-network toolkit: dense and LSTM layers trained with Adagrad."""

from .layers import LSTM, Dense, sigmoid, softmax
from .network import (
    CacheMismatchError,
    Network,
    build_network,
    grad_check,
    load_network,
    loss,
    network_from_dict,
    network_to_dict,
    save_network,
    stack_spec,
)
from .optim import AdagradState, TrainingConfig, adagrad_step, train

__all__ = [
    "LSTM", "Dense", "sigmoid", "softmax",
    "CacheMismatchError", "Network", "build_network", "grad_check", "load_network",
    "loss", "network_from_dict", "network_to_dict", "save_network", "stack_spec",
    "AdagradState", "TrainingConfig", "adagrad_step", "train",
]
