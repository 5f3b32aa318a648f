"""Model architectures built on the numerics core."""

from .architectures import (
    ARCHITECTURES,
    GenLSTMPlus,
    GenTrap,
    GNNLSTMAutoencoder,
    LSTMAutoencoder,
    LSTMPlus,
    build_model,
)
from .base import Model
from .blocks import aggregate_max, transformer_block, transformer_encode
from .config import ModelConfig, TransformerConfig

__all__ = [name for name in dir() if not name.startswith("_")]
