"""Architecture hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

from ..errors import ConfigError


@dataclass
class TransformerConfig:
    feat_width: int = 17
    heads: int = 4
    head_dim: int = 32
    conv_widths: tuple[int, ...] = (32, 17)
    blocks: int = 1

    def __post_init__(self):
        self.conv_widths = tuple(self.conv_widths)
        if self.conv_widths[-1] != self.feat_width:
            raise ConfigError(f"last conv width {self.conv_widths[-1]} must equal feat_width {self.feat_width}")
        if self.heads < 1 or self.head_dim < 1 or self.blocks < 1:
            raise ConfigError("heads, head_dim and blocks must be positive")


@dataclass
class ModelConfig:
    """Shared fields for every architecture; unused ones are ignored by a given model."""

    window: int = 5
    max_k: int = 3
    infer_k: int = 3
    static_ff_widths: tuple[int, ...] = (32, 17)
    head_ff_widths: tuple[int, ...] = (16, 2)
    lstm_widths: tuple[int, ...] = (64, 64, 32, 17)
    ae_widths: tuple[int, ...] = (32, 24)
    transformer: TransformerConfig = field(default_factory=TransformerConfig)

    def __post_init__(self):
        for name in ("static_ff_widths", "head_ff_widths", "lstm_widths", "ae_widths"):
            setattr(self, name, tuple(getattr(self, name)))
        if isinstance(self.transformer, dict):
            self.transformer = TransformerConfig(**self.transformer)
        if self.head_ff_widths[-1] != 2:
            raise ConfigError("the output head must end in 2 units (failure / no failure)")
        if not 1 <= self.infer_k <= self.max_k:
            raise ConfigError(f"infer_k={self.infer_k} outside 1..max_k={self.max_k}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config field(s): {sorted(unknown)}")
        return cls(**d)
