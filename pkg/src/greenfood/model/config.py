from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Optional

P_VARIANTS = ("Pone", "PN_rand", "PN", "P_rand", "P_grape")


class ModelConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    num_items: int
    num_users: int
    n: int
    num_bins: int = 1
    d: int = 16
    heads: int = 2
    layers: int = 1
    delta: float = 5.0
    w_max: int = 20
    attention_scaling: bool = True
    ffn_hidden: Optional[int] = None
    residual: bool = False
    per_pair_projections: bool = False
    p_variant: str = "P_grape"

    def __post_init__(self):
        if self.ffn_hidden is None:
            self.ffn_hidden = 2 * self.d
        self.validate()

    def validate(self) -> None:
        if self.d <= 0 or self.heads <= 0 or self.d % self.heads:
            raise ModelConfigError(f"d={self.d} must be a positive multiple of heads={self.heads}")
        if self.layers < 1:
            raise ModelConfigError("layers must be >= 1")
        if not self.delta > 0:
            raise ModelConfigError("delta must be > 0")
        if self.w_max < 2:
            raise ModelConfigError("w_max must be >= 2")
        if self.n < 0 or self.num_items < 1 or self.num_users < 1 or self.num_bins < 1:
            raise ModelConfigError("n, num_items, num_users, num_bins out of range")
        if self.p_variant not in P_VARIANTS:
            raise ModelConfigError(f"unknown P variant {self.p_variant!r}; expected one of {P_VARIANTS}")

    @property
    def head_dim(self) -> int:
        return self.d // self.heads

    @property
    def channels(self) -> list:
        return ["i"] + [f"g{j + 1}" for j in range(self.n)]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in raw.items() if k in known})
