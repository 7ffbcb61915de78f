"""Flat JSON run configuration with ``--set key=value`` overrides.

Keys are flat strings; thresholds and ablation grids use dotted names such
as ``beta.eis`` or ``grid.alpha``. Relative paths resolve against the
directory of the config file.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import fields
from pathlib import Path
from typing import Any, Optional

from .data.synth import SynthConfig
from .model.config import P_VARIANTS


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"config field {key!r}: {message}")
        self.key = key


def _num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _str(x):
    return isinstance(x, str)


def _bool(x):
    return isinstance(x, bool)


def _opt(check):
    return lambda x: x is None or check(x)


def _list_of(check):
    return lambda x: isinstance(x, list) and all(check(v) for v in x)


# key -> (default, type check, description of the expected type)
SCHEMA: dict = {
    "interactions_path": (None, _opt(_str), "path"),
    "indicators_path": (None, _opt(_str), "path"),
    "indicator_spec_path": (None, _opt(_str), "path"),
    "checkpoint_path": (None, _opt(_str), "path"),
    "min_interactions": (10, _int, "integer"),
    "d": (16, _int, "integer"),
    "heads": (2, _int, "integer"),
    "layers": (1, _int, "integer"),
    "delta": (5.0, _num, "number"),
    "w_max": (20, _int, "integer"),
    "attention_scaling": (True, _bool, "boolean"),
    "ffn_hidden": (None, _opt(_int), "integer or null"),
    "residual": (False, _bool, "boolean"),
    "per_pair_projections": (False, _bool, "boolean"),
    "p_variant": ("P_grape", lambda x: x in P_VARIANTS, f"one of {P_VARIANTS}"),
    "alpha": (0.9, lambda x: _num(x) and 0.0 <= x <= 1.0, "number in [0, 1]"),
    "green_mode": ("nonprioritized", lambda x: x in ("nonprioritized", "prioritized"),
                   "'nonprioritized' or 'prioritized'"),
    "priority": ([], _list_of(_str), "list of indicator names"),
    "raw_green_deltas": (False, _bool, "boolean"),
    "all_pass_zero": (False, _bool, "boolean"),
    "green_pairs_per_step": (2, lambda x: _int(x) and x >= 0, "non-negative integer"),
    "learning_rate": (1e-2, lambda x: _num(x) and x >= 0, "non-negative number"),
    "batch_size": (64, lambda x: _int(x) and x >= 1, "positive integer"),
    "max_epochs": (50, lambda x: _int(x) and x >= 1, "positive integer"),
    "patience": (10, lambda x: _int(x) and x >= 1, "positive integer"),
    "l2": (0.0, lambda x: _num(x) and x >= 0, "non-negative number"),
    "seed": (0, lambda x: _int(x) and x >= 0, "non-negative integer"),
    "eval_cutoffs": ([5, 10, 20], _list_of(lambda v: _int(v) and v >= 1), "list of positive integers"),
    "grid.alpha": (None, _opt(_list_of(_num)), "list of numbers"),
    "grid.p_variant": (None, _opt(_list_of(_str)), "list of P variant names"),
    "grid.priority": (None, _opt(_list_of(_list_of(_str))), "list of priority orders"),
}
_SYNTH_TYPES = {int: (_int, "integer"), float: (_num, "number")}
for _f in fields(SynthConfig):
    _default = _f.default
    if _f.name in ("names", "directions", "ranges"):
        SCHEMA[f"synth.{_f.name}"] = (None, _opt(lambda x: isinstance(x, list)), "list or null")
    else:
        check, desc = _SYNTH_TYPES[type(_default)]
        SCHEMA[f"synth.{_f.name}"] = (_default, check, desc)

DYNAMIC_PREFIXES = {
    "beta.": (_num, "number"),
    "grid.beta.": (_list_of(_num), "list of numbers"),
}


def _schema_for(key: str):
    if key in SCHEMA:
        _, check, desc = SCHEMA[key]
        return check, desc
    for prefix, spec in sorted(DYNAMIC_PREFIXES.items(), key=lambda kv: -len(kv[0])):
        if key.startswith(prefix) and len(key) > len(prefix):
            return spec
    return None


class RunConfig:
    """Validated flat key-value configuration."""

    def __init__(self, values: Optional[dict] = None, base_dir: Optional[Path] = None):
        self.base_dir = Path(base_dir) if base_dir else Path.cwd()
        self.values = {k: v[0] for k, v in SCHEMA.items()}
        for key, value in (values or {}).items():
            self.set(key, value)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError("--config", f"file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("--config", f"invalid JSON in {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("--config", "top level must be a JSON object")
        return cls(raw, path.parent)

    def set(self, key: str, value: Any) -> None:
        spec = _schema_for(key)
        if spec is None:
            raise ConfigError(key, "unknown key")
        check, desc = spec
        if isinstance(value, int) and not isinstance(value, bool) and desc.startswith("number"):
            value = float(value)
        if not check(value):
            raise ConfigError(key, f"expected {desc}, got {value!r}")
        self.values[key] = value

    def override(self, assignment: str) -> None:
        if "=" not in assignment:
            raise ConfigError(assignment, "override must look like key=value")
        key, text = assignment.split("=", 1)
        key = key.strip()
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        self.set(key, value)

    def __getitem__(self, key: str):
        return self.values[key]

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def path(self, key: str) -> Optional[Path]:
        raw = self.values.get(key)
        if raw is None:
            return None
        p = Path(raw)
        return p if p.is_absolute() else self.base_dir / p

    def require_path(self, key: str) -> Path:
        p = self.path(key)
        if p is None:
            raise ConfigError(key, "required for this command")
        return p

    def betas(self) -> dict:
        return {k[len("beta."):]: v for k, v in self.values.items() if k.startswith("beta.")}

    def beta_grid(self) -> dict:
        return {k[len("grid.beta."):]: v for k, v in self.values.items() if k.startswith("grid.beta.")}

    def model_hyper(self) -> dict:
        keys = ("d", "heads", "layers", "delta", "w_max", "attention_scaling", "ffn_hidden", "residual",
                "per_pair_projections", "p_variant")
        return {k: self.values[k] for k in keys}

    def train_config(self):
        from .traineval.train import TrainConfig

        return TrainConfig(
            learning_rate=self.values["learning_rate"],
            batch_size=self.values["batch_size"],
            max_epochs=self.values["max_epochs"],
            patience=self.values["patience"],
            l2=self.values["l2"],
            seed=self.values["seed"],
            eval_cutoffs=tuple(self.values["eval_cutoffs"]),
            green_pairs_per_step=self.values["green_pairs_per_step"],
        )

    def synth_config(self) -> SynthConfig:
        return SynthConfig(**{f.name: self.values[f"synth.{f.name}"] for f in fields(SynthConfig)})

    def to_dict(self) -> dict:
        return dict(sorted(self.values.items()))

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
