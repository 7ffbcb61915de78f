"""Config-driven single runs and the four ablation runners."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .. import losses as L
from ..config import ConfigError, RunConfig
from ..data.corpus import Corpus, load_corpus
from ..model.config import P_VARIANTS
from .metrics import EvalReport
from .train import TrainResult, model_config_for, train

log = logging.getLogger(__name__)

ABLATION_KINDS = ("alpha_sweep", "p_variants", "priority_orders", "beta_grid")
DEFAULT_ALPHAS = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


class AblationError(ValueError):
    pass


@dataclass
class AblationRun:
    coords: dict
    result: TrainResult

    @property
    def report(self) -> EvalReport:
        return self.result.test_report


def corpus_from_config(cfg: RunConfig) -> Corpus:
    log_ = load_corpus(
        cfg.require_path("interactions_path"),
        cfg.require_path("indicators_path"),
        min_interactions=cfg["min_interactions"],
        spec_path=cfg.path("indicator_spec_path"),
    )
    return Corpus.from_log(log_)


def loss_config_from(cfg: RunConfig, corpus: Corpus) -> L.GreenLossConfig:
    try:
        return L.GreenLossConfig.from_names(
            corpus.specs,
            alpha=cfg["alpha"],
            mode=cfg["green_mode"],
            priority=cfg["priority"],
            beta=cfg.betas(),
            raw_green_deltas=cfg["raw_green_deltas"],
            all_pass_zero=cfg["all_pass_zero"],
        )
    except L.LossConfigError as exc:
        raise ConfigError("loss", str(exc)) from None


def train_from_config(corpus: Corpus, cfg: RunConfig, on_epoch: Optional[Callable] = None) -> TrainResult:
    mcfg = model_config_for(corpus, **cfg.model_hyper())
    result = train(corpus, mcfg, loss_config_from(cfg, corpus), cfg.train_config(), on_epoch)
    for report in (result.valid_report, result.test_report):
        report.metadata["config_hash"] = cfg.hash()
    return result


def _beta_bounds(name: str, corpus: Corpus) -> tuple:
    if name in L.BETA_RANGES:
        return L.BETA_RANGES[name]
    spec = corpus.specs[[s.name for s in corpus.specs].index(name)]
    return spec.observed_min, spec.observed_max


def grid_points(kind: str, cfg: RunConfig, corpus: Corpus) -> list:
    """``[(coords, overrides)]`` for one ablation; validates every value first."""
    names = [s.name for s in corpus.specs]
    if kind == "alpha_sweep":
        alphas = cfg["grid.alpha"] if cfg["grid.alpha"] is not None else list(DEFAULT_ALPHAS)
        bad = [a for a in alphas if not 0.5 <= a <= 1.0]
        if bad:
            raise AblationError(f"grid.alpha values {bad} outside [0.5, 1]")
        return [({"alpha": float(a)}, {"alpha": float(a)}) for a in sorted(alphas)]

    if kind == "p_variants":
        variants = cfg["grid.p_variant"] or list(P_VARIANTS)
        bad = [v for v in variants if v not in P_VARIANTS]
        if bad:
            raise AblationError(f"grid.p_variant values {bad} not in {P_VARIANTS}")
        return [({"p_variant": v}, {"p_variant": v}) for v in variants]

    if kind == "priority_orders":
        if not names:
            raise AblationError("priority_orders needs at least one indicator")
        orders = cfg["grid.priority"] or [list(p) for p in itertools.permutations(names)]
        for order in orders:
            if sorted(order) != sorted(names):
                raise AblationError(f"priority order {order} is not a permutation of {names}")
        missing = [nm for nm in names if nm not in cfg.betas()]
        if missing:
            raise AblationError(f"priority_orders needs beta.<name> for {missing}")
        return [({"priority": ">".join(o)}, {"green_mode": L.PRIORITIZED, "priority": list(o)}) for o in orders]

    if kind == "beta_grid":
        grid = cfg.beta_grid()
        if not grid:
            raise AblationError("beta_grid needs at least one grid.beta.<name> list")
        for name, values in grid.items():
            if name not in names:
                raise AblationError(f"grid.beta.{name}: no indicator named {name!r}")
            lo, hi = _beta_bounds(name, corpus)
            bad = [v for v in values if not lo <= v <= hi]
            if bad:
                raise AblationError(f"grid.beta.{name} values {bad} outside [{lo}, {hi}]")
        missing = [nm for nm in names if nm not in grid and nm not in cfg.betas()]
        if missing:
            raise AblationError(f"beta_grid needs a fixed beta.<name> for {missing}")
        axes = [nm for nm in names if nm in grid]
        points = []
        for combo in itertools.product(*(sorted(grid[nm]) for nm in axes)):
            coords = {f"beta.{nm}": float(v) for nm, v in zip(axes, combo)}
            points.append((coords, {"green_mode": L.PRIORITIZED, **coords}))
        return points

    raise AblationError(f"unknown ablation kind {kind!r}; expected one of {ABLATION_KINDS}")


def ablate(kind: str, corpus: Corpus, cfg: RunConfig, on_run: Optional[Callable] = None) -> list:
    """One full train + test evaluation per grid point, all with the base seed."""
    points = grid_points(kind, cfg, corpus)
    runs = []
    for coords, overrides in points:
        run_cfg = RunConfig(cfg.values, cfg.base_dir)
        for key, value in overrides.items():
            run_cfg.set(key, value)
        log.info("ablation %s: %s", kind, coords)
        result = train_from_config(corpus, run_cfg)
        for report in (result.valid_report, result.test_report):
            report.metadata.update(coords)
        run = AblationRun(coords, result)
        runs.append(run)
        if on_run is not None:
            on_run(run)
    return runs


def mean_and_std(values) -> tuple:
    v = np.asarray(values, dtype=np.float64)
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0
