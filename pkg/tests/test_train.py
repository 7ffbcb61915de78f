import numpy as np
import pytest

from greenfood import losses as L
from greenfood.config import RunConfig
from greenfood.data import Corpus, SynthConfig, load_corpus, sample_batch, synth_generate
from greenfood.traineval import (
    AblationError,
    Trainer,
    TrainConfig,
    TrainingError,
    ablate,
    grid_points,
    model_config_for,
    train,
    train_from_config,
)
from greenfood.traineval import ablation


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    synthetic = synth_generate(SynthConfig(users=120, items=300, min_len=10, max_len=18), seed=2)
    paths = synthetic.write(tmp_path_factory.mktemp("syn"))
    return Corpus.from_log(load_corpus(paths["interactions"], paths["indicators"], 3))


def make_trainer(corpus, alpha=1.0, lr=1e-2, seed=0, **hyper):
    mcfg = model_config_for(corpus, d=8, heads=2, w_max=12, **hyper)
    lcfg = L.GreenLossConfig.from_names(corpus.specs, alpha=alpha)
    return Trainer(corpus, mcfg, lcfg, TrainConfig(learning_rate=lr, batch_size=16, seed=seed))


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_loss_decreases_over_first_epochs(corpus, seed):
    # the objective is measured on one fixed all-user batch so sampling noise does not mask the trend
    fixed = sample_batch(corpus.sequences, len(corpus.sequences), np.random.default_rng(99), corpus.num_items)
    trainer = make_trainer(corpus, alpha=1.0, lr=3e-3, seed=seed)
    losses = [float(trainer.loss_components(fixed)[0].value)]
    for _ in range(5):
        trainer.run_epoch()
        losses.append(float(trainer.loss_components(fixed)[0].value))
    assert all(a > b for a, b in zip(losses, losses[1:])), losses


def test_zero_learning_rate_leaves_params(corpus):
    trainer = make_trainer(corpus, alpha=0.7, lr=0.0)
    before = trainer.snapshot()
    trainer.run_epoch()
    for name, value in before.items():
        np.testing.assert_array_equal(trainer.params[name].value, value)


def test_p_stays_on_simplex(corpus):
    trainer = make_trainer(corpus, alpha=0.7, lr=5e-2, p_variant="P_rand")
    for _ in range(5):
        trainer.step()
        p = trainer.params["P"].value
        assert np.all(p >= 0)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(trainer.params["item_table"].value[0] == 0)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_aborts_with_components(corpus):
    trainer = make_trainer(corpus)
    trainer.params["item_table"].value[1:] = np.nan
    with pytest.raises(TrainingError, match="step 0.*normal="):
        trainer.step()


def test_green_loss_only_below_alpha_one(corpus):
    assert make_trainer(corpus, alpha=1.0).step()[2] == 0.0
    assert make_trainer(corpus, alpha=0.7).step()[2] > 0.0


def test_train_is_deterministic_and_keeps_best(corpus):
    mcfg = model_config_for(corpus, d=8, heads=2, w_max=12)
    lcfg = L.GreenLossConfig.from_names(corpus.specs, alpha=0.8)
    tcfg = TrainConfig(learning_rate=1e-2, batch_size=32, max_epochs=4, patience=2, seed=7)
    a = train(corpus, mcfg, lcfg, tcfg)
    b = train(corpus, mcfg, lcfg, tcfg)
    assert a.history == b.history
    assert a.test_report == b.test_report
    for name in a.params:
        np.testing.assert_array_equal(a.params[name].value, b.params[name].value)
    best = max(h.valid_ndcg10 for h in a.history)
    assert a.history[a.best_epoch - 1].valid_ndcg10 == best
    assert a.valid_report.cutoffs[10].ndcg == pytest.approx(best, abs=1e-15)
    assert a.test_report.metadata == {"seed": 7, "epoch": a.best_epoch}
    m = a.test_report.cutoffs
    assert m[5].hr <= m[10].hr <= m[20].hr


def test_patience_stops_early(corpus):
    mcfg = model_config_for(corpus, d=8, heads=2, w_max=12)
    lcfg = L.GreenLossConfig.from_names(corpus.specs, alpha=1.0)
    result = train(corpus, mcfg, lcfg, TrainConfig(learning_rate=0.0, batch_size=32, max_epochs=10, patience=2))
    # nothing changes with lr=0, so the first epoch stays best and training stops after patience
    assert result.best_epoch == 1 and len(result.history) == 3


# ---- ablation grids ------------------------------------------------------

def base_config(**extra):
    values = {"d": 8, "heads": 2, "w_max": 12, "max_epochs": 1, "batch_size": 32,
              "beta.eis": 90.0, "beta.nis": 40.0, "beta.hmi": 40.0}
    values.update(extra)
    return RunConfig(values)


def test_grid_counts(corpus):
    assert len(grid_points("alpha_sweep", base_config(), corpus)) == 6
    assert len(grid_points("p_variants", base_config(), corpus)) == 5
    orders = grid_points("priority_orders", base_config(), corpus)
    assert len(orders) == 6 and len({c["priority"] for c, _ in orders}) == 6
    beta = grid_points("beta_grid", base_config(**{"grid.beta.eis": [70, 120], "grid.beta.nis": [30, 40, 50]}), corpus)
    assert len(beta) == 6
    assert all(over["green_mode"] == L.PRIORITIZED for _, over in beta)


def test_alpha_grid_sorted_ascending(corpus):
    points = grid_points("alpha_sweep", base_config(**{"grid.alpha": [1.0, 0.5, 0.8]}), corpus)
    assert [c["alpha"] for c, _ in points] == [0.5, 0.8, 1.0]


@pytest.mark.parametrize("kind, extra, pattern", [
    ("alpha_sweep", {"grid.alpha": [0.9, 0.3]}, r"outside \[0.5, 1\]"),
    ("p_variants", {"grid.p_variant": ["Pone", "Pzero"]}, "Pzero"),
    ("priority_orders", {"grid.priority": [["eis", "nis"]]}, "permutation"),
    ("beta_grid", {"grid.beta.eis": [60.0]}, "outside"),
    ("beta_grid", {"grid.beta.nis": [55.0]}, "outside"),
    ("beta_grid", {}, "at least one"),
    ("sideways", {}, "unknown ablation"),
])
def test_invalid_grid_rejected_before_training(corpus, monkeypatch, kind, extra, pattern):
    def boom(*a, **k):
        raise AssertionError("training started")
    monkeypatch.setattr(ablation, "train_from_config", boom)
    with pytest.raises(AblationError, match=pattern):
        ablate(kind, corpus, base_config(**extra))


def test_ablation_runs_share_seed_and_tag_coords(corpus):
    runs = ablate("alpha_sweep", corpus, base_config(**{"grid.alpha": [0.6, 1.0], "seed": 3}))
    assert [r.coords for r in runs] == [{"alpha": 0.6}, {"alpha": 1.0}]
    for r in runs:
        assert r.report.metadata["seed"] == 3 and r.report.metadata["alpha"] == r.coords["alpha"]


def test_train_from_config_stamps_hash(corpus):
    cfg = base_config()
    result = train_from_config(corpus, cfg)
    assert result.test_report.metadata["config_hash"] == cfg.hash()
