import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greenfood.traineval import (
    CutoffMetrics,
    EvalReport,
    emit_report,
    hr_ndcg_at_n,
    hr_ndcg_from_ranks,
    load_report_json,
    mean_indicator_at_n,
    rank_all,
    target_rank,
    top_n,
)
from greenfood.traineval.report import ReportError


def naive_ranking(scores, exclude):
    ids = [i for i in range(1, len(scores)) if i not in set(exclude)]
    return sorted(ids, key=lambda i: (-scores[i], i))


def test_rank_all_hand_example():
    # catalog of 3 with scores [0.1, 0.9, 0.5] for items 1..3
    assert rank_all(np.array([0.0, 0.1, 0.9, 0.5])).tolist() == [2, 3, 1]


def test_rank_all_ties_and_exclusion():
    scores = np.array([0.0, 0.5, 0.5, 0.7, 0.5])
    assert rank_all(scores).tolist() == [3, 1, 2, 4]
    assert rank_all(scores, [3, 1]).tolist() == [2, 4]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=2, max_size=15), st.data())
def test_rank_helpers_match_naive(raw_scores, data):
    scores = np.array([0.0] + [float(s) for s in raw_scores])
    exclude = data.draw(st.sets(st.integers(1, len(raw_scores)), max_size=len(raw_scores) - 1))
    expected = naive_ranking(scores, exclude)
    ranking = rank_all(scores, exclude)
    assert ranking.tolist() == expected
    assert sorted(ranking.tolist()) == sorted(set(range(1, len(scores))) - exclude)
    blocked = np.zeros(len(scores), dtype=bool)
    blocked[0] = True
    blocked[list(exclude)] = True
    for target in range(1, len(scores)):
        want = expected.index(target) + 1 if target in expected else 0
        assert target_rank(scores, blocked, target) == want
    n = data.draw(st.integers(1, len(scores)))
    assert top_n(scores, blocked, n).tolist() == expected[:n]


def test_hr_ndcg_single_user_cases():
    assert hr_ndcg_from_ranks(np.array([1]), 10) == (1.0, 1.0)
    hr, ndcg = hr_ndcg_from_ranks(np.array([3]), 10)
    assert hr == 1.0 and ndcg == pytest.approx(0.5, abs=1e-15)
    assert hr_ndcg_from_ranks(np.array([11]), 10) == (0.0, 0.0)
    assert hr_ndcg_from_ranks(np.array([0]), 10) == (0.0, 0.0)


def brute_hr_ndcg(score_rows, targets, excludes, n):
    hits, gains = 0, 0.0
    for scores, t, ex in zip(score_rows, targets, excludes):
        better = 0
        for i in range(1, len(scores)):
            if i in ex or i == t:
                continue
            if scores[i] > scores[t] or (scores[i] == scores[t] and i < t):
                better += 1
        rank = better + 1
        if rank <= n:
            hits += 1
            gains += 1.0 / math.log2(rank + 1)
    return hits / len(targets), gains / len(targets)


def test_five_users_match_brute_force():
    rng = np.random.default_rng(5)
    rows = [np.concatenate([[0.0], rng.integers(0, 6, size=12).astype(float)]) for _ in range(5)]
    targets = [3, 7, 1, 12, 5]
    excludes = [{1, 2}, {8}, {4, 5, 6}, set(), {11, 10}]
    rankings = [rank_all(r, ex) for r, ex in zip(rows, excludes)]
    for n in (1, 3, 5, 10):
        assert hr_ndcg_at_n(rankings, targets, n) == pytest.approx(brute_hr_ndcg(rows, targets, excludes, n),
                                                                   abs=1e-15)


def test_missing_ranking_is_an_error():
    with pytest.raises(ValueError):
        hr_ndcg_at_n([np.array([1, 2])], [1, 2], 5)
    with pytest.raises(ValueError):
        hr_ndcg_at_n([None], [1], 5)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 30), min_size=1, max_size=20))
def test_metric_monotone_and_bounded(ranks):
    ranks = np.array(ranks)
    prev = (0.0, 0.0)
    for n in (1, 5, 10, 20):
        hr, ndcg = hr_ndcg_from_ranks(ranks, n)
        assert 0 <= ndcg <= hr <= 1
        assert hr >= prev[0] and ndcg >= prev[1]
        prev = (hr, ndcg)


def test_mean_indicator_cases():
    table = np.array([[0.0], [70.0], [90.0], [10.0]])
    assert mean_indicator_at_n([np.array([1, 2, 3])], table, 2).tolist() == [80.0]
    const = np.full((5, 2), 3.5)
    np.testing.assert_array_equal(mean_indicator_at_n([np.array([1, 2]), np.array([4, 3])], const, 2), [3.5, 3.5])


def test_mean_indicator_matches_loops():
    rng = np.random.default_rng(8)
    table = rng.uniform(20, 140, size=(30, 3))
    rankings = [rng.permutation(np.arange(1, 30))[:12] for _ in range(6)]
    for n in (1, 5, 10):
        expected = []
        for j in range(3):
            per_user = [sum(table[r[k], j] for k in range(n)) / n for r in rankings]
            expected.append(sum(per_user) / len(per_user))
        np.testing.assert_allclose(mean_indicator_at_n(rankings, table, n), expected, rtol=1e-13)


# ---- reports -------------------------------------------------------------

def make_report(seed=0, hr=0.3):
    cut = {n: CutoffMetrics(hr * n / 20, hr * n / 40, {"eis": 80.0 + n, "nis": 40.1}, {"eis": 0.6, "nis": 0.5})
           for n in (5, 10, 20)}
    return EvalReport("test", cut, {"seed": seed, "epoch": 4, "config_hash": "abc"})


def test_single_report_gives_three_rows(tmp_path):
    paths = emit_report(make_report(), tmp_path)
    lines = paths["csv"].read_text().splitlines()
    assert lines[0] == ("split,cutoff,hr,ndcg,mean_eis,mean_nis,green_eis,green_nis,mean_greenness,"
                        "seed,epoch,config_hash")
    assert len(lines) == 4
    assert [row.split(",")[1] for row in lines[1:]] == ["5", "10", "20"]


def test_json_round_trip(tmp_path):
    runs = [({"alpha": 0.7}, make_report(1, 0.1)), ({"alpha": 1.0}, make_report(2, 0.2 / 3))]
    paths = emit_report(runs, tmp_path, stem="ab")
    assert load_report_json(paths["json"]) == runs
    single = emit_report(make_report(), tmp_path / "s")
    assert load_report_json(single["json"]) == [({}, make_report())]


def test_coordinate_columns_lead(tmp_path):
    paths = emit_report([({"beta.eis": 70.0, "beta.nis": 30.0}, make_report())], tmp_path)
    assert paths["csv"].read_text().splitlines()[0].startswith("beta.eis,beta.nis,split,cutoff")


def test_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ReportError):
        emit_report(make_report(), blocker / "sub")
    with pytest.raises(ValueError):
        emit_report([], tmp_path)
