import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import mannwhitneyu

from oracles import BRIDGE, BRIDGE_LOW, LOW, RANK_FIXTURES, TOP, enumerated_p_greater, pair_counting_auc
from tabtransfer.evaluation import (
    LESS,
    TWO_SIDED,
    UndefinedMetricError,
    compute_ranks,
    mean_auc,
    roc_auc,
    stderr,
    task_ranks,
    wilcoxon_rank_sum,
)


# ---- ROC-AUC ------------------------------------------------------------------------


def test_auc_examples():
    assert roc_auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == 1.0
    assert roc_auc([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8]) == 0.75
    assert roc_auc([0, 1, 0, 1], [0.3] * 4) == 0.5
    with pytest.raises(UndefinedMetricError):
        roc_auc([1, 1, 1], [0.1, 0.2, 0.3])


def test_auc_matches_pair_counting_on_200_instances():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(2, 51))
        y = rng.integers(0, 2, n)
        y[0], y[1] = 0, 1
        s = np.round(rng.standard_normal(n), int(rng.integers(0, 3)))   # coarse rounding creates ties
        assert abs(roc_auc(y, s) - pair_counting_auc(y, s)) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_auc_invariant_under_monotone_transform(seed):
    rng = np.random.default_rng(seed)
    y = np.r_[0, 1, rng.integers(0, 2, 30)]
    s = rng.standard_normal(32)
    assert roc_auc(y, s) == roc_auc(y, np.exp(3 * s) + 7)
    assert roc_auc(y, -s) == pytest.approx(1 - roc_auc(y, s))


def test_mean_auc_skips_undefined_columns():
    Y = np.array([[0, 1], [1, 1], [0, 1], [1, 1]])
    S = np.array([[0.1, 0.5], [0.9, 0.2], [0.2, 0.3], [0.8, 0.1]])
    assert mean_auc(Y, S) == 1.0


# ---- Wilcoxon rank-sum --------------------------------------------------------------


def test_wilcoxon_extreme_exact_case():
    assert wilcoxon_rank_sum([1, 2, 3], [4, 5, 6]) == pytest.approx(1 / 20)
    assert wilcoxon_rank_sum([4, 5, 6], [1, 2, 3]) == 1.0
    assert wilcoxon_rank_sum([1, 2, 3], [4, 5, 6], LESS) == 1.0
    assert wilcoxon_rank_sum([1, 2, 3], [4, 5, 6], TWO_SIDED) == pytest.approx(0.1)


def test_wilcoxon_exact_matches_enumeration_for_all_small_sizes():
    rng = np.random.default_rng(1)
    for n_a, n_b in itertools.product(range(1, 10), range(1, 10)):
        if n_a + n_b > 10:
            continue
        for _ in range(3):
            a = rng.integers(0, 6, n_a).astype(float)   # small support: many ties
            b = rng.integers(0, 6, n_b).astype(float)
            assert wilcoxon_rank_sum(a, b) == pytest.approx(enumerated_p_greater(a, b), abs=1e-12)


def test_wilcoxon_identical_samples_near_half():
    x = np.random.default_rng(2).standard_normal(30)
    assert wilcoxon_rank_sum(x, x) == pytest.approx(0.5, abs=0.03)


def test_wilcoxon_exact_and_normal_agree_for_six_vs_six():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, b = rng.standard_normal(6), rng.standard_normal(6) + rng.uniform(0, 1.5)
        assert abs(wilcoxon_rank_sum(a, b, exact=True) - wilcoxon_rank_sum(a, b, exact=False)) < 0.02


def test_wilcoxon_normal_branch_matches_scipy():
    rng = np.random.default_rng(4)
    a = np.round(rng.standard_normal(15), 1)
    b = np.round(rng.standard_normal(12) + 0.5, 1)
    ref = mannwhitneyu(b, a, alternative="greater", method="asymptotic", use_continuity=True).pvalue
    assert wilcoxon_rank_sum(a, b) == pytest.approx(ref, rel=1e-10)


def test_wilcoxon_errors():
    with pytest.raises(ValueError):
        wilcoxon_rank_sum([], [1.0])
    with pytest.raises(ValueError):
        wilcoxon_rank_sum([1.0], [2.0], alternative="bigger")


# ---- rank aggregation ---------------------------------------------------------------

@pytest.mark.parametrize("scores, expected", RANK_FIXTURES)
def test_rank_fixtures_follow_peel_off_rule(scores, expected):
    assert task_ranks(scores) == expected


def test_bridge_fixture_p_values_are_as_constructed():
    assert wilcoxon_rank_sum(BRIDGE, TOP) >= 0.05
    assert wilcoxon_rank_sum(BRIDGE_LOW, TOP) < 0.05
    assert wilcoxon_rank_sum(BRIDGE_LOW, BRIDGE) >= 0.05


def test_rank_table_aggregates_across_tasks():
    results = {"t1": {"A": TOP, "B": LOW}, "t2": {"A": LOW, "B": TOP}, "t3": {"A": TOP, "B": TOP}}
    table = compute_ranks(results)
    assert table.mean_rank == {"A": pytest.approx(4 / 3), "B": pytest.approx(4 / 3)}
    assert table.rank_stderr["A"] == pytest.approx(stderr([1, 2, 1]))
    assert table.per_task["t3"] == {"A": 1, "B": 1}


def test_rank_errors():
    with pytest.raises(ValueError, match="seed counts"):
        task_ranks({"A": [0.1, 0.2], "B": [0.3]})
    with pytest.raises(ValueError):
        compute_ranks({"t1": {"A": [0.1]}, "t2": {"B": [0.1]}})


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n_models=st.integers(1, 5))
def test_rank_invariants(seed, n_models):
    rng = np.random.default_rng(seed)
    scores = {f"m{i}": list(0.7 + 0.05 * rng.standard_normal() + 0.02 * rng.standard_normal(5)) for i in range(n_models)}
    ranks = task_ranks(scores)
    assert min(ranks.values()) == 1
    assert sorted(set(ranks.values())) == list(range(1, max(ranks.values()) + 1))
    worst = min(min(v) for v in scores.values())
    dominated = dict(scores, dominated=[worst - 1.0 - 0.01 * k for k in range(5)])
    extended = task_ranks(dominated)
    assert {m: extended[m] for m in scores} == ranks
