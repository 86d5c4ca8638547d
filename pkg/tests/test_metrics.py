import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topkdetect.graph import GroundTruth
from topkdetect.metrics import (
    MetricReport, aggregate, aggregate_reports, evaluate, first_error, fraction_correct,
)


def truth_from(degrees):
    deg = np.asarray(degrees)
    ids = np.lexsort((np.arange(len(deg)), -deg))
    return GroundTruth(ranked_ids=ids, order_stats=deg[ids], in_degree=deg)


def test_exact_top_k_scores_one():
    rng = np.random.default_rng(0)
    t = truth_from(rng.integers(0, 1000, 500))
    assert fraction_correct(t.ranked_ids[:100], t, 100) == 1.0
    assert first_error(t.ranked_ids[:100], t, 100) == 101


def test_disjoint_result_scores_zero():
    t = truth_from(np.arange(200, 0, -1))
    assert fraction_correct(np.arange(150, 200), t, 100) == 0.0
    assert first_error(np.arange(150, 200), t, 100) == 1


def test_boundary_tie_counts_either_member():
    t = truth_from([9, 7, 7, 7, 3])
    # IDs 0, 2, 3: the 7s held by ranks 3 and 4 of the ID-ordered truth
    assert fraction_correct([0, 2, 3], t, 3) == 1.0
    assert fraction_correct([0, 3, 1], t, 3) == 1.0
    assert fraction_correct([0, 4], t, 3) == pytest.approx(1 / 3)


def test_first_error_hand_trace():
    t = truth_from([9, 7, 5])
    assert first_error([0, 2], t, 3) == 2
    assert first_error([1, 2], t, 3) == 1
    assert first_error([2, 1, 0], t, 3) == 4


def test_tied_entities_cannot_stand_in_for_a_missed_leader():
    t = truth_from([9, 7, 7, 7, 3])
    assert fraction_correct([1, 2, 3], t, 3) == pytest.approx(2 / 3)
    t = truth_from([1, 0, 0])
    assert fraction_correct([1, 2], t, 2) == 0.5


def test_extra_entities_are_capped():
    t = truth_from([5, 5, 5, 5])
    assert fraction_correct([0, 1, 2, 3], t, 2) == 1.0


def test_empty_result():
    t = truth_from([3, 2, 1])
    assert fraction_correct([], t, 2) == 0.0
    assert first_error([], t, 3) == 1


def test_range_checks():
    t = truth_from([3, 2, 1])
    with pytest.raises(ValueError):
        fraction_correct([0], t, 0)
    with pytest.raises(ValueError):
        first_error([0], t, 4)


def test_evaluate_and_aggregate():
    t = truth_from([9, 7, 5])
    rep = evaluate([0, 2], t, 2, 3)
    assert rep == MetricReport(0.5, 2, 2, 3)
    assert aggregate([0.7]) == (0.7, 0.0)
    mean, sd = aggregate([0, 1])
    assert mean == 0.5 and sd == pytest.approx(0.70710678, abs=1e-8)
    with pytest.raises(ValueError):
        aggregate([])
    summary = aggregate_reports([rep, MetricReport(1.0, 4, 2, 3)])
    assert summary["fraction_mean"] == 0.75 and summary["runs"] == 2


def test_aggregate_matches_hand_recomputation():
    rng = np.random.default_rng(4)
    vals = rng.random(30).tolist()
    mean = sum(vals) / 30
    sd = (sum((v - mean) ** 2 for v in vals) / 29) ** 0.5
    got = aggregate(vals)
    assert got[0] == pytest.approx(mean, rel=1e-12) and got[1] == pytest.approx(sd, rel=1e-12)


instances = st.lists(st.integers(0, 6), min_size=3, max_size=25).flatmap(
    lambda deg: st.tuples(
        st.just(deg),
        st.lists(st.integers(0, len(deg) - 1), max_size=len(deg), unique=True),
        st.integers(1, len(deg)),
    )
)


@settings(max_examples=300, deadline=None)
@given(instances)
def test_full_fraction_iff_no_error_before_k(inst):
    deg, returned, k = inst
    t = truth_from(deg)
    assert (fraction_correct(returned, t, k) == 1.0) == (first_error(returned, t, k) >= k + 1)


@settings(max_examples=300, deadline=None)
@given(instances)
def test_adding_a_correct_entity_never_hurts(inst):
    deg, returned, k = inst
    t = truth_from(deg)
    missing = [w for w in t.ranked_ids[:k].tolist() if w not in returned]
    if not missing:
        return
    more = returned + [missing[0]]
    assert fraction_correct(more, t, k) >= fraction_correct(returned, t, k)
    assert first_error(more, t, k) >= first_error(returned, t, k)
    assert 0.0 <= fraction_correct(returned, t, k) <= 1.0
    assert 1 <= first_error(returned, t, k) <= k + 1


@settings(max_examples=300, deadline=None)
@given(instances)
def test_fraction_equals_maximum_crediting(inst):
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import maximum_bipartite_matching

    deg, returned, k = inst
    t = truth_from(deg)
    # rank j may be credited with any returned entity of degree >= F_j
    accept = np.array([[deg[w] >= t.order_stats[j] for w in returned] for j in range(k)],
                      dtype=float).reshape(k, len(returned))
    matched = int((maximum_bipartite_matching(csr_matrix(accept), perm_type="column") >= 0).sum())
    assert fraction_correct(returned, t, k) == pytest.approx(matched / k)
