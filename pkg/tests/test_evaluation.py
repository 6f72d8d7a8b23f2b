"""AUC, aggregation and sweep tests."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aqade.evaluation import (
    EvalReport,
    LabeledScores,
    SweepGrid,
    aggregate,
    auc_roc,
    sweep,
    tied_ranks,
)

# ---------------------------------------------------------------- oracles


def auc_pairwise(scores, labels):
    """O(n^2) definition: P(anomaly outscores normal), ties count half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    acc = 0.0
    for a in pos:
        for b in neg:
            if a > b:
                acc += 1.0
            elif a == b:
                acc += 0.5
    return acc / (len(pos) * len(neg))


def ranks_naive(x):
    out = np.empty(len(x))
    for i, v in enumerate(x):
        less = sum(1 for u in x if u < v)
        equal = sum(1 for u in x if u == v)
        out[i] = less + (equal + 1) / 2.0
    return out


def ls(scores, labels):
    return LabeledScores(scores=np.asarray(scores, dtype=np.float64),
                         labels=np.asarray(labels))


# ---------------------------------------------------------------- auc_roc


def test_tied_ranks_matches_naive(rng):
    x = rng.integers(0, 5, size=30).astype(np.float64)
    np.testing.assert_array_equal(tied_ranks(x), ranks_naive(x))


def test_auc_perfect_separation():
    assert auc_roc(ls([1, 2, 9, 8], [0, 0, 1, 1])) == 1.0


def test_auc_all_tied_is_half():
    assert auc_roc(ls([3, 3, 3, 3], [0, 1, 0, 1])) == 0.5


def test_auc_matches_pairwise_oracle(rng):
    scores = rng.integers(0, 40, size=200).astype(np.float64)  # forces ties
    labels = rng.integers(0, 2, size=200)
    labels[0], labels[1] = 0, 1  # both classes present
    got = auc_roc(ls(scores, labels))
    want = auc_pairwise(scores, labels)
    assert abs(got - want) <= 1e-12


def test_auc_rejects_single_class():
    with pytest.raises(ValueError, match="both"):
        auc_roc(ls([1, 2], [1, 1]))


def test_auc_rejects_nan():
    with pytest.raises(ValueError, match="NaN"):
        auc_roc(ls([1.0, np.nan], [0, 1]))


def test_labeled_scores_validation():
    with pytest.raises(ValueError, match="length"):
        LabeledScores(scores=np.zeros(3), labels=np.zeros(2, dtype=np.uint8))
    with pytest.raises(ValueError, match="labels"):
        LabeledScores(scores=np.zeros(2), labels=np.array([0, 2]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_auc_invariant_under_increasing_transform(seed):
    r = np.random.default_rng(seed)
    scores = r.standard_normal(50)
    labels = r.integers(0, 2, size=50)
    labels[:2] = [0, 1]
    base = auc_roc(ls(scores, labels))
    assert auc_roc(ls(3.0 * scores + 7.0, labels)) == pytest.approx(base, abs=1e-12)
    assert auc_roc(ls(np.exp(scores), labels)) == pytest.approx(base, abs=1e-12)


def test_auc_negation_complement_without_ties(rng):
    scores = rng.standard_normal(60)
    labels = rng.integers(0, 2, size=60)
    labels[:2] = [0, 1]
    a = auc_roc(ls(scores, labels))
    b = auc_roc(ls(-scores, labels))
    assert a + b == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------- aggregate


def test_aggregate_single_report():
    r = aggregate([EvalReport(aucs=(0.83,))])
    assert r.mean_auc == 0.83
    assert r.std_auc == 0.0


def test_aggregate_constant_runs():
    r = aggregate([EvalReport(aucs=(0.9,)) for _ in range(3)])
    assert r.mean_auc == pytest.approx(0.9)
    assert r.std_auc == 0.0


def test_aggregate_two_runs_hand_formula():
    r = aggregate([EvalReport(aucs=(0.6,)), EvalReport(aucs=(0.8,))])
    assert r.mean_auc == pytest.approx(0.7, abs=1e-12)
    assert r.std_auc == pytest.approx(math.sqrt(0.02), rel=1e-12)  # ~0.1414


def test_aggregate_permutation_invariant():
    reports = [EvalReport(aucs=(a,)) for a in (0.5, 0.7, 0.9, 0.62)]
    fwd = aggregate(reports)
    rev = aggregate(reports[::-1])
    assert fwd.mean_auc == rev.mean_auc
    assert fwd.std_auc == rev.std_auc


def test_aggregate_rejects_empty():
    with pytest.raises(ValueError):
        aggregate([])


def test_report_validation():
    with pytest.raises(ValueError):
        EvalReport(aucs=())
    with pytest.raises(ValueError):
        EvalReport(aucs=(1.2,))


# ---------------------------------------------------------------- sweep


def synth_task(rng, n_train=80, n_test=40, dim=16, shift=2.0):
    train = rng.standard_normal((n_train, dim)).astype(np.float32)
    normal = rng.standard_normal((n_test, dim)).astype(np.float32)
    anom = rng.standard_normal((n_test, dim)).astype(np.float32)
    anom[:, :4] += shift
    test = np.vstack([normal, anom])
    labels = np.r_[np.zeros(n_test, np.uint8), np.ones(n_test, np.uint8)]
    return train, test, labels


def test_sweep_single_cell(rng):
    train, test, labels = synth_task(rng)
    rows = sweep(train, test, labels, grid=SweepGrid(m_values=(4,), c_values=(3,)))
    assert len(rows) == 2  # one cell + the exact reference row
    cell, exact = rows
    assert (cell.m, cell.c) == (4, 3)
    assert 0.0 <= cell.auc <= 1.0
    assert cell.query_seconds > 0.0
    assert exact.is_exact and exact.error is None


def test_sweep_degenerate_cells_match_exact(rng):
    pool = rng.standard_normal((4, 8)).astype(np.float32)
    train = pool[rng.integers(0, 4, size=60)]
    _, test, labels = synth_task(rng, dim=8)
    rows = sweep(train, test, labels,
                 grid=SweepGrid(m_values=(2, 4), c_values=(4,)))
    exact_auc = rows[-1].auc
    for row in rows[:-1]:
        assert row.auc == pytest.approx(exact_auc, abs=1e-12)


def test_sweep_default_grid_row_count(rng):
    train, test, labels = synth_task(rng, n_train=40, n_test=10, dim=128)
    rows = sweep(train, test, labels,
                 grid=SweepGrid(m_values=(1, 2, 4, 8, 16, 32, 64, 128),
                                c_values=tuple(range(1, 9))))
    assert len(rows) == 8 * 8 + 1
    assert sum(r.is_exact for r in rows) == 1
    assert all(r.error is None for r in rows)


def test_sweep_reports_indivisible_cells_nonfatally(rng):
    train, test, labels = synth_task(rng, dim=16)
    rows = sweep(train, test, labels, grid=SweepGrid(m_values=(3, 4), c_values=(2,)))
    bad = [r for r in rows if r.error]
    ok = [r for r in rows if r.error is None and not r.is_exact]
    assert len(bad) == 1 and bad[0].m == 3 and bad[0].auc is None
    assert len(ok) == 1 and ok[0].m == 4


def test_sweep_deterministic_aucs(rng):
    train, test, labels = synth_task(rng)
    grid = SweepGrid(m_values=(2, 4), c_values=(2, 3))
    a = sweep(train, test, labels, grid=grid, seeds=(5,))
    b = sweep(train, test, labels, grid=grid, seeds=(5,))
    assert [r.auc for r in a] == [r.auc for r in b]


def test_sweep_requires_seed(rng):
    train, test, labels = synth_task(rng)
    with pytest.raises(ValueError, match="seed"):
        sweep(train, test, labels, grid=SweepGrid(m_values=(2,), c_values=(2,)),
              seeds=())
