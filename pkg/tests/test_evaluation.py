"""Ranking metrics against brute-force oracles, plus the MCMC driver."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from narm.data import AttributeMatrix, SplitSpec, make_split
from narm.distributions import RngStream
from narm.evaluation import (NumericalError, PredictionAccumulator, auc_pr,
                             auc_roc, build_model, evaluate_run, run_mcmc)
from narm.sym import SymModel


def auc_roc_oracle(scores, labels):
    """All pos/neg comparisons, ties half, no rank shortcuts."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else (0.5 if p == n else 0.0)
    return total / (len(pos) * len(neg))


def auc_pr_oracle(scores, labels):
    """Threshold enumeration at every distinct score, from scratch."""
    n_pos = sum(labels)
    area = 0.0
    prev_recall = 0.0
    for thresh in sorted(set(scores), reverse=True):
        taken = [y for s, y in zip(scores, labels) if s >= thresh]
        precision = sum(taken) / len(taken)
        recall = sum(taken) / n_pos
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


def test_auc_roc_worked_example():
    # 3 of 4 pos/neg comparisons won: 0.75
    scores = [0.9, 0.4, 0.8, 0.3]
    labels = [1, 1, 0, 0]
    assert auc_roc(scores, labels) == pytest.approx(0.75)
    assert auc_roc_oracle(scores, labels) == pytest.approx(0.75)


def test_auc_roc_all_tied_is_half():
    scores = [0.5] * 6
    labels = [1, 0, 1, 0, 1, 0]
    assert auc_roc(scores, labels) == pytest.approx(0.5)


def test_auc_roc_perfect_and_inverted():
    scores = [3.0, 2.0, 1.0, 0.5]
    assert auc_roc(scores, [1, 1, 0, 0]) == pytest.approx(1.0)
    assert auc_roc(scores, [0, 0, 1, 1]) == pytest.approx(0.0)


def test_auc_pr_single_positive_at_rank_r():
    # one positive ranked below m distinct negatives: area = 1 / (m + 1)
    scores = [0.9, 0.8, 0.7, 0.1]
    labels = [0, 0, 0, 1]
    assert auc_pr(scores, labels) == pytest.approx(0.25)
    assert auc_pr_oracle(scores, labels) == pytest.approx(0.25)


def test_auc_pr_perfect():
    assert auc_pr([0.9, 0.8, 0.2], [1, 1, 0]) == pytest.approx(1.0)


def test_metrics_reject_degenerate_labels():
    with pytest.raises(ValueError):
        auc_roc([0.1, 0.2], [1, 1])
    with pytest.raises(ValueError):
        auc_pr([0.1, 0.2], [0, 0])


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]),
                          st.integers(0, 1)), min_size=2, max_size=12))
def test_metrics_match_oracles(data):
    scores = [s for s, _ in data]
    labels = [y for _, y in data]
    if 0 < sum(labels) < len(labels):
        assert auc_roc(scores, labels) == pytest.approx(
            auc_roc_oracle(scores, labels), abs=1e-12)
    if sum(labels) > 0:
        assert auc_pr(scores, labels) == pytest.approx(
            auc_pr_oracle(scores, labels), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 100).map(lambda v: v / 100),
                min_size=4, max_size=20),
       st.data())
def test_auc_roc_invariant_under_monotone_transform(scores, data):
    labels = data.draw(st.lists(st.integers(0, 1), min_size=len(scores),
                                max_size=len(scores)))
    if not 0 < sum(labels) < len(labels):
        return
    base = auc_roc(scores, labels)
    squashed = auc_roc([3 * s + 1 for s in scores], labels)
    assert squashed == pytest.approx(base, abs=1e-12)
    flipped = auc_roc([-s for s in scores], labels)
    assert flipped == pytest.approx(1.0 - base, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.permutations(list(range(8))))
def test_auc_is_permutation_invariant(order):
    scores = [0.9, 0.1, 0.8, 0.3, 0.7, 0.2, 0.6, 0.4]
    labels = [1, 0, 1, 0, 0, 1, 1, 0]
    base_roc = auc_roc(scores, labels)
    base_pr = auc_pr(scores, labels)
    s2 = [scores[i] for i in order]
    l2 = [labels[i] for i in order]
    assert auc_roc(s2, l2) == pytest.approx(base_roc, abs=1e-12)
    assert auc_pr(s2, l2) == pytest.approx(base_pr, abs=1e-12)


# -- MCMC driver -------------------------------------------------------------

def test_accumulator_means():
    acc = PredictionAccumulator(np.array([[0, 1], [1, 2]]))
    acc.add(np.array([0.2, 0.6]))
    acc.add(np.array([0.4, 0.8]))
    np.testing.assert_allclose(acc.mean(), [0.3, 0.7])
    with pytest.raises(ValueError):
        PredictionAccumulator(np.array([[0, 1]])).mean()


def _toy_eval_set(seed=0, n=30, n_links=80):
    gen = np.random.default_rng(seed)
    pairs = set()
    while len(pairs) < n_links:
        i, j = (int(v) for v in gen.integers(0, n, 2))
        if i < j:
            pairs.add((i, j))
    from narm.data import SparseBinaryMatrix

    net = SparseBinaryMatrix.from_pairs(sorted(pairs), n, n, directed=False)
    return net, make_split(net, SplitSpec("by_links", 0.8, seed))


def test_run_mcmc_trace_and_acc():
    net, es = _toy_eval_set(1)
    model = build_model("sym", 30, 3)
    acc, trace = run_mcmc(model, es.train_positive_pairs(), sweeps=10,
                          burn_in=4, rng=RngStream(2),
                          test_pairs=es.test_pairs)
    assert acc.n_samples == 6
    assert len(trace) == 10
    assert all(np.isfinite(rec["train_loglik"]) for rec in trace)
    with pytest.raises(ValueError):
        run_mcmc(model, es.train_positive_pairs(), 5, 5, RngStream(0))


def test_run_mcmc_raises_on_nan_state():
    net, es = _toy_eval_set(2)
    model = build_model("sym", 30, 3)

    poison = {"done": False}

    def cb(sweep, mdl):
        if not poison["done"]:
            mdl.Phi[0, 0] = np.nan
            poison["done"] = True

    # poison after sweep 0 completes; the guard fires on the next sweep
    model2 = build_model("sym", 30, 3)
    original_sweep = model2.sweep

    def bad_sweep(rng, **kw):
        out = original_sweep(rng, **kw)
        model2.Phi[0, 0] = np.nan
        return out

    model2.sweep = bad_sweep
    with pytest.raises(NumericalError):
        run_mcmc(model2, es.train_positive_pairs(), 5, 1, RngStream(3))


def test_evaluate_run_end_to_end():
    net, es = _toy_eval_set(3)
    F = AttributeMatrix.from_pairs([(i, i % 2) for i in range(30)], 30, 2)
    result = evaluate_run("sym", es, RngStream(4), F=F, sweeps=20,
                          burn_in=10, K=3)
    assert 0.0 <= result["auc_roc"] <= 1.0
    assert 0.0 <= result["auc_pr"] <= 1.0
    assert result["scores"].shape == (es.test_pairs.shape[0],)


def test_build_model_rejects_unknown_kind():
    with pytest.raises(ValueError):
        build_model("bogus", 5, 2)
