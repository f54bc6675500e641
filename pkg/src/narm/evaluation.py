"""Posterior-averaged link prediction and ranking metrics."""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from narm.asym import AsymModel
from narm.sym import SymModel

__all__ = [
    "NumericalError",
    "PredictionAccumulator",
    "accumulate",
    "auc_roc",
    "auc_pr",
    "build_model",
    "run_mcmc",
    "evaluate_run",
]


class NumericalError(RuntimeError):
    """Non-finite value detected in the sampler state."""


@dataclass
class PredictionAccumulator:
    """Running posterior mean of link probabilities for fixed test pairs."""

    pairs: np.ndarray
    sum_prob: np.ndarray = field(default=None)
    n_samples: int = 0

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        if self.sum_prob is None:
            self.sum_prob = np.zeros(self.pairs.shape[0])

    def add(self, probs):
        self.sum_prob += probs
        self.n_samples += 1

    def mean(self):
        if self.n_samples == 0:
            raise ValueError("no retained samples accumulated")
        return self.sum_prob / self.n_samples


def accumulate(acc, model):
    """Add the current sweep's link probabilities to the accumulator."""
    acc.add(model.link_probability(acc.pairs))
    return acc


def auc_roc(scores, labels):
    """Probability that a random positive outranks a random negative.

    Mann-Whitney form; ties count one half.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auc_roc needs both positive and negative labels")
    ranks = rankdata(scores)
    return float((ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2)
                 / (n_pos * n_neg))


def auc_pr(scores, labels):
    """Area under the precision-recall curve.

    Convention: thresholds at each achieved score level (descending,
    tied scores enter together); the precision attained at a level is
    held over the recall gained there, i.e.
    ``sum_t (R_t - R_{t-1}) * P_t``.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    if n_pos == 0:
        raise ValueError("auc_pr needs at least one positive label")
    order = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    tp = np.cumsum(sorted_labels == 1)
    n_seen = np.arange(1, labels.size + 1)
    # last index of each distinct score group
    group_end = np.nonzero(np.append(np.diff(sorted_scores) != 0, True))[0]
    precision = tp[group_end] / n_seen[group_end]
    recall = tp[group_end] / n_pos
    prev = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev) * precision))


def build_model(model_kind, n_nodes, K, F=None, hierarchy=None, **kwargs):
    if model_kind == "sym":
        return SymModel(n_nodes, K, F=F, hierarchy=hierarchy, **kwargs)
    if model_kind == "asym":
        return AsymModel(n_nodes, K, F=F, hierarchy=hierarchy, **kwargs)
    raise ValueError(f"unknown model kind {model_kind!r}")


def run_mcmc(model, train_pairs, sweeps, burn_in, rng, test_pairs=None,
             keep_trace=True, callback=None):
    """Burn-in plus retained sweeps; accumulates test-pair probabilities.

    Returns (accumulator or None, trace records).  Raises
    NumericalError if the state goes non-finite.
    """
    if not 0 <= burn_in < sweeps:
        raise ValueError("need 0 <= burn_in < sweeps")
    model.set_train(train_pairs)
    model.init_from_prior(rng)
    acc = None
    if test_pairs is not None and len(test_pairs) > 0:
        acc = PredictionAccumulator(test_pairs)
    trace = []
    for sweep in range(sweeps):
        t0 = time.perf_counter()
        model.sweep(rng)
        if not model.state_finite():
            raise NumericalError(f"non-finite state after sweep {sweep}")
        if keep_trace:
            trace.append({
                "sweep": sweep,
                "train_loglik": model.train_loglik(),
                "scale_sum": float(model.Lambda.sum()
                                   if model.kind == "sym"
                                   else model.q.sum()),
                "wall_time": time.perf_counter() - t0,
            })
        if sweep >= burn_in and acc is not None:
            accumulate(acc, model)
        if callback is not None:
            callback(sweep, model)
    return acc, trace


def evaluate_run(model_kind, eval_set, rng, F=None, hierarchy=None,
                 sweeps=1500, burn_in=None, K=50, keep_trace=True, **kwargs):
    """Split -> fit -> score, one fold.  Returns metric dict with trace."""
    if burn_in is None:
        burn_in = sweeps // 2
    model = build_model(model_kind, eval_set.n_nodes, K, F=F,
                        hierarchy=hierarchy, **kwargs)
    acc, trace = run_mcmc(model, eval_set.train_positive_pairs(), sweeps,
                          burn_in, rng, test_pairs=eval_set.test_pairs,
                          keep_trace=keep_trace)
    out = {"trace": trace, "model": model}
    if acc is not None:
        scores = acc.mean()
        out["auc_roc"] = auc_roc(scores, eval_set.test_y)
        out["auc_pr"] = auc_pr(scores, eval_set.test_y)
        out["scores"] = scores
    return out
