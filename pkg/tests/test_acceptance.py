"""Acceptance suite: one test per release criterion.

Each test prints a single summary line (visible with -s or -rA) and
asserts the criterion at its stated tolerance.  The heavier checks
(joint-consistency chains, planted-data reproductions) take minutes;
everything here is deterministic given the fixed seeds.
"""

import os
import time

import numpy as np
import pytest
from scipy import stats

from narm import kernels
from narm.asym import AsymModel
from narm.attribute_prior import compute_g
from narm.data import (AttributeMatrix, SparseBinaryMatrix, SplitSpec,
                       make_split)
from narm.distributions import (RngStream, sample_beta, sample_crt,
                                sample_dirichlet, sample_gamma, sample_ztp)
from narm.evaluation import auc_pr, auc_roc, evaluate_run
from narm.sym import SymModel

from geweke_util import geweke_z_scores
from test_distributions import _crt_pmf_table, _ztp_pmf
from test_evaluation import auc_pr_oracle, auc_roc_oracle


def _report(num, detail):
    print(f"criterion {num}: PASS ({detail})")


# -- 1: distribution primitives ----------------------------------------------

def test_criterion_1_distribution_suite():
    """Moment and pmf agreement for every sampling primitive, under 1 min."""
    t0 = time.time()
    n = 10**5
    rng = RngStream(101)

    def within_4se(draws, mean, var):
        return abs(draws.mean() - mean) < 4 * np.sqrt(var / draws.size)

    for shape, rate in [(2.5, 1.0), (0.3, 4.0), (0.01, 2.0)]:
        d = sample_gamma(np.full(n, shape), rate, rng)
        assert within_4se(d, shape / rate, shape / rate**2), (shape, rate)
    a, b = 2.0, 5.0
    d = sample_beta(np.full(n, a), np.full(n, b), rng)
    assert within_4se(d, a / (a + b), a * b / ((a + b) ** 2 * (a + b + 1)))
    alphas = np.array([1.0, 2.0, 3.0])
    dir_draws = np.array([sample_dirichlet(alphas, rng)
                          for _ in range(20000)])
    s = alphas.sum()
    for k in range(3):
        assert within_4se(dir_draws[:, k], alphas[k] / s,
                          alphas[k] * (s - alphas[k]) / (s**2 * (s + 1)))

    rng = RngStream(102)
    for lam in (0.5, 2.0):
        d = sample_ztp(np.full(n, lam), rng)
        top = int(np.quantile(d, 0.999)) + 1
        observed = np.bincount(np.minimum(d, top), minlength=top + 1)[1:]
        pmf = [_ztp_pmf(lam, v) for v in range(1, top)]
        expected = np.array(pmf + [1.0 - sum(pmf)]) * n
        keep = expected >= 5
        chi2 = np.sum((observed[keep] - expected[keep]) ** 2 / expected[keep])
        assert stats.chi2.sf(chi2, keep.sum() - 1) > 0.01, lam

    # CRT against the exact Stirling-number pmf for every n <= 8
    rng = RngStream(103)
    for cn in range(1, 9):
        for g in (0.5, 1.0, 2.0):
            pmf = _crt_pmf_table(cn, g)
            np.testing.assert_allclose(pmf.sum(), 1.0, atol=1e-12)
            draws = np.array([sample_crt(cn, g, rng) for _ in range(20000)])
            observed = np.bincount(draws, minlength=cn + 1)
            expected = pmf * draws.size
            keep = expected >= 5
            if keep.sum() < 2:
                assert np.array_equal(observed[keep],
                                      expected[keep].astype(int))
                continue
            chi2 = np.sum((observed[keep] - expected[keep]) ** 2
                          / expected[keep])
            assert stats.chi2.sf(chi2, keep.sum() - 1) > 0.01, (cn, g)

    elapsed = time.time() - t0
    assert elapsed < 60.0
    _report(1, f"moments/pmf/CRT all pass in {elapsed:.0f}s")


# -- 2: Geweke joint consistency ----------------------------------------------

def test_criterion_2_geweke_joint_consistency():
    """Forward vs Gibbs-chain prior moments agree within 4 SE, both models.

    Toy hyperparameters keep the prior predictive light-tailed so the
    forward chain stays cheap; the comparison itself is unaffected.
    """
    t0 = time.time()
    F = AttributeMatrix.from_pairs([(i, i % 2) for i in range(6)], 6, 2)
    z_asym = geweke_z_scores(AsymModel(6, 2, F=F, c0=4.0), 50000, seed=100)
    z_sym = geweke_z_scores(SymModel(6, 2, F=F, e0=2.0, f0=2.0), 50000,
                            seed=200)
    elapsed = time.time() - t0
    assert np.max(np.abs(z_asym)) <= 4.0, z_asym
    assert np.max(np.abs(z_sym)) <= 4.0, z_sym
    assert elapsed < 1200.0
    _report(2, f"max |z| asym {np.max(np.abs(z_asym)):.2f}, "
               f"sym {np.max(np.abs(z_sym)):.2f} in {elapsed:.0f}s")


# -- 3: cache and conservation invariants --------------------------------------

def test_criterion_3_cache_and_conservation_invariants():
    """1000 random sweeps: shape cache 1e-8, allocations conserve, Theta sums 1."""
    F = AttributeMatrix.from_pairs(
        [(i, l) for i in range(20) for l in range(3) if (i + l) % 3 == 0],
        20, 3)

    sym = SymModel(20, 3, F=F)
    rng = RngStream(31)
    net = sym.simulate(rng)
    sym.set_train(np.column_stack([net.rows, net.cols]))
    sym.init_from_prior(rng)
    for _ in range(500):
        cells = sym.sweep(rng, collect_cells=True)
        direct = compute_g(sym.prior.H, sym.prior.b, F)
        np.testing.assert_allclose(sym.prior.G, np.maximum(direct, 1e-300),
                                   rtol=1e-8)
        if cells is not None:
            assert np.array_equal(cells.sum(axis=(1, 2)), sym.totals)
            assert cells.sum() == sym.X.sum() == sym.m.sum() // 2

    asym = AsymModel(20, 3, F=F)
    rng = RngStream(32)
    net = asym.simulate(rng)
    asym.set_train(np.column_stack([net.rows, net.cols]))
    asym.init_from_prior(rng)
    for _ in range(500):
        cells = asym.sweep(rng, collect_cells=True)
        direct = compute_g(asym.prior.H, asym.prior.b, F)
        np.testing.assert_allclose(asym.prior.G, np.maximum(direct, 1e-300),
                                   rtol=1e-8)
        np.testing.assert_allclose(asym.Theta.sum(axis=0), 1.0, atol=1e-10)
        if cells is not None:
            assert np.array_equal(cells.sum(axis=1), asym.totals)
            off_diag = asym.src.sum() - asym.diag.sum()
            assert cells.sum() == off_diag

    _report(3, "1000 sweeps: cache 1e-8, counts conserved, Theta sums 1e-10")


# -- 4: sparsity of the count step ---------------------------------------------

def test_criterion_4_count_step_sparsity():
    """N=2000, |E|=6000: the count step touches |E| pairs, storage is O(EK)."""
    n, n_edges, k = 2000, 6000, 8
    gen = np.random.default_rng(41)
    pairs = set()
    while len(pairs) < n_edges:
        i, j = (int(v) for v in gen.integers(0, n, 2))
        if i < j:
            pairs.add((i, j))
    model = SymModel(n, k)
    model.set_train(np.array(sorted(pairs)))
    rng = RngStream(42)
    model.init_from_prior(rng)
    kernels.warmup()

    import tracemalloc
    tracemalloc.start()
    model.sweep(rng)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()

    assert model.touched_pairs == n_edges
    assert model.totals.size == n_edges
    assert model.m.shape == (n, k)
    assert model.X.shape == (k, k)
    # far below the 32 MB an N x N float64 adjacency would need
    dense_bytes = n * n * 8
    assert peak < dense_bytes / 4, peak
    _report(4, f"touched {model.touched_pairs} pairs, "
               f"sweep peak {peak / 1e6:.1f} MB vs dense {dense_bytes / 1e6:.0f} MB")


# -- 5: complexity scaling -------------------------------------------------------

def _sweep_time(model, rng, n_sweeps=30, phase=None):
    """Per-sweep cost from a controlled state with unit pair rates.

    The free-running chain on unstructured data can wander into modes
    with many latent events per link, which would measure the posterior
    mode rather than the per-link cost, so the state is reset before
    every timed sweep.  Minimum over reps is robust to scheduler noise
    at millisecond scales.
    """
    model.Phi = np.full((model.n_nodes, model.K),
                        1.0 / np.sqrt(model.K))
    model.Lambda = np.eye(model.K)
    saved = {k: np.array(v, dtype=float, copy=True)
             for k, v in model.blocks().items()}
    model.sweep(rng)
    times = []
    for _ in range(n_sweeps):
        model.load_blocks(saved)
        t0 = time.perf_counter()
        model.sweep(rng)
        dt = time.perf_counter() - t0
        times.append(model.timings[phase] if phase else dt)
    return float(np.min(times))


def _er_pairs(n, n_edges, gen):
    pairs = set()
    while len(pairs) < n_edges:
        i, j = (int(v) for v in gen.integers(0, n, 2))
        if i < j:
            pairs.add((i, j))
    return np.array(sorted(pairs))


def test_criterion_5_complexity_scaling():
    """Doubling |E| (or L at fixed per-node density) costs < 2.5x per sweep."""
    t0 = time.time()
    kernels.warmup()
    gen = np.random.default_rng(51)

    edge_times = []
    for n_edges in (1500, 3000, 6000):
        model = SymModel(1000, 8)
        model.set_train(_er_pairs(1000, n_edges, gen))
        rng = RngStream(52)
        model.init_from_prior(rng)
        edge_times.append(_sweep_time(model, rng))
    edge_ratios = [edge_times[i + 1] / edge_times[i] for i in range(2)]
    assert max(edge_ratios) < 2.5, edge_times

    attr_times = []
    n, active = 400, 20
    for n_attrs in (50, 100, 200):
        fpairs = [(i, int(l)) for i in range(n)
                  for l in gen.choice(n_attrs, size=active, replace=False)]
        F = AttributeMatrix.from_pairs(fpairs, n, n_attrs)
        model = SymModel(n, 8, F=F)
        model.set_train(_er_pairs(n, 1200, gen))
        rng = RngStream(53)
        model.init_from_prior(rng)
        attr_times.append(_sweep_time(model, rng, phase="attributes"))
    attr_ratios = [attr_times[i + 1] / attr_times[i] for i in range(2)]
    assert max(attr_ratios) < 2.5, attr_times

    elapsed = time.time() - t0
    assert elapsed < 600.0
    _report(5, f"edge ratios {[f'{r:.2f}' for r in edge_ratios]}, "
               f"attr ratios {[f'{r:.2f}' for r in attr_ratios]} "
               f"in {elapsed:.0f}s")


# -- 6: attribute benefit grows as training shrinks ------------------------------

def _planted_sym(seed, n=100, blocks=4):
    gen = np.random.default_rng(seed)
    grp = np.arange(n) % blocks
    pairs = []
    for i in range(n):
        for j in range(i + 1, n):
            p = 0.25 if grp[i] == grp[j] else 0.02
            if gen.random() < p:
                pairs.append((i, j))
    net = SparseBinaryMatrix.from_pairs(pairs, n, n, directed=False)
    F = AttributeMatrix.from_pairs([(i, int(grp[i])) for i in range(n)],
                                   n, blocks)
    return net, F


def test_criterion_6_attribute_gap_grows_with_scarcity():
    """Attributes-on beats attributes-off by >= 0.05 AUC at 20% training,
    and the advantage shrinks when training data are plentiful."""
    t0 = time.time()
    means = {}
    for frac in (0.2, 0.8):
        gaps = []
        for seed in range(5):
            net, F = _planted_sym(seed)
            es = make_split(net, SplitSpec("by_links", frac, seed))
            kw = dict(sweeps=2000, burn_in=1000, K=4)
            r_on = evaluate_run("sym", es, RngStream(seed), F=F, **kw)
            r_off = evaluate_run("sym", es, RngStream(seed), F=F,
                                 attributes_enabled=False, **kw)
            gaps.append(r_on["auc_roc"] - r_off["auc_roc"])
        means[frac] = float(np.mean(gaps))
    elapsed = time.time() - t0
    assert means[0.2] >= 0.05, means
    assert means[0.2] > means[0.8], means
    assert elapsed < 900.0
    _report(6, f"gap at 20% {means[0.2]:+.3f}, at 80% {means[0.8]:+.3f} "
               f"in {elapsed:.0f}s")


# -- 7: hierarchical attribute prior -----------------------------------------------

def _planted_asym(seed, n=100, groups=4, children_per=5):
    gen = np.random.default_rng(seed)
    grp = np.arange(n) % groups
    pairs = [(i, j) for i in range(n) for j in range(n)
             if i != j and gen.random() < (0.20 if grp[i] == grp[j]
                                           else 0.01)]
    net = SparseBinaryMatrix.from_pairs(pairs, n, n, directed=True)
    n_attrs = groups * children_per
    fpairs = [(i, l) for l in range(n_attrs) for i in range(n)
              if gen.random() < (0.6 if grp[i] == l // children_per
                                 else 0.05)]
    F = AttributeMatrix.from_pairs(fpairs, n, n_attrs)
    hier = AttributeMatrix.from_pairs(
        [(l, l // children_per) for l in range(n_attrs)], n_attrs, groups)
    return net, F, hier


def test_criterion_7_hierarchy_on_noisy_children():
    """With noisy child attributes of informative parents, the hierarchical
    prior matches the flat one and clearly beats attributes-off."""
    t0 = time.time()
    res = {"hier": [], "flat": [], "off": []}
    for seed in range(5):
        net, F, hier = _planted_asym(seed)
        es = make_split(net, SplitSpec("by_links", 0.3, seed))
        kw = dict(sweeps=1500, burn_in=750, K=8)
        res["hier"].append(evaluate_run("asym", es, RngStream(seed), F=F,
                                        hierarchy=hier, **kw)["auc_roc"])
        res["flat"].append(evaluate_run("asym", es, RngStream(seed), F=F,
                                        **kw)["auc_roc"])
        res["off"].append(evaluate_run("asym", es, RngStream(seed), F=F,
                                       attributes_enabled=False,
                                       **kw)["auc_roc"])
    m = {k: float(np.mean(v)) for k, v in res.items()}
    elapsed = time.time() - t0
    assert m["hier"] >= m["flat"] - 0.01, m
    assert m["hier"] >= m["off"] + 0.03, m
    _report(7, f"hier {m['hier']:.3f}, flat {m['flat']:.3f}, "
               f"off {m['off']:.3f} in {elapsed:.0f}s")


# -- 8: ranking metric oracles -------------------------------------------------------

def test_criterion_8_metric_oracle_equivalence():
    """auc_roc/auc_pr match brute-force oracles on 1000 random instances."""
    gen = np.random.default_rng(81)
    levels = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    checked = 0
    while checked < 1000:
        size = int(gen.integers(2, 13))
        scores = list(levels[gen.integers(0, levels.size, size)])
        labels = list(gen.integers(0, 2, size))
        if sum(labels) == 0:
            continue
        if 0 < sum(labels) < size:
            assert auc_roc(scores, labels) == pytest.approx(
                auc_roc_oracle(scores, labels), abs=1e-12)
        assert auc_pr(scores, labels) == pytest.approx(
            auc_pr_oracle(scores, labels), abs=1e-12)
        checked += 1
    _report(8, "1000 instances match both oracles to 1e-12")


# -- 9: real-data check (optional) ------------------------------------------------------

@pytest.mark.skipif("NARM_LAZEGA_EDGES" not in os.environ,
                    reason="set NARM_LAZEGA_EDGES to an edge list to enable")
def test_criterion_9_lazega_auc():
    """Lazega co-work network: mean AUC-ROC above 0.65 at 80% training."""
    raw = np.loadtxt(os.environ["NARM_LAZEGA_EDGES"], dtype=np.int64,
                     ndmin=2)[:, :2]
    n = int(raw.max()) + 1
    net = SparseBinaryMatrix.from_pairs(
        [(int(i), int(j)) for i, j in raw if i != j], n, n, directed=False)
    aucs = []
    for seed in range(5):
        es = make_split(net, SplitSpec("by_links", 0.8, seed))
        r = evaluate_run("sym", es, RngStream(seed), sweeps=2000,
                         burn_in=1000, K=30)
        aucs.append(r["auc_roc"])
    mean_auc = float(np.mean(aucs))
    assert mean_auc > 0.65, aucs
    _report(9, f"mean AUC-ROC {mean_auc:.3f} over 5 splits")
