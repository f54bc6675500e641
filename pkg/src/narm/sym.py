"""Gibbs sampler for the undirected model.

Likelihood: each unordered node pair (i < j) carries a latent count
x_ij ~ Poisson(phi_i' Lambda phi_j), observed through y = 1(x > 0).
Node loadings have the attribute shape prior, the block matrix Lambda
follows a (truncated) hierarchical relational gamma construction with
per-factor weights r.

Zero pairs force x = 0, so the count step touches only the positive
training links; per-sweep work and memory scale with the number of
training links, never with N^2.
"""

import time

import numpy as np

from narm import kernels
from narm.attribute_prior import AttributePrior
from narm.data import AttributeMatrix, SparseBinaryMatrix
from narm.distributions import as_generator, sample_gamma, sample_ztp

__all__ = ["SymModel"]

RATE_FLOOR = 1e-300


class SymModel:
    kind = "sym"

    def __init__(self, n_nodes, K, F=None, hierarchy=None, mu0=1.0,
                 gamma0=1.0, eps=1.0, c0=1.0, a0=1.0, e0=1.0, f0=1.0,
                 attributes_enabled=True, resample_extra_hypers=False,
                 printed_crt_index=False):
        self.n_nodes = n_nodes
        self.K = K
        if F is None:
            F = AttributeMatrix.empty(n_nodes)
        self.gamma0 = gamma0
        self.eps = eps
        self.c0 = c0
        self.a0 = a0
        self.e0 = e0
        self.f0 = f0
        self.resample_extra_hypers = resample_extra_hypers
        self.prior = AttributePrior(F, K, mu0=mu0, hierarchy=hierarchy,
                                    enabled=attributes_enabled,
                                    printed_crt_index=printed_crt_index)
        self.Phi = np.ones((n_nodes, K))
        self.Lambda = np.ones((K, K))
        self.r = np.ones(K)
        self.c = np.ones(n_nodes)
        self.rows = np.empty(0, dtype=np.int64)
        self.cols = np.empty(0, dtype=np.int64)
        self.m = np.zeros((n_nodes, K), dtype=np.int64)
        self.X = np.zeros((K, K), dtype=np.int64)
        self.totals = np.empty(0, dtype=np.int64)
        self.touched_pairs = 0
        self.floored_rates = 0
        self.timings = {}

    # -- setup ----------------------------------------------------------

    def set_train(self, pairs):
        """Fix the positive training links (array of (i, j), i != j)."""
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        lo = np.minimum(pairs[:, 0], pairs[:, 1])
        hi = np.maximum(pairs[:, 0], pairs[:, 1])
        if np.any(lo == hi):
            raise ValueError("self-loops are not modeled")
        self.rows, self.cols = lo.copy(), hi.copy()

    def init_from_prior(self, rng):
        self.prior.resample_from_prior(rng)
        # a0 carries a Ga(e0, f0) hyperprior and is resampled each sweep,
        # so the forward draw has to come from the same law
        self.a0 = sample_gamma(self.e0, self.f0, rng)
        self.c = sample_gamma(np.full(self.n_nodes, self.e0), self.f0, rng)
        self.r = sample_gamma(np.full(self.K, self.gamma0 / self.K),
                              self.c0, rng)
        self.Lambda = sample_gamma(self._lambda_shape(), self.a0, rng)
        self.Lambda = np.triu(self.Lambda) + np.triu(self.Lambda, 1).T
        self.Phi = sample_gamma(self.prior.G, self.c[:, None], rng)
        return self

    def _lambda_shape(self):
        s = np.outer(self.r, self.r)
        np.fill_diagonal(s, self.eps * self.r)
        # products of floored r values can underflow to exact zero
        return np.maximum(s, RATE_FLOOR)

    # -- likelihood pieces ----------------------------------------------

    def pair_rates(self, pairs_i, pairs_j):
        rates = np.einsum("ek,kl,el->e", self.Phi[pairs_i], self.Lambda,
                          self.Phi[pairs_j])
        low = rates < RATE_FLOOR
        if np.any(low):
            self.floored_rates += int(low.sum())
            rates = np.maximum(rates, RATE_FLOOR)
        return rates

    def link_probability(self, pairs):
        """P(y = 1) = 1 - exp(-phi_i' Lambda phi_j) for each (i, j)."""
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            raise ValueError("link probability undefined for self-pairs")
        return -np.expm1(-self.pair_rates(pairs[:, 0], pairs[:, 1]))

    def train_loglik(self):
        """Bernoulli-Poisson log likelihood of the training matrix."""
        if self.rows.size == 0:
            return 0.0
        pos = self.pair_rates(self.rows, self.cols)
        a = self.Phi.sum(axis=0)
        total = 0.5 * (a @ self.Lambda @ a
                       - np.sum(self.Phi * (self.Phi @ self.Lambda)))
        return float(np.sum(np.log(-np.expm1(-pos))) - (total - pos.sum()))

    # -- Gibbs steps ------------------------------------------------------

    def sample_counts(self, rng, collect_cells=False):
        """Resample latent totals and factor-cell allocations per link."""
        rng = as_generator(rng)
        self.touched_pairs = self.rows.size
        if self.rows.size == 0:
            self.m = np.zeros((self.n_nodes, self.K), dtype=np.int64)
            self.X = np.zeros((self.K, self.K), dtype=np.int64)
            self.totals = np.empty(0, dtype=np.int64)
            return None
        rates = self.pair_rates(self.rows, self.cols)
        self.totals = sample_ztp(rates, rng)
        u = rng.random(int(self.totals.sum()))
        if collect_cells:
            self.m, self.X, cells = kernels.alloc_pairs_cells(
                self.rows, self.cols, self.totals, self.Phi, self.Lambda, u)
            return cells
        self.m, self.X = kernels.alloc_pairs(
            self.rows, self.cols, self.totals, self.Phi, self.Lambda, u)
        return None

    def exposure(self):
        """Aggregate rate s[i, k] each node loading multiplies into."""
        a = self.Phi.sum(axis=0)
        return (a[None, :] - self.Phi) @ self.Lambda

    def sample_phi(self, rng):
        gam = sample_gamma(self.prior.G + self.m, 1.0, rng)
        a = self.Phi.sum(axis=0)
        self.Phi = kernels.seq_phi_update(
            gam, self.c, np.ascontiguousarray(self.Lambda),
            np.ascontiguousarray(self.Phi), a)

    def _pair_exposures(self):
        a = self.Phi.sum(axis=0)
        m2 = self.Phi.T @ self.Phi
        p = np.outer(a, a) - m2
        np.fill_diagonal(p, 0.5 * (a ** 2 - np.diag(m2)))
        return p

    def sample_r(self, rng):
        """Factor weights, with the block matrix collapsed to its NB form."""
        rng = as_generator(rng)
        p = self._pair_exposures()
        xm = self.X + self.X.T
        np.fill_diagonal(xm, np.diag(self.X))
        shape0 = self._lambda_shape()
        iu = np.triu_indices(self.K)
        u = rng.random(int(xm[iu].sum()))
        tab_flat = kernels.crt_tables(
            np.ascontiguousarray(xm[iu]), np.ascontiguousarray(shape0[iu]),
            u, self.prior._crt_shift)
        tables = np.zeros((self.K, self.K), dtype=np.int64)
        tables[iu] = tab_flat
        tables = tables + np.triu(tables, 1).T
        log_p = np.log1p(p / self.a0)
        for k in range(self.K):
            shape = self.gamma0 / self.K + tables[k].sum()
            rate = self.c0 + self.eps * log_p[k, k]
            for k2 in range(self.K):
                if k2 != k:
                    rate += self.r[k2] * log_p[k, k2]
            self.r[k] = sample_gamma(shape, rate, rng)
        return p

    def sample_lambda(self, p, rng):
        xm = self.X + self.X.T
        np.fill_diagonal(xm, np.diag(self.X))
        shape0 = self._lambda_shape()
        lam = sample_gamma(shape0 + xm, self.a0 + p, rng)
        self.Lambda = np.triu(lam) + np.triu(lam, 1).T

    def sample_hypers(self, rng):
        self.c = sample_gamma(self.e0 + self.prior.G.sum(axis=1),
                              self.f0 + self.Phi.sum(axis=1), rng)
        iu = np.triu_indices(self.K)
        shape0 = self._lambda_shape()
        self.a0 = sample_gamma(self.e0 + shape0[iu].sum(),
                               self.f0 + self.Lambda[iu].sum(), rng)
        if self.resample_extra_hypers:
            # only c0 is conjugate given r; gamma0 and eps stay fixed
            self.c0 = sample_gamma(self.e0 + self.gamma0,
                                   self.f0 + self.r.sum(), rng)

    def sweep(self, rng, collect_cells=False):
        """One full Gibbs sweep; returns per-link cells in debug mode."""
        t0 = time.perf_counter()
        cells = self.sample_counts(rng, collect_cells=collect_cells)
        t1 = time.perf_counter()
        nu = np.log1p(self.exposure() / self.c[:, None])
        self.prior.update(self.m, nu, rng)
        t2 = time.perf_counter()
        self.sample_phi(rng)
        t3 = time.perf_counter()
        p = self.sample_r(rng)
        self.sample_lambda(p, rng)
        self.sample_hypers(rng)
        t4 = time.perf_counter()
        self.timings = {"counts": t1 - t0, "attributes": t2 - t1,
                        "phi": t3 - t2, "block": t4 - t3}
        return cells

    # -- generation -------------------------------------------------------

    def draw_network(self, rng):
        """Forward-sample an adjacency matrix from the current state.

        Returns the network plus the per-node, per-factor latent count
        aggregates of the draw (used by correctness harnesses).
        """
        rng = as_generator(rng)
        rate = self.Phi @ self.Lambda @ self.Phi.T
        iu = np.triu_indices(self.n_nodes, 1)
        x = rng.poisson(rate[iu])
        pos = x > 0
        rows = iu[0][pos].astype(np.int64)
        cols = iu[1][pos].astype(np.int64)
        u = rng.random(int(x[pos].sum()))
        m, _ = kernels.alloc_pairs(rows, cols, x[pos].astype(np.int64),
                                   self.Phi, self.Lambda, u)
        net = SparseBinaryMatrix.from_pairs(
            list(zip(rows.tolist(), cols.tolist())),
            self.n_nodes, self.n_nodes, directed=False)
        return net, m

    def simulate(self, rng):
        """Draw the full generative process top-down; returns a network."""
        self.init_from_prior(rng)
        net, m = self.draw_network(rng)
        self.m = m
        return net

    # -- serialization ----------------------------------------------------

    def blocks(self):
        out = {"Phi": self.Phi, "Lambda": self.Lambda, "r": self.r,
               "c": self.c}
        out.update(self.prior.blocks())
        return out

    def meta(self):
        return {"N": self.n_nodes, "K": self.K, "L": self.prior.F.n_attrs,
                "mu0": self.prior.mu0, "gamma0": self.gamma0,
                "eps": self.eps, "c0": self.c0, "a0": self.a0}

    def load_blocks(self, blocks):
        self.Phi = np.atleast_2d(blocks["Phi"]).astype(float)
        self.Lambda = np.atleast_2d(blocks["Lambda"]).astype(float)
        self.r = np.asarray(blocks["r"], dtype=float).ravel()
        self.c = np.asarray(blocks["c"], dtype=float).ravel()
        self.prior.load_blocks(blocks)

    def state_finite(self):
        return all(np.all(np.isfinite(v)) for v in
                   (self.Phi, self.Lambda, self.r, self.c,
                    self.prior.H, self.prior.b, self.prior.G))
