"""Gibbs sampler for the directed model.

Likelihood: each ordered pair (i, j), i != j, carries a latent count
x_ij ~ Poisson(sum_k phi[i, k] theta[j, k]) observed through
y = 1(x > 0).  Source loadings phi get the attribute shape prior with a
beta-distributed per-factor scale q_k; destination scores theta are
Dirichlet-normalized per factor column, which fixes the exposure of
every phi[i, k] at exactly 1 and gives the clean negative-binomial
marginal x[i, ., k] ~ NB(g[i, k], q_k) the attribute updates rely on.
"""

import time

import numpy as np

from narm import kernels
from narm.attribute_prior import AttributePrior
from narm.data import AttributeMatrix, SparseBinaryMatrix
from narm.distributions import as_generator, sample_beta, sample_gamma, sample_ztp

__all__ = ["AsymModel"]

RATE_FLOOR = 1e-300


class AsymModel:
    kind = "asym"

    def __init__(self, n_nodes, K, F=None, hierarchy=None, mu0=1.0,
                 a0=1.0, c0=1.0, eps=0.5, attributes_enabled=True,
                 printed_crt_index=False):
        self.n_nodes = n_nodes
        self.K = K
        if F is None:
            F = AttributeMatrix.empty(n_nodes)
        self.a0 = a0
        self.c0 = c0
        self.eps = eps
        self.prior = AttributePrior(F, K, mu0=mu0, hierarchy=hierarchy,
                                    enabled=attributes_enabled,
                                    printed_crt_index=printed_crt_index)
        self.Phi = np.ones((n_nodes, K))
        self.Theta = np.full((n_nodes, K), 1.0 / n_nodes)
        self.q = np.full(K, 0.5)
        self.rows = np.empty(0, dtype=np.int64)
        self.cols = np.empty(0, dtype=np.int64)
        self.src = np.zeros((n_nodes, K), dtype=np.int64)
        self.dst = np.zeros((n_nodes, K), dtype=np.int64)
        self.diag = np.zeros((n_nodes, K), dtype=np.int64)
        self.totals = np.empty(0, dtype=np.int64)
        self.touched_pairs = 0
        self.floored_rates = 0
        self.timings = {}

    # -- setup ----------------------------------------------------------

    def set_train(self, pairs):
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            raise ValueError("self-loops are not modeled")
        self.rows = pairs[:, 0].copy()
        self.cols = pairs[:, 1].copy()

    def init_from_prior(self, rng):
        rng_gen = as_generator(rng)
        self.prior.resample_from_prior(rng)
        self.q = sample_beta(np.full(self.K, self.c0 * self.eps),
                             np.full(self.K, self.c0 * (1.0 - self.eps)), rng)
        self.Phi = sample_gamma(self.prior.G, (1.0 - self.q) / self.q, rng)
        gam = np.maximum(rng_gen.gamma(np.full((self.n_nodes, self.K),
                                               self.a0)), 1e-300)
        self.Theta = gam / gam.sum(axis=0)
        return self

    # -- likelihood pieces ----------------------------------------------

    def pair_rates(self, pairs_i, pairs_j):
        rates = np.einsum("ek,ek->e", self.Phi[pairs_i], self.Theta[pairs_j])
        low = rates < RATE_FLOOR
        if np.any(low):
            self.floored_rates += int(low.sum())
            rates = np.maximum(rates, RATE_FLOOR)
        return rates

    def link_probability(self, pairs):
        """P(y = 1) = 1 - exp(-sum_k phi[i, k] theta[j, k])."""
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            raise ValueError("link probability undefined for self-pairs")
        return -np.expm1(-self.pair_rates(pairs[:, 0], pairs[:, 1]))

    def train_loglik(self):
        if self.rows.size == 0:
            return 0.0
        pos = self.pair_rates(self.rows, self.cols)
        total = float(np.sum(self.Phi * (1.0 - self.Theta)))
        return float(np.sum(np.log(-np.expm1(-pos))) - (total - pos.sum()))

    # -- Gibbs steps ------------------------------------------------------

    def sample_counts(self, rng, collect_cells=False):
        """Latent counts for the positive links plus the diagonal.

        Self-pairs carry latent Poisson counts but no observation, so
        their conditional is the prior Poisson(phi[i, k] theta[i, k]);
        keeping them in the count aggregates makes every node loading's
        exposure exactly sum_j theta[j, k] = 1, which the conjugate q,
        phi, and attribute updates rely on.
        """
        rng = as_generator(rng)
        self.touched_pairs = self.rows.size
        cells = None
        if self.rows.size == 0:
            self.src = np.zeros((self.n_nodes, self.K), dtype=np.int64)
            self.dst = np.zeros((self.n_nodes, self.K), dtype=np.int64)
            self.totals = np.empty(0, dtype=np.int64)
        else:
            rates = self.pair_rates(self.rows, self.cols)
            self.totals = sample_ztp(rates, rng)
            u = rng.random(int(self.totals.sum()))
            if collect_cells:
                self.src, self.dst, cells = kernels.alloc_directed_cells(
                    self.rows, self.cols, self.totals, self.Phi, self.Theta,
                    u)
            else:
                self.src, self.dst = kernels.alloc_directed(
                    self.rows, self.cols, self.totals, self.Phi, self.Theta,
                    u)
        self.diag = rng.poisson(self.Phi * self.Theta).astype(np.int64)
        self.src = self.src + self.diag
        self.dst = self.dst + self.diag
        return cells

    def sample_q(self, rng):
        xk = self.src.sum(axis=0)
        self.q = sample_beta(self.c0 * self.eps + xk,
                             self.c0 * (1.0 - self.eps)
                             + self.prior.G.sum(axis=0), rng)

    def sample_phi(self, rng):
        # unit destination exposure: posterior rate (1-q)/q + 1 = 1/q
        self.Phi = sample_gamma(self.prior.G + self.src, 1.0 / self.q, rng)

    def sample_theta(self, rng):
        rng = as_generator(rng)
        gam = np.maximum(rng.gamma(self.a0 + self.dst), 1e-300)
        self.Theta = gam / gam.sum(axis=0)

    def sweep(self, rng, collect_cells=False):
        t0 = time.perf_counter()
        cells = self.sample_counts(rng, collect_cells=collect_cells)
        t1 = time.perf_counter()
        nu = np.broadcast_to(-np.log1p(-self.q),
                             (self.n_nodes, self.K)).copy()
        self.prior.update(self.src, nu, rng)
        t2 = time.perf_counter()
        self.sample_q(rng)
        self.sample_phi(rng)
        t3 = time.perf_counter()
        self.sample_theta(rng)
        t4 = time.perf_counter()
        self.timings = {"counts": t1 - t0, "attributes": t2 - t1,
                        "phi": t3 - t2, "theta": t4 - t3}
        return cells

    # -- generation -------------------------------------------------------

    def draw_network(self, rng):
        """Forward-sample a directed adjacency from the current state.

        The diagonal is drawn too (it is part of the latent count
        model) but only off-diagonal positives become links.
        """
        rng = as_generator(rng)
        rate = self.Phi @ self.Theta.T
        np.fill_diagonal(rate, 0.0)
        x = rng.poisson(rate)
        rows, cols = np.nonzero(x)
        rows = rows.astype(np.int64)
        cols = cols.astype(np.int64)
        totals = x[rows, cols].astype(np.int64)
        u = rng.random(int(totals.sum()))
        src, _ = kernels.alloc_directed(rows, cols, totals, self.Phi,
                                        self.Theta, u)
        src = src + rng.poisson(self.Phi * self.Theta).astype(np.int64)
        net = SparseBinaryMatrix.from_pairs(
            list(zip(rows.tolist(), cols.tolist())),
            self.n_nodes, self.n_nodes, directed=True)
        return net, src

    def simulate(self, rng):
        self.init_from_prior(rng)
        net, src = self.draw_network(rng)
        self.src = src
        return net

    # -- serialization ----------------------------------------------------

    def blocks(self):
        out = {"Phi": self.Phi, "Theta": self.Theta, "q": self.q}
        out.update(self.prior.blocks())
        return out

    def meta(self):
        return {"N": self.n_nodes, "K": self.K, "L": self.prior.F.n_attrs,
                "mu0": self.prior.mu0, "a0": self.a0, "c0": self.c0,
                "eps": self.eps}

    def load_blocks(self, blocks):
        self.Phi = np.atleast_2d(blocks["Phi"]).astype(float)
        self.Theta = np.atleast_2d(blocks["Theta"]).astype(float)
        self.q = np.asarray(blocks["q"], dtype=float).ravel()
        self.prior.load_blocks(blocks)

    def state_finite(self):
        return all(np.all(np.isfinite(v)) for v in
                   (self.Phi, self.Theta, self.q,
                    self.prior.H, self.prior.b, self.prior.G))
