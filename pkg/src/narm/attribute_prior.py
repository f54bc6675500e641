"""Attribute-driven gamma-shape prior shared by both samplers.

Each node i and factor k gets a gamma shape
``g[i, k] = b[k] * prod_{l active for i} H[l, k]``: a log-linear
combination of the node's binary attributes.  Inference augments the
collapsed negative-binomial likelihood of the per-node latent counts
with Chinese-restaurant table counts ``T``, which makes the conditional
of every loading ``H[l, k]`` (and the bias ``b[k]``) gamma again.

The model supplies a per-node, per-factor exposure ``nu[i, k]``: the
log-rate term left after integrating the node loading out of its count
likelihood (``-log(1 - q_k)`` for the directed model,
``log(1 + s[i, k] / c[i])`` for the symmetric one).

An optional second attribute level replaces the prior shape of
``H[l, k]`` with a product of parent loadings ``Delta[m, k]`` and
mirrors the same table augmentation one level up.
"""

import numpy as np

from narm import kernels
from narm.data import AttributeMatrix
from narm.distributions import as_generator, sample_gamma

__all__ = ["AttributePrior", "compute_g"]

G_FLOOR = 1e-300
RATE_CEIL = 1e300
RECOMPUTE_EVERY = 100


def _finite_rate(rate):
    """Clamp overflowed posterior rates (floored loadings can give inf)."""
    return np.minimum(np.nan_to_num(rate, posinf=RATE_CEIL), RATE_CEIL)


def compute_g(H, b, F):
    """Direct evaluation of the shape cache from loadings and bias."""
    indptr, indices = F.csr()
    return kernels.compute_shapes(indptr, indices, np.ascontiguousarray(H),
                                  np.ascontiguousarray(b))


class AttributePrior:
    """State and Gibbs updates for the attribute shape prior.

    With ``enabled=False`` the attribute machinery is bypassed and the
    shape prior degenerates to the per-factor bias b[k] alone.
    """

    def __init__(self, F: AttributeMatrix, K, mu0=1.0, hierarchy=None,
                 enabled=True, printed_crt_index=False):
        if hierarchy is not None and hierarchy.n_nodes != F.n_attrs:
            raise ValueError(
                f"hierarchy covers {hierarchy.n_nodes} attributes, "
                f"attribute matrix has {F.n_attrs}")
        self.F = F
        self.K = K
        self.mu0 = float(mu0)
        self.hierarchy = hierarchy if enabled else None
        self.enabled = enabled
        self.printed_crt_index = printed_crt_index
        self._crt_shift = 1 if printed_crt_index else 0
        if enabled:
            self._indptr, self._indices = F.csr()
        else:
            self._indptr = np.zeros(F.n_nodes + 1, dtype=np.int64)
            self._indices = np.empty(0, dtype=np.int64)
        self.T = np.zeros((F.n_nodes, K), dtype=np.int64)
        self.touched_nodes = 0
        self.floored_shapes = 0
        self._updates = 0
        self.H = np.ones((F.n_attrs, K))
        self.b = np.ones(K)
        self.Delta = (np.ones((hierarchy.n_attrs, K))
                      if self.hierarchy is not None else None)
        self.MuLK = np.full((F.n_attrs, K), self.mu0)
        self.G = self.recompute_cache()

    # -- cache ---------------------------------------------------------

    def recompute_cache(self):
        """Full O(nnz(F) K) evaluation of the shape cache."""
        self.G = kernels.compute_shapes(self._indptr, self._indices,
                                        self.H, self.b)
        self._floor_cache()
        return self.G

    def _floor_cache(self):
        low = self.G < G_FLOOR
        if np.any(low):
            self.floored_shapes += int(low.sum())
            self.G[low] = G_FLOOR

    def _recompute_mu(self):
        if self.hierarchy is None:
            return
        self.MuLK = compute_g(self.Delta, np.ones(self.K), self.hierarchy)

    # -- forward draws -------------------------------------------------

    def resample_from_prior(self, rng):
        """Draw H, b (and Delta) from their priors; refresh the cache."""
        mu0 = self.mu0
        if self.hierarchy is not None:
            self.Delta = sample_gamma(np.full_like(self.Delta, mu0), mu0, rng)
            self._recompute_mu()
        self.b = sample_gamma(np.full(self.K, mu0), mu0, rng)
        if self.enabled:
            self.H = sample_gamma(self.MuLK, mu0, rng)
        self.T.fill(0)
        return self.recompute_cache()

    # -- Gibbs updates -------------------------------------------------

    def sample_tables(self, counts, rng):
        """CRT table counts for the per-node, per-factor latent totals."""
        rng = as_generator(rng)
        counts = np.ascontiguousarray(counts, dtype=np.int64)
        u = rng.random(int(counts.sum()))
        flat = kernels.crt_tables(counts.ravel(), self.G.ravel(), u,
                                  self._crt_shift)
        self.T = flat.reshape(counts.shape)
        return self.T

    def update(self, counts, nu, rng):
        """One full pass: tables, then every loading, bias, hierarchy."""
        rng = as_generator(rng)
        self.sample_tables(counts, rng)
        mu0 = self.mu0
        if self.enabled:
            for l in range(self.F.n_attrs):
                idx = self.F.col_index[l]
                self.touched_nodes += idx.size
                if idx.size:
                    shape = self.MuLK[l] + self.T[idx].sum(axis=0)
                    with np.errstate(over="ignore"):
                        rate = _finite_rate(
                            mu0 + (nu[idx]
                                   * (self.G[idx] / self.H[l])).sum(axis=0))
                else:
                    shape = self.MuLK[l]
                    rate = np.full(self.K, mu0)
                new = sample_gamma(shape, rate, rng)
                if idx.size:
                    with np.errstate(over="ignore"):
                        self.G[idx] *= new / self.H[l]
                self.H[l] = new
        shape = mu0 + self.T.sum(axis=0)
        with np.errstate(over="ignore"):
            rate = _finite_rate(mu0 + (nu * (self.G / self.b)).sum(axis=0))
        new_b = sample_gamma(shape, rate, rng)
        self.G *= new_b / self.b
        self.b = new_b
        if self.hierarchy is not None:
            self._update_hierarchy(nu, rng)
        self._floor_cache()
        self._updates += 1
        if self._updates % RECOMPUTE_EVERY == 0:
            self.recompute_cache()

    def _update_hierarchy(self, nu, rng):
        """Second-level pass: parent tables, Delta, then refresh H."""
        rng = as_generator(rng)
        mu0 = self.mu0
        L = self.F.n_attrs
        table_sums = np.zeros((L, self.K), dtype=np.int64)
        exposures = np.zeros((L, self.K))
        for l in range(L):
            idx = self.F.col_index[l]
            if idx.size:
                table_sums[l] = self.T[idx].sum(axis=0)
                with np.errstate(over="ignore"):
                    exposures[l] = _finite_rate(
                        (nu[idx] * (self.G[idx] / self.H[l])).sum(axis=0))
        u = rng.random(int(table_sums.sum()))
        tprime = kernels.crt_tables(
            table_sums.ravel(), np.ascontiguousarray(self.MuLK).ravel(), u,
            self._crt_shift).reshape(L, self.K)
        log_term = np.log1p(exposures / mu0)
        for m in range(self.hierarchy.n_attrs):
            idx = self.hierarchy.col_index[m]
            if idx.size:
                shape = mu0 + tprime[idx].sum(axis=0)
                with np.errstate(over="ignore"):
                    rate = _finite_rate(
                        mu0 + (log_term[idx]
                               * (self.MuLK[idx] / self.Delta[m])).sum(axis=0))
            else:
                shape = np.full(self.K, mu0)
                rate = np.full(self.K, mu0)
            new = sample_gamma(shape, rate, rng)
            if idx.size:
                with np.errstate(over="ignore"):
                    self.MuLK[idx] *= new / self.Delta[m]
            self.Delta[m] = new
        # H was marginalized above; redraw it under the new prior shapes
        # so downstream steps condition on a fresh value.
        for l in range(L):
            idx = self.F.col_index[l]
            if idx.size:
                with np.errstate(over="ignore"):
                    exposure = _finite_rate(
                        (nu[idx] * (self.G[idx] / self.H[l])).sum(axis=0))
                shape = self.MuLK[l] + self.T[idx].sum(axis=0)
            else:
                exposure = np.zeros(self.K)
                shape = self.MuLK[l]
            new = sample_gamma(shape, mu0 + exposure, rng)
            if idx.size:
                with np.errstate(over="ignore"):
                    self.G[idx] *= new / self.H[l]
            self.H[l] = new

    # -- serialization -------------------------------------------------

    def blocks(self):
        out = {"H": self.H, "b": self.b}
        if self.Delta is not None:
            out["Delta"] = self.Delta
        return out

    def load_blocks(self, blocks):
        self.H = np.atleast_2d(blocks["H"]).astype(float)
        self.b = np.asarray(blocks["b"], dtype=float).ravel()
        if "Delta" in blocks:
            self.Delta = np.atleast_2d(blocks["Delta"]).astype(float)
            self._recompute_mu()
        self.recompute_cache()
