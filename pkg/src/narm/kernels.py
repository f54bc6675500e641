"""Hot inner loops of the Gibbs samplers.

Each kernel has a numba ``@njit`` implementation and a pure-numpy
fallback; :mod:`narm.backend` decides which one is exported.  Kernels
are deterministic: all randomness comes in as pre-drawn uniform
variates, consumed in a fixed order, so the integer count draws are
bit-identical across backends.  The shape-cache product
(:func:`compute_shapes`) may differ between backends at the level of
floating-point associativity only.

Kernel inventory:

* ``crt_tables`` -- table counts for a batch of (customer count,
  concentration) cells, one Bernoulli per customer.
* ``alloc_pairs`` -- per-link latent totals spread over (k1, k2) factor
  cells for the symmetric bilinear model; returns per-node/per-cell
  aggregates only (memory stays O(E + NK + K^2)).
* ``alloc_directed`` -- same for the directed model over k cells.
* ``compute_shapes`` -- gamma shape cache g[i, k] = b[k] * prod of the
  active attributes' loadings.
* ``seq_phi_update`` -- sequential per-row refresh of the symmetric
  node loadings given pre-drawn unit-scale gamma variates.
"""

import numpy as np

from narm.backend import USE_NUMBA

__all__ = [
    "crt_tables",
    "alloc_pairs",
    "alloc_pairs_cells",
    "alloc_directed",
    "alloc_directed_cells",
    "compute_shapes",
    "seq_phi_update",
    "warmup",
]

_PHI_FLOOR = 1e-300


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------

def _crt_tables_np(counts, conc, u, shift):
    out = np.zeros(counts.size, dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        return out
    cell = np.repeat(np.arange(counts.size), counts)
    g = conc[cell]
    offs = np.cumsum(counts) - counts
    step = np.arange(total) - offs[cell]
    hits = u[:total] * (g + step + shift) < g
    out += np.bincount(cell[hits], minlength=counts.size)
    return out


def _alloc_pairs_np(rows, cols, totals, Phi, Lambda, u):
    n, k = Phi.shape
    m = np.zeros((n, k), dtype=np.int64)
    x = np.zeros((k, k), dtype=np.int64)
    kk = k * k
    pos = 0
    for e in range(rows.size):
        t = totals[e]
        if t == 0:
            continue
        i = rows[e]
        j = cols[e]
        cw = np.cumsum(((Phi[i][:, None] * Lambda) * Phi[j][None, :]).ravel())
        idx = np.minimum(
            np.searchsorted(cw, u[pos:pos + t] * cw[-1], side="right"), kk - 1
        )
        pos += t
        k1 = idx // k
        k2 = idx % k
        np.add.at(m, (i, k1), 1)
        np.add.at(m, (j, k2), 1)
        np.add.at(x, (k1, k2), 1)
    return m, x


def _alloc_directed_np(rows, cols, totals, Phi, Theta, u):
    n, k = Phi.shape
    src = np.zeros((n, k), dtype=np.int64)
    dst = np.zeros((n, k), dtype=np.int64)
    pos = 0
    for e in range(rows.size):
        t = totals[e]
        if t == 0:
            continue
        i = rows[e]
        j = cols[e]
        cw = np.cumsum(Phi[i] * Theta[j])
        idx = np.minimum(
            np.searchsorted(cw, u[pos:pos + t] * cw[-1], side="right"), k - 1
        )
        pos += t
        np.add.at(src, (i, idx), 1)
        np.add.at(dst, (j, idx), 1)
    return src, dst


def _compute_shapes_np(indptr, attr_ids, H, b):
    n = indptr.size - 1
    G = np.repeat(b[None, :], n, axis=0)
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            G[i] *= H[attr_ids[p]]
    return G


def _seq_phi_np(gam, c, Lambda, Phi, A):
    n = Phi.shape[0]
    for i in range(n):
        other = A - Phi[i]
        s = Lambda @ other
        new = np.maximum(gam[i] / (c[i] + s), _PHI_FLOOR)
        A += new - Phi[i]
        Phi[i] = new
    return Phi


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if USE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _crt_tables_nb(counts, conc, u, shift):
        out = np.zeros(counts.size, dtype=np.int64)
        pos = 0
        for cidx in range(counts.size):
            g = conc[cidx]
            t = 0
            for i in range(counts[cidx]):
                if u[pos] * (g + i + shift) < g:
                    t += 1
                pos += 1
            out[cidx] = t
        return out

    @njit(cache=True)
    def _alloc_pairs_nb(rows, cols, totals, Phi, Lambda, u):
        n, k = Phi.shape
        kk = k * k
        m = np.zeros((n, k), dtype=np.int64)
        x = np.zeros((k, k), dtype=np.int64)
        cw = np.empty(kk)
        pos = 0
        for e in range(rows.size):
            t = totals[e]
            if t == 0:
                continue
            i = rows[e]
            j = cols[e]
            acc = 0.0
            for k1 in range(k):
                a = Phi[i, k1]
                for k2 in range(k):
                    acc += (a * Lambda[k1, k2]) * Phi[j, k2]
                    cw[k1 * k + k2] = acc
            for _ in range(t):
                target = u[pos] * acc
                pos += 1
                cidx = 0
                while cidx < kk - 1 and cw[cidx] <= target:
                    cidx += 1
                k1 = cidx // k
                k2 = cidx % k
                m[i, k1] += 1
                m[j, k2] += 1
                x[k1, k2] += 1
        return m, x

    @njit(cache=True)
    def _alloc_directed_nb(rows, cols, totals, Phi, Theta, u):
        n, k = Phi.shape
        src = np.zeros((n, k), dtype=np.int64)
        dst = np.zeros((n, k), dtype=np.int64)
        cw = np.empty(k)
        pos = 0
        for e in range(rows.size):
            t = totals[e]
            if t == 0:
                continue
            i = rows[e]
            j = cols[e]
            acc = 0.0
            for kk in range(k):
                acc += Phi[i, kk] * Theta[j, kk]
                cw[kk] = acc
            for _ in range(t):
                target = u[pos] * acc
                pos += 1
                cidx = 0
                while cidx < k - 1 and cw[cidx] <= target:
                    cidx += 1
                src[i, cidx] += 1
                dst[j, cidx] += 1
        return src, dst

    @njit(cache=True)
    def _compute_shapes_nb(indptr, attr_ids, H, b):
        n = indptr.size - 1
        k = b.size
        G = np.empty((n, k))
        for i in range(n):
            for kk in range(k):
                G[i, kk] = b[kk]
            for p in range(indptr[i], indptr[i + 1]):
                l = attr_ids[p]
                for kk in range(k):
                    G[i, kk] *= H[l, kk]
        return G

    @njit(cache=True)
    def _seq_phi_nb(gam, c, Lambda, Phi, A):
        n, k = Phi.shape
        other = np.empty(k)
        for i in range(n):
            for kk in range(k):
                other[kk] = A[kk] - Phi[i, kk]
            for kk in range(k):
                s = 0.0
                for k2 in range(k):
                    s += Lambda[kk, k2] * other[k2]
                new = gam[i, kk] / (c[i] + s)
                if new < _PHI_FLOOR:
                    new = _PHI_FLOOR
                A[kk] += new - Phi[i, kk]
                Phi[i, kk] = new
        return Phi

    crt_tables = _crt_tables_nb
    alloc_pairs = _alloc_pairs_nb
    alloc_directed = _alloc_directed_nb
    compute_shapes = _compute_shapes_nb
    seq_phi_update = _seq_phi_nb
else:
    crt_tables = _crt_tables_np
    alloc_pairs = _alloc_pairs_np
    alloc_directed = _alloc_directed_np
    compute_shapes = _compute_shapes_np
    seq_phi_update = _seq_phi_np


# ---------------------------------------------------------------------------
# debug variants (numpy only; used by invariant tests on small problems)
# ---------------------------------------------------------------------------

def alloc_pairs_cells(rows, cols, totals, Phi, Lambda, u):
    """Like alloc_pairs but also returns the per-link (k1, k2) cell counts."""
    n, k = Phi.shape
    cells = np.zeros((rows.size, k, k), dtype=np.int64)
    kk = k * k
    pos = 0
    for e in range(rows.size):
        t = totals[e]
        if t == 0:
            continue
        i = rows[e]
        j = cols[e]
        cw = np.cumsum(((Phi[i][:, None] * Lambda) * Phi[j][None, :]).ravel())
        idx = np.minimum(
            np.searchsorted(cw, u[pos:pos + t] * cw[-1], side="right"), kk - 1
        )
        pos += t
        np.add.at(cells[e], (idx // k, idx % k), 1)
    m = np.zeros((n, k), dtype=np.int64)
    x = cells.sum(axis=0)
    np.add.at(m, rows, cells.sum(axis=2))
    np.add.at(m, cols, cells.sum(axis=1))
    return m, x, cells


def alloc_directed_cells(rows, cols, totals, Phi, Theta, u):
    """Like alloc_directed but also returns the per-link k cell counts."""
    n, k = Phi.shape
    cells = np.zeros((rows.size, k), dtype=np.int64)
    pos = 0
    for e in range(rows.size):
        t = totals[e]
        if t == 0:
            continue
        cw = np.cumsum(Phi[rows[e]] * Theta[cols[e]])
        idx = np.minimum(
            np.searchsorted(cw, u[pos:pos + t] * cw[-1], side="right"), k - 1
        )
        pos += t
        np.add.at(cells[e], idx, 1)
    src = np.zeros((n, k), dtype=np.int64)
    dst = np.zeros((n, k), dtype=np.int64)
    np.add.at(src, rows, cells)
    np.add.at(dst, cols, cells)
    return src, dst, cells


def warmup():
    """Trigger JIT compilation of every kernel on tiny inputs."""
    rows = np.array([0], dtype=np.int64)
    cols = np.array([1], dtype=np.int64)
    totals = np.array([2], dtype=np.int64)
    phi = np.ones((2, 2))
    lam = np.ones((2, 2))
    u = np.full(4, 0.5)
    crt_tables(totals, np.ones(1), u, 0)
    alloc_pairs(rows, cols, totals, phi, lam, u)
    alloc_directed(rows, cols, totals, phi, lam, u)
    compute_shapes(np.array([0, 1, 2], dtype=np.int64),
                   np.array([0, 0], dtype=np.int64), lam, np.ones(2))
    seq_phi_update(np.ones((2, 2)), np.ones(2), lam, phi.copy(),
                   phi.sum(axis=0))
