"""Random-variate primitives used by the Gibbs samplers.

All gamma laws use the shape-rate convention: Gamma(a, rate=b) has mean
a / b.  Every function takes an explicit ``numpy.random.Generator`` (or
:class:`RngStream`); nothing here holds hidden state.
"""

import numpy as np

__all__ = [
    "RngStream",
    "as_generator",
    "sample_gamma",
    "sample_beta",
    "sample_dirichlet",
    "sample_ztp",
    "sample_crt",
    "allocate_multinomial",
]

# Below this shape the stock gamma sampler starts returning exact zeros;
# switch to the log-space boost x = Ga(a+1) * U^(1/a).
TINY_SHAPE = 0.05
GAMMA_FLOOR = 1e-300


class RngStream:
    """A reproducible random stream keyed by (seed, stream_id).

    Two streams built from the same pair produce identical sequences;
    distinct stream_ids give statistically independent streams.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.generator = np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        )

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def as_generator(rng):
    """Accept either an RngStream or a numpy Generator."""
    return rng.generator if isinstance(rng, RngStream) else rng


_gen = as_generator


def sample_gamma(shape, rate, rng):
    """Draw Gamma(shape, rate); works element-wise on arrays.

    Tiny shapes (< 0.05) are drawn via the boosted representation
    Ga(a+1) * U^(1/a) evaluated in log space, then floored at 1e-300 so
    downstream products never hit exact zero.
    """
    rng = _gen(rng)
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if np.any(shape <= 0) or np.any(rate <= 0):
        raise ValueError("gamma shape and rate must be positive")
    if shape.ndim == 0 and rate.ndim == 0:
        if shape >= TINY_SHAPE:
            return max(rng.gamma(shape) / rate, GAMMA_FLOOR)
        boost = rng.gamma(shape + 1.0)
        logx = np.log(max(boost, GAMMA_FLOOR)) + np.log(rng.random()) / shape
        return max(np.exp(logx) / rate, GAMMA_FLOOR)
    shape, rate = np.broadcast_arrays(shape, rate)
    out = rng.gamma(shape)
    tiny = shape < TINY_SHAPE
    if np.any(tiny):
        boost = rng.gamma(shape[tiny] + 1.0)
        logx = (np.log(np.maximum(boost, GAMMA_FLOOR))
                + np.log(rng.random(tiny.sum())) / shape[tiny])
        out[tiny] = np.exp(logx)
    return np.maximum(out / rate, GAMMA_FLOOR)


def sample_beta(a, b, rng):
    """Draw Beta(a, b); mean a / (a + b)."""
    rng = _gen(rng)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("beta parameters must be positive")
    out = rng.beta(a, b)
    # keep q strictly inside (0, 1) for the downstream log terms
    return np.clip(out, 1e-16, 1.0 - 1e-16)


def sample_dirichlet(alphas, rng):
    """Draw a probability vector from Dirichlet(alphas)."""
    rng = _gen(rng)
    alphas = np.asarray(alphas, dtype=float)
    if np.any(alphas <= 0):
        raise ValueError("dirichlet concentrations must be positive")
    g = np.maximum(rng.gamma(alphas), GAMMA_FLOOR)
    return g / g.sum()


def sample_ztp(lam, rng):
    """Zero-truncated Poisson draw(s): Poisson(lam) conditioned on >= 1.

    Rejection from the untruncated Poisson for lam >= 1; inverse-cdf on
    the truncated law for lam < 1 (where rejection would mostly spin and
    the naive cdf walk is short).
    """
    rng = _gen(rng)
    lam_arr = np.asarray(lam, dtype=float)
    scalar = lam_arr.ndim == 0
    lam_arr = np.atleast_1d(lam_arr)
    if np.any(lam_arr <= 0):
        raise ValueError("ztp rate must be positive")
    out = np.empty(lam_arr.shape, dtype=np.int64)

    big = lam_arr >= 1.0
    if np.any(big):
        vals = rng.poisson(lam_arr[big])
        retry = vals < 1
        while np.any(retry):
            vals[retry] = rng.poisson(lam_arr[big][retry])
            retry = vals < 1
        out[big] = vals

    small = ~big
    if np.any(small):
        lam_s = lam_arr[small]
        u = rng.random(lam_s.shape)
        # P(x = n) = lam^n / (n! * expm1(lam)), n >= 1
        pmf = lam_s / np.expm1(lam_s)
        cdf = pmf.copy()
        vals = np.ones(lam_s.shape, dtype=np.int64)
        n = 1
        active = u > cdf
        while np.any(active):
            n += 1
            pmf = pmf * lam_s / n
            cdf += pmf
            vals[active] += 1
            active &= u > cdf
        out[small] = vals

    return int(out[0]) if scalar else out


def sample_crt(n, concentration, rng, printed_index=False):
    """Chinese-restaurant table count for n customers.

    t = sum of Bernoulli(g / (g + i' - 1)) for i' = 1..n: the first
    customer always opens a table, so t is 0 iff n is 0.  With
    ``printed_index=True`` the Bernoulli argument becomes g / (g + i'),
    kept only for A/B comparison against the off-by-one variant.
    """
    rng = _gen(rng)
    n = int(n)
    g = float(concentration)
    if n < 0 or g <= 0:
        raise ValueError("crt needs n >= 0 and concentration > 0")
    if n == 0:
        return 0
    shift = 1 if printed_index else 0
    u = rng.random(n)
    steps = np.arange(n, dtype=float) + shift
    return int(np.count_nonzero(u * (g + steps) < g))


def allocate_multinomial(total, weights, rng):
    """Split a count over cells: Multinomial(total, weights / sum)."""
    rng = _gen(rng)
    weights = np.asarray(weights, dtype=float)
    if total < 0 or np.any(weights < 0):
        raise ValueError("total and weights must be non-negative")
    if total == 0:
        return np.zeros(weights.shape, dtype=np.int64)
    s = weights.sum()
    if s <= 0:
        raise ValueError("cannot allocate a positive total over zero weights")
    return rng.multinomial(int(total), weights / s).astype(np.int64)
