"""Monte Carlo estimates of the expectations on the left-hand sides.

Sample ``k`` of every estimate uses ``SampleKey(seed, k)``, and reductions run
in sample-index order, so results are bit-identical across runs.  Intervals
are 95% normal-approximation intervals for means, delta-method intervals for
``q``-th moment roots and Wilson intervals for proportions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .pqnorm import op_norm_batch
from .profiles import NormPair, VarianceProfile, lr_norm
from .sampling import sample_matrices, sample_weighted_vectors

Z95 = 1.959963984540054
CHUNK = 1000


@dataclass(frozen=True)
class EstimateResult:
    mean: float
    std_err: float
    ci_lo: float
    ci_hi: float
    n_samples: int
    seed: int
    q: float | None = None
    q_moment_root: float | None = None
    q_root_std_err: float | None = None
    values: np.ndarray | None = field(default=None, compare=False, repr=False)

    @property
    def q_ci(self) -> tuple[float, float] | None:
        if self.q_moment_root is None:
            return None
        h = Z95 * self.q_root_std_err
        return self.q_moment_root - h, self.q_moment_root + h


def summarize(values: np.ndarray, seed: int, q: float | None = None, keep: bool = False) -> EstimateResult:
    v = np.asarray(values, dtype=np.float64)
    n = v.size
    if n < 2:
        raise ValueError("need at least two samples")
    mean = float(np.mean(v))
    se = float(np.std(v, ddof=1) / math.sqrt(n))
    qroot = qse = None
    if q is not None and math.isfinite(q):
        top = float(np.max(np.abs(v)))
        if top == 0:
            qroot, qse = 0.0, 0.0
        else:
            w = (np.abs(v) / top) ** q
            mw = float(np.mean(w))
            qroot = top * mw ** (1.0 / q)
            # delta method on x -> x^(1/q) at the mean of v^q
            qse = qroot * float(np.std(w, ddof=1) / math.sqrt(n)) / (q * mw)
    return EstimateResult(mean, se, mean - Z95 * se, mean + Z95 * se, n, seed, q, qroot, qse,
                          v.copy() if keep else None)


def _chunks(N: int):
    for start in range(0, N, CHUNK):
        yield start, min(CHUNK, N - start)


def opnorm_samples(profile: VarianceProfile, pair: NormPair, N: int, seed: int, **opts) -> np.ndarray:
    out = np.empty(N)
    if profile.is_zero():
        out[:] = 0.0
        return out
    for start, count in _chunks(N):
        Ms = sample_matrices(profile, seed, count, start)
        out[start:start + count] = op_norm_batch(Ms, pair, **opts).values
    return out


def estimate_opnorm(profile: VarianceProfile, pair: NormPair, N: int = 2000, seed: int = 0,
                    keep_samples: bool = False, **opts) -> EstimateResult:
    """``E ||G||`` and ``(E ||G||^q)^(1/q)`` from ``N`` seeded realizations."""
    if N < 2:
        raise ValueError("N must be >= 2")
    vals = opnorm_samples(profile, pair, N, seed, **opts)
    return summarize(vals, seed, pair.q, keep_samples)


def estimate_entry_max(profile: VarianceProfile, N: int = 100_000, seed: int = 0,
                       keep_samples: bool = False) -> EstimateResult:
    """``E max_ij |a_ij g_ij|``."""
    if N < 2:
        raise ValueError("N must be >= 2")
    a = profile.a.ravel()
    out = np.empty(N)
    for start, count in _chunks(N):
        X = sample_weighted_vectors(a, seed, count, start)
        out[start:start + count] = np.max(np.abs(X), axis=1)
    return summarize(out, seed, None, keep_samples)


def estimate_weighted_max(a, N: int = 100_000, seed: int = 0) -> EstimateResult:
    """``E max_i |a_i g_i|`` for a weight vector."""
    return estimate_entry_max(VarianceProfile(np.abs(np.atleast_2d(np.asarray(a, dtype=float)))), N, seed)


def estimate_rowmax_qmoment(profile: VarianceProfile, pair: NormPair, N: int = 100_000, seed: int = 0,
                            keep_samples: bool = False) -> EstimateResult:
    """``(E max_i ||X_i||_p^q)^(1/q)`` over the rows ``X_i`` of ``G``."""
    if pair.p_star == 1.0:
        raise ValueError("row moments need p* > 1 (finite p)")
    if N < 2:
        raise ValueError("N must be >= 2")
    out = np.empty(N)
    for start, count in _chunks(N):
        Gs = sample_matrices(profile, seed, count, start)
        out[start:start + count] = np.max(lr_norm(Gs, pair.p, axis=2), axis=1)
    return summarize(out, seed, pair.q, keep_samples)


def wilson_interval(k: np.ndarray, n: int, z: float = Z95):
    """Wilson score interval ``(center, half_width)`` for ``k`` successes in ``n``."""
    phat = np.asarray(k, dtype=np.float64) / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z / denom * np.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n))
    return center, half


@dataclass(frozen=True, eq=False)
class TailEstimate:
    t_grid: np.ndarray
    frequencies: np.ndarray
    half_widths: np.ndarray
    center: float
    n_samples: int
    seed: int
    degenerate: bool = False


def empirical_tail(a, p: float, N: int = 100_000, seed: int = 0, t_grid=(0.5, 1.0, 1.5, 2.0)) -> TailEstimate:
    """Frequencies of ``| ||X||_p - E||X||_p | > t`` for ``X = (a_j g_j)``.

    Two passes of ``N`` samples each: indices ``0..N-1`` estimate the
    centering ``E||X||_p``, indices ``N..2N-1`` count exceedances.
    """
    if math.isinf(p) or p < 1:
        raise ValueError("empirical_tail needs finite p >= 1")
    t = np.asarray(t_grid, dtype=np.float64)
    if t.size == 0 or np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be positive and strictly increasing")
    a = np.asarray(a, dtype=np.float64).ravel()
    zeros = np.zeros_like(t)
    if not np.any(a):
        return TailEstimate(t, zeros, zeros.copy(), 0.0, N, seed, degenerate=True)

    center_sum = 0.0
    for start, count in _chunks(N):
        center_sum += float(np.sum(lr_norm(sample_weighted_vectors(a, seed, count, start), p, axis=1)))
    center = center_sum / N

    hits = np.zeros(t.size, dtype=np.int64)
    for start, count in _chunks(N):
        dev = np.abs(lr_norm(sample_weighted_vectors(a, seed, count, N + start), p, axis=1) - center)
        hits += np.sum(dev[:, None] > t[None, :], axis=0)
    _, half = wilson_interval(hits, N)
    return TailEstimate(t, hits / N, half, center, N, seed)
