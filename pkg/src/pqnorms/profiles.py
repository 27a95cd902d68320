"""Variance profiles ``(a_ij)`` and exponent pairs.

A profile stores the entrywise *standard deviations* ``a_ij`` of the random
matrix ``G = (a_ij * g_ij)``, not the variances ``a_ij**2``.  Every formula in
this package is written in terms of ``a_ij``.

Matrices are ``m x n`` and act from ``R^n`` to ``R^m``: rows ``X_i`` live in
``R^n`` and are indexed by ``i < m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ProfileError(ValueError):
    """Invalid profile data or profile file."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


def lr_norm(x: np.ndarray, r: float, axis=None) -> np.ndarray:
    """l_r norm along ``axis``; ``r = inf`` is the exact max of ``|x|``.

    Scales by the max magnitude before powering, so large ``r`` is safe.
    """
    x = np.abs(np.asarray(x, dtype=np.float64))
    if x.size == 0 and axis is None:
        return 0.0
    top = np.max(x, axis=axis, keepdims=True)
    if math.isinf(r):
        return np.squeeze(top, axis=axis) if axis is not None else top.item()
    safe = np.where(top > 0, top, 1.0)
    s = np.sum((x / safe) ** r, axis=axis, keepdims=True) ** (1.0 / r)
    out = np.where(top > 0, top * s, 0.0)
    return np.squeeze(out, axis=axis) if axis is not None else out.item()


@dataclass(frozen=True)
class NormPair:
    """Exponent pair ``(p_star, q)`` with ``1 <= p_star <= 2 <= q <= inf``.

    ``p`` is the conjugate of ``p_star``; it is ``inf`` exactly when
    ``p_star == 1``.
    """

    p_star: float
    q: float

    def __post_init__(self):
        ps, q = float(self.p_star), float(self.q)
        if math.isnan(ps) or math.isnan(q):
            raise ValueError("exponents must not be NaN")
        if not (1.0 <= ps <= 2.0):
            raise ValueError(f"p_star must lie in [1, 2], got {ps}")
        if not (2.0 <= q <= math.inf):
            raise ValueError(f"q must lie in [2, inf], got {q}")
        object.__setattr__(self, "p_star", ps)
        object.__setattr__(self, "q", q)

    @property
    def p(self) -> float:
        if self.p_star == 1.0:
            return math.inf
        return self.p_star / (self.p_star - 1.0)

    @property
    def in_theorem_range(self) -> bool:
        """``1 < p_star <= 2 <= q < inf``."""
        return self.p_star > 1.0 and not math.isinf(self.q)

    def __str__(self):
        return f"({self.p_star:g},{self.q:g})"


@dataclass(frozen=True, eq=False)
class VarianceProfile:
    """Nonnegative ``m x n`` array of standard-deviation scales."""

    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ProfileError(f"profile must be a nonempty 2-D array, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ProfileError("profile entries must be finite")
        if np.any(a < 0):
            raise ProfileError("profile entries must be nonnegative")
        object.__setattr__(self, "a", _frozen(a))

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def n(self) -> int:
        return self.a.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.a.shape

    def transpose(self) -> VarianceProfile:
        return VarianceProfile(self.a.T)

    def scaled(self, c: float) -> VarianceProfile:
        return VarianceProfile(abs(c) * self.a)

    def is_zero(self) -> bool:
        return not np.any(self.a)

    def __eq__(self, other):
        if not isinstance(other, VarianceProfile):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.a, other.a)

    def __hash__(self):
        return hash((self.shape, self.a.tobytes()))


def _check_nonneg_vector(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size == 0:
        raise ProfileError(f"{name} must be nonempty")
    if not np.all(np.isfinite(v)):
        raise ProfileError(f"{name} must be finite")
    if np.any(v < 0):
        raise ProfileError(f"{name} must be nonnegative")
    return v


def make_iid(m: int, n: int, s: float) -> VarianceProfile:
    """Constant profile ``a_ij = s`` (the i.i.d. setting)."""
    if int(m) != m or int(n) != n or m < 1 or n < 1:
        raise ProfileError(f"dimensions must be positive integers, got {m}x{n}")
    if not math.isfinite(s) or s < 0:
        raise ProfileError(f"scale must be finite and nonnegative, got {s}")
    return VarianceProfile(np.full((int(m), int(n)), float(s)))


def make_tensor(x, y) -> VarianceProfile:
    """Rank-one profile ``a_ij = x_j * y_i``; ``x`` indexes columns, ``y`` rows."""
    x = _check_nonneg_vector(x, "x")
    y = _check_nonneg_vector(y, "y")
    return VarianceProfile(np.outer(y, x))


def make_diagonal(d) -> VarianceProfile:
    d = _check_nonneg_vector(d, "d")
    return VarianceProfile(np.diag(d))


def row_norm_max(profile: VarianceProfile, r: float) -> float:
    """``max_i ||(a_ij)_j||_r``."""
    if not r >= 1:
        raise ValueError(f"r must be >= 1, got {r}")
    return float(np.max(lr_norm(profile.a, r, axis=1)))


def col_norm_max(profile: VarianceProfile, r: float) -> float:
    """``max_j ||(a_ij)_i||_r``."""
    if not r >= 1:
        raise ValueError(f"r must be >= 1, got {r}")
    return float(np.max(lr_norm(profile.a, r, axis=0)))


def bvh_mixed_norm(profile: VarianceProfile) -> float:
    """Largest Euclidean norm over the rows and columns."""
    return max(row_norm_max(profile, 2), col_norm_max(profile, 2))


def read_matrix_text(path, *, allow_negative: bool = False) -> np.ndarray:
    """Parse the ``m n`` header + ``m`` rows text format.

    Errors carry the 1-based line number of the offending line.
    """
    lines = Path(path).read_text().splitlines()
    body = [(k + 1, ln) for k, ln in enumerate(lines) if ln.strip() and not ln.lstrip().startswith("#")]
    if not body:
        raise ProfileError(f"{path}: empty file")
    lineno, header = body[0]
    try:
        m, n = (int(tok) for tok in header.split())
    except ValueError:
        raise ProfileError(f"{path}:{lineno}: header must be 'm n'") from None
    if m < 1 or n < 1:
        raise ProfileError(f"{path}:{lineno}: dimensions must be positive")
    rows = body[1:]
    if len(rows) != m:
        raise ProfileError(f"{path}: expected {m} rows, found {len(rows)}")
    out = np.empty((m, n))
    for i, (lineno, ln) in enumerate(rows):
        toks = ln.split()
        if len(toks) != n:
            raise ProfileError(f"{path}:{lineno}: expected {n} values, found {len(toks)}")
        try:
            vals = [float(t) for t in toks]
        except ValueError:
            raise ProfileError(f"{path}:{lineno}: unparseable number") from None
        for v in vals:
            if not math.isfinite(v):
                raise ProfileError(f"{path}:{lineno}: non-finite value {v}")
            if v < 0 and not allow_negative:
                raise ProfileError(f"{path}:{lineno}: negative value {v}")
        out[i] = vals
    return out


def read_profile(path) -> VarianceProfile:
    return VarianceProfile(read_matrix_text(path))


def write_matrix_text(path, a: np.ndarray) -> None:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    rows = [f"{a.shape[0]} {a.shape[1]}"]
    rows += [" ".join(f"{v:.17g}" for v in row) for row in a]
    Path(path).write_text("\n".join(rows) + "\n")
