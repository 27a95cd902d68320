"""Deterministic Gaussian quantities.

Moments ``gamma_r = (E|g|^r)^(1/r)``, the exact expectation of
``max_i |a_i g_i|`` by quadrature, the ``sqrt(ln(i+3))`` comparator over the
decreasing rearrangement, the Orlicz function ``M_g`` with its Luxemburg norm,
and the Gaussian concentration tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .profiles import lr_norm

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def _weights(a, *, allow_empty: bool = True) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64).ravel()
    if not allow_empty and a.size == 0:
        raise ValueError("weight vector must be nonempty")
    if not np.all(np.isfinite(a)):
        raise ValueError("weights must be finite")
    return a


def gamma_r(r: float) -> float:
    """L_r norm of a standard Gaussian, ``sqrt(2) (Gamma((r+1)/2) / Gamma(1/2))^(1/r)``."""
    if not (r >= 1 and math.isfinite(r)):
        raise ValueError(f"gamma_r needs finite r >= 1, got {r}")
    log_moment = r / 2 * math.log(2.0) + math.lgamma((r + 1) / 2) - math.lgamma(0.5)
    return math.exp(log_moment / r)


def _log_abs_erf(x: np.ndarray) -> np.ndarray:
    # log(erf x) = log1p(-erfc x); accurate both near 0 and for large x
    with np.errstate(divide="ignore"):
        return np.log1p(-special.erfc(x))


def expected_max_abs(a) -> float:
    """``E max_i |a_i g_i|`` by the tail-integral identity.

    Integrates ``1 - prod_i (2 Phi(t/|a_i|) - 1)`` over ``t >= 0``.  The
    product is accumulated as a sum of logs, so long vectors do not
    underflow.
    """
    a = _weights(a, allow_empty=False)
    w = np.abs(a[a != 0])
    if w.size == 0:
        return 0.0
    scale = float(w.max())
    with np.errstate(over="ignore"):
        # work in units of max|a_i|; negligible weights overflow to inf and drop out
        inv = (scale / w) / math.sqrt(2.0)
    t_max = math.sqrt(2.0 * math.log(4.0 * w.size) + 60.0)

    def integrand(t):
        return -math.expm1(float(np.sum(_log_abs_erf(t * inv))))

    # the integrand switches from ~1 to ~0 near sqrt(2 ln count)
    knee = math.sqrt(2.0 * math.log(2.0 * w.size))
    pts = [p for p in (0.5 * knee, knee, 1.5 * knee) if 0 < p < t_max]
    val, _ = integrate.quad(integrand, 0.0, t_max, epsabs=1e-8 / scale, epsrel=1e-12,
                            limit=400, points=pts)
    return scale * val


def decreasing_rearrangement(a) -> np.ndarray:
    a = _weights(a)
    return np.sort(np.abs(a))[::-1]


def maxgaus_comparator(a) -> float:
    """``max_i sqrt(ln(i+3)) a*_i`` with 1-based ``i``."""
    a_star = decreasing_rearrangement(_weights(a, allow_empty=False))
    i = np.arange(1, a_star.size + 1)
    return float(np.max(np.sqrt(np.log(i + 3.0)) * a_star))


_SERIES_X = 8.0


def _bracket_series(x: np.ndarray) -> np.ndarray:
    # 1/x - sqrt(pi) erfcx(x) = sum_k>=1 (-1)^(k+1) (2k-1)!! / (2^k x^(2k+1)), summed for x >= 8
    inv2 = 1.0 / (2.0 * x * x)
    term = inv2 / x
    total = term.copy()
    for k in range(2, 30):
        term = -term * (2 * k - 1) * inv2
        total += term
    return total / math.sqrt(math.pi)


def orlicz_Mg(s):
    """``M_g(s) = sqrt(2/pi) int_0^s exp(-1/(2 t^2)) dt``.

    Evaluated in closed form: substituting ``u = 1/t`` and integrating by
    parts gives ``sqrt(2/pi) s exp(-1/(2 s^2)) - erfc(1/(sqrt(2) s))``.  For
    small ``s`` the two pieces cancel, so the difference is summed from the
    asymptotic series of ``erfcx`` instead.
    """
    s_arr = np.asarray(s, dtype=np.float64)
    if np.any(s_arr < 0) or np.any(np.isnan(s_arr)):
        raise ValueError("M_g is defined for s >= 0")
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        x = 1.0 / (math.sqrt(2.0) * s_arr)
        # erfcx(x) = exp(x^2) erfc(x): factor the common exp(-x^2)
        direct = SQRT_2_OVER_PI * s_arr - special.erfcx(x)
        xs = np.where(x >= _SERIES_X, x, _SERIES_X)
        bracket = np.where(x >= _SERIES_X, _bracket_series(xs), direct)
        out = np.exp(-x * x) * bracket
    out = np.where(s_arr > 0, out, 0.0)
    out = np.where(np.isinf(s_arr), np.inf, out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class OrliczEval:
    value: float
    residual: float
    bisection_steps: int


def orlicz_norm(a, tol: float = 1e-10, max_steps: int = 200) -> OrliczEval:
    """Luxemburg norm ``inf{rho > 0 : sum_i M_g(|a_i|/rho) <= 1}``.

    Bisection on ``log rho``; ``sum M_g(|a|/rho)`` is strictly decreasing in
    ``rho`` so the bracket always shrinks onto the root.
    """
    a = np.abs(_weights(a))
    a = a[a > 0]
    if a.size == 0:
        return OrliczEval(0.0, 0.0, 0)
    top = float(a.max())

    def excess(rho):
        return float(np.sum(orlicz_Mg(a / rho))) - 1.0

    lo, hi = math.log(top * 1e-3), math.log(top * 1e3)
    while excess(math.exp(lo)) <= 0:
        lo -= math.log(1e3)
    while excess(math.exp(hi)) > 0:
        hi += math.log(1e3)
    mid = 0.5 * (lo + hi)
    res = excess(math.exp(mid))
    steps = 0
    while steps < max_steps and abs(res) > tol:
        if res > 0:
            lo = mid
        else:
            hi = mid
        mid = 0.5 * (lo + hi)
        res = excess(math.exp(mid))
        steps += 1
        if hi - lo < 1e-16:
            break
    return OrliczEval(math.exp(mid), abs(res), steps)


def concentration_tail(a, p: float, t: float) -> float:
    """``2 exp(-t^2 / (2 max_j |a_j|^2))``; the bound does not depend on ``p``."""
    a = _weights(a)
    if not t > 0:
        raise ValueError("t must be positive")
    sigma = float(np.max(np.abs(a))) if a.size else 0.0
    if sigma == 0:
        raise ValueError("concentration tail undefined for an all-zero weight vector")
    return 2.0 * math.exp(-(t * t) / (2.0 * sigma * sigma))


def expected_lp_upper(a, p: float) -> float:
    """``gamma_p ||a||_p``, an upper bound for ``E ||(a_j g_j)||_p``."""
    if math.isinf(p):
        raise ValueError("p = inf has no moment bound here; use expected_max_abs")
    a = _weights(a)
    return gamma_r(p) * float(lr_norm(a, p))
