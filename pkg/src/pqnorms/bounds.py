"""Right-hand sides of the norm bounds, as term-by-term breakdowns.

Unknown absolute constants are explicit arguments with default 1, so a
harness can report the empirical ratio ``lhs / rhs(C=1)`` as a fitted
constant.  Logarithms are natural throughout.  The convexity constant of
``l_{p*}`` is pinned to ``lambda^-2 = p*(p*-1)/8`` and the type-2 constant of
``l_p`` to ``T_2 = sqrt(p)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .gaussian import expected_max_abs, gamma_r
from .pqnorm import ascend_on_ball
from .profiles import NormPair, VarianceProfile, bvh_mixed_norm, col_norm_max, lr_norm, row_norm_max
from .sampling import DOMAIN_STARTS, KeyedStream

RECOMPUTE_RTOL = 1e-12


def _sum_terms(t, c):
    return sum(t.values())


def _scaled_sum(t, c):
    return c["C"] * sum(t.values())


def _main(t, c):
    return t["prefactor"] * (t["row_term"] + t["emax_term"]) + t["column_term"]


_COMBINE = {
    "lemma32": _sum_terms,
    "conjecture": _sum_terms,
    "chevet": _sum_terms,
    "bvh": _scaled_sum,
    "theorem_main": _main,
}


@dataclass(frozen=True)
class BoundBreakdown:
    name: str
    terms: tuple[tuple[str, float], ...]
    constants: tuple[tuple[str, float], ...] = ()
    total: float = 0.0
    flags: tuple[str, ...] = field(default=())

    def __post_init__(self):
        for label, v in self.terms:
            if not v >= 0:
                raise ValueError(f"{self.name}: term {label} = {v} is negative or NaN")
        again = self.recompute()
        if abs(again - self.total) > RECOMPUTE_RTOL * max(1.0, abs(again)):
            raise ValueError(f"{self.name}: stored total {self.total} != recomputed {again}")

    @classmethod
    def build(cls, name, terms, constants=(), flags=()):
        terms, constants = tuple(terms), tuple(constants)
        total = _COMBINE[name](dict(terms), dict(constants))
        return cls(name, terms, constants, total, tuple(flags))

    def recompute(self) -> float:
        return _COMBINE[self.name](dict(self.terms), dict(self.constants))

    def term(self, label: str) -> float:
        return dict(self.terms)[label]

    def csv_rows(self):
        rows = [(self.name, label, v) for label, v in self.terms]
        rows.append((self.name, "total", self.total))
        return rows

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(["bound_name", "term_label", "value"])
        for name, label, v in self.csv_rows():
            w.writerow([name, label, f"{v:.17g}"])
        return buf.getvalue()


def _require_theorem_pair(pair: NormPair, what: str):
    if pair.p_star == 1.0:
        raise ValueError(f"{what} needs p* > 1")
    if math.isinf(pair.q):
        raise ValueError(f"{what} needs q < inf")


def entry_max_expectation(profile: VarianceProfile) -> float:
    """``E max_ij |a_ij g_ij|`` over all entries, by quadrature."""
    return expected_max_abs(profile.a.ravel())


def sigma_lemma31(profile: VarianceProfile, q: float) -> float:
    """Closed form ``gamma_q m^(-1/q) max_j ||(a_ij)_i||_q``."""
    if math.isinf(q) or q < 2:
        raise ValueError(f"sigma needs 2 <= q < inf, got {q}")
    return gamma_r(q) * profile.m ** (-1.0 / q) * col_norm_max(profile, q)


def sigma_variational(profile: VarianceProfile, q: float, p_star: float, restarts: int = 64,
                      tol: float = 1e-13, max_iter: int = 2000, start_seed: int = 0) -> float:
    """Maximize ``(m^-1 sum_i gamma_q^q (sum_j a_ij^2 y_j^2)^(q/2))^(1/q)`` over ``B_{p*}``.

    ``f(y) = sum_i (sum_j a_ij^2 y_j^2)^(q/2)`` is convex for ``q >= 2``, so
    the same linearization ascent as the power iteration applies.  Starts
    are every ``e_j``, the flat vector and seeded random points.
    """
    NormPair(p_star, q)
    if math.isinf(q):
        raise ValueError("sigma needs q < inf")
    a2 = profile.a ** 2
    m, n = a2.shape
    half = q / 2.0

    def step(Y, idx):
        S = a2 @ (Y[0] * Y[0])  # (m, R)
        # gradient up to the positive factor q: y_j * sum_i a_ij^2 s_i^(q/2-1)
        top = np.max(S, axis=0, keepdims=True)
        Ss = S / np.where(top > 0, top, 1.0)
        Ph = Ss ** (half - 1.0)
        f = top[0] ** half * np.sum(Ph * Ss, axis=0)
        g = Y[0] * (a2.T @ Ph)
        return f[None], g[None]

    starts = [np.eye(n), lr_norm_unit(np.ones((n, 1)), p_star)]
    k = n + 1
    if restarts > k:
        rnd = KeyedStream(start_seed, DOMAIN_STARTS).normals(2 * n + 7, (n, restarts - k))
        starts.append(lr_norm_unit(rnd, p_star))
    Y0 = np.concatenate(starts, axis=1)[None]
    _, f, _, _ = ascend_on_ball(step, Y0, p_star, tol, max_iter)
    best = float(np.max(f))
    return gamma_r(q) * (best / m) ** (1.0 / q)


def lr_norm_unit(Y: np.ndarray, r: float) -> np.ndarray:
    nrm = lr_norm(Y, r, axis=0)
    return Y / np.where(nrm > 0, nrm, 1.0)


def type2_constant(pair: NormPair) -> float:
    return math.sqrt(pair.p)


def convexity_lambda4(pair: NormPair) -> float:
    """``lambda^4`` from ``lambda^-2 = p*(p*-1)/8``."""
    if pair.p_star == 1.0:
        raise ValueError("lambda is undefined at p* = 1")
    return (8.0 / (pair.p_star * (pair.p_star - 1.0))) ** 2


def thm21_B_value(m: float, pair: NormPair, C: float, emax_moment: float) -> float:
    """``C lambda^4 T_2 sqrt(ln m / m) sqrt(emax_moment)`` for a real ``m > 1``."""
    if not m > 1:
        raise ValueError("B needs m >= 2")
    if emax_moment < 0:
        raise ValueError("emax_moment must be nonnegative")
    return C * convexity_lambda4(pair) * type2_constant(pair) * math.sqrt(math.log(m) / m) * math.sqrt(emax_moment)


def thm21_B(profile: VarianceProfile, pair: NormPair, C: float = 1.0, emax_moment: float = 0.0) -> float:
    """``B`` for the rows of ``G``; ``emax_moment`` estimates ``E max_i ||X_i||_p^q``."""
    if profile.m < 2:
        raise ValueError("B needs m >= 2")
    return thm21_B_value(profile.m, pair, C, emax_moment)


def lemma32_rhs(profile: VarianceProfile, pair: NormPair, C: float = 1.0) -> BoundBreakdown:
    _require_theorem_pair(pair, "lemma32_rhs")
    p, q = pair.p, pair.q
    terms = [
        ("row_term", 2.0 * gamma_r(p) * row_norm_max(profile, p)),
        ("emax_term", C * gamma_r(q) * entry_max_expectation(profile)),
    ]
    return BoundBreakdown.build("lemma32", terms, [("C", C), ("gamma_p", gamma_r(p)), ("gamma_q", gamma_r(q))])


def theorem_main_rhs(profile: VarianceProfile, pair: NormPair, C: float = 1.0) -> BoundBreakdown:
    """Main bound on ``(E ||G||^q)^(1/q)`` for ``G : l_{p*}^n -> l_q^m``."""
    _require_theorem_pair(pair, "theorem_main_rhs")
    if profile.m < 2:
        raise ValueError("theorem_main_rhs needs m >= 2 (ln m must be positive)")
    p, q = pair.p, pair.q
    gp, gq = gamma_r(p), gamma_r(q)
    terms = [
        ("row_term", gp * row_norm_max(profile, p)),
        ("emax_term", gq * entry_max_expectation(profile)),
        ("prefactor", C * p ** (5.0 / q) * math.log(profile.m) ** (1.0 / q)),
        ("column_term", 2.0 ** (1.0 / q) * gq * col_norm_max(profile, q)),
    ]
    consts = [("C", C), ("p", p), ("q", q), ("gamma_p", gp), ("gamma_q", gq)]
    return BoundBreakdown.build("theorem_main", terms, consts)


def conjecture_functional(profile: VarianceProfile, pair: NormPair) -> BoundBreakdown:
    terms = [
        ("row_term", row_norm_max(profile, pair.p)),
        ("column_term", col_norm_max(profile, pair.q)),
        ("emax_term", entry_max_expectation(profile)),
    ]
    return BoundBreakdown.build("conjecture", terms, [("p", pair.p), ("q", pair.q)])


def chevet_rhs(x, y, pair: NormPair) -> BoundBreakdown:
    """``||y||_q ||x||_inf + ||y||_inf ||x||_p`` for the profile ``a_ij = x_j y_i``."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size == 0 or y.size == 0:
        raise ValueError("chevet_rhs needs nonempty vectors")
    terms = [
        ("column_term", lr_norm(y, pair.q) * lr_norm(x, math.inf)),
        ("row_term", lr_norm(y, math.inf) * lr_norm(x, pair.p)),
    ]
    return BoundBreakdown.build("chevet", terms, [("p", pair.p), ("q", pair.q)])


def bvh_rhs(profile: VarianceProfile, C: float = 1.0) -> BoundBreakdown:
    """Spectral-norm bound ``C (|||A||| + sqrt(ln max(m, n)) max |a_ij|)``."""
    dim = max(profile.m, profile.n)
    flags = ("log-term-vanishes-at-1x1",) if dim == 1 else ()
    terms = [
        ("mixed_norm", bvh_mixed_norm(profile)),
        ("log_term", math.sqrt(math.log(dim)) * float(profile.a.max())),
    ]
    return BoundBreakdown.build("bvh", terms, [("C", C)], flags)
