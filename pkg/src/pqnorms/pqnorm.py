"""Operator norms ``||M : l_{p*} -> l_q||``.

Closed forms are used when ``p* = 1`` (best column), ``q = inf`` (best row)
and for the spectral norm ``(2, 2)``.  Everything else goes through the
nonlinear (Boyd) power iteration, which alternates the two dual-norming maps
and is monotone in the objective; the global maximum is not certified, so the
reported value is the best witnessed ``||M y||_q`` over a set of restarts.

All routines operate on stacks of matrices of shape ``(B, m, n)`` so Monte
Carlo estimates can solve a whole batch at once.  Iterates are stored as
columns, ``Y.shape == (B, n, R)`` for ``R`` restarts, and every column is
frozen as soon as it converges, which makes each result independent of the
rest of the batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .profiles import NormPair, lr_norm
from .sampling import DOMAIN_STARTS, KeyedStream

EXACT_P1 = "exact-p1"
EXACT_QINF = "exact-qinf"
EXACT_22 = "exact-22"
POWER = "power-iteration"
GRID = "grid-oracle"

MONOTONE_SLACK = 1e-12


class MonotonicityError(ArithmeticError):
    """The power-iteration objective decreased beyond rounding slack."""


@dataclass(frozen=True, eq=False)
class NormResult:
    value: float
    maximizer: np.ndarray
    method: str
    converged: bool
    iterations: int


@dataclass(frozen=True, eq=False)
class BatchNormResult:
    values: np.ndarray
    maximizers: np.ndarray  # (B, n)
    method: str
    converged: np.ndarray
    iterations: np.ndarray

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, k) -> NormResult:
        return NormResult(
            float(self.values[k]),
            self.maximizers[k].copy(),
            self.method,
            bool(self.converged[k]),
            int(self.iterations[k]),
        )


# --------------------------------------------------------------------------
# vector helpers, all along axis -2 (the coordinate axis of column stacks)


def _colnorm(X: np.ndarray, r: float) -> np.ndarray:
    return lr_norm(X, r, axis=-2)


def _scaled_abs(X: np.ndarray):
    """``(|X| / colmax, colmax)`` with zero columns left at zero."""
    A = np.abs(X)
    top = np.max(A, axis=-2, keepdims=True)
    A /= np.where(top > 0, top, 1.0)
    return A, top


def _norm_and_dual(Z: np.ndarray, r: float):
    """``(||z||_r, sign(z) |z/max|z||^(r-1))`` per column with one power call."""
    A, top = _scaled_abs(Z)
    P = np.power(A, r - 1.0)
    nrm = top[..., 0, :] * np.sum(P * A, axis=-2) ** (1.0 / r)
    P *= np.sign(Z)
    return nrm, P


def _normalize(Y: np.ndarray, r: float) -> np.ndarray:
    nrm = _colnorm(Y, r)[..., None, :]
    return Y / np.where(nrm > 0, nrm, 1.0)


def norming_point(W: np.ndarray, p_star: float) -> np.ndarray:
    """Unit vectors of ``l_{p*}`` attaining ``<w, y> = ||w||_p`` (columnwise).

    Zero columns map to zero.
    """
    if p_star == 1.0:
        Y = np.zeros_like(W)
        k = np.argmax(np.abs(W), axis=-2)
        vals = np.take_along_axis(W, k[..., None, :], axis=-2)
        sgn = np.where(vals < 0, -1.0, np.where(vals > 0, 1.0, 0.0))
        np.put_along_axis(Y, k[..., None, :], sgn, axis=-2)
        return Y
    if p_star == 2.0:
        return _normalize(W, 2.0)
    p = p_star / (p_star - 1.0)
    A, _ = _scaled_abs(W)
    P = np.power(A, p - 1.0)
    # ||P||_{p*}^{p*} = sum |a|^p = sum P * A
    nrm = np.sum(P * A, axis=-2, keepdims=True) ** (1.0 / p_star)
    P *= np.sign(W)
    P /= np.where(nrm > 0, nrm, 1.0)
    return P


def _as_stack(M) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 2:
        M = M[None]
    if M.ndim != 3 or M.shape[1] < 1 or M.shape[2] < 1:
        raise ValueError(f"expected a matrix or a stack of matrices, got shape {M.shape}")
    if np.isnan(M).any():
        raise ValueError("matrix contains NaN entries")
    if not np.isfinite(M).all():
        raise ValueError("matrix contains infinite entries")
    return M


def default_restarts(m: int, n: int) -> int:
    return max(16, math.ceil(math.log2(max(m * n, 1))) * 4)


class _RowCache:
    """``data[idx]`` memoized on the identity of ``idx``."""

    def __init__(self, data: np.ndarray):
        self.data = data
        self._idx = None
        self._val = None

    def __call__(self, idx: np.ndarray) -> np.ndarray:
        if idx is not self._idx:
            self._idx = idx
            self._val = self.data if idx.size == self.data.shape[0] else self.data[idx]
        return self._val


# --------------------------------------------------------------------------
# generic monotone ascent over the l_{p*} unit ball


def ascend_on_ball(step, Y0: np.ndarray, p_star: float, tol: float, max_iter: int):
    """Maximize a convex objective over ``B_{p*}`` by repeated linearization.

    ``step(Y, idx)`` must return ``(objective, gradient)`` for the column
    stack ``Y`` belonging to batch rows ``idx``; objective has shape
    ``(len(idx), R)``.  Each update replaces ``y`` by the point of the unit
    ball maximizing ``<grad f(y), y'>``, which cannot decrease a convex ``f``.
    A column stops once its relative objective gain drops below ``tol``;
    stopped columns are never touched again.

    Returns ``(Y, objective, converged, iterations)``.
    """
    B, _, R = Y0.shape
    Y = Y0.copy()
    obj = np.empty((B, R))
    conv = np.zeros((B, R), dtype=bool)
    iters = np.zeros((B, R), dtype=np.int64)

    rows = np.arange(B)
    Yw = Y.copy()
    objw, gradw = step(Yw, rows)
    actw = np.ones((B, R), dtype=bool)
    itw = np.zeros((B, R), dtype=np.int64)

    def flush(sel):
        r = rows[sel]
        Y[r], obj[r], iters[r] = Yw[sel], objw[sel], itw[sel]
        conv[r] = ~actw[sel]

    for _ in range(max_iter):
        has_grad = np.any(gradw, axis=-2)
        Ynew = norming_point(gradw, p_star)
        if not has_grad.all():
            Ynew = np.where(has_grad[:, None, :], Ynew, Yw)
        obj_new, grad_new = step(Ynew, rows)

        drop = objw - obj_new
        bad = actw & (drop > MONOTONE_SLACK * np.maximum(1.0, np.abs(objw)))
        if bad.any():
            raise MonotonicityError(f"objective decreased by {float(np.max(drop[bad])):.3e}")

        gain = (obj_new - objw) / np.where(objw > 0, objw, 1.0)
        upd = actw & (obj_new >= objw)
        Yw = np.where(upd[:, None, :], Ynew, Yw)
        gradw = np.where(upd[:, None, :], grad_new, gradw)
        objw = np.where(upd, obj_new, objw)
        itw += actw
        actw &= gain >= tol

        done = ~actw.any(axis=1)
        ndone = int(done.sum())
        if ndone == rows.size:
            flush(slice(None))
            rows = rows[:0]
            break
        if ndone and ndone >= max(1, rows.size // 8):
            flush(done)
            keep = ~done
            rows = rows[keep]
            Yw, objw, gradw, actw, itw = Yw[keep], objw[keep], gradw[keep], actw[keep], itw[keep]

    if rows.size:
        flush(slice(None))
    return Y, obj, conv, iters


def _pick_best(values: np.ndarray, Y: np.ndarray, converged, iters):
    # argmax returns the first maximal index: lowest start index wins ties
    best = np.argmax(values, axis=1)
    sel = best[:, None]
    return (
        np.take_along_axis(values, sel, axis=1)[:, 0],
        np.take_along_axis(Y, best[:, None, None], axis=2)[:, :, 0],
        np.take_along_axis(converged, sel, axis=1)[:, 0],
        np.take_along_axis(iters, sel, axis=1)[:, 0],
    )


# --------------------------------------------------------------------------
# closed forms


def exact_p1_batch(Ms, q: float) -> BatchNormResult:
    Ms = _as_stack(Ms)
    cols = lr_norm(Ms, q, axis=1)  # (B, n)
    j = np.argmax(cols, axis=1)
    Y = np.zeros((Ms.shape[0], Ms.shape[2]))
    Y[np.arange(Ms.shape[0]), j] = 1.0
    B = Ms.shape[0]
    return BatchNormResult(cols[np.arange(B), j], Y, EXACT_P1, np.ones(B, bool), np.zeros(B, np.int64))


def exact_p1(M, q: float) -> NormResult:
    """Best column: extreme points of ``B_1^n`` are ``+-e_j``."""
    return exact_p1_batch(M, q)[0]


def exact_qinf_batch(Ms, p_star: float) -> BatchNormResult:
    Ms = _as_stack(Ms)
    B = Ms.shape[0]
    p = math.inf if p_star == 1.0 else p_star / (p_star - 1.0)
    rows = lr_norm(Ms, p, axis=2)  # (B, m)
    i = np.argmax(rows, axis=1)
    W = Ms[np.arange(B), i, :]  # (B, n)
    Y = norming_point(W[:, :, None], p_star)[:, :, 0]
    zero = ~np.any(W, axis=1)
    Y[zero] = 0.0
    Y[zero, 0] = 1.0
    return BatchNormResult(rows[np.arange(B), i], Y, EXACT_QINF, np.ones(B, bool), np.zeros(B, np.int64))


def exact_qinf(M, p_star: float) -> NormResult:
    """Best row measured in ``l_p``, the dual of ``l_{p*}``."""
    return exact_qinf_batch(M, p_star)[0]


def _top_singular_start(Ms: np.ndarray) -> np.ndarray:
    B, _, n = Ms.shape
    cols = np.sum(Ms * Ms, axis=1)
    j = np.argmax(cols, axis=1)
    V = np.einsum("bmn,bm->bn", Ms, Ms[np.arange(B), :, j])
    # fixed tilt so the start is never exactly orthogonal to the top direction
    tilt = np.cos(np.arange(1, n + 1) * 2.399963)
    V = V + 1e-3 * np.linalg.norm(V, axis=1, keepdims=True) * tilt / np.linalg.norm(tilt)
    V[~np.any(V, axis=1)] = 1.0
    return V / np.linalg.norm(V, axis=1, keepdims=True)


def exact_22_batch(Ms, tol: float = 1e-12, max_iter: int = 10_000) -> BatchNormResult:
    Ms = _as_stack(Ms)
    B = Ms.shape[0]
    V = _top_singular_start(Ms)[:, :, None]

    sub = _RowCache(Ms)

    def step(Y, idx):
        Mi = sub(idx)
        Z = Mi @ Y
        return np.sqrt(np.sum(Z * Z, axis=1)), np.swapaxes(Mi, 1, 2) @ Z

    V, vals, conv, iters = ascend_on_ball(step, V, 2.0, tol, max_iter)
    zero = ~np.any(Ms, axis=(1, 2))
    conv[zero] = True
    return BatchNormResult(vals[:, 0], V[:, :, 0], EXACT_22, conv[:, 0], iters[:, 0])


def exact_22(M, tol: float = 1e-12, max_iter: int = 10_000) -> NormResult:
    """Largest singular value by power iteration on ``y -> M^T M y``.

    If the cap is hit the best iterate is returned with ``converged=False``.
    """
    return exact_22_batch(M, tol, max_iter)[0]


# --------------------------------------------------------------------------
# nonlinear power iteration


def _power_starts(Ms: np.ndarray, pair: NormPair, restarts: int, start_seed: int) -> np.ndarray:
    B, _, n = Ms.shape
    R = restarts
    starts = np.zeros((B, n, R))
    colq = lr_norm(Ms, pair.q, axis=1)
    order = np.argsort(-colq, axis=1, kind="stable")
    starts[np.arange(B), order[:, 0], 0] = 1.0
    k = 1
    if R > 1:
        spec = exact_22_batch(Ms, tol=1e-8, max_iter=200).maximizers
        starts[:, :, 1] = _normalize(spec[:, :, None], pair.p_star)[:, :, 0]
        k = 2
    extra_e = min(n - 1, max(R // 4 - 1, 0), R - k)
    for r in range(extra_e):
        starts[np.arange(B), order[:, r + 1], k] = 1.0
        k += 1
    if k < R:
        rnd = KeyedStream(start_seed, DOMAIN_STARTS).normals(n, (n, R - k))
        starts[:, :, k:] = _normalize(rnd, pair.p_star)[None]
    return starts


def power_iteration_batch(
    Ms,
    pair: NormPair,
    restarts: int | None = None,
    tol: float = 1e-10,
    max_iter: int = 500,
    start_seed: int = 0,
) -> BatchNormResult:
    Ms = _as_stack(Ms)
    if not pair.in_theorem_range:
        raise ValueError(f"power iteration needs 1 < p* <= 2 <= q < inf, got {pair}")
    B, m, n = Ms.shape
    R = default_restarts(m, n) if restarts is None else int(restarts)
    if R < 1:
        raise ValueError("restarts must be >= 1")
    q, ps = pair.q, pair.p_star

    sub = _RowCache(Ms)

    def step(Y, idx):
        Mi = sub(idx)
        nrm, D = _norm_and_dual(Mi @ Y, q)
        return nrm, np.swapaxes(Mi, 1, 2) @ D

    Y0 = _power_starts(Ms, pair, R, start_seed)
    obj0, _ = step(Y0, np.arange(B))
    nonzero = np.any(Ms, axis=(1, 2))
    stuck = (obj0 == 0) & nonzero[:, None]
    if stuck.any():
        # start in the kernel of a nonzero M: perturb toward a fixed direction
        rnd = KeyedStream(start_seed, DOMAIN_STARTS).normals(n + 1, (n, R))
        for _ in range(8):
            Y0 = np.where(stuck[:, None, :], _normalize(Y0 + rnd, ps), Y0)
            obj0, _ = step(Y0, np.arange(B))
            stuck = (obj0 == 0) & nonzero[:, None]
            if not stuck.any():
                break
            rnd = np.roll(rnd, 1, axis=0) + 0.5

    Y, obj, conv, iters = ascend_on_ball(step, Y0, ps, tol, max_iter)
    vals, Yb, cb, ib = _pick_best(obj, Y, conv, iters)
    cb = cb | ~nonzero
    return BatchNormResult(vals, Yb, POWER, cb, ib)


def power_iteration(M, pair: NormPair, restarts: int | None = None, tol: float = 1e-10,
                    max_iter: int = 500, start_seed: int = 0) -> NormResult:
    """Best witnessed ``||M y||_q`` over restarts of the nonlinear power method.

    Starts, in order: the best ``e_j``, the top right-singular direction,
    the next best ``e_j`` and seeded random points of the ``l_{p*}`` sphere.
    """
    return power_iteration_batch(M, pair, restarts, tol, max_iter, start_seed)[0]


def op_norm_batch(Ms, pair: NormPair, restarts: int | None = None, tol: float = 1e-10,
                  max_iter: int = 500, start_seed: int = 0) -> BatchNormResult:
    if pair.p_star == 1.0:
        return exact_p1_batch(Ms, pair.q)
    if math.isinf(pair.q):
        return exact_qinf_batch(Ms, pair.p_star)
    if pair.p_star == 2.0 and pair.q == 2.0:
        return exact_22_batch(Ms)
    return power_iteration_batch(Ms, pair, restarts, tol, max_iter, start_seed)


def op_norm(M, pair: NormPair, restarts: int | None = None, tol: float = 1e-10,
            max_iter: int = 500, start_seed: int = 0) -> NormResult:
    """Operator norm from ``l_{p*}^n`` to ``l_q^m`` of an ``m x n`` matrix.

    Routes to a closed form when one exists.  The returned value is always
    attained by ``maximizer``; for the exact routes it is the true norm.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("op_norm expects a single matrix; use op_norm_batch for stacks")
    return op_norm_batch(M, pair, restarts, tol, max_iter, start_seed)[0]


# --------------------------------------------------------------------------
# brute-force oracle


def _sphere_grid(n: int, p_star: float, resolution: int) -> np.ndarray:
    if n == 1:
        return np.ones((1, 1))
    if n == 2:
        t = 2 * np.pi * np.arange(resolution) / resolution
        D = np.stack([np.cos(t), np.sin(t)])
    else:
        th = np.linspace(0.0, np.pi, resolution)
        ph = 2 * np.pi * np.arange(resolution) / resolution
        TH, PH = np.meshgrid(th, ph, indexing="ij")
        D = np.stack([np.sin(TH) * np.cos(PH), np.sin(TH) * np.sin(PH), np.cos(TH)]).reshape(3, -1)
    return _normalize(D, p_star)


def grid_oracle(M, pair: NormPair, resolution: int = 4000) -> NormResult:
    """Exhaustive scan of the ``l_{p*}`` unit sphere for ``n <= 3`` columns.

    ``n = 2`` uses ``resolution`` angles; ``n = 3`` a ``resolution x
    resolution`` lattice in spherical angles.  Only meant for testing.
    """
    M = _as_stack(M)[0]
    n = M.shape[1]
    if n > 3:
        raise ValueError(f"grid oracle supports n <= 3 columns, got {n}")
    if resolution < 100:
        raise ValueError("resolution must be >= 100")
    D = _sphere_grid(n, pair.p_star, resolution)
    vals = lr_norm(M @ D, pair.q, axis=0)
    k = int(np.argmax(vals))
    return NormResult(float(vals[k]), D[:, k].copy(), GRID, True, 0)
