"""Bound-versus-estimate checks over configuration cells.

The math modules stay pure; this module owns all file output.  Cells are
evaluated independently (optionally in worker processes) and written in
configuration order, so every CSV is a function of the configuration and the
seed alone.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..bounds import BoundBreakdown, chevet_rhs, conjecture_functional, entry_max_expectation, theorem_main_rhs
from ..gaussian import concentration_tail, expected_max_abs, maxgaus_comparator, orlicz_norm
from ..montecarlo import EstimateResult, empirical_tail, opnorm_samples, summarize
from ..sampling import sample_matrices
from .config import Cell, ConfigError, SweepConfig, concentration_cases
from .output import write_csv

log = logging.getLogger(__name__)

DIAG_IDENTITY_RTOL = 1e-9


@dataclass
class RatioRow:
    cell_id: str
    profile: str
    m: int
    n: int
    p_star: float
    q: float
    lhs: float
    lhs_se: float
    rhs: float
    extra: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs

    @property
    def ratio_se(self) -> float:
        return self.lhs_se / self.rhs


@dataclass
class RatioReport:
    check: str
    rows: list[RatioRow] = field(default_factory=list)
    zero_rows: list[RatioRow] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def add(self, row: RatioRow):
        (self.rows if row.rhs > 0 else self.zero_rows).append(row)

    def summary(self, rows=None) -> dict:
        rows = self.rows if rows is None else rows
        if not rows:
            return {"cells": 0, "min": math.nan, "max": math.nan, "geomean": math.nan}
        r = np.array(sorted(row.ratio for row in rows))
        pos = r[r > 0]
        gm = float(np.exp(np.mean(np.log(pos)))) if pos.size == r.size else 0.0
        return {"cells": int(r.size), "min": float(r[0]), "max": float(r[-1]), "geomean": gm}

    def by_pair(self) -> dict[tuple[float, float], dict]:
        groups: dict[tuple[float, float], list[RatioRow]] = {}
        for row in self.rows:
            groups.setdefault((row.p_star, row.q), []).append(row)
        return {k: self.summary(v) for k, v in sorted(groups.items())}

    def argmax(self) -> RatioRow | None:
        return max(self.rows, key=lambda r: r.ratio, default=None)

    def series(self):
        """``{(p*, q): [(m, ratio), ...]}`` for plotting."""
        out: dict = {}
        for row in self.rows:
            out.setdefault(f"ps{row.p_star:g}_q{row.q:g}", []).append((row.m, row.ratio))
        return {k: sorted(v) for k, v in out.items()}


# --------------------------------------------------------------------------
# per-cell evaluation


@dataclass
class CellResult:
    cell: Cell
    skip: str | None = None
    estimate: EstimateResult | None = None
    theorem: BoundBreakdown | None = None
    theorem_skip: str | None = None
    conjecture: BoundBreakdown | None = None
    diagonal: dict | None = None
    samples: np.ndarray | None = None


@dataclass(frozen=True)
class _Job:
    cell: Cell
    n_samples: int
    seed: int
    C: float
    restarts: int | None
    want_theorem: bool
    want_conjecture: bool
    keep_samples: bool


def _diagonal_identity(prof, seed, N, values) -> dict:
    """Compare each realized norm with ``max_i |d_i g_ii|`` of the same draw."""
    d = np.diag(prof.a)
    G = sample_matrices(prof, seed, N)
    direct = np.max(np.abs(np.diagonal(G, axis1=1, axis2=2)), axis=1)
    dev = np.abs(values - direct) / np.maximum(direct, 1e-300)
    return {
        "emax_quad": expected_max_abs(d),
        "max_rel_dev": float(np.max(dev)) if N else 0.0,
        "mismatches": int(np.sum(dev > DIAG_IDENTITY_RTOL)),
    }


def evaluate_cell(job: _Job) -> CellResult:
    cell = job.cell
    res = CellResult(cell)
    try:
        prof = cell.profile.build(cell.m, cell.n, job.seed)
    except (ConfigError, ValueError) as e:
        res.skip = str(e)
        return res
    if job.want_theorem and not job.want_conjecture and not cell.pair.in_theorem_range:
        res.skip = "pair outside the theorem range 1 < p* <= 2 <= q < inf"
        return res
    if job.want_theorem and not job.want_conjecture and cell.m < 2:
        res.skip = "theorem needs m >= 2"
        return res

    opts = {} if job.restarts is None else {"restarts": job.restarts}
    values = opnorm_samples(prof, cell.pair, job.n_samples, job.seed, **opts)
    res.estimate = summarize(values, job.seed, cell.pair.q)
    if job.keep_samples:
        res.samples = values

    if job.want_theorem:
        if not cell.pair.in_theorem_range:
            res.theorem_skip = "pair outside the theorem range 1 < p* <= 2 <= q < inf"
        elif cell.m < 2:
            res.theorem_skip = "theorem needs m >= 2"
        else:
            res.theorem = theorem_main_rhs(prof, cell.pair, job.C)
    if job.want_conjecture:
        res.conjecture = conjecture_functional(prof, cell.pair)
    if cell.profile.family == "diagonal":
        res.diagonal = _diagonal_identity(prof, job.seed, job.n_samples, values)
    return res


def map_cells(jobs, workers: int = 1) -> list[CellResult]:
    if workers <= 1 or len(jobs) <= 1:
        return [evaluate_cell(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(evaluate_cell, jobs, chunksize=1))


def _jobs(cfg: SweepConfig, theorem: bool, conjecture: bool, keep: bool):
    return [_Job(c, cfg.n_samples, cfg.seed, cfg.C, cfg.restarts, theorem, conjecture, keep)
            for c in cfg.cells()]


def _base_row(r: CellResult, lhs: float, lhs_se: float, rhs: float, extra: dict) -> RatioRow:
    c = r.cell
    return RatioRow(c.cell_id, c.profile.label, c.m, c.n, c.pair.p_star, c.pair.q, lhs, lhs_se, rhs, extra)


def theorem_report(results: list[CellResult]) -> RatioReport:
    rep = RatioReport("theorem")
    for r in results:
        if r.skip or r.theorem_skip:
            rep.skipped.append((r.cell.cell_id, r.skip or r.theorem_skip))
            continue
        e, b = r.estimate, r.theorem
        if e.mean > e.q_moment_root + 1e-9 * (1 + e.mean):
            rep.failures.append(f"{r.cell.cell_id}: mean {e.mean!r} exceeds q-moment root {e.q_moment_root!r}")
        extra = {"lhs_mean": e.mean, "lhs_mean_se": e.std_err, **dict(b.terms)}
        rep.add(_base_row(r, e.q_moment_root, e.q_root_std_err, b.total, extra))
    return rep


def conjecture_report(results: list[CellResult]) -> RatioReport:
    rep = RatioReport("conjecture")
    for r in results:
        if r.skip:
            rep.skipped.append((r.cell.cell_id, r.skip))
            continue
        e, b = r.estimate, r.conjecture
        extra = dict(b.terms)
        if r.diagonal is not None:
            dev = abs(e.mean - r.diagonal["emax_quad"])
            extra["diag_emax_quad"] = r.diagonal["emax_quad"]
            extra["diag_dev_in_se"] = dev / e.std_err if e.std_err > 0 else (0.0 if dev == 0 else math.inf)
            if dev > 4 * e.std_err:
                rep.failures.append(f"{r.cell.cell_id}: diagonal estimate {e.mean!r} is "
                                    f"{extra['diag_dev_in_se']:.2f} SE from E max {r.diagonal['emax_quad']!r}")
        rep.add(_base_row(r, e.mean, e.std_err, b.total, extra))
        if b.total > 0 and not e.mean > 0:
            rep.failures.append(f"{r.cell.cell_id}: nonpositive ratio on a nonzero profile")
    return rep


# --------------------------------------------------------------------------
# writers

THEOREM_COLS = ["cell_id", "profile", "m", "n", "p_star", "q", "lhs_mean", "lhs_mean_se", "lhs_qroot",
                "lhs_qroot_se", "row_term", "emax_term", "prefactor", "column_term", "rhs_total", "ratio",
                "ratio_se"]
CONJ_COLS = ["cell_id", "profile", "m", "n", "p_star", "q", "lhs_mean", "lhs_mean_se", "row_term",
             "column_term", "emax_term", "rhs_total", "ratio", "ratio_se", "diag_emax_quad", "diag_dev_in_se"]
CHEVET_COLS = ["cell_id", "profile", "m", "n", "p_star", "q", "lhs_mean", "lhs_mean_se", "column_term",
               "row_term", "rhs_total", "ratio", "ratio_se"]


def _row_values(row: RatioRow, cols):
    base = {"cell_id": row.cell_id, "profile": row.profile, "m": row.m, "n": row.n, "p_star": row.p_star,
            "q": row.q, "rhs_total": row.rhs, "ratio": row.ratio, "ratio_se": row.ratio_se,
            "lhs_qroot": row.lhs, "lhs_qroot_se": row.lhs_se, "lhs_mean": row.lhs, "lhs_mean_se": row.lhs_se}
    base.update(row.extra)
    return [base.get(c, "") for c in cols]


def write_ratio_report(rep: RatioReport, out: Path, cols) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    main = out / f"{rep.check}_check.csv"
    write_csv(main, cols, [_row_values(r, cols) for r in rep.rows])
    summ = out / f"{rep.check}_summary.csv"
    srows = [[ps, q, s["cells"], s["min"], s["max"], s["geomean"]] for (ps, q), s in rep.by_pair().items()]
    s = rep.summary()
    srows.append(["all", "all", s["cells"], s["min"], s["max"], s["geomean"]])
    write_csv(summ, ["p_star", "q", "cells", "min_ratio", "max_ratio", "geomean_ratio"], srows)
    return [main, summ]


def write_skipped(reports, out: Path) -> Path:
    rows = []
    for rep in reports:
        rows += [[rep.check, cid, reason] for cid, reason in rep.skipped]
        rows += [[rep.check, r.cell_id, "zero right-hand side (zero profile)"] for r in rep.zero_rows]
    path = out / "skipped.csv"
    write_csv(path, ["check", "cell_id", "reason"], rows)
    for row in rows:
        log.info("skipped %s cell %s: %s", *row)
    return path


def dump_samples(results: list[CellResult], path: Path) -> list[Path]:
    path.mkdir(parents=True, exist_ok=True)
    paths = []
    for r in results:
        if r.samples is None:
            continue
        p = path / f"samples_{r.cell.index:04d}.csv"
        write_csv(p, ["sample_index", "value"], list(enumerate(r.samples.tolist())))
        paths.append(p)
    return paths


# --------------------------------------------------------------------------
# checks


def _finish(results, cfg, keep_dump):
    if keep_dump is not None:
        dump_samples(results, Path(keep_dump))


def run_sweep(cfg: SweepConfig, workers: int = 1, dump=None, plots: bool = True):
    """Theorem and conjecture checks over the same estimates."""
    results = map_cells(_jobs(cfg, True, True, dump is not None), workers)
    _finish(results, cfg, dump)
    th, cj = theorem_report(results), conjecture_report(results)
    out = Path(cfg.output_dir)
    write_ratio_report(th, out, THEOREM_COLS)
    write_ratio_report(cj, out, CONJ_COLS)
    write_skipped([th, cj], out)
    if plots:
        from .output import emit_plots
        for rep in (th, cj):
            if rep.rows:
                emit_plots(rep, out)
    return th, cj


def run_check_theorem(cfg: SweepConfig, workers: int = 1, dump=None, plots: bool = True) -> RatioReport:
    results = map_cells(_jobs(cfg, True, False, dump is not None), workers)
    _finish(results, cfg, dump)
    rep = theorem_report(results)
    out = Path(cfg.output_dir)
    write_ratio_report(rep, out, THEOREM_COLS)
    write_skipped([rep], out)
    if plots and rep.rows:
        from .output import emit_plots
        emit_plots(rep, out)
    return rep


def run_check_conjecture(cfg: SweepConfig, workers: int = 1, dump=None, plots: bool = True) -> RatioReport:
    results = map_cells(_jobs(cfg, False, True, dump is not None), workers)
    _finish(results, cfg, dump)
    rep = conjecture_report(results)
    out = Path(cfg.output_dir)
    write_ratio_report(rep, out, CONJ_COLS)
    write_skipped([rep], out)
    if plots and rep.rows:
        from .output import emit_plots
        emit_plots(rep, out)
    return rep


def run_check_chevet(cfg: SweepConfig, workers: int = 1, dump=None, plots: bool = True) -> RatioReport:
    """Two-sided ratio of ``E||G||`` against the tensor two-term expression."""
    for spec in cfg.profiles:
        if spec.family != "tensor":
            raise ConfigError(f"chevet check needs tensor profiles, got {spec.label}")
    for m, n in cfg.dims:
        if m != n:
            raise ConfigError(f"chevet check needs square dims, got {m}x{n}")
    results = map_cells(_jobs(cfg, False, False, dump is not None), workers)
    _finish(results, cfg, dump)
    rep = RatioReport("chevet")
    for r in results:
        if r.skip:
            rep.skipped.append((r.cell.cell_id, r.skip))
            continue
        c = r.cell
        x, y = c.profile.tensor_vectors(c.m, c.n, cfg.seed)
        b = chevet_rhs(x, y, c.pair)
        rep.add(_base_row(r, r.estimate.mean, r.estimate.std_err, b.total, dict(b.terms)))
    out = Path(cfg.output_dir)
    write_ratio_report(rep, out, CHEVET_COLS)
    write_skipped([rep], out)
    if plots and rep.rows:
        from .output import emit_plots
        emit_plots(rep, out)
    return rep


@dataclass
class DiagonalRow:
    cell_id: str
    n: int
    p_star: float
    q: float
    mc_mean: float
    mc_se: float
    emax_quad: float
    comparator: float
    orlicz: float
    max_rel_dev: float
    mismatches: int

    @property
    def dev_in_se(self) -> float:
        d = abs(self.mc_mean - self.emax_quad)
        return d / self.mc_se if self.mc_se > 0 else (0.0 if d == 0 else math.inf)

    @property
    def ok(self) -> bool:
        return self.dev_in_se <= 4.0


@dataclass
class DiagonalReport:
    check: str = "diagonal"
    rows: list[DiagonalRow] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    zero_rows: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.failures

    def series(self):
        out: dict = {}
        for r in self.rows:
            out.setdefault(f"ps{r.p_star:g}_q{r.q:g}", []).append((r.n, r.mc_mean / r.emax_quad if r.emax_quad else 0.0))
        return {k: sorted(v) for k, v in out.items()}


DIAG_COLS = ["cell_id", "n", "p_star", "q", "mc_mean", "mc_se", "emax_quad", "maxgaus_comparator",
             "orlicz_norm", "dev_in_se", "max_rel_dev_norm_vs_entrymax", "identity_mismatches", "ok"]


def run_check_diagonal(cfg: SweepConfig, workers: int = 1, dump=None, plots: bool = True) -> DiagonalReport:
    """Realized norm of a diagonal matrix against ``E max_i |d_i g_i|`` and its comparators."""
    for spec in cfg.profiles:
        if spec.family != "diagonal":
            raise ConfigError(f"diagonal check needs diagonal profiles, got {spec.label}")
    results = map_cells(_jobs(cfg, False, False, dump is not None), workers)
    _finish(results, cfg, dump)
    rep = DiagonalReport()
    for r in results:
        if r.skip:
            rep.skipped.append((r.cell.cell_id, r.skip))
            continue
        c = r.cell
        d = np.diag(c.profile.build(c.m, c.n, cfg.seed).a)
        row = DiagonalRow(c.cell_id, c.n, c.pair.p_star, c.pair.q, r.estimate.mean, r.estimate.std_err,
                          r.diagonal["emax_quad"], maxgaus_comparator(d), orlicz_norm(d).value,
                          r.diagonal["max_rel_dev"], r.diagonal["mismatches"])
        rep.rows.append(row)
        if row.mismatches:
            log.warning("%s: %d samples where the norm differs from the entry max by > %g relative",
                        c.cell_id, row.mismatches, DIAG_IDENTITY_RTOL)
        if not row.ok:
            rep.failures.append(f"{c.cell_id}: MC mean {row.mc_mean!r} is {row.dev_in_se:.2f} SE from "
                                f"quadrature {row.emax_quad!r}")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "diagonal_check.csv", DIAG_COLS,
              [[r.cell_id, r.n, r.p_star, r.q, r.mc_mean, r.mc_se, r.emax_quad, r.comparator, r.orlicz,
                r.dev_in_se, r.max_rel_dev, r.mismatches, int(r.ok)] for r in rep.rows])
    write_skipped([rep], out)
    if plots and rep.rows:
        from .output import emit_plots
        emit_plots(rep, out)
    return rep


@dataclass
class TailRow:
    case: str
    p: float
    t: float
    frequency: float
    half_width: float
    bound: float
    degenerate: bool = False

    @property
    def ok(self) -> bool:
        return self.degenerate or self.frequency <= self.bound + self.half_width


@dataclass
class ConcentrationReport:
    check: str = "concentration"
    rows: list[TailRow] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)
    zero_rows: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.failures

    def series(self):
        out: dict = {}
        for r in self.rows:
            out.setdefault(f"{r.case}_frequency", []).append((r.t, r.frequency))
            out.setdefault(f"{r.case}_bound", []).append((r.t, r.bound))
        return out


def run_check_concentration(cfg: SweepConfig, plots: bool = True) -> ConcentrationReport:
    """Empirical deviation frequencies of ``||(a_j g_j)||_p`` against the Gaussian tail bound."""
    rep = ConcentrationReport()
    for label, a, p in concentration_cases(cfg):
        tail = empirical_tail(a, p, cfg.concentration_samples, cfg.seed, cfg.t_grid)
        if tail.degenerate:
            rep.skipped.append((label, "all-zero weights: tail degenerate, bound undefined"))
            continue
        for t, f, h in zip(tail.t_grid, tail.frequencies, tail.half_widths):
            row = TailRow(label, p, float(t), float(f), float(h), concentration_tail(a, p, float(t)))
            rep.rows.append(row)
            if not row.ok:
                rep.failures.append(f"{label} t={t:g}: frequency {f!r} > bound {row.bound!r} + {h!r}")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "concentration_check.csv", ["case", "p", "t", "frequency", "half_width", "bound", "ok"],
              [[r.case, r.p, r.t, r.frequency, r.half_width, r.bound, int(r.ok)] for r in rep.rows])
    write_skipped([rep], out)
    if plots and rep.rows:
        from .output import emit_plots
        emit_plots(rep, out)
    return rep


# --------------------------------------------------------------------------
# regression baseline


def check_baseline(rep: RatioReport, path: Path, n_se: float = 3.0) -> tuple[bool, str]:
    """Compare the max ratio with a stored baseline, writing it if absent.

    Passes when ``max_ratio <= baseline + n_se * sqrt(se^2 + se_base^2)``.
    """
    top = rep.argmax()
    if top is None:
        return False, "no rows to compare"
    path = Path(path)
    if not path.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"max_ratio": top.ratio, "max_ratio_se": top.ratio_se,
                                    "cell_id": top.cell_id}, indent=2) + "\n")
        return True, f"baseline written to {path}: max ratio {top.ratio:.6g} at {top.cell_id}"
    base = json.loads(path.read_text())
    slack = n_se * math.hypot(top.ratio_se, base["max_ratio_se"])
    ok = top.ratio <= base["max_ratio"] + slack
    return ok, (f"max ratio {top.ratio:.6g} at {top.cell_id} vs baseline {base['max_ratio']:.6g} "
                f"(+{slack:.3g} allowed)")
