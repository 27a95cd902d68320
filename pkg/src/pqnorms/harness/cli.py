"""Command-line front end.

Exit codes: 0 when every assertion passes, 2 when an assertion fails (the
report is still written), 1 on a usage or configuration error.
"""

from __future__ import annotations

import argparse
import filecmp
import logging
import math
import sys
import tempfile
from pathlib import Path

import numpy as np

from .. import bounds
from ..gaussian import expected_max_abs, gamma_r, maxgaus_comparator, orlicz_norm
from ..montecarlo import estimate_opnorm
from ..profiles import NormPair, ProfileError
from .checks import (
    check_baseline,
    run_check_chevet,
    run_check_concentration,
    run_check_conjecture,
    run_check_diagonal,
    run_check_theorem,
    run_sweep,
)
from .config import ConfigError, ProfileSpec, SweepConfig, default_chevet_config, default_diagonal_config, load_config
from .output import write_csv

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2
log = logging.getLogger("pqnorms")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _pair_arg(text: str) -> NormPair:
    try:
        ps, q = text.split(",")
        return NormPair(float(ps), float(q))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"pair must be 'p_star,q' with 1 <= p* <= 2 <= q: {e}") from None


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, default=None, help="master seed (default 0)")
    common.add_argument("--samples", type=int, default=None, help="Monte Carlo sample count")
    common.add_argument("--out", type=Path, default=None, help="output directory (default ./out)")
    common.add_argument("--config", type=Path, default=None, help="TOML config file")
    common.add_argument("--dump-samples", type=Path, default=None, metavar="PATH",
                        help="write per-sample values as sample_index,value CSV")
    common.add_argument("--workers", type=int, default=1, help="worker processes for config cells")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="pqnorms", description="Random matrix p*->q norm estimates and bound checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    cell = argparse.ArgumentParser(add_help=False)
    cell.add_argument("--profile", default="iid", help="profile spec, e.g. iid, tensor:x=ones,y=e1, file:path")
    cell.add_argument("-m", type=int, default=8, help="rows")
    cell.add_argument("-n", type=int, default=8, help="columns")
    cell.add_argument("--pair", type=_pair_arg, default=NormPair(1.5, 3.0), help="p_star,q (default 1.5,3)")

    sub.add_parser("estimate", parents=[common, cell], help="estimate E||G|| for one cell")
    b = sub.add_parser("bound", parents=[common, cell], help="print a bound breakdown as CSV")
    b.add_argument("--which", choices=["theorem", "conjecture", "lemma32", "bvh", "chevet"], default="theorem")
    b.add_argument("-C", type=float, default=1.0, help="absolute constant (default 1)")

    for name in ("check-theorem", "sweep"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("--baseline", type=Path, default=None,
                       help="max-ratio baseline JSON; written if absent, compared otherwise")
        s.add_argument("--verify", action="store_true", help="re-run into a scratch dir and diff the CSVs")
        s.add_argument("--no-plots", action="store_true")
    for name in ("check-conjecture", "check-chevet", "check-diagonal", "check-concentration"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("--verify", action="store_true", help="re-run into a scratch dir and diff the CSVs")
        s.add_argument("--no-plots", action="store_true")

    d = sub.add_parser("diagnostics", parents=[common], help="Gaussian quantities for a weight file")
    d.add_argument("weights", type=Path, help="file of whitespace-separated weights ('#' comments allowed)")
    return p


def _config(args, base: SweepConfig) -> SweepConfig:
    cfg = load_config(args.config, base) if args.config else base
    kw = {"seed": args.seed, "output_dir": args.out}
    if args.samples is not None:
        key = "concentration_samples" if args.command == "check-concentration" else "n_samples"
        kw[key] = args.samples
    return cfg.with_overrides(**kw)


def _read_weights(path: Path) -> np.ndarray:
    try:
        lines = path.read_text().splitlines()
    except OSError as e:
        raise UsageError(str(e)) from None
    vals = []
    for k, line in enumerate(lines, 1):
        line = line.split("#", 1)[0]
        try:
            vals += [float(t) for t in line.split()]
        except ValueError:
            raise UsageError(f"{path}:{k}: not a number") from None
    if not vals:
        raise UsageError(f"{path}: no weights")
    return np.asarray(vals)


def _cmd_estimate(args) -> int:
    spec = ProfileSpec.parse(args.profile)
    seed = args.seed or 0
    prof = spec.build(args.m, args.n, seed)
    N = args.samples or 2000
    est = estimate_opnorm(prof, args.pair, N, seed, keep_samples=args.dump_samples is not None)
    if args.dump_samples is not None:
        write_csv(args.dump_samples, ["sample_index", "value"], list(enumerate(est.values.tolist())))
    print(f"profile {spec.label} {args.m}x{args.n} pair {args.pair} N={N} seed={seed}")
    print(f"mean        {est.mean:.10g} +- {est.std_err:.3g}  CI95 [{est.ci_lo:.10g}, {est.ci_hi:.10g}]")
    if est.q_moment_root is not None:
        lo, hi = est.q_ci
        print(f"q-moment^1/q {est.q_moment_root:.10g} +- {est.q_root_std_err:.3g}  CI95 [{lo:.10g}, {hi:.10g}]")
    return EXIT_OK


def _cmd_bound(args) -> int:
    spec = ProfileSpec.parse(args.profile)
    seed = args.seed or 0
    if args.which == "chevet":
        x, y = spec.tensor_vectors(args.m, args.n, seed)
        br = bounds.chevet_rhs(x, y, args.pair)
    else:
        prof = spec.build(args.m, args.n, seed)
        br = {
            "theorem": lambda: bounds.theorem_main_rhs(prof, args.pair, args.C),
            "conjecture": lambda: bounds.conjecture_functional(prof, args.pair),
            "lemma32": lambda: bounds.lemma32_rhs(prof, args.pair, args.C),
            "bvh": lambda: bounds.bvh_rhs(prof, args.C),
        }[args.which]()
    sys.stdout.write(br.to_csv())
    return EXIT_OK


def _cmd_diagnostics(args) -> int:
    a = _read_weights(args.weights)
    emax = expected_max_abs(a)
    comp = maxgaus_comparator(a)
    orl = orlicz_norm(a).value
    print(f"{'quantity':<28}{'value':>20}")
    for r in (1, 2, 3, 4, 8):
        print(f"{f'gamma_{r}':<28}{gamma_r(r):>20.12g}")
    print(f"{'E max |a_i g_i|':<28}{emax:>20.12g}")
    print(f"{'sqrt(ln(i+3)) comparator':<28}{comp:>20.12g}")
    print(f"{'Orlicz norm ||a||_Mg':<28}{orl:>20.12g}")
    if emax > 0:
        print(f"{'comparator / E max':<28}{comp / emax:>20.12g}")
        print(f"{'Orlicz / E max':<28}{orl / emax:>20.12g}")
    return EXIT_OK


def _run_check(args, cfg: SweepConfig):
    plots = not getattr(args, "no_plots", False)
    cmd = args.command
    w, dump = args.workers, args.dump_samples
    if cmd == "check-theorem":
        return [run_check_theorem(cfg, w, dump, plots)]
    if cmd == "check-conjecture":
        return [run_check_conjecture(cfg, w, dump, plots)]
    if cmd == "check-chevet":
        return [run_check_chevet(cfg, w, dump, plots)]
    if cmd == "check-diagonal":
        return [run_check_diagonal(cfg, w, dump, plots)]
    if cmd == "check-concentration":
        return [run_check_concentration(cfg, plots)]
    return list(run_sweep(cfg, w, dump, plots))


def _print_report(rep):
    summ = getattr(rep, "summary", None)
    if callable(summ):
        s = summ()
        print(f"[{rep.check}] cells={s['cells']} min={s['min']:.6g} max={s['max']:.6g} geomean={s['geomean']:.6g}")
        for (ps, q), g in rep.by_pair().items():
            print(f"  p*={ps:g} q={q:g}: min={g['min']:.6g} max={g['max']:.6g}")
    else:
        print(f"[{rep.check}] rows={len(rep.rows)}")
    if rep.skipped or rep.zero_rows:
        print(f"  skipped: {len(rep.skipped) + len(rep.zero_rows)} (see skipped.csv)")
    for f in rep.failures:
        print(f"  FAIL {f}")


def _verify(args, cfg: SweepConfig) -> list[str]:
    with tempfile.TemporaryDirectory() as tmp:
        _run_check(args, cfg.with_overrides(output_dir=Path(tmp)))
        diffs = []
        for f in sorted(Path(tmp).glob("*.csv")):
            mine = Path(cfg.output_dir) / f.name
            if not mine.exists() or not filecmp.cmp(f, mine, shallow=False):
                diffs.append(f.name)
    return diffs


def _cmd_check(args) -> int:
    base = {"check-chevet": default_chevet_config, "check-diagonal": default_diagonal_config}
    cfg = _config(args, base.get(args.command, SweepConfig)())
    reports = _run_check(args, cfg)
    ok = True
    for rep in reports:
        _print_report(rep)
        ok &= rep.ok
    if getattr(args, "baseline", None) is not None:
        good, msg = check_baseline(reports[0], args.baseline)
        print(("baseline ok: " if good else "baseline FAIL: ") + msg)
        ok &= good
    if args.verify:
        diffs = _verify(args, cfg)
        print("verify: identical" if not diffs else f"verify FAIL: differing files {diffs}")
        ok &= not diffs
    print(f"outputs in {cfg.output_dir}")
    return EXIT_OK if ok else EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    if args.samples is not None and args.samples < 2:
        parser.error("--samples must be >= 2")
    try:
        if args.command == "estimate":
            return _cmd_estimate(args)
        if args.command == "bound":
            return _cmd_bound(args)
        if args.command == "diagnostics":
            return _cmd_diagnostics(args)
        return _cmd_check(args)
    except (ConfigError, ProfileError, UsageError, ValueError) as e:
        print(f"pqnorms: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
