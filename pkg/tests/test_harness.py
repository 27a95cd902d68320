import csv
import json
import math

import numpy as np
import pytest

from pqnorms.gaussian import SQRT_2_OVER_PI, concentration_tail
from pqnorms.harness import checks
from pqnorms.harness.checks import (
    RatioReport,
    RatioRow,
    check_baseline,
    run_check_chevet,
    run_check_concentration,
    run_check_conjecture,
    run_check_diagonal,
    run_check_theorem,
    run_sweep,
)
from pqnorms.harness.cli import main
from pqnorms.harness.config import ConfigError, ProfileSpec, SweepConfig, load_config
from pqnorms.harness.output import emit_plots, write_csv
from pqnorms.profiles import NormPair


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def small_cfg(tmp_path, **kw):
    base = dict(profiles=[ProfileSpec.parse("iid"), ProfileSpec.parse("tensor:x=geometric:0.5,y=ones")],
                pairs=[NormPair(1.5, 3), NormPair(2, 4)], dims=[(2, 2), (3, 4)], n_samples=20,
                output_dir=tmp_path)
    base.update(kw)
    return SweepConfig(**base)


class TestProfileSpec:
    @pytest.mark.parametrize("text", ["iid", "iid:s=2", "diagonal:alpha=0.5", "sparse:density=0.1",
                                      "tensor:x=geometric:0.8,y=ones"])
    def test_round_trip_label(self, text):
        assert ProfileSpec.parse(text).label == text

    def test_errors(self):
        for bad in ("nope", "iid:s", "file:"):
            with pytest.raises(ConfigError):
                ProfileSpec.parse(bad)
        with pytest.raises(ConfigError):
            ProfileSpec.parse("diagonal").build(2, 3)
        with pytest.raises(ConfigError):
            ProfileSpec.parse("tensor:x=wobbly").build(2, 2)

    def test_builds(self):
        np.testing.assert_array_equal(ProfileSpec.parse("iid:s=2").build(2, 3).a, np.full((2, 3), 2.0))
        d = ProfileSpec.parse("diagonal:alpha=1").build(3, 3).a
        np.testing.assert_allclose(np.diag(d), [1, 0.5, 1 / 3])
        t = ProfileSpec.parse("tensor:x=e1,y=ones").build(3, 2).a
        np.testing.assert_array_equal(t, [[1, 0], [1, 0], [1, 0]])
        s = ProfileSpec.parse("sparse:density=0.3").build(20, 20, seed=1).a
        assert set(np.unique(s)) <= {0.0, 1.0} and 0.15 < s.mean() < 0.45
        np.testing.assert_array_equal(s, ProfileSpec.parse("sparse:density=0.3").build(20, 20, seed=1).a)

    def test_file_profile(self, tmp_path):
        path = tmp_path / "p.txt"
        path.write_text("2 2\n1 0\n0 1\n")
        spec = ProfileSpec.parse(f"file:{path}")
        np.testing.assert_array_equal(spec.build(2, 2).a, np.eye(2))
        with pytest.raises(ConfigError):
            spec.build(3, 3)

    def test_tensor_vectors_match_profile(self):
        spec = ProfileSpec.parse("tensor:x=random,y=power:0.5")
        x, y = spec.tensor_vectors(4, 3, seed=2)
        np.testing.assert_array_equal(np.outer(y, x), spec.build(4, 3, seed=2).a)


class TestConfigFile:
    def test_load(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text('profiles = ["iid"]\npairs = [[1.5, 3], [2, 4]]\ndims = [4, [2, 3]]\nsamples = 10\n'
                        'seed = 9\n[constants]\nC = 2.0\n[concentration]\nsamples = 500\nt = [0.5, 1.0]\n'
                        '[[concentration.cases]]\nlabel = "u"\nweights = [1.0]\np = 2\n')
        cfg = load_config(path)
        assert cfg.dims == [(4, 4), (2, 3)] and cfg.n_samples == 10 and cfg.seed == 9 and cfg.C == 2.0
        assert [str(p) for p in cfg.pairs] == ["(1.5,3)", "(2,4)"]
        assert cfg.concentration_cases[0][0] == "u" and cfg.t_grid == (0.5, 1.0)
        assert len(cfg.cells()) == 4

    @pytest.mark.parametrize("text", ["bogus = 1\n", "pairs = [[3, 3]]\n", "dims = [[1, 2, 3]]\n",
                                      "samples = 1\n", "pairs = [", "[concentration]\ncases = [{label='x'}]\n"])
    def test_errors(self, tmp_path, text):
        path = tmp_path / "c.toml"
        path.write_text(text)
        with pytest.raises(ConfigError):
            load_config(path)


class TestTheoremCheck:
    def test_rows_and_ratio_from_fields(self, tmp_path):
        rep = run_check_theorem(small_cfg(tmp_path), plots=False)
        assert rep.ok and len(rep.rows) == 8
        rows = read_rows(tmp_path / "theorem_check.csv")
        for r in rows:
            assert float(r["ratio"]) == float(r["lhs_qroot"]) / float(r["rhs_total"])
            assert float(r["lhs_mean"]) <= float(r["lhs_qroot"])
        assert [r["cell_id"] for r in rows] == [c.cell_id for c in small_cfg(tmp_path).cells()]

    def test_zero_profile_segregated(self, tmp_path):
        rep = run_check_theorem(small_cfg(tmp_path, profiles=[ProfileSpec.parse("iid:s=0")]), plots=False)
        assert not rep.rows and len(rep.zero_rows) == 4
        assert all(r.lhs == 0 for r in rep.zero_rows)
        assert len(read_rows(tmp_path / "skipped.csv")) == 4

    def test_range_violations_skipped_with_reason(self, tmp_path):
        cfg = small_cfg(tmp_path, pairs=[NormPair(1, 3), NormPair(1.5, math.inf), NormPair(1.5, 3)],
                        dims=[(1, 3), (2, 2)])
        rep = run_check_theorem(cfg, plots=False)
        assert len(rep.rows) == 2
        skipped = read_rows(tmp_path / "skipped.csv")
        assert len(skipped) == 10 and all(r["reason"] for r in skipped)

    def test_scale_invariance(self, tmp_path):
        a = run_check_theorem(small_cfg(tmp_path / "a", profiles=[ProfileSpec.parse("iid")]), plots=False)
        b = run_check_theorem(small_cfg(tmp_path / "b", profiles=[ProfileSpec.parse("iid:s=10")]), plots=False)
        np.testing.assert_allclose([r.ratio for r in a.rows], [r.ratio for r in b.rows], rtol=1e-8)

    def test_baseline(self, tmp_path):
        rep = run_check_theorem(small_cfg(tmp_path), plots=False)
        path = tmp_path / "base.json"
        ok, msg = check_baseline(rep, path)
        assert ok and "written" in msg
        assert check_baseline(rep, path)[0]
        json.dump({"max_ratio": 1e-6, "max_ratio_se": 0.0}, path.open("w"))
        assert not check_baseline(rep, path)[0]


class TestConjectureCheck:
    def test_iid_1x1(self, tmp_path):
        cfg = small_cfg(tmp_path, profiles=[ProfileSpec.parse("iid")], pairs=[NormPair(1.5, 3)], dims=[(1, 1)],
                        n_samples=20_000)
        rep = run_check_conjecture(cfg, plots=False)
        row = rep.rows[0]
        expect = SQRT_2_OVER_PI / (2 + SQRT_2_OVER_PI)
        assert abs(row.ratio - expect) < 4 * row.ratio_se
        assert abs(expect - 0.285) < 1e-3

    def test_includes_closed_range_pairs(self, tmp_path):
        cfg = small_cfg(tmp_path, pairs=[NormPair(1, 3), NormPair(2, math.inf)], dims=[(1, 2), (3, 3)])
        rep = run_check_conjecture(cfg, plots=False)
        assert len(rep.rows) == 8 and all(r.ratio > 0 for r in rep.rows)

    def test_diagonal_subfamily(self, tmp_path):
        cfg = small_cfg(tmp_path, profiles=[ProfileSpec.parse("diagonal:alpha=0.5")], n_samples=400,
                        dims=[(4, 4)])
        rep = run_check_conjecture(cfg, plots=False)
        assert rep.ok
        assert all(r.extra["diag_dev_in_se"] <= 4 for r in rep.rows)


class TestOtherChecks:
    def test_chevet_single_entry(self, tmp_path):
        cfg = small_cfg(tmp_path, profiles=[ProfileSpec.parse("tensor:x=e1,y=e1")], pairs=[NormPair(1.5, 4)],
                        dims=[(8, 8)], n_samples=20_000)
        row = run_check_chevet(cfg, plots=False).rows[0]
        assert row.rhs == 2.0
        assert abs(row.ratio - SQRT_2_OVER_PI / 2) < 4 * row.ratio_se

    def test_chevet_rejects_non_tensor(self, tmp_path):
        with pytest.raises(ConfigError):
            run_check_chevet(small_cfg(tmp_path), plots=False)
        with pytest.raises(ConfigError):
            run_check_chevet(small_cfg(tmp_path, profiles=[ProfileSpec.parse("tensor")], dims=[(2, 3)]))

    def test_diagonal(self, tmp_path):
        cfg = small_cfg(tmp_path, profiles=[ProfileSpec.parse("diagonal:alpha=0.5")],
                        pairs=[NormPair(2, 2), NormPair(1.5, 3)], dims=[(1, 1), (5, 5)], n_samples=300)
        rep = run_check_diagonal(cfg, plots=False)
        assert rep.ok
        one = rep.rows[0]
        np.testing.assert_allclose(one.emax_quad, SQRT_2_OVER_PI, rtol=1e-10)
        np.testing.assert_allclose(one.comparator, math.sqrt(math.log(4)), rtol=1e-15)
        assert all(r.mismatches == 0 and r.max_rel_dev <= 1e-9 for r in rep.rows)
        with pytest.raises(ConfigError):
            run_check_diagonal(small_cfg(tmp_path))

    def test_concentration_bound_column(self, tmp_path):
        cfg = small_cfg(tmp_path, concentration_samples=2000, t_grid=(0.5, 1.0),
                        concentration_cases=[("u", np.array([1.0]), 2.0), ("z", np.zeros(3), 2.0)])
        rep = run_check_concentration(cfg, plots=False)
        assert rep.ok and len(rep.rows) == 2 and rep.skipped[0][0] == "z"
        for r in read_rows(tmp_path / "concentration_check.csv"):
            assert float(r["bound"]) == concentration_tail([1.0], 2.0, float(r["t"]))


class TestReports:
    def _report(self, ratios):
        rep = RatioReport("demo")
        for k, r in enumerate(ratios):
            rep.add(RatioRow(f"c{k}", "iid", 2 ** (k % 3 + 1), 2, 1.5 if k % 2 else 2.0, 3.0, r, 0.01, 1.0))
        return rep

    def test_summary_permutation_invariant(self):
        vals = [0.5, 2.0, 1.0, 4.0, 0.25]
        a, b = self._report(vals), self._report(vals[::-1])
        assert a.summary() == b.summary()
        s = a.summary()
        assert s["min"] == 0.25 and s["max"] == 4.0
        np.testing.assert_allclose(s["geomean"], 1.0, rtol=1e-15)

    def test_zero_rhs_segregated(self):
        rep = RatioReport("demo")
        rep.add(RatioRow("z", "iid", 1, 1, 2.0, 2.0, 0.0, 0.0, 0.0))
        assert not rep.rows and rep.zero_rows

    def test_emit_plots(self, tmp_path):
        rep = self._report([0.5, 2.0, 1.0, 4.0])
        paths = emit_plots(rep, tmp_path / "a")
        dats = [p for p in paths if p.suffix == ".dat"]
        assert len(dats) == len({(r.p_star, r.q) for r in rep.rows})
        again = emit_plots(rep, tmp_path / "b")
        for p, q in zip(paths, again):
            assert p.read_bytes() == q.read_bytes()

    def test_emit_plots_empty(self, tmp_path):
        with pytest.raises(ValueError):
            emit_plots(RatioReport("demo"), tmp_path / "e")
        assert not (tmp_path / "e").exists()

    def test_csv_round_trip(self, tmp_path):
        v = [0.1, 1 / 3, math.pi * 1e-300, math.inf]
        write_csv(tmp_path / "x.csv", ["v"], [[x] for x in v])
        assert [float(r["v"]) for r in read_rows(tmp_path / "x.csv")] == v


class TestDeterminism:
    def test_byte_identical_and_worker_independent(self, tmp_path):
        def files(d):
            return {p.name: p.read_bytes() for p in sorted(d.glob("*.csv"))}

        run_sweep(small_cfg(tmp_path / "a"), plots=False)
        run_sweep(small_cfg(tmp_path / "b"), plots=False)
        run_sweep(small_cfg(tmp_path / "c"), workers=2, plots=False)
        a = files(tmp_path / "a")
        assert a and a == files(tmp_path / "b") == files(tmp_path / "c")

    def test_dump_samples(self, tmp_path):
        run_check_conjecture(small_cfg(tmp_path), dump=tmp_path / "dump", plots=False)
        rows = read_rows(tmp_path / "dump" / "samples_0000.csv")
        assert len(rows) == 20 and rows[0]["sample_index"] == "0"


class TestCli:
    def test_usage_errors_exit_1(self, tmp_path):
        with pytest.raises(SystemExit) as e:
            main(["bogus"])
        assert e.value.code == 1
        with pytest.raises(SystemExit) as e:
            main(["estimate", "--pair", "3,3"])
        assert e.value.code == 1
        bad = tmp_path / "c.toml"
        bad.write_text("bogus = 1\n")
        assert main(["check-theorem", "--config", str(bad), "--out", str(tmp_path)]) == 1
        assert main(["estimate", "--profile", "diagonal", "-m", "2", "-n", "3"]) == 1

    def test_estimate_and_bound(self, tmp_path, capsys):
        assert main(["estimate", "-m", "3", "-n", "3", "--samples", "10",
                     "--dump-samples", str(tmp_path / "s.csv")]) == 0
        assert "mean" in capsys.readouterr().out
        assert len(read_rows(tmp_path / "s.csv")) == 10
        assert main(["bound", "--which", "conjecture", "-m", "1", "-n", "1", "--pair", "1.5,3"]) == 0
        out = capsys.readouterr().out.splitlines()
        np.testing.assert_allclose(float(out[-1].split(",")[2]), 2 + SQRT_2_OVER_PI, rtol=1e-10)

    def test_diagnostics(self, tmp_path, capsys):
        w = tmp_path / "w.txt"
        w.write_text("# weights\n1\n")
        assert main(["diagnostics", str(w)]) == 0
        out = capsys.readouterr().out
        assert "0.797884560803" in out
        w.write_text("x\n")
        assert main(["diagnostics", str(w)]) == 1

    def test_check_exit_codes_and_verify(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text('profiles = ["iid"]\npairs = [[1.5, 3]]\ndims = [2, 3]\nsamples = 10\n')
        out = tmp_path / "out"
        base = tmp_path / "base.json"
        args = ["check-theorem", "--config", str(cfg), "--out", str(out), "--no-plots"]
        assert main(args + ["--verify", "--baseline", str(base)]) == 0
        json.dump({"max_ratio": 1e-6, "max_ratio_se": 0.0}, base.open("w"))
        assert main(args + ["--baseline", str(base)]) == 2
        assert (out / "theorem_check.csv").exists()
