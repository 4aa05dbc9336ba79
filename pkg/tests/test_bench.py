import csv

import numpy as np
import pytest

from amis import bench
from amis.bench import ConfigError, RunRecord, load_config_text, main, parse_config, summarize

SMALL = """\
target:
  name: banana
  p: 2
scheme: both
n0: 200
nt: 50
t: 2
replications: 2
seed: 3
"""


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def record(scheme, e_y1, status="completed"):
    est = {name: 0.0 for name in bench.SUITE_NAMES}
    est["E_y1"] = e_y1
    return RunRecord(0, scheme, 2, 0, 0, "banana", status, est, 1.0, 0.0)


class TestConfig:
    def test_minimal_fills_defaults(self):
        spec = load_config_text("target: {name: banana, p: 5}\n")
        assert spec.dims == [5] and spec.schemes == ["amis"]
        assert spec.base.nt is None
        assert spec.base.batch_sizes(5)[1] == bench.RunConfig().batch_sizes(5)[1]
        assert spec.base.family == "student-t" and spec.base.init_mode == "ess"

    def test_paper_protocol(self, tmp_path):
        path = tmp_path / "paper.yaml"
        path.write_text("""\
target: {name: banana, p: [5, 10, 20], sigma2: 100, b: 0.03}
scheme: both
n0: 100000
nt: 10000
t: 10
proposal: {family: gaussian-mixture, k_min: 1, k_max: 6}
init: {mode: ess}
replications: 10
""")
        spec = parse_config(path)
        assert spec.dims == [5, 10, 20] and spec.schemes == ["amis", "ais"]
        assert spec.base.batch_sizes(5) == [100000] + [10000] * 10
        assert spec.base.family == "gaussian-mixture"
        assert len(spec.runs()) == 3 * 2 * 10

    def test_negative_batch_size_names_key_and_line(self):
        with pytest.raises(ConfigError, match=r"nt \(line 3\)"):
            load_config_text("target: {name: banana, p: 2}\nn0: 10\nnt: -5\n")

    def test_unknown_key_has_line(self):
        with pytest.raises(ConfigError, match=r"proposal\.kmax \(line 4\)"):
            load_config_text("target: {name: banana, p: 2}\nproposal:\n  family: student-t\n"
                             "  kmax: 3\n")

    def test_missing_target(self):
        with pytest.raises(ConfigError, match="target"):
            load_config_text("n0: 10\n")

    def test_bad_values(self):
        with pytest.raises(ConfigError):
            load_config_text("target: {name: pear, p: 2}\n")
        with pytest.raises(ConfigError):
            load_config_text("target: {name: banana, p: 2}\nscheme: pmc\n")
        with pytest.raises(ConfigError):
            load_config_text("target: {name: banana, p: 2}\nproposal: {family: gaussian-mixture,"
                             " k_min: 3, k_max: 1}\n")
        with pytest.raises(ConfigError):
            load_config_text("target: {name: banana, p: 2}\ninit: {mode: user, scales: [1]}\n")

    def test_unreadable(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(tmp_path / "missing.yaml")


class TestSummarize:
    def test_exact_estimates(self):
        rows = summarize([record("amis", 0.0), record("amis", 0.0)], {n: 0.0 for n in bench.SUITE_NAMES})
        assert all(r.mse == 0.0 for r in rows)

    def test_symmetric_errors(self):
        a = 0.3
        rows = summarize([record("amis", a), record("amis", -a)], {n: 0.0 for n in bench.SUITE_NAMES})
        row = next(r for r in rows if r.function == "E_y1")
        assert row.mse == pytest.approx(a * a, rel=1e-15)
        assert row.se == 0.0 and row.replications == 2

    def test_failed_runs_excluded(self):
        rows = summarize([record("ais", 1.0), record("ais", 5.0, "failed")],
                         {n: 0.0 for n in bench.SUITE_NAMES})
        row = next(r for r in rows if r.function == "E_y1")
        assert row.mse == 1.0 and row.replications == 1

    def test_mixed_dimensions_rejected(self):
        other = record("amis", 0.0)
        other.p = 3
        with pytest.raises(ValueError):
            summarize([record("amis", 0.0), other], {n: 0.0 for n in bench.SUITE_NAMES})


class TestCli:
    def test_smoke_single_run(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("target: {name: banana, p: 2}\nn0: 50\nt: 0\nreplications: 1\n")
        out = tmp_path / "out"
        assert main(["--config", str(cfg), "--out", str(out)]) == 0
        for name in ("runs", "ess_trace", "summary"):
            assert (out / f"{name}.csv").exists()
        assert len(read(out / "runs.csv")) == 1
        assert len(read(out / "ess_trace.csv")) == 1
        assert {r["scheme"] for r in read(out / "summary.csv")} == {"amis"}

    def test_byte_identical_rerun_and_overrides(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text(SMALL)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["--config", str(cfg), "--out", str(out), "--seed", "11",
                         "--replications", "3", "--scheme", "ais", "--dump-particles"]) == 0
            outs.append(out)
        for name in ("runs.csv", "ess_trace.csv", "summary.csv", "particles_0.csv"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
        runs = read(outs[0] / "runs.csv")
        assert len(runs) == 3 and {r["scheme"] for r in runs} == {"ais"}
        assert {r["seed"] for r in runs} == {"11"}

    def test_summary_matches_runs_csv(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text(SMALL)
        main(["--config", str(cfg), "--out", str(tmp_path / "o")])
        runs = read(tmp_path / "o" / "runs.csv")
        truth = {"E_y1": 0.0, "V_y1": 100.0, "V_y2": 19.0}
        for row in read(tmp_path / "o" / "summary.csv"):
            if row["function"] not in truth:
                continue
            est = [float(r[row["function"]]) for r in runs if r["scheme"] == row["scheme"]]
            mse = np.mean((np.array(est) - truth[row["function"]]) ** 2)
            assert float(row["mse"]) == pytest.approx(mse, rel=1e-12)

    def test_failure_isolated(self, tmp_path, monkeypatch, capsys):
        cfg = tmp_path / "c.yaml"
        cfg.write_text(SMALL)
        assert main(["--config", str(cfg), "--out", str(tmp_path / "clean")]) == 0

        real = bench.run

        def sometimes(config, target):
            if config.scheme == "amis" and config.replication == 1:
                raise RuntimeError("boom")
            return real(config, target)

        monkeypatch.setattr(bench, "run", sometimes)
        assert main(["--config", str(cfg), "--out", str(tmp_path / "broken")]) == 1
        failures = read(tmp_path / "broken" / "failures.csv")
        assert len(failures) == 1 and "boom" in failures[0]["error"]
        clean = read(tmp_path / "clean" / "runs.csv")
        broken = read(tmp_path / "broken" / "runs.csv")
        for a, b in zip(clean, broken):
            if b["status"] != "failed":
                assert a == b
        assert "failed" in capsys.readouterr().err

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("target: {name: banana, p: 2}\nbogus: 1\n")
        assert main(["--config", str(cfg), "--out", str(tmp_path)]) == 2
        assert "bogus (line 2)" in capsys.readouterr().err

    def test_workers_do_not_change_output(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text(SMALL)
        main(["--config", str(cfg), "--out", str(tmp_path / "one")])
        main(["--config", str(cfg), "--out", str(tmp_path / "two"), "--workers", "2"])
        for name in ("runs.csv", "ess_trace.csv", "summary.csv"):
            assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()
