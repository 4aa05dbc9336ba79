"""Experiment harness: seeded AMIS/AIS replications written out as CSV.

A run is identified by its position in the (p, scheme, replication) grid.
AMIS and AIS runs with the same replication index share the seed, so they
start from the same generation-0 sample and can be compared pairwise.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .adaptation import EmOptions
from .schemes import SUITE_NAMES, RunConfig, RunFailed, estimate_suite, run, suite_truth
from .targets import make_target

log = logging.getLogger(__name__)

SCHEME_CHOICES = ("amis", "ais", "both")

_ALLOWED = {
    (): {"target", "scheme", "n0", "nt", "t", "ess_threshold", "proposal", "init", "seed",
         "replications", "em", "refit_em"},
    ("target",): {"name", "p", "sigma2", "b"},
    ("proposal",): {"family", "k_min", "k_max", "k"},
    ("init",): {"mode", "scales"},
    ("em",): {"max_iter", "tol", "restarts"},
    ("refit_em",): {"max_iter", "tol", "restarts"},
}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the key and line."""


@dataclass(frozen=True)
class RunSpec:
    run_id: int
    scheme: str
    p: int
    replication: int
    config: RunConfig


@dataclass
class ExperimentSpec:
    """Everything needed to reproduce one experiment.

    ``base`` carries the per-run settings; scheme, seed and replication are
    filled in for every cell of the ``dims x schemes x replications`` grid.
    """

    base: RunConfig
    target: dict
    dims: list
    schemes: list
    replications: int = 10
    seed: int = 0
    out: Path | None = None
    dump_particles: bool = False
    functions: tuple = SUITE_NAMES

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if not self.dims:
            raise ConfigError("target.p must list at least one dimension")
        for s in self.schemes:
            if s not in ("amis", "ais"):
                raise ConfigError(f"unknown scheme {s!r}")

    def runs(self) -> list:
        out = []
        for p in self.dims:
            for scheme in self.schemes:
                for r in range(self.replications):
                    cfg = replace(self.base, scheme=scheme, seed=self.seed, replication=r)
                    out.append(RunSpec(len(out), scheme, p, r, cfg))
        return out

    def make_target(self, p):
        params = {k: v for k, v in self.target.items() if k not in ("name", "p")}
        return make_target(self.target["name"], p, **params)


@dataclass
class RunRecord:
    run_id: int
    scheme: str
    p: int
    replication: int
    seed: int
    target: str
    status: str
    estimates: dict
    final_ess: float
    wall_time: float
    ess_trace: list = field(default_factory=list)
    error: str | None = None


@dataclass(frozen=True)
class SummaryRow:
    function: str
    p: int
    scheme: str
    mse: float
    se: float
    replications: int


# ---------------------------------------------------------------- config


def _line_index(node, path=(), lines=None):
    """Map every key path in a composed YAML tree to its 1-based line."""
    lines = {} if lines is None else lines
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            key_path = path + (key_node.value,)
            lines[key_path] = key_node.start_mark.line + 1
            _line_index(value_node, key_path, lines)
    return lines


def _where(lines, path):
    line = lines.get(path)
    key = ".".join(path)
    return f"{key} (line {line})" if line else key


def _check_keys(data, lines, path=()):
    allowed = _ALLOWED.get(path)
    if allowed is None:
        return
    if not isinstance(data, dict):
        raise ConfigError(f"{_where(lines, path) or 'config'}: expected a mapping")
    for key, value in data.items():
        if key not in allowed:
            raise ConfigError(f"unknown key {_where(lines, path + (key,))}; "
                              f"allowed: {', '.join(sorted(allowed))}")
        _check_keys(value, lines, path + (key,))


def _positive_int(value, lines, path, minimum=1):
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{_where(lines, path)} must be an integer >= {minimum}, got {value!r}")
    return value


def _em(data, lines, key, default):
    if key not in data:
        return default
    try:
        return EmOptions(**data[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{_where(lines, (key,))}: {exc}") from exc


def load_config_text(text: str, source: str = "<config>") -> ExperimentSpec:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: expected a mapping at the top level")
    lines = _line_index(root)
    _check_keys(data, lines)

    target = data.get("target")
    if not isinstance(target, dict) or "name" not in target or "p" not in target:
        raise ConfigError(f"{source}: target.name and target.p are required")
    dims = target["p"] if isinstance(target["p"], list) else [target["p"]]
    dims = [_positive_int(p, lines, ("target", "p"), 1) for p in dims]

    n0 = _positive_int(data.get("n0", 1000), lines, ("n0",))
    t = _positive_int(data.get("t", 10), lines, ("t",), 0)
    nt = data.get("nt")
    if isinstance(nt, list):
        nt = [_positive_int(n, lines, ("nt",)) for n in nt]
    elif nt is not None:
        nt = _positive_int(nt, lines, ("nt",))

    proposal = data.get("proposal", {}) or {}
    init = data.get("init", {}) or {}
    scheme = data.get("scheme", "amis")
    if scheme not in SCHEME_CHOICES:
        raise ConfigError(f"{_where(lines, ('scheme',))} must be one of {SCHEME_CHOICES}")
    try:
        base = RunConfig(
            family=proposal.get("family", "student-t"),
            n0=n0, nt=nt, t=t,
            init_mode=init.get("mode", "ess"),
            init_scales=init.get("scales"),
            ess_threshold=data.get("ess_threshold"),
            k_min=proposal.get("k_min", 1),
            k_max=proposal.get("k_max", 6),
            k=proposal.get("k"),
            em=_em(data, lines, "em", EmOptions()),
            refit_em=_em(data, lines, "refit_em", EmOptions(restarts=0)),
        )
        # the target name and parameters are checked by building one
        spec = ExperimentSpec(
            base=base, target=dict(target), dims=dims,
            schemes=["amis", "ais"] if scheme == "both" else [scheme],
            replications=_positive_int(data.get("replications", 10), lines, ("replications",)),
            seed=_positive_int(data.get("seed", 0), lines, ("seed",), 0),
        )
        for p in dims:
            spec.make_target(p)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if init.get("scales") is not None and any(len(init["scales"]) != p for p in dims):
        raise ConfigError(f"{_where(lines, ('init', 'scales'))} needs one scale per dimension")
    return spec


def parse_config(path) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return load_config_text(text, str(path))


# ---------------------------------------------------------------- running


def _execute(job):
    run_spec, spec = job
    target = spec.make_target(run_spec.p)
    start = time.perf_counter()
    error = None
    try:
        result = run(run_spec.config, target)
        status = "completed" if result.termination == "completed" else result.termination
    except RunFailed as exc:
        result, status, error = exc.result, "failed", str(exc)
    except Exception as exc:  # noqa: BLE001 - one bad run must not stop the others
        result, status, error = None, "failed", f"{type(exc).__name__}: {exc}"
    wall = time.perf_counter() - start

    if result is not None and len(result.archive):
        try:
            estimates = estimate_suite(result)
        except Exception:  # noqa: BLE001
            estimates = {name: float("nan") for name in SUITE_NAMES}
        trace = [(d.iteration, d.ess, d.size) for d in result.diagnostics]
        final_ess = result.diagnostics[-1].ess if result.diagnostics else float("nan")
    else:
        estimates = {name: float("nan") for name in SUITE_NAMES}
        trace, final_ess = [], float("nan")

    if spec.dump_particles and spec.out is not None and result is not None:
        result.archive.to_csv(Path(spec.out) / f"particles_{run_spec.run_id}.csv")

    return RunRecord(run_spec.run_id, run_spec.scheme, run_spec.p, run_spec.replication,
                     spec.seed, spec.target["name"], status, estimates, final_ess, wall,
                     trace, error)


def summarize(records, truth: dict, functions=SUITE_NAMES) -> list:
    """MSE and the standard error of the squared errors, per scheme.

    Only completed runs enter; ``replications`` reports how many did.
    """
    records = list(records)
    if len({(r.target, r.p) for r in records}) > 1:
        raise ValueError("summarize needs runs that share one target and dimension")
    rows = []
    for scheme in dict.fromkeys(r.scheme for r in records):
        ok = [r for r in records if r.scheme == scheme and r.status != "failed"]
        for name in functions:
            sq = np.array([(r.estimates[name] - truth[name]) ** 2 for r in ok])
            n = len(sq)
            mse = float(sq.mean()) if n else float("nan")
            se = float(sq.std(ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
            rows.append(SummaryRow(name, records[0].p, scheme, mse, se, n))
    return rows


def _fmt(x):
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_outputs(out, spec: ExperimentSpec, records, summary):
    out = Path(out)
    names = list(spec.functions)
    _write_csv(out / "runs.csv",
               ["run_id", "scheme", "p", "replication", "seed", "status", *names, "final_ess"],
               [[r.run_id, r.scheme, r.p, r.replication, r.seed, r.status,
                 *[r.estimates[n] for n in names], r.final_ess] for r in records])
    _write_csv(out / "ess_trace.csv", ["run_id", "iteration", "ess", "size"],
               [[r.run_id, it, ess, size] for r in records for it, ess, size in r.ess_trace])
    _write_csv(out / "summary.csv", ["function", "p", "scheme", "mse", "se", "replications"],
               [[s.function, s.p, s.scheme, s.mse, s.se, s.replications] for s in summary])
    _write_csv(out / "failures.csv", ["run_id", "scheme", "p", "replication", "error"],
               [[r.run_id, r.scheme, r.p, r.replication, r.error]
                for r in records if r.status == "failed"])
    # wall times vary between runs, so they live apart from the reproducible files
    _write_csv(out / "timings.csv", ["run_id", "wall_time"],
               [[r.run_id, r.wall_time] for r in records])


def run_experiment(spec: ExperimentSpec, workers: int = 1):
    """Run every cell of the grid and write the CSV files to ``spec.out``.

    Returns ``(records, summary)``; records are ordered by run id whatever
    order the workers finish in.
    """
    if spec.out is not None:
        Path(spec.out).mkdir(parents=True, exist_ok=True)
    jobs = [(r, spec) for r in spec.runs()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_execute, jobs))
    else:
        records = [_execute(job) for job in jobs]

    summary = []
    for p in spec.dims:
        subset = [r for r in records if r.p == p]
        truth = suite_truth(spec.make_target(p))
        summary.extend(summarize(subset, truth, spec.functions))
    if spec.out is not None:
        write_outputs(spec.out, spec, records, summary)
    return records, summary


# ---------------------------------------------------------------- command line


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amis-bench",
        description="Run seeded AMIS/AIS replications and write CSV summaries.")
    parser.add_argument("--config", required=True, help="YAML experiment file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)")
    parser.add_argument("--replications", type=int, help="replications per scheme and dimension")
    parser.add_argument("--scheme", choices=SCHEME_CHOICES, help="which scheme(s) to run")
    parser.add_argument("--dump-particles", action="store_true",
                        help="write particles_<runid>.csv for every run")
    parser.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = parse_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be non-negative")
            spec.seed = args.seed
        if args.replications is not None:
            if args.replications < 1:
                raise ConfigError("--replications must be at least 1")
            spec.replications = args.replications
        if args.scheme is not None:
            spec.schemes = ["amis", "ais"] if args.scheme == "both" else [args.scheme]
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    spec.out = Path(args.out)
    spec.dump_particles = args.dump_particles

    records, _ = run_experiment(spec, workers=max(1, args.workers))
    failed = [r for r in records if r.status == "failed"]
    for r in failed:
        print(f"run {r.run_id} ({r.scheme}, p={r.p}, replication {r.replication}) failed: "
              f"{r.error}", file=sys.stderr)
    print(f"{len(records) - len(failed)}/{len(records)} runs completed; results in {spec.out}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
