"""Command-line front end: simulate, sweep, cascade, verify, mms.

Every command takes ``--config PATH`` (JSON) and writes its artifacts under
``--out DIR``. Exit codes: 0 success, 1 configuration error, 2 numerical
failure, 3 verification failure, 4 tolerance-sensitive verification only.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from . import analysis
from .cascade import NoConvergence, run_cascade
from .core import FreeFrontError, InitialData, ProblemSpec, Trajectory
from .ordering import OrderingViolation
from .solver import ConfigError, MMSConfig, NonFiniteValue, SolverConfig, run_mms, simulate
from .verify import DEFAULT_RTOL, property_suite

log = logging.getLogger("freefront")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY, EXIT_TOLERANCE = 0, 1, 2, 3, 4

SECTIONS = {
    "problem": {"d1", "d2", "p", "q", "mu", "rho", "s0"},
    "initial": {"family", "amplitude", "amplitude_v", "samples_u", "samples_v"},
    "solver": {"N", "dt_init", "dt_min", "dt_max", "t_end", "blowup_threshold", "snapshot_times",
               "cfl_advection", "cfl_reaction", "stiffness_shift"},
    "sweep": {"p", "q", "amplitude", "max_runs"},
    "cascade": {"schedule", "tol", "ordering_rtol"},
    "mms": {"ladder", "dt_factor", "t_end"},
    "verify": {"ordering_rtol"},
}

FRONT_COLUMNS = ["t", "s", "s_prime", "sup_u", "sup_v", "clamp_events_cumulative"]
SNAPSHOT_COLUMNS = ["t", "y", "x", "u", "v"]
REGIME_COLUMNS = ["p", "q", "amplitude", "verdict", "status", "t_reached", "sup_end", "certified_eps", "error"]
CONVERGENCE_COLUMNS = ["N", "dt", "err_u", "err_v", "err_s", "order_u"]


# -- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    raw: dict
    spec: ProblemSpec | None
    data: InitialData | None
    solver: SolverConfig

    def require_problem(self) -> tuple[ProblemSpec, InitialData]:
        if self.spec is None:
            raise ConfigError("missing section: problem")
        if self.data is None:
            raise ConfigError("missing section: initial")
        return self.spec, self.data


def _number(section: str, key: str, value, integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    if integer:
        if int(value) != value:
            raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def _numbers(section: str, key: str, value, integer: bool = False) -> list:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{section}.{key} must be a non-empty list")
    return [_number(section, key, v, integer) for v in value]


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    for section, body in raw.items():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section: {section}")
        if not isinstance(body, dict):
            raise ConfigError(f"section {section} must be an object")
        unknown = sorted(set(body) - SECTIONS[section])
        if unknown:
            raise ConfigError(f"unknown key: {section}.{unknown[0]}")

    spec = None
    if "problem" in raw:
        body = raw["problem"]
        missing = sorted(SECTIONS["problem"] - set(body))
        if missing:
            raise ConfigError(f"missing key: problem.{missing[0]}")
        spec = ProblemSpec(**{k: _number("problem", k, v) for k, v in body.items()})

    data = None
    if "initial" in raw:
        body = raw["initial"]
        if "family" in body:
            if "samples_u" in body or "samples_v" in body:
                raise ConfigError("initial: give either family/amplitude or samples_u/samples_v")
            if "amplitude" not in body:
                raise ConfigError("missing key: initial.amplitude")
            amp = _number("initial", "amplitude", body["amplitude"])
            amp_v = _number("initial", "amplitude_v", body["amplitude_v"]) if "amplitude_v" in body else None
            data = InitialData.family(str(body["family"]), amp, amp_v)
        elif "samples_u" in body and "samples_v" in body:
            data = InitialData(_numbers("initial", "samples_u", body["samples_u"]),
                               _numbers("initial", "samples_v", body["samples_v"]))
        else:
            raise ConfigError("initial: need family + amplitude or samples_u + samples_v")

    solver_kw = {}
    for key, value in raw.get("solver", {}).items():
        if key == "snapshot_times":
            solver_kw[key] = tuple(_numbers("solver", key, value)) if value else ()
        else:
            solver_kw[key] = _number("solver", key, value, integer=(key == "N"))
    if "mms" in raw:
        body = raw["mms"]
        mms_kw = {}
        if "ladder" in body:
            mms_kw["ladder"] = tuple(_numbers("mms", "ladder", body["ladder"], integer=True))
        for key in ("dt_factor", "t_end"):
            if key in body:
                mms_kw[key] = _number("mms", key, body[key])
        solver_kw["mms"] = MMSConfig(**mms_kw)
    solver = SolverConfig(**solver_kw)
    return RunConfig(raw, spec, data, solver)


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(raw)


# -- serialization ------------------------------------------------------------

def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, int) and not isinstance(value, bool):
        return str(value)
    if isinstance(value, float) or hasattr(value, "dtype"):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, columns: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and hasattr(obj, "dtype"):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def front_rows(traj: Trajectory):
    return zip(traj.times, traj.fronts, traj.front_speeds, traj.sup_u, traj.sup_v, traj.clamp_counts)


def snapshot_rows(traj: Trajectory):
    for snap in traj.snapshots:
        n = snap.n
        for i in range(n + 1):
            y = i / n
            yield snap.t, y, y * snap.s, snap.w[i], snap.z[i]


# -- commands -----------------------------------------------------------------

def _verdict(traj: Trajectory, threshold: float):
    if len(traj.times) < 3:
        return analysis.RunVerdict("Undecided", {"reason": "fewer than 3 samples"})
    return analysis.certify_global(traj, threshold=threshold)


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    spec, data = cfg.require_problem()
    traj = simulate(spec, data, cfg.solver)
    verdict = _verdict(traj, cfg.solver.blowup_threshold)
    try:
        decay = analysis.decay_diagnostic(traj).as_dict()
    except analysis.TooShort as exc:
        decay = {"error": str(exc)}
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "front.csv", FRONT_COLUMNS, front_rows(traj))
    write_csv(out / "snapshots.csv", SNAPSHOT_COLUMNS, snapshot_rows(traj))
    write_json(out / "verdict.json", {
        "kind": verdict.kind,
        "evidence": verdict.evidence,
        "spec": spec.as_dict(),
        "config": cfg.raw,
        "status": traj.status,
        "blowup_trigger": traj.blowup_trigger,
        "t_reached": traj.times[-1],
        "clamp_events": traj.clamp_events,
        "decay": decay,
        "warnings": traj.warnings,
    })
    log.info("simulate: status %s, verdict %s", traj.status, verdict.kind)
    return EXIT_OK


def _sweep_cell(args) -> list:
    spec, family, amplitude, solver = args
    data = InitialData.family(family, amplitude)
    try:
        traj = simulate(spec, data, solver)
    except (NonFiniteValue, FreeFrontError) as exc:
        return [spec.p, spec.q, amplitude, "Error", "step_failure", None, None, None, f"{type(exc).__name__}: {exc}"]
    verdict = _verdict(traj, solver.blowup_threshold)
    eps = verdict.evidence.get("eps1") if verdict.kind == "GlobalCertified" else None
    sup_end = max(traj.sup_u[-1], traj.sup_v[-1])
    return [spec.p, spec.q, amplitude, verdict.kind, traj.status, traj.times[-1], sup_end, eps, None]


def cmd_sweep(cfg: RunConfig, out: Path, jobs: int = 1) -> int:
    spec, _ = cfg.require_problem()
    body = cfg.raw.get("sweep")
    if body is None:
        raise ConfigError("missing section: sweep")
    axes = {}
    for key in ("p", "q", "amplitude"):
        axes[key] = sorted(_numbers("sweep", key, body[key])) if key in body else None
    axes["p"] = axes["p"] or [spec.p]
    axes["q"] = axes["q"] or [spec.q]
    if axes["amplitude"] is None:
        raise ConfigError("missing key: sweep.amplitude")
    cap = _number("sweep", "max_runs", body.get("max_runs", 100), integer=True)
    cells = list(itertools.product(axes["p"], axes["q"], axes["amplitude"]))
    if len(cells) > cap:
        raise ConfigError(f"sweep has {len(cells)} cells, above sweep.max_runs = {cap}")
    family = str(cfg.raw.get("initial", {}).get("family", "parabola"))
    work = [(replace(spec, p=p, q=q), family, a, cfg.solver) for p, q, a in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_cell, work))
    else:
        rows = [_sweep_cell(w) for w in work]
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "regime_map.csv", REGIME_COLUMNS, rows)
    return EXIT_OK


def cmd_cascade(cfg: RunConfig, out: Path) -> int:
    spec, data = cfg.require_problem()
    body = cfg.raw.get("cascade", {})
    schedule = _numbers("cascade", "schedule", body["schedule"], integer=True) if "schedule" in body \
        else (1, 2, 4, 8, 16)
    tol = _number("cascade", "tol", body.get("tol", 1e-4))
    rtol = _number("cascade", "ordering_rtol", body.get("ordering_rtol", DEFAULT_RTOL))
    out.mkdir(parents=True, exist_ok=True)
    code = EXIT_OK
    try:
        result = run_cascade(spec, data, cfg.solver, schedule, tol, rtol)
    except NoConvergence as exc:
        log.warning("%s", exc)
        result = exc.result
    except OrderingViolation as exc:
        log.error("%s", exc)
        write_json(out / "cascade.json", {"ordering_violation": exc.report.as_dict(), "spec": spec.as_dict()})
        return EXIT_VERIFY
    rows = []
    for n, traj in result.levels.items():
        rows.extend([n, *r] for r in front_rows(traj))
    write_csv(out / "cascade.csv", ["n", *FRONT_COLUMNS], rows)
    write_json(out / "cascade.json", {
        "spec": spec.as_dict(),
        "schedule": list(result.levels),
        "lipschitz": result.lipschitz,
        "converged": result.converged,
        "tol": tol,
        "differences": result.differences,
        "differences_non_increasing": result.differences_non_increasing(),
        "ordering": [r.as_dict() for r in result.ordering],
        "warnings": ["Lipschitz regime"] if result.lipschitz else [],
    })
    return code


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    rtol = _number("verify", "ordering_rtol", cfg.raw.get("verify", {}).get("ordering_rtol", DEFAULT_RTOL))
    suite = property_suite(ordering_rtol=rtol, mms=cfg.solver.mms)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "suite.json", suite.as_dict())
    for check in suite.checks:
        print(f"{check.status.upper():<20} {check.name}")
    return suite.exit_code


def cmd_mms(cfg: RunConfig, out: Path) -> int:
    if cfg.spec is None:
        raise ConfigError("missing section: problem")
    solver = cfg.solver if cfg.solver.mms is not None else replace(cfg.solver, mms=MMSConfig())
    table = run_mms(cfg.spec, solver)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "convergence.csv", CONVERGENCE_COLUMNS,
              ([r[c] for c in CONVERGENCE_COLUMNS] for r in table.rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freefront", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "sweep", "cascade", "verify", "mms"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", default=Path("out"), type=Path)
        p.add_argument("--jobs", default=1, type=int)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.out, args.jobs)
        if args.command == "cascade":
            return cmd_cascade(cfg, args.out)
        if args.command == "verify":
            return cmd_verify(cfg, args.out)
        return cmd_mms(cfg, args.out)
    except NonFiniteValue as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, FreeFrontError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
