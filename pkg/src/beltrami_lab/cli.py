"""Batch runner: one subcommand per pipeline, text artifacts, deterministic output.

Exit status: 0 ok, 2 configuration error, 3 non-convergence, 4 invariant violation.
Failures print one ``status=<code> kind=<kind> key=<key> message=<json>`` line on stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .beltrami import (
    BeltramiCoefficient,
    SolveReport,
    canonical_solution,
    elliptic_sweep,
    manufactured_family,
    remark_fixture_slope,
)
from .bers import CONVENTION as METRIC_CONVENTION
from .bers import glue, run_pipeline, write_metric
from .config import COMMANDS, ConfigError, ExperimentConfig, parse_pairs
from .exceptions import InvariantError, NonConvergenceError
from .grid import GridSpec, write_field
from .presets import preset_field
from .transforms import (
    TransformPlan,
    beurling,
    beurling_operator_norm_probe,
    default_plan,
    prop22_defects,
    random_test_field,
)
from .variation import (
    report_norm,
    cauchy_riemann_defect,
    development_residual,
    theta_full,
    theta_residual,
)

log = logging.getLogger(__name__)

GRID_CONVENTION = "z[i, j] = center + ((i - n/2) + 1j*(j - n/2)) * (2*half_width/n); axis 0 real"
FOURIER_CONVENTION = "d/dz <-> pi*i*conj(xi), d/dzbar <-> pi*i*xi, P <-> 1/(pi*i*xi), T <-> conj(xi)/xi"

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_INVARIANT = 0, 2, 3, 4


# ---------------------------------------------------------------- helpers

def _spec(cfg: ExperimentConfig) -> GridSpec:
    return GridSpec(0j, cfg.grid_half_width, cfg.n)


def _coefficient(cfg: ExperimentConfig, key: str, spec: GridSpec, direction: bool = False):
    field = preset_field(spec, getattr(cfg, key))
    return BeltramiCoefficient.direction(field) if direction else BeltramiCoefficient(field)


def _require_converged(rep: SolveReport, what: str) -> None:
    if not rep.converged:
        raise NonConvergenceError(f"{what} did not converge in {rep.iterations} iterations")


def _write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def _write_csv(path: Path, header: list[str], rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return path


def manifest(cfg: ExperimentConfig, artifacts: list[str]) -> dict:
    return {
        "command": cfg.command,
        "config": cfg.serialize(),
        "config_sha256": cfg.digest(),
        "versions": {
            "beltrami_lab": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "conventions": {
            "grid": GRID_CONVENTION,
            "fourier": FOURIER_CONVENTION,
            "metric": METRIC_CONVENTION,
        },
        "artifacts": sorted(artifacts),
    }


# ---------------------------------------------------------------- commands

def cmd_solve(cfg, out):
    spec = _spec(cfg)
    mu = _coefficient(cfg, "mu", spec)
    rep = canonical_solution(mu, cfg.tol, cfg.max_iter)
    _require_converged(rep, "canonical solve")
    write_field(rep.solution, out / "solution.fld")
    report = rep.to_dict() | {"f_at_0": _pair(rep.solution.value_nearest(0)),
                              "f_at_1": _pair(rep.solution.value_at(1.0))}
    _write_json(out / "report.json", report)
    return ["solution.fld", "report.json"], {"iterations": rep.iterations, "residual": rep.residual}


def cmd_theta(cfg, out):
    spec = _spec(cfg)
    mu = _coefficient(cfg, "mu", spec)
    a = _coefficient(cfg, "a", spec, direction=True)
    res = theta_full(mu, a, cfg.tol)
    _require_converged(res.base, "canonical solve")
    write_field(res.theta, out / "theta.fld")
    summary = {
        "iterations": res.iterations,
        "theta_residual": theta_residual(res, mu),
        "theta_norm_W12_D2": report_norm(res.theta, 0),
        "theta_at_0": _pair(res.theta.value_nearest(0)),
        "theta_at_1": _pair(res.theta.value_at(1.0)),
    }
    _write_json(out / "theta.json", summary)
    return ["theta.fld", "theta.json"], summary


def cmd_holomorphy(cfg, out):
    spec = _spec(cfg)
    mu = _coefficient(cfg, "mu", spec)
    a = _coefficient(cfg, "a", spec, direction=True)
    th = theta_full(mu, a, cfg.tol)
    tnorm = report_norm(th.theta, cfg.k)
    rows = []
    for s in cfg.floats("s_list"):
        d = cauchy_riemann_defect(mu, a, s, cfg.k, cfg.tol, jobs=cfg.jobs)
        c = cauchy_riemann_defect(mu, a, s, cfg.k, cfg.tol, antiholomorphic=True, jobs=cfg.jobs)
        rows.append((s, d, d / tnorm, c / tnorm))
    _write_csv(out / "holomorphy.csv", ["s", "defect", "relative_defect", "conjugate_control"], rows)
    summary = {"theta_norm": tnorm, "max_relative_defect": max(r[2] for r in rows),
               "min_conjugate_control": min(r[3] for r in rows)}
    return ["holomorphy.csv"], summary


def cmd_develop(cfg, out):
    spec = _spec(cfg)
    mu = _coefficient(cfg, "mu", spec)
    a = _coefficient(cfg, "a", spec, direction=True)
    table = development_residual(mu, a, cfg.floats("s_list"), cfg.k, cfg.tol)
    _write_csv(out / "develop.csv", ["k", "s", "residual_over_s"], [(cfg.k, s, r) for s, r in table])
    vals = [r for _, r in table]
    return ["develop.csv"], {"strictly_decreasing": all(b < a_ for a_, b in zip(vals, vals[1:]))}


def cmd_estimate(cfg, out):
    spec = _spec(cfg)
    cases = manufactured_family(cfg.cases, cfg.seed)
    chunks = [cases[i::cfg.jobs] for i in range(cfg.jobs)]
    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        parts = list(pool.map(lambda c: elliptic_sweep(spec, c, cfg.k, cfg.p), chunks))
    rows = sorted((r for part in parts for r in part), key=lambda r: r["case_id"])
    cols = ["case_id", "k", "p", "r", "R", "ratio"]
    _write_csv(out / "estimate.csv", cols, ([r[c] for c in cols] for r in rows))
    return ["estimate.csv"], {"max_ratio": max(r["ratio"] for r in rows), "cases": len(rows)}


def cmd_bers(cfg, out):
    spec = _spec(cfg)
    glued = glue(_coefficient(cfg, "mu1", spec), _coefficient(cfg, "mu2", spec))
    result = run_pipeline(glued, cfg.tol)
    _require_converged(result.uniformization.report, "glued canonical solve")
    summary = result.summary()
    write_metric(result.metric, out, {"summary": summary})
    _write_json(out / "summary.json", summary)
    return ["g_zz.fld", "g_zzbar.fld", "g_zbzb.fld", "metric.json", "summary.json"], summary


def cmd_fixtures(cfg, out):
    spec = _spec(cfg)
    plan = default_plan(spec)
    rng = np.random.default_rng(cfg.seed)
    slopes = {repr(q): {"slope": remark_fixture_slope(q), "expected": -2 / q} for q in cfg.floats("q_list")}
    iso, p22 = [], []
    for _ in range(cfg.trials):
        u = random_test_field(spec, rng)
        iso.append(float(np.linalg.norm(beurling(plan, u).samples) / np.linalg.norm(u.samples)))
        p22.append(prop22_defects(plan, u))
    summary = {
        "remark_slopes": slopes,
        "isometry_max_deviation": max(abs(x - 1) for x in iso),
        "dzbar_P_defect_max": max(d[0] for d in p22),
        "dz_P_minus_T_defect_max": max(d[1] for d in p22),
    }
    _write_json(out / "fixtures.json", summary)
    return ["fixtures.json"], summary


def cmd_probe_np(cfg, out):
    plan = TransformPlan(_spec(cfg))
    rows = [(p, beurling_operator_norm_probe(plan, p, cfg.trials, cfg.seed)) for p in cfg.floats("p_list")]
    _write_csv(out / "probe.csv", ["p", "ratio_lower_bound"], rows)
    return ["probe.csv"], {"max_ratio": max(r for _, r in rows)}


HANDLERS = {
    "solve": cmd_solve,
    "theta": cmd_theta,
    "holomorphy": cmd_holomorphy,
    "develop": cmd_develop,
    "estimate": cmd_estimate,
    "bers": cmd_bers,
    "fixtures": cmd_fixtures,
    "probe-np": cmd_probe_np,
}


def _pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def run(cfg: ExperimentConfig) -> dict:
    """Execute one configured command; returns the summary written to ``summary`` in the manifest."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    artifacts, summary = HANDLERS[cfg.command](cfg, out)
    _write_json(out / "manifest.json", manifest(cfg, artifacts) | {"summary": summary})
    return summary


# ---------------------------------------------------------------- argv

FLAG_KEYS = {
    "n": int, "half_width": float, "tol": float, "max_iter": int, "out": str, "seed": int,
    "jobs": int, "mu": str, "a": str, "mu1": str, "mu2": str, "k": int, "p": float,
    "s_list": str, "cases": int, "q_list": str, "p_list": str, "trials": int,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError("argv", message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="beltrami-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat 'key = value' file; flags override it")
        for key in FLAG_KEYS:
            # strings so that config coercion reports the offending key itself
            sp.add_argument("--" + key.replace("_", "-"), dest=key, default=None, metavar=key.upper())
        sp.add_argument("-v", "--verbose", action="store_true")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values: dict[str, str] = {}
    if args.config:
        try:
            values.update(parse_pairs(Path(args.config).read_text()))
        except OSError as exc:
            raise ConfigError("config", f"cannot read {args.config}: {exc.strerror}") from None
    values.update({k: v for k, v in vars(args).items() if k in FLAG_KEYS and v is not None})
    values["command"] = args.command
    return ExperimentConfig.from_mapping(values)


def _fail(code: int, kind: str, message: str, key: str = "-") -> int:
    print(f"status={code} kind={kind} key={key} message={json.dumps(message)}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", exc.reason, exc.key)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        summary = run(cfg)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", exc.reason, exc.key)
    except NonConvergenceError as exc:
        return _fail(EXIT_NONCONVERGENCE, "nonconvergence", str(exc))
    except InvariantError as exc:
        return _fail(EXIT_INVARIANT, "invariant", str(exc))
    except OSError as exc:
        return _fail(EXIT_CONFIG, "config", f"output not writable: {exc}", "out")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
