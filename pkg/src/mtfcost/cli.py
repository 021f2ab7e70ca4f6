"""Command-line front end.

Exit codes: 0 success, 2 usage or parameter error, 3 numeric failure (a
partial report is still printed).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import quad
from .analytic import MomentRequest, finiteness_threshold, limit_moment
from .report import build_moment_report, monte_carlo_block, quadrature_block
from .sim import (
    SamplingError,
    SimConfig,
    empirical_laplace,
    simulate_finite_n,
    simulate_limit,
)
from .subordinator import (
    DomainError,
    GammaExponent,
    GenGammaExponent,
    PitmanYorMixture,
    StableExponent,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
SEED_ENV = "MTFCOST_SEED"

# family -> (required flags, allowed flags)
MODEL_FLAGS = {
    "gamma": ({"theta"}, {"theta"}),
    "stable": ({"gamma"}, {"gamma", "mass"}),
    "gg": ({"gamma"}, {"gamma", "u", "mass"}),
    "py": ({"gamma", "theta"}, {"gamma", "theta"}),
}

DEFAULTS = {
    "reps": 100_000,
    "workers": 1,
    "rel_tol": quad.DEFAULT_SPEC.rel_tol,
    "abs_tol": quad.DEFAULT_SPEC.abs_tol,
    "max_subdiv": quad.DEFAULT_SPEC.max_subdivisions,
    "format": "json",
    "engine": "exact",
    "out_dir": ".",
    "theta_max": 10.0,
    "theta_num": 50,
    "gamma_num": 50,
    "n_list": "10,100,1000",
    "summary_k": 2,
}


class UsageError(Exception):
    pass


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


def _count(text: str) -> int:
    """Integer flag that also accepts scientific notation such as 1e6."""
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value.is_integer():
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    return int(value)


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    raise TypeError(type(o).__name__)


def _csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


# --- argument handling ----------------------------------------------------------


def _add_model(p: argparse.ArgumentParser):
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=sorted(MODEL_FLAGS))
    g.add_argument("--gamma", type=float, help="stability index in (0, 1)")
    g.add_argument("--u", type=float, help="tempering parameter (gg only)")
    g.add_argument("--theta", type=float, help="Dirichlet mass (gamma) or PY concentration (py)")
    g.add_argument("--mass", type=float, help="time-scaling multiplier (stable, gg)")


def _add_quad(p):
    g = p.add_argument_group("quadrature")
    g.add_argument("--rel-tol", type=float)
    g.add_argument("--abs-tol", type=float)
    g.add_argument("--max-subdiv", type=_count)


def _add_sim(p):
    g = p.add_argument_group("simulation")
    g.add_argument("--reps", type=_count, help="replications (1e6 accepted)")
    g.add_argument("--seed", type=_count, help=f"RNG seed; falls back to ${SEED_ENV}, then a fresh seed")
    g.add_argument("--workers", type=_count)


def _add_size(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--n", type=_count, help="number of items")
    g.add_argument("--limit", action="store_true", default=None, help="n -> infinity")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtfcost", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=_version())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moments", help="limiting moments: closed form, quadrature, Monte Carlo")
    _add_model(p)
    p.add_argument("--k", type=_count)
    p.add_argument("--verify", action="store_true", default=None)
    p.add_argument("--simulate", action="store_true", default=None)
    p.add_argument("--format", choices=["json", "csv"])
    p.add_argument("--out")
    _add_quad(p)
    _add_sim(p)

    p = sub.add_parser("laplace", help="Laplace transform of the search cost on an s-grid")
    _add_model(p)
    _add_size(p)
    p.add_argument("--s", type=_floats, help="comma-separated s values")
    p.add_argument("--s-grid", help="start:stop:num, evenly spaced")
    p.add_argument("--simulate", action="store_true", default=None)
    p.add_argument("--out")
    _add_quad(p)
    _add_sim(p)

    p = sub.add_parser("simulate", help="Monte-Carlo draws of the stationary search cost")
    _add_model(p)
    _add_size(p)
    _add_sim(p)
    p.add_argument("--burn-in", type=_count, help="chain engine only; default 50 n ln n")
    p.add_argument("--engine", choices=["exact", "chain"])
    p.add_argument("--summary-k", type=_count, help="highest moment in the summary")
    p.add_argument("--out-dir")

    p = sub.add_parser("surface", help="Pitman-Yor limiting moment over a (theta, gamma) grid")
    p.add_argument("--k", type=_count)
    p.add_argument("--theta-max", type=float)
    p.add_argument("--theta-num", type=_count)
    p.add_argument("--gamma-min", type=float)
    p.add_argument("--gamma-max", type=float)
    p.add_argument("--gamma-num", type=_count)
    p.add_argument("--out")

    p = sub.add_parser("diagnostics", help="integrability diagnostic I_n(l) over a list of n")
    _add_model(p)
    p.add_argument("--l", type=_count)
    p.add_argument("--n-list", help="comma-separated n values")
    p.add_argument("--format", choices=["json", "csv"])
    p.add_argument("--out")
    _add_quad(p)

    for action in parser._subparsers._group_actions[0].choices.values():
        action.add_argument("--config", help="JSON file of option values; flags take precedence")
    return parser


def _merge(args: argparse.Namespace) -> dict:
    """Command-line values over --config values over built-in defaults."""
    given = {k: v for k, v in vars(args).items() if v is not None}
    config = {}
    if given.get("config"):
        try:
            config = json.loads(Path(given["config"]).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {given['config']}: {exc}") from None
        if not isinstance(config, dict):
            raise UsageError("config must be a JSON object")
        config = {k.replace("-", "_"): v for k, v in config.items()}
        unknown = set(config) - set(vars(args))
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    merged = {k: None for k in vars(args)}
    merged.update({k: v for k, v in DEFAULTS.items() if k in merged})
    merged.update(config)
    merged.update(given)
    return merged


def model_from_options(opts: dict):
    family = opts.get("model")
    if family is None:
        raise UsageError("--model is required")
    required, allowed = MODEL_FLAGS[family]
    present = {f for f in ("gamma", "u", "theta", "mass") if opts.get(f) is not None}
    if present - allowed:
        raise UsageError(f"--model {family} does not take {', '.join('--' + f for f in sorted(present - allowed))}")
    if required - present:
        raise UsageError(f"--model {family} requires {', '.join('--' + f for f in sorted(required - present))}")
    try:
        if family == "gamma":
            return GammaExponent(opts["theta"])
        if family == "stable":
            return StableExponent(opts["gamma"], mass=opts.get("mass") or 1.0)
        if family == "gg":
            return GenGammaExponent(opts["gamma"], u=opts.get("u") or 0.0, mass=opts.get("mass") or 1.0)
        return PitmanYorMixture(opts["gamma"], opts["theta"])
    except DomainError as exc:
        raise UsageError(str(exc)) from None


def _spec(opts) -> quad.QuadSpec:
    try:
        return quad.QuadSpec(rel_tol=opts["rel_tol"], abs_tol=opts["abs_tol"],
                             max_subdivisions=opts["max_subdiv"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def resolve_seed(opts) -> int:
    if opts.get("seed") is not None:
        return int(opts["seed"])
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return _count(env)
        except argparse.ArgumentTypeError:
            raise UsageError(f"${SEED_ENV} is not an integer: {env!r}") from None
    return int(np.random.SeedSequence().entropy % 2**64)


def _sim_config(opts, burn_in=None) -> SimConfig:
    try:
        return SimConfig(opts["reps"], resolve_seed(opts), opts["workers"], burn_in)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _size(opts) -> int | None:
    if opts.get("n") is not None:
        if opts["n"] < 2:
            raise UsageError("--n must be at least 2")
        return opts["n"]
    if opts.get("limit"):
        return None
    raise UsageError("one of --n or --limit is required")


# --- output --------------------------------------------------------------------


class Run:
    """Collects outputs and writes manifest siblings."""

    def __init__(self, command: str, argv: list[str], opts: dict):
        self.command = command
        self.argv = argv
        self.opts = opts
        self.started = datetime.now(timezone.utc).isoformat()

    def manifest(self, outputs: list[Path], seed: int | None = None) -> dict:
        params = {k: v for k, v in self.opts.items() if k not in ("command",) and v is not None}
        return {
            "command": self.command,
            "argv": self.argv,
            "parameters": params,
            "seed": seed,
            "version": _version(),
            "numpy": np.__version__,
            "started_utc": self.started,
            "finished_utc": datetime.now(timezone.utc).isoformat(),
            "outputs": [str(p) for p in outputs],
        }

    def emit(self, text: str, out: str | None, seed: int | None = None):
        if out is None:
            sys.stdout.write(text)
            return
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
        manifest = path.with_name(path.name + ".manifest.json")
        manifest.write_text(_json(self.manifest([path], seed)), encoding="utf-8", newline="\n")


# --- commands ------------------------------------------------------------------


def cmd_moments(opts, run: Run) -> int:
    model = model_from_options(opts)
    k = opts.get("k")
    if k is None or k < 1:
        raise UsageError("--k must be a positive integer")
    spec = _spec(opts)
    cfg = _sim_config(opts) if opts.get("simulate") else None
    report = build_moment_report(model, k)
    code = EXIT_OK
    try:
        if opts.get("verify"):
            report.quadrature = quadrature_block(model, report.analytic, k, spec)
        if cfg is not None:
            report.monte_carlo = monte_carlo_block(model, k, cfg)
    except (quad.QuadratureError, SamplingError) as exc:
        report.errors.append(str(exc))
        if getattr(exc, "partial", None) is not None:
            report.quadrature = exc.partial
        code = EXIT_NUMERIC
    data = report.to_dict()
    if opts["format"] == "json":
        text = _json(data)
    else:
        rows = []
        q = data.get("quadrature") or {}
        for l, term in enumerate(report.analytic.psi_terms, start=1):
            qt = (q.get("psi_terms") or [None] * k)[l - 1] if q else None
            rows.append(["psi", l, term if math.isfinite(term) else None, qt, None, None])
        mc = data.get("monte_carlo") or {}
        for j in range(1, k + 1):
            rows.append(["moment", j,
                         limit_moment(MomentRequest(model, j)).value,
                         None,
                         (mc.get("moments") or [None] * k)[j - 1] if mc else None,
                         (mc.get("std_errors") or [None] * k)[j - 1] if mc else None])
        text = _csv(["quantity", "order", "analytic", "quadrature", "monte_carlo", "mc_se"], rows)
    run.emit(text, opts.get("out"), cfg.seed if cfg else None)
    return code


def _s_values(opts) -> list[float]:
    if opts.get("s") is not None and opts.get("s_grid") is not None:
        raise UsageError("give either --s or --s-grid, not both")
    if opts.get("s_grid") is not None:
        try:
            a, b, num = opts["s_grid"].split(":")
            values = list(np.linspace(float(a), float(b), _count(num)))
        except (ValueError, argparse.ArgumentTypeError):
            raise UsageError("--s-grid must look like start:stop:num") from None
    elif opts.get("s") is not None:
        values = list(opts["s"])
    else:
        raise UsageError("one of --s or --s-grid is required")
    if not values or any(s < 0 or not math.isfinite(s) for s in values):
        raise UsageError("s values must be a non-empty list of non-negative numbers")
    return [float(s) for s in values]


def cmd_laplace(opts, run: Run) -> int:
    model = model_from_options(opts)
    n = _size(opts)
    s_values = _s_values(opts)
    spec = _spec(opts)
    if n is not None and n > quad.MAX_FINITE_N:
        raise UsageError(f"finite-n quadrature is limited to n <= {quad.MAX_FINITE_N}")
    cfg = _sim_config(opts) if opts.get("simulate") else None
    draws = None
    if cfg is not None:
        sample = simulate_limit(model, cfg) if n is None else simulate_finite_n(model, n, cfg)
        draws = sample.draws
    rows, code = [], EXIT_OK
    for s in s_values:
        try:
            phi = quad.laplace_limit(model, s, spec) if n is None else quad.laplace_finite_n(model, n, s, spec)
        except quad.QuadratureError as exc:
            print(f"mtfcost: s={s}: {exc}", file=sys.stderr)
            phi, code = None, EXIT_NUMERIC
        row = [s, phi]
        if draws is not None:
            row.extend(empirical_laplace(draws, s))
        rows.append(row)
    header = ["s", "phi"] + (["mc", "mc_se"] if draws is not None else [])
    run.emit(_csv(header, rows), opts.get("out"), cfg.seed if cfg else None)
    return code


def cmd_simulate(opts, run: Run) -> int:
    model = model_from_options(opts)
    n = _size(opts)
    if opts["engine"] == "chain" and n is None:
        raise UsageError("the chain engine needs a finite --n")
    if opts.get("burn_in") is not None and opts["engine"] != "chain":
        raise UsageError("--burn-in only applies to --engine chain")
    cfg = _sim_config(opts, opts.get("burn_in"))
    try:
        sample = simulate_limit(model, cfg) if n is None else simulate_finite_n(model, n, cfg, opts["engine"])
        summary = sample.summary(opts["summary_k"])
    except SamplingError as exc:
        print(f"mtfcost: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    summary["seed"] = cfg.seed
    summary["workers"] = cfg.workers
    out_dir = Path(opts["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    draws_path, summary_path = out_dir / "draws.csv", out_dir / "summary.json"
    draws_path.write_text("search_cost\n" + "".join(f"{int(d)}\n" for d in sample.draws),
                          encoding="utf-8", newline="\n")
    summary_path.write_text(_json(summary), encoding="utf-8", newline="\n")
    (out_dir / "manifest.json").write_text(_json(run.manifest([draws_path, summary_path], cfg.seed)),
                                           encoding="utf-8", newline="\n")
    sys.stdout.write(_json(summary))
    return EXIT_OK


def surface_grid(k: int, theta_max: float, theta_num: int, gamma_min: float, gamma_max: float,
                 gamma_num: int) -> list[list]:
    """Rows (theta, gamma, k, finite, moment) of Pitman-Yor limiting moments."""
    rows = []
    for theta in np.linspace(theta_max / theta_num, theta_max, theta_num):
        for gamma in np.linspace(gamma_min, gamma_max, gamma_num):
            value = limit_moment(MomentRequest(PitmanYorMixture(float(gamma), float(theta)), k))
            rows.append([float(theta), float(gamma), k, value.finite, value.value])
    return rows


def cmd_surface(opts, run: Run) -> int:
    k = opts.get("k") or 1
    if k not in (1, 2):
        raise UsageError("--k must be 1 or 2")
    gmin = opts.get("gamma_min") if opts.get("gamma_min") is not None else 0.1
    gmax = opts.get("gamma_max") if opts.get("gamma_max") is not None else (0.4 if k == 1 else 0.3)
    if not (0 < gmin <= gmax < 1) or opts["theta_max"] <= 0:
        raise UsageError("need 0 < gamma-min <= gamma-max < 1 and theta-max > 0")
    if opts["theta_num"] < 1 or opts["gamma_num"] < 1:
        raise UsageError("grid sizes must be positive")
    try:
        rows = surface_grid(k, opts["theta_max"], opts["theta_num"], gmin, gmax, opts["gamma_num"])
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    run.emit(_csv(["theta", "gamma", "k", "finite", "moment"], rows), opts.get("out"))
    return EXIT_OK


def cmd_diagnostics(opts, run: Run) -> int:
    model = model_from_options(opts)
    l = opts.get("l")
    if l is None or l < 1:
        raise UsageError("--l must be a positive integer")
    try:
        ns = [_count(t) for t in str(opts["n_list"]).split(",") if t.strip()]
    except argparse.ArgumentTypeError as exc:
        raise UsageError(str(exc)) from None
    if not ns or any(n <= l for n in ns):
        raise UsageError("every n must exceed l")
    spec = _spec(opts)
    rows, code, error = [], EXIT_OK, None
    for n in ns:
        try:
            rows.append({"n": n, "I": quad.integrability_diagnostic(model, n, l, spec)})
        except quad.QuadratureError as exc:
            rows.append({"n": n, "I": None})
            code, error = EXIT_NUMERIC, str(exc)
    values = [r["I"] for r in rows if r["I"] is not None]
    # report-only heuristic: a bounded sequence levels off, a divergent one keeps climbing
    growing = len(values) >= 2 and values[-1] > 1.5 * values[0]
    gamma = getattr(model, "gamma", None)
    data = {
        "model": model.to_dict(),
        "l": l,
        "rows": rows,
        "assessment": "growing" if growing else "bounded",
        "flagged": growing,
        "threshold": finiteness_threshold(l) if gamma is not None else None,
    }
    if error:
        data["errors"] = [error]
    if opts["format"] == "json":
        text = _json(data)
    else:
        text = _csv(["n", "l", "I_n"], [[r["n"], l, r["I"]] for r in rows])
        text += f"# {data['assessment']}\n"
    run.emit(text, opts.get("out"))
    return code


COMMANDS = {
    "moments": cmd_moments,
    "laplace": cmd_laplace,
    "simulate": cmd_simulate,
    "surface": cmd_surface,
    "diagnostics": cmd_diagnostics,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        opts = _merge(args)
        return COMMANDS[args.command](opts, Run(args.command, argv, opts))
    except UsageError as exc:
        print(f"mtfcost {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (quad.QuadratureError, SamplingError) as exc:
        print(f"mtfcost {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
