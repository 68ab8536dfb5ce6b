"""``nemlab`` command line: solve, sweep, simulate and fit.

Parameters come from three layers, highest precedence first: command-line
flags, a flat ``key=value`` config file (``--config``, ``#`` starts a
comment) and built-in defaults.  Every parameter is validated before any
computation starts.

Exit codes: 0 success, 1 invalid input, 2 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import math
import sys
from dataclasses import dataclass
from typing import Any, Callable

from .continuous_market import JointParams, solve_joint
from .errors import DomainError, NemlabError
from .fit import fit_qgaussian, read_series
from .maxent import QuadSpec
from .parallel import default_threads, pmap
from .qmath import QParams
from .simulate import SERIES_HEADER, SimConfig, run_ensemble, run_series
from .spin_market import ModelParams, self_consistent_bias
from .xy_market import XYParams, solve_order_parameter

log = logging.getLogger("nemlab")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2
FAILURE_LIMIT = 0.01

SOLVE_COLUMNS = (
    "model", "q", "beta", "J", "L", "mu", "m_star", "z_q",
    "active_fraction", "price_change", "converged", "iterations",
)
FIT_COLUMNS = ("q_hat", "beta_hat", "loc", "loglik", "ks", "n")


class InputError(Exception):
    """Invalid user input; maps to exit code 1."""


def _choice(*options: str) -> Callable[[str], str]:
    def conv(raw: str) -> str:
        if raw not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return raw
    return conv


def _u64(raw: str) -> int:
    v = int(raw)
    if not 0 <= v < 2**64:
        raise ValueError("must be an unsigned 64-bit integer")
    return v


def _count(raw: str) -> int:
    v = int(raw)
    if v < 1:
        raise ValueError("must be >= 1")
    return v


@dataclass(frozen=True)
class Param:
    type: Callable[[str], Any]
    default: Any
    help: str


# name -> spec; flags are --name, config keys are name
PARAMS: dict[str, Param] = {
    "model": Param(_choice("discrete", "xy", "joint"), "discrete", "model selector"),
    "q": Param(float, 1.0, "entropic index"),
    "beta": Param(float, 1.0, "inverse temperature"),
    "J": Param(float, 1.0, "herding coupling"),
    "L": Param(float, 0.0, "contrarian coupling"),
    "mu": Param(float, 0.0, "chemical potential"),
    "N": Param(_count, 100, "number of investors"),
    "lambda": Param(float, 1.0, "market depth"),
    "m0": Param(float, 0.5, "initial order parameter"),
    "field": Param(float, 0.0, "static external field (solve/sweep)"),
    "variant": Param(_choice("bornholdt", "effective"), "bornholdt", "discrete: contrarian form"),
    "averaging": Param(_choice("escort", "ordinary"), "escort", "discrete: averaging for self-consistency"),
    "y": Param(float, 1.0, "xy: fixed demand magnitude"),
    "domain": Param(_choice("half", "full"), "half", "xy: angle domain [0,pi] or [0,2pi)"),
    "c": Param(float, 0.0, "joint: holding cost"),
    "y_max": Param(float, 1.0, "joint: maximal demand"),
    "H0": Param(_choice("linear", "quadratic"), "linear", "joint: non-interacting energy c*y or c*y^2"),
    "quad_order": Param(int, 32, "initial Gauss-Legendre order"),
    "quad_max": Param(int, 2048, "maximal Gauss-Legendre order"),
    "quad_rtol": Param(float, 1e-8, "quadrature convergence tolerance"),
    "steps": Param(_count, 1000, "simulate: number of steps T"),
    "rho": Param(float, 0.0, "simulate: AR(1) persistence of the field"),
    "s": Param(float, 0.0, "simulate: AR(1) innovation scale"),
    "h_init": Param(float, 0.0, "simulate: initial field"),
    "sim_m0": Param(float, 0.0, "simulate: initial order parameter"),
    "x0": Param(float, 100.0, "simulate: initial price"),
    "price_mode": Param(_choice("relative", "level"), "relative", "simulate: dx = d/lambda or x = d/lambda"),
    "replicas": Param(_count, 1, "simulate: independent series (seeds seed, seed+1, ...)"),
    "input": Param(str, None, "fit: input CSV path"),
    "column": Param(str, None, "fit: column name (default dx when present)"),
    "report": Param(str, None, "fit: path for the text report (default: stderr)"),
    "grid": Param(str, None, "sweep: param=start:stop:step"),
    "grid2": Param(str, None, "sweep: optional second param=start:stop:step"),
    # global
    "out": Param(str, None, "output path (default: stdout)"),
    "format": Param(_choice("csv", "json"), "csv", "output format"),
    "seed": Param(_u64, 0, "64-bit RNG seed"),
    "threads": Param(_count, None, "worker processes (default $NEMLAB_THREADS or 1)"),
}

COMMON = ("out", "format", "seed", "threads")
MODEL_KEYS = ("model", "q", "beta", "J", "L", "mu", "N", "lambda", "m0", "variant", "averaging",
              "y", "domain", "c", "y_max", "H0", "quad_order", "quad_max", "quad_rtol")
COMMAND_KEYS = {
    "solve": MODEL_KEYS + ("field",),
    "sweep": MODEL_KEYS + ("field", "grid", "grid2"),
    "simulate": MODEL_KEYS + ("steps", "rho", "s", "h_init", "sim_m0", "x0", "price_mode", "replicas"),
    "fit": ("input", "column", "report"),
}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nemlab",
        description="Nonextensive market models: equilibrium solves, sweeps, price simulation and q-Gaussian fits.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="{solve,sweep,simulate,fit}")
    helps = {
        "solve": "solve the mean-field self-consistency for one parameter set",
        "sweep": "solve over a one- or two-parameter grid",
        "simulate": "generate a price series by repeated equilibrium sampling",
        "fit": "fit a q-Gaussian to a return series",
    }
    for cmd, keys in COMMAND_KEYS.items():
        p = sub.add_parser(cmd, help=helps[cmd], description=helps[cmd])
        p.add_argument("--config", metavar="PATH", help="key=value config file")
        for name in keys + COMMON:
            spec = PARAMS[name]
            # raw strings; conversion and validation happen after merging layers
            p.add_argument(_flag(name), dest=name, default=None, metavar=name.upper(),
                           help=spec.help + ("" if spec.default is None else f" (default {spec.default})"))
    return parser


def read_config(path: str) -> dict[str, str]:
    """Parse a flat ``key=value`` file; ``#`` starts a comment."""
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read config file {path!r}: {exc.strerror}") from None
    out: dict[str, str] = {}
    for k, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{k}: expected key=value, got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in PARAMS:
            raise InputError(f"{path}:{k}: unknown key {key!r}")
        out[key] = val
    return out


def resolve(command: str, flags: dict[str, str | None], config: dict[str, str]) -> dict[str, Any]:
    """Merge flag > config > default and convert every value."""
    allowed = set(COMMAND_KEYS[command] + COMMON)
    for key in config:
        if key not in allowed:
            raise InputError(f"config key {key!r} does not apply to '{command}'")
    values: dict[str, Any] = {}
    for key in sorted(allowed):
        raw = flags.get(key)
        if raw is None:
            raw = config.get(key)
        if raw is None:
            values[key] = PARAMS[key].default
            continue
        try:
            values[key] = PARAMS[key].type(raw)
        except ValueError as exc:
            raise InputError(f"invalid value {raw!r} for {key}: {exc}") from None
    if values["threads"] is None:
        values["threads"] = default_threads()
    return values


def model_params(v: dict[str, Any]):
    """Build the model's parameter object (validated by its constructor)."""
    qp = QParams(v["q"], v["beta"])
    quad = QuadSpec(v["quad_order"], v["quad_max"], v["quad_rtol"])
    if v["model"] == "discrete":
        return ModelParams(v["J"], v["L"], v["mu"], v["N"], v["lambda"], qp, v["variant"], v["averaging"])
    if v["model"] == "xy":
        return XYParams(v["J"], v["y"], v["N"], v["lambda"], qp, v["domain"], quad)
    return JointParams(v["J"], v["L"], v["mu"], v["c"], v["y_max"], v["N"], v["lambda"], qp, v["H0"], quad)


def _check_m0(m0: float) -> None:
    if not abs(m0) <= 1.0:
        raise DomainError(f"|m0| <= 1 required, got {m0!r}")


def solve_row(v: dict[str, Any]) -> dict[str, Any]:
    """One solve; returns a row keyed by SOLVE_COLUMNS."""
    params = model_params(v)
    m0, h = v["m0"], v["field"]
    if v["model"] == "discrete":
        sol = self_consistent_bias(params, m0, field=h)
        z, active = sol.distribution.z_q, sol.active_fraction
    elif v["model"] == "xy":
        sol = solve_order_parameter(params, m0, field=h)
        z, active = sol.distribution.z_q, sol.cos2_mean
    else:
        sol = solve_joint(params, m0, field=h)
        z = sol.joint_density.z_q
        active = 1.0 - sol.joint_density.branch_mass(0)
    return {
        "model": v["model"], "q": v["q"], "beta": v["beta"], "J": v["J"], "L": v["L"], "mu": v["mu"],
        "m_star": sol.m_star, "z_q": z, "active_fraction": active, "price_change": sol.price_change,
        "converged": bool(sol.converged), "iterations": sol.iterations,
    }


def _failed_row(v: dict[str, Any]) -> dict[str, Any]:
    nan = math.nan
    return {
        "model": v["model"], "q": v["q"], "beta": v["beta"], "J": v["J"], "L": v["L"], "mu": v["mu"],
        "m_star": nan, "z_q": nan, "active_fraction": nan, "price_change": nan,
        "converged": False, "iterations": 0,
    }


# -- output ---------------------------------------------------------------

def _cell(x: Any) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _json_value(x: Any) -> Any:
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def render(rows: list[dict[str, Any]], columns: tuple[str, ...], fmt: str) -> str:
    if fmt == "json":
        return json.dumps([{c: _json_value(r[c]) for c in columns} for r in rows], indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r[c]) for c in columns])
    return buf.getvalue()


def emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write output {out!r}: {exc.strerror}") from None


# -- sweep grid -----------------------------------------------------------

SWEEPABLE = ("q", "beta", "J", "L", "mu", "lambda", "m0", "field", "y", "c", "y_max", "betaJ")


def parse_grid(spec: str) -> tuple[str, list[float]]:
    """``param=start:stop:step`` -> (param, inclusive list of values)."""
    if "=" not in spec:
        raise InputError(f"grid spec {spec!r} must look like param=start:stop:step")
    name, rng = (s.strip() for s in spec.split("=", 1))
    if name not in SWEEPABLE:
        raise InputError(f"cannot sweep {name!r}; choose from {', '.join(SWEEPABLE)}")
    parts = rng.split(":")
    if len(parts) != 3:
        raise InputError(f"grid spec {spec!r} must have start:stop:step")
    try:
        start, stop, step = (float(p) if p.strip() else 0.0 for p in parts)
    except ValueError:
        raise InputError(f"grid spec {spec!r} has a non-numeric bound") from None
    if not all(math.isfinite(x) for x in (start, stop, step)):
        raise InputError(f"grid spec {spec!r} must be finite")
    if step == 0.0:
        raise InputError(f"grid step must be nonzero in {spec!r}")
    span = (stop - start) / step
    if span < -1e-9:
        raise InputError(f"grid step in {spec!r} points away from stop")
    n = int(math.floor(span + 1e-9)) + 1
    if n > 1_000_000:
        raise InputError(f"grid {spec!r} has {n} points (limit 1000000)")
    return name, [start + k * step for k in range(n)]


def _sweep_point(v: dict[str, Any]) -> dict[str, Any]:
    try:
        row = solve_row(v)
    except NemlabError as exc:
        log.warning("grid point %s: %s", {k: v[k] for k in v["_swept"]}, exc)
        row = _failed_row(v)
    for k in v["_swept"]:
        row[k] = v[k]
    return row


def _point_values(base: dict[str, Any], assign: dict[str, float]) -> dict[str, Any]:
    v = dict(base)
    for name, x in assign.items():
        v[name] = x
    if "betaJ" in assign:
        v["J"] = assign["betaJ"] / v["beta"]
    v["_swept"] = tuple(assign)
    return v


# -- commands ---------------------------------------------------------------

def cmd_solve(v: dict[str, Any]) -> int:
    _check_m0(v["m0"])
    row = solve_row(v)
    emit(render([row], SOLVE_COLUMNS, v["format"]), v["out"])
    if not row["converged"]:
        log.error("self-consistency did not converge")
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_sweep(v: dict[str, Any]) -> int:
    if v["grid"] is None:
        raise InputError("sweep needs --grid param=start:stop:step")
    axes = [parse_grid(v["grid"])]
    if v["grid2"] is not None:
        axes.append(parse_grid(v["grid2"]))
        if axes[0][0] == axes[1][0]:
            raise InputError(f"both grids sweep {axes[0][0]!r}")
    names = tuple(a[0] for a in axes)
    if "betaJ" in names and "J" in names:
        raise InputError("cannot sweep betaJ and J together")
    _check_m0(v["m0"])
    points = [_point_values(v, dict(zip(names, combo))) for combo in itertools.product(*(a[1] for a in axes))]
    for p in points:
        model_params(p)  # validate every point before computing any
    rows = pmap(_sweep_point, points, v["threads"])
    extra = tuple(n for n in names if n not in SOLVE_COLUMNS)
    emit(render(rows, extra + SOLVE_COLUMNS, v["format"]), v["out"])
    bad = sum(not r["converged"] for r in rows)
    if bad:
        log.error("%d of %d grid points did not converge", bad, len(rows))
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_simulate(v: dict[str, Any]) -> int:
    config = SimConfig(
        model=v["model"], params=model_params(v), steps=v["steps"], seed=v["seed"],
        rho=v["rho"], innovation=v["s"], h0=v["h_init"], m0=v["sim_m0"], x0=v["x0"],
        price_mode=v["price_mode"],
    )
    if v["replicas"] > 1:
        if v["seed"] + v["replicas"] > 2**64:
            raise InputError("seed + replicas must stay below 2**64")
        series = run_ensemble(config, range(v["seed"], v["seed"] + v["replicas"]), v["threads"])
        columns = ("replica",) + SERIES_HEADER
    else:
        series = [run_series(config)]
        columns = SERIES_HEADER
    rows = [
        dict(zip(columns, ((k,) if len(series) > 1 else ()) + r))
        for k, s in enumerate(series) for r in s.rows()
    ]
    emit(render(rows, columns, v["format"]), v["out"])
    # per-series failure counts were already logged by run_series
    worst = max(s.failure_rate for s in series)
    if worst >= FAILURE_LIMIT:
        log.error("%.3g%% of steps failed (limit %g%%)", 100 * worst, 100 * FAILURE_LIMIT)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_fit(v: dict[str, Any]) -> int:
    if v["input"] is None:
        raise InputError("fit needs --input PATH")
    try:
        data = read_series(v["input"], v["column"])
    except OSError as exc:
        raise InputError(f"cannot read input {v['input']!r}: {exc.strerror}") from None
    res = fit_qgaussian(data)
    emit(render([res.as_row()], FIT_COLUMNS, v["format"]), v["out"])
    report = res.report()
    if v["report"] is None:
        sys.stderr.write(report)
    else:
        try:
            with open(v["report"], "w") as fh:
                fh.write(report)
        except OSError as exc:
            raise InputError(f"cannot write report {v['report']!r}: {exc.strerror}") from None
    if not res.converged:
        log.error("likelihood optimizer did not converge")
        return EXIT_NUMERIC
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "simulate": cmd_simulate, "fit": cmd_fit}


def main(argv: list[str] | None = None) -> int:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("nemlab: %(levelname)s: %(message)s"))
    log.addHandler(handler)
    if log.level == logging.NOTSET:
        log.setLevel(logging.WARNING)
    try:
        return _main(argv)
    finally:
        log.removeHandler(handler)


def _main(argv: list[str] | None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    flags = vars(ns)
    command = flags.pop("command")
    try:
        config = read_config(flags.pop("config")) if flags.get("config") else {}
        flags.pop("config", None)
        values = resolve(command, flags, config)
        return COMMANDS[command](values)
    except (InputError, DomainError) as exc:
        print(f"nemlab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NemlabError as exc:
        print(f"nemlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
