"""Command-line front end.

Every command accepts flags or an INI file (``--config``) whose
``[<command>]`` section holds the same keys with dashes written as
underscores; a ``[model]`` section may carry ``id``. Flags override the file.
Artifacts go under ``--out`` when it is given.

Exit status: 0 success, 1 configuration or validation failure, 2 numerical
tolerance or invariant failure.
"""

from __future__ import annotations

import argparse
import configparser
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import connection, deformation, exact, flows
from .fmt import fmt, write_csv
from .metrics import (
    ChartError,
    DegenerateSupportError,
    FrameError,
    ModelInvalidError,
    UPoint,
    ValidationError,
    WINDOW_X,
    WINDOW_Y,
    parse_model,
)
from .plot import HalfPlanePlot, fit_ranges

COMMANDS = ("flow", "jacobi", "crofton", "holonomy", "cmn", "genfun", "pairing", "reduce", "deform")


class ConfigError(ValueError):
    pass


class InvariantFailure(RuntimeError):
    pass


NUMERIC_ERRORS = (
    exact.ToleranceError,
    flows.StiffnessError,
    flows.CurvatureSignError,
    connection.TransportError,
    connection.RangeError,
    deformation.TruncationError,
    FrameError,
    ChartError,
    DegenerateSupportError,
    InvariantFailure,
)
CONFIG_ERRORS = (ConfigError, ValidationError, ModelInvalidError, exact.DivergentIntegralError, ValueError)


# --- option parsing ----------------------------------------------------------------


def _floats(text: str, count: int | None = None) -> tuple:
    try:
        vals = tuple(float(v) for v in str(text).split(","))
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc
    if count is not None and len(vals) != count:
        raise ConfigError(f"expected {count} numbers, got {text!r}")
    return vals


def _loop(text: str) -> list:
    return [_floats(p, 2) for p in str(text).split(";") if p.strip()]


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


# (name, converter, default, help); tolerances end in "tol"
OPTIONS = {
    "flow": [
        ("field", str, "X", "frame field X, Y or Z"),
        ("start", lambda s: _floats(s, 3), (0.0, 1.0, 0.0), "x,y,phi"),
        ("t", float, 1.0, "flow time"),
        ("tol", float, 1e-10, "integrator tolerance"),
    ],
    "jacobi": [
        ("anchor", lambda s: _floats(s, 3), (0.0, 1.0, 0.0), "x,y,phi"),
        ("t", float, 1.0, "evaluation time; the table spans [-|t|, |t|]"),
        ("tol", float, 1e-10, "integrator tolerance"),
    ],
    "crofton": [
        ("x", lambda s: _floats(s, 2), (0.0, 1.0), "first endpoint"),
        ("y", lambda s: _floats(s, 2), (0.0, math.e), "second endpoint"),
        ("n", int, 100000, "sample count"),
        ("seed", int, None, "RNG seed (required)"),
    ],
    "holonomy": [
        ("loop", _loop, connection.square_loop(), "closed polyline x,y;x,y;..."),
        ("probes", int, 4, "number of fibre probes"),
        ("t_scale", float, 1.0, "probe t amplitude"),
        ("tol", float, 1e-8, "transport tolerance"),
        ("threshold", float, 1e-5, "largest allowed displacement"),
        ("theta_rate_sign", int, 1, "+1 derived sign, -1 printed sign"),
    ],
    "cmn": [
        ("m", int, 0, "first index"),
        ("n", int, 1, "second index"),
        ("exact", _bool, False, "print the exact a + b*pi value"),
        ("table", int, 0, "also tabulate all 1 <= m+n <= table"),
        ("tol", float, 1e-12, "quadrature tolerance"),
    ],
    "genfun": [
        ("m_max", int, 8, "largest m"),
        ("order", int, 12, "series order"),
    ],
    "pairing": [
        ("m_min", int, 3, "smallest m"),
        ("m_max", int, 10, "largest m"),
        ("numeric", _bool, False, "also run the double-quadrature route for m <= 5"),
        ("tol", float, 1e-6, "agreement tolerance for the numeric route"),
    ],
    "reduce": [
        ("anchor", lambda s: _floats(s, 3), (0.1, 1.2, 0.7), "x,y,phi"),
        ("t_max", float, 5.0, "largest t"),
        ("samples", int, 11, "table rows on [0, t_max]"),
        ("step", float, 1e-4, "finite-difference step"),
    ],
    "deform": [
        ("m", int, 3, "degree"),
        ("coeffs", str, "1", "complex coefficients of a(z), e.g. 1,0.5j"),
        ("points", int, 10, "sample count"),
        ("seed", int, None, "RNG seed (required)"),
        ("t", float, 1.0, "transport time"),
        ("step", float, 1e-4, "finite-difference step"),
        ("threshold", float, 1e-5, "largest allowed Casimir residual"),
    ],
}
MODEL_COMMANDS = ("flow", "jacobi", "holonomy", "reduce")


@dataclass
class RunConfig:
    command: str
    model: str = "hyperbolic"
    settings: dict = field(default_factory=dict)
    out: Path | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        for key, value in self.settings.items():
            if key.endswith("tol") or key in ("threshold", "step"):
                if not value > 0:
                    raise ConfigError(f"{key} must be positive")
        if "seed" in self.settings and self.settings["seed"] is None:
            raise ConfigError(f"{self.command} needs a seed")

    def __getitem__(self, key):
        return self.settings[key]


def _read_config(path: str, command: str) -> tuple[dict, str | None]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    allowed = {name for name, *_ in OPTIONS[command]}
    values = {}
    model = None
    for section in parser.sections():
        if section == "model":
            for key in parser[section]:
                if key != "id":
                    raise ConfigError(f"unknown key {key!r} in [model]")
            model = parser[section].get("id")
        elif section == command:
            for key, raw in parser[section].items():
                if key not in allowed:
                    raise ConfigError(f"unknown key {key!r} in [{command}]")
                values[key] = raw
        elif section not in COMMANDS:
            raise ConfigError(f"unknown section [{section}]")
    return values, model


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flatsym", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        p = sub.add_parser(command)
        p.add_argument("--config", help="INI file")
        p.add_argument("--out", help="directory for CSV/SVG artifacts")
        if command in MODEL_COMMANDS:
            p.add_argument("--model", help="model id, e.g. randers:eps=0.02")
        for name, conv, default, text in OPTIONS[command]:
            flag = "--" + name.replace("_", "-")
            if conv is _bool:
                p.add_argument(flag, dest=name, action="store_const", const="true", help=text)
            else:
                p.add_argument(flag, dest=name, help=f"{text} (default {default})")
    return parser


def resolve(argv) -> RunConfig:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; that is a configuration failure here
        raise ConfigError("bad command line") from exc
    command = args.command
    raw, model = ({}, None)
    if args.config:
        raw, model = _read_config(args.config, command)
    settings = {}
    for name, conv, default, _ in OPTIONS[command]:
        value = getattr(args, name)
        if value is None:
            value = raw.get(name)
        if value is None:
            settings[name] = default
            continue
        try:
            settings[name] = conv(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {name}: {value!r}") from exc
    model_id = getattr(args, "model", None) or model or "hyperbolic"
    out = Path(args.out) if args.out else None
    return RunConfig(command, model_id, settings, out)


# --- commands ------------------------------------------------------------------------


def _artifact(cfg: RunConfig, name: str) -> Path | None:
    return None if cfg.out is None else cfg.out / name


def _svg(cfg: RunConfig, name: str, plot: HalfPlanePlot):
    path = _artifact(cfg, name)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(plot.render(), encoding="utf-8", newline="")


def run_flow(cfg: RunConfig) -> str:
    model = parse_model(cfg.model)
    if cfg["field"] not in flows.FIELDS:
        raise ConfigError(f"field must be one of {flows.FIELDS}")
    traj = flows.flow(model, cfg["field"], UPoint(*cfg["start"]), cfg["t"], cfg["tol"])
    rows = list(flows.trajectory_rows(traj))
    path = _artifact(cfg, "flow.csv")
    if path is not None:
        write_csv(path, ("t", "x", "y", "phi"), rows)
        pts = [(r[1], r[2]) for r in rows]
        xr, yr = fit_ranges(pts)
        plot = HalfPlanePlot(xr, yr)
        x, y, phi = cfg["start"]
        if cfg["field"] == "X":
            plot.geodesic_through(x, y, phi)
        plot.polyline(pts)
        _svg(cfg, "flow.svg", plot)
    x, y, phi = traj.endpoint()
    note = " truncated" if traj.truncated else ""
    return f"x={fmt(x)} y={fmt(y)} phi={fmt(phi % (2 * math.pi))}{note}"


def run_jacobi(cfg: RunConfig) -> str:
    model = parse_model(cfg.model)
    anchor = UPoint(*cfg["anchor"])
    t = cfg["t"]
    fns = flows.JacobiFunctions(model, anchor, abs(t) + 1.0, cfg["tol"])
    f1, f2, _, _ = fns.values(t)
    path = _artifact(cfg, "jacobi.csv")
    if path is not None:
        span = max(abs(t), 1e-3)
        pair = flows.jacobi(model, anchor, (-span, span), cfg["tol"])
        rows = list(flows.trajectory_rows(pair))
        write_csv(path, ("t", "x", "y", "phi", "f1", "f2", "f1p", "f2p", "C", "K"), rows)
        pts = [(r[1], r[2]) for r in rows]
        xr, yr = fit_ranges(pts)
        plot = HalfPlanePlot(xr, yr)
        # geodesics through a few points of the Y-curve, which they cross orthogonally
        for r in rows[:: max(1, len(rows) // 6)]:
            plot.geodesic_through(r[1], r[2], r[3])
        plot.polyline(pts, "#b22222", 2.0)
        _svg(cfg, "jacobi.svg", plot)
    return f"f1={fmt(f1)} f2={fmt(f2)}"


def run_crofton(cfg: RunConfig) -> str:
    res = connection.crofton_measure(parse_model("hyperbolic"), cfg["x"], cfg["y"], cfg["n"], cfg["seed"])
    path = _artifact(cfg, "crofton.csv")
    if path is not None:
        write_csv(path, ("d_true", "estimate", "stderr", "n", "seed"), [(res.d_true, res.estimate, res.stderr, res.n, res.seed)])
    line = f"estimate={fmt(res.estimate)} stderr={fmt(res.stderr)} twice_length={fmt(2 * res.d_true)}"
    if res.stderr > 0 and abs(res.estimate - 2 * res.d_true) > 5 * res.stderr:
        raise InvariantFailure(line + " (more than 5 standard errors from twice the length)")
    return line


def run_holonomy(cfg: RunConfig) -> str:
    model = parse_model(cfg.model)
    if cfg["probes"] < 1:
        raise ConfigError("need at least one probe")
    if cfg["theta_rate_sign"] not in (1, -1):
        raise ConfigError("theta_rate_sign must be 1 or -1")
    probes = connection.default_probes(cfg["probes"], cfg["t_scale"])
    disp = connection.holonomy_loop(model, cfg["loop"], probes, cfg["tol"], cfg["theta_rate_sign"])
    report = (
        f"model {model.model_id}\n"
        f"loop {';'.join(f'{fmt(x)},{fmt(y)}' for x, y in cfg['loop'])}\n"
        f"probes {len(probes)}\n"
        f"max displacement {fmt(disp)}\n"
        f"threshold {fmt(cfg['threshold'])}\n"
    )
    path = _artifact(cfg, "holonomy.txt")
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report, encoding="utf-8", newline="")
    line = f"displacement={fmt(disp)}"
    if disp > cfg["threshold"]:
        raise InvariantFailure(line + " exceeds threshold")
    return line


def run_cmn(cfg: RunConfig) -> str:
    m, n = cfg["m"], cfg["n"]
    if cfg["table"] > 0:
        rows = []
        for total in range(1, cfg["table"] + 1):
            for mm in range(total + 1):
                v = exact.cmn_exact(mm, total - mm)
                rows.append((mm, total - mm, v.a, v.b, float(v)))
        path = _artifact(cfg, "cmn.csv")
        if path is not None:
            write_csv(path, ("m", "n", "a_rational", "b_rational", "float_image"), rows)
    if cfg["exact"]:
        return str(exact.cmn_exact(m, n))
    return fmt(exact.cmn_quad(m, n, cfg["tol"]))


def run_genfun(cfg: RunConfig) -> str:
    rows = []
    bad = 0
    for m in range(1, cfg["m_max"] + 1):
        lhs = exact.genfun_series(m, cfg["order"])
        rhs = exact.sech_power_taylor(m, cfg["order"])
        for k, (a, b) in enumerate(zip(lhs, rhs)):
            rows.append((m, k, a, b, a - b))
            bad += a != b
    path = _artifact(cfg, "genfun.csv")
    if path is not None:
        write_csv(path, ("m", "k", "series", "target", "difference"), rows)
    line = f"coefficients={len(rows)} nonzero_differences={bad}"
    if bad:
        raise InvariantFailure(line)
    return line


def pairing_rows(m_min: int, m_max: int) -> list:
    rows = []
    for reading in exact.READINGS:
        for m in range(m_min, m_max + 1):
            v = exact.pairing_coefficient_exact(m, reading)
            rows.append((m, reading, v.a, v.b, float(v)))
    return rows


PAIRING_HEADER = ("m", "reading", "a_rational", "b_rational", "float_image")


def run_pairing(cfg: RunConfig) -> str:
    if cfg["m_min"] < 3 or cfg["m_max"] < cfg["m_min"]:
        raise ConfigError("need 3 <= m_min <= m_max")
    rows = pairing_rows(cfg["m_min"], cfg["m_max"])
    if cfg.out is not None:
        for reading in exact.READINGS:
            write_csv(cfg.out / f"pairing_{reading}.csv", PAIRING_HEADER, [r for r in rows if r[1] == reading])
    zero = [r for r in rows if not abs(r[4]) > 1e-12]
    line = f"values={len(rows)} zero_values={len(zero)}"
    if zero:
        raise InvariantFailure(line)
    if cfg["numeric"]:
        ms = tuple(m for m in (3, 4, 5) if cfg["m_min"] <= m <= cfg["m_max"])
        reading, table = exact.adjudicate_reading(ms, cfg["tol"])
        nums = " ".join(f"numeric[{m}]={fmt(table[m][0])}" for m in ms)
        line += f" {nums} adjudicated={reading or 'none'}"
        if reading is None:
            raise InvariantFailure(line)
    return line


def run_reduce(cfg: RunConfig) -> str:
    model = parse_model(cfg.model)
    anchor = UPoint(*cfg["anchor"])
    if cfg["t_max"] <= 0 or cfg["samples"] < 2:
        raise ConfigError("need t_max > 0 and at least two samples")
    data = connection.so_reduction(model, anchor, (0.0, cfg["t_max"]), cfg["step"])
    ts = np.linspace(0.0, cfg["t_max"], cfg["samples"])
    rows = [(t, data.tau(t), data.F1(t), data.lam(t)) for t in ts]
    path = _artifact(cfg, "reduce.csv")
    if path is not None:
        write_csv(path, ("t", "tau", "F1", "lambda"), rows)
    increasing = all(b[2] > a[2] for a, b in zip(rows, rows[1:]))
    line = (
        f"lambda0={fmt(rows[0][3])} horizontality={fmt(data.horizontality_residual_at_0)} "
        f"F1_increasing={increasing}"
    )
    if not increasing or data.horizontality_residual_at_0 > 1e-6:
        raise InvariantFailure(line)
    return line


def run_deform(cfg: RunConfig) -> str:
    a = deformation.parse_holdiff(cfg["m"], cfg["coeffs"])
    rng = np.random.Generator(np.random.Philox(key=[cfg["seed"], 0]))
    h = cfg["step"]
    dK, dC = deformation.delta_K(a, h), deformation.delta_C(a, h)
    rows = []
    worst_casimir = 0.0
    worst_cr = 0.0
    for _ in range(cfg["points"]):
        q = np.array([rng.uniform(*WINDOW_X), rng.uniform(*WINDOW_Y), rng.uniform(0, 2 * math.pi)])
        sample = deformation.hk_variation(a, q, h)
        h_val = deformation.transport_h(dK, dC, q, cfg["t"])
        rows.append(sample.row(cfg["t"], h_val))
        worst_casimir = max(worst_casimir, abs(sample.casimir))
        worst_cr = max(worst_cr, deformation.cr_residual(a, q, h))
    path = _artifact(cfg, "deform.csv")
    if path is not None:
        write_csv(path, deformation.SAMPLE_COLUMNS, rows)
    line = f"casimir={fmt(worst_casimir)} cr={fmt(worst_cr)}"
    if worst_casimir > cfg["threshold"]:
        raise InvariantFailure(line + " exceeds threshold")
    return line


RUNNERS = {
    "flow": run_flow,
    "jacobi": run_jacobi,
    "crofton": run_crofton,
    "holonomy": run_holonomy,
    "cmn": run_cmn,
    "genfun": run_genfun,
    "pairing": run_pairing,
    "reduce": run_reduce,
    "deform": run_deform,
}


def run(cfg: RunConfig) -> str:
    return RUNNERS[cfg.command](cfg)


def main(argv=None) -> int:
    try:
        cfg = resolve(argv)
        print(run(cfg))
        return 0
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NUMERIC_ERRORS as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
