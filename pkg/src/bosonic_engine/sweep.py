"""Config-driven parameter sweeps, convergence validation and CSV output.

A sweep config is strict JSON::

    {
      "engine": {"n": 2, "m": 1, "omega_a": 1.0, "x": 0.5,
                 "beta_a": 0.1, "y": 100.0},
      "coupling": {"mode": "alpha", "value": 0.5, "order": 4},
      "axes": [{"parameter": "omega_a", "min": 0.1, "max": 10,
                "points": 32, "scale": "log"}],
      "methods": ["pert2", "pert4"],
      "outputs": ["mean_w", "snr"],
      "oracle": {"tail_tolerance": 1e-9}
    }

``engine`` takes either ``omega_b`` or the frequency ratio ``x``, and
either ``beta_b`` or the inverse-temperature ratio ``y``. A ratio is held
fixed while the corresponding mode-A quantity is swept. An axis gives
either ``min``/``max``/``points``/``scale`` or an explicit ``values`` list.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, CouplingBoundError, EngineError, OutputError
from .exact import (
    DEFAULT_DIMS_CAP,
    DEFAULT_LEAKAGE_TOLERANCE,
    DEFAULT_TAIL_TOLERANCE,
    Method,
    adaptive_truncation,
    exact_moments,
    two_point_distribution,
)
from .fock import CouplingMode, CouplingSpec, EngineParams
from .perturbative import (
    VARIANTS,
    delta_coefficient,
    moments_2nd,
    moments_4th,
    resolve_theta,
    swap_mean_work,
    theta_bar,
    work_distribution_2nd,
    work_distribution_4th,
)
from .thermo import classify_regime

AXIS_PARAMETERS = ("theta", "alpha", "omega_a", "omega_b", "beta_a", "beta_b",
                   "n", "m", "x_max", "x", "y")
INTEGER_PARAMETERS = ("n", "m")
OUTPUT_COLUMNS = ("k", "probability", "mean_w", "second_w", "var_w", "mean_qh",
                  "mean_qc", "sigma", "eta", "snr", "rf", "theta_bar_2",
                  "theta_bar_4", "delta", "regime", "off_line_mass", "mean_w_swap")
DEFAULT_OUTPUTS = ("mean_w", "var_w", "sigma", "snr")
DISTRIBUTION_COLUMNS = ("k", "probability")
VALIDATION_TAIL_TOLERANCE = 1e-13

_TOP_KEYS = {"engine", "coupling", "axes", "methods", "outputs", "oracle"}
_ENGINE_KEYS = {"n", "m", "omega_a", "omega_b", "beta_a", "beta_b", "x", "y"}
_COUPLING_KEYS = {"mode", "value", "order"}
_AXIS_KEYS = {"parameter", "min", "max", "points", "scale", "values"}
_ORACLE_KEYS = {"tail_tolerance", "leakage_tolerance", "dims_cap"}


@dataclass(frozen=True)
class Axis:
    parameter: str
    values: tuple

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class OracleSettings:
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE
    leakage_tolerance: float = DEFAULT_LEAKAGE_TOLERANCE
    dims_cap: int = DEFAULT_DIMS_CAP


@dataclass(frozen=True)
class SweepConfig:
    base: EngineParams
    axes: tuple[Axis, ...]
    methods: tuple[Method, ...] = (Method.PERT2,)
    outputs: tuple[str, ...] = DEFAULT_OUTPUTS
    oracle: OracleSettings = field(default_factory=OracleSettings)
    hold_x: bool = False
    hold_y: bool = False


@dataclass
class Table:
    columns: list[str]
    rows: list[list]

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


@dataclass(frozen=True)
class ValidationReport:
    theta_grid: list[float]
    errors_pert2: list[float]
    errors_pert4: list[float] | None
    fitted_order_pert2: float
    fitted_order_pert4: float | None

    @property
    def accepted(self) -> bool:
        ok = 3.5 <= self.fitted_order_pert2 <= 4.5
        if self.fitted_order_pert4 is not None:
            ok = ok and 5.5 <= self.fitted_order_pert4 <= 6.5
        return ok


# -- parsing -----------------------------------------------------------------


def _fail(path, reason):
    raise ConfigError(f"{path}: {reason}")


def _obj(node, path, allowed, required=()):
    if not isinstance(node, dict):
        _fail(path, "expected an object")
    for key in node:
        if key not in allowed:
            _fail(f"{path}.{key}", "unknown key")
    for key in required:
        if key not in node:
            _fail(f"{path}.{key}", "required key missing")
    return node


def _num(node, path, integer=False):
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        _fail(path, "expected a number")
    if integer and int(node) != node:
        _fail(path, "expected an integer")
    if not math.isfinite(node):
        _fail(path, "expected a finite number")
    return int(node) if integer else float(node)


def _parse_axis(node, path):
    _obj(node, path, _AXIS_KEYS, ("parameter",))
    name = node["parameter"]
    if name not in AXIS_PARAMETERS:
        _fail(f"{path}.parameter", f"unknown parameter {name!r}")
    integer = name in INTEGER_PARAMETERS
    if "values" in node:
        extra = {"min", "max", "points", "scale"} & set(node)
        if extra:
            _fail(path, f"'values' excludes {sorted(extra)}")
        vals = node["values"]
        if not isinstance(vals, list):
            _fail(f"{path}.values", "expected a list")
        if len(vals) < 2:
            _fail(f"{path}.values", "at least 2 points required")
        return Axis(name, tuple(_num(v, f"{path}.values[{i}]", integer)
                                for i, v in enumerate(vals)))
    _obj(node, path, _AXIS_KEYS, ("parameter", "min", "max", "points"))
    lo = _num(node["min"], f"{path}.min")
    hi = _num(node["max"], f"{path}.max")
    points = _num(node["points"], f"{path}.points", integer=True)
    if points < 2:
        _fail(f"{path}.points", "at least 2 points required")
    scale = node.get("scale", "linear")
    if scale not in ("linear", "log"):
        _fail(f"{path}.scale", "expected 'linear' or 'log'")
    if scale == "log":
        if lo <= 0 or hi <= 0:
            _fail(path, "log scale needs positive bounds")
        grid = np.geomspace(lo, hi, points)
    else:
        grid = np.linspace(lo, hi, points)
    if integer:
        if any(abs(g - round(g)) > 1e-9 for g in grid):
            _fail(path, f"{name} is an integer parameter; grid is not integral")
        return Axis(name, tuple(int(round(g)) for g in grid))
    return Axis(name, tuple(float(g) for g in grid))


def parse_config(text: str | bytes) -> SweepConfig:
    """Parse and validate a strict-JSON sweep document."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"$: invalid JSON ({exc})") from None
    _obj(doc, "$", _TOP_KEYS, ("engine",))

    eng = _obj(doc["engine"], "$.engine", _ENGINE_KEYS, ("n", "m", "omega_a", "beta_a"))
    for a, b in (("omega_b", "x"), ("beta_b", "y")):
        if (a in eng) == (b in eng):
            _fail("$.engine", f"give exactly one of {a!r} or {b!r}")
    vals = {k: _num(v, f"$.engine.{k}", k in INTEGER_PARAMETERS) for k, v in eng.items()}
    hold_x, hold_y = "x" in vals, "y" in vals
    omega_b = vals["x"] * vals["omega_a"] if hold_x else vals["omega_b"]
    beta_b = vals["y"] * vals["beta_a"] if hold_y else vals["beta_b"]

    coupling = CouplingSpec()
    if "coupling" in doc:
        c = _obj(doc["coupling"], "$.coupling", _COUPLING_KEYS, ("mode", "value"))
        if c["mode"] not in ("theta", "alpha"):
            _fail("$.coupling.mode", "expected 'theta' or 'alpha'")
        order = c.get("order")
        if order is not None and order not in (2, 4):
            _fail("$.coupling.order", "expected 2 or 4")
        try:
            coupling = CouplingSpec(CouplingMode(c["mode"]),
                                    _num(c["value"], "$.coupling.value"), order)
        except ConfigError as exc:
            _fail("$.coupling", str(exc))
    try:
        base = EngineParams(vals["n"], vals["m"], vals["omega_a"], omega_b,
                            vals["beta_a"], beta_b, coupling)
    except ConfigError as exc:
        _fail("$.engine", str(exc))

    axes_node = doc.get("axes", [])
    if not isinstance(axes_node, list):
        _fail("$.axes", "expected a list")
    if len(axes_node) > 2:
        _fail("$.axes", "at most 2 axes")
    axes = tuple(_parse_axis(a, f"$.axes[{i}]") for i, a in enumerate(axes_node))
    if len({a.parameter for a in axes}) != len(axes):
        _fail("$.axes", "duplicate axis parameter")

    methods_node = doc.get("methods", ["pert2"])
    if not isinstance(methods_node, list) or not methods_node:
        _fail("$.methods", "expected a nonempty list")
    methods = []
    for i, mth in enumerate(methods_node):
        try:
            methods.append(Method(mth))
        except ValueError:
            _fail(f"$.methods[{i}]", f"unknown method {mth!r}")
    if len(set(methods)) != len(methods):
        _fail("$.methods", "duplicate method")

    outputs_node = doc.get("outputs", list(DEFAULT_OUTPUTS))
    if not isinstance(outputs_node, list) or not outputs_node:
        _fail("$.outputs", "expected a nonempty list")
    for i, col in enumerate(outputs_node):
        if col not in OUTPUT_COLUMNS:
            _fail(f"$.outputs[{i}]", f"unknown column {col!r}")
    if len(set(outputs_node)) != len(outputs_node):
        _fail("$.outputs", "duplicate column")

    oracle = OracleSettings()
    if "oracle" in doc:
        o = _obj(doc["oracle"], "$.oracle", _ORACLE_KEYS)
        kw = {}
        for key in ("tail_tolerance", "leakage_tolerance"):
            if key in o:
                v = _num(o[key], f"$.oracle.{key}")
                if not 0.0 < v <= 1e-2:
                    _fail(f"$.oracle.{key}", "must lie in (0, 1e-2]")
                kw[key] = v
        if "dims_cap" in o:
            v = _num(o["dims_cap"], "$.oracle.dims_cap", integer=True)
            if v < 8:
                _fail("$.oracle.dims_cap", "must be >= 8")
            kw["dims_cap"] = v
        oracle = OracleSettings(**kw)

    return SweepConfig(base, axes, tuple(methods), tuple(outputs_node), oracle,
                       hold_x, hold_y)


# -- evaluation --------------------------------------------------------------


def _point_params(config: SweepConfig, point: dict) -> EngineParams:
    base = config.base
    x, y = base.x, base.y
    kw = {}
    for name, value in point.items():
        if name == "theta":
            kw["coupling"] = CouplingSpec.theta(value)
        elif name == "alpha":
            kw["coupling"] = CouplingSpec.alpha(value, base.coupling.order)
        elif name == "x_max":
            m = point.get("m", base.m)
            n = value * m
            if abs(n - round(n)) > 1e-9:
                raise ConfigError(f"x_max={value:g} with m={m} gives non-integer n")
            kw["n"] = int(round(n))
        elif name == "x":
            x = value
        elif name == "y":
            y = value
        else:
            kw[name] = value
    omega_a = kw.get("omega_a", base.omega_a)
    beta_a = kw.get("beta_a", base.beta_a)
    if "omega_b" not in kw and (config.hold_x or "x" in point):
        kw["omega_b"] = x * omega_a
    if "beta_b" not in kw and (config.hold_y or "y" in point):
        kw["beta_b"] = y * beta_a
    return base.replace(**kw)


def _distribution(params, method, oracle):
    if method is Method.ORACLE:
        theta = resolve_theta(params, params.coupling.order or 2)
        trunc = adaptive_truncation(params, oracle.tail_tolerance,
                                    oracle.leakage_tolerance, oracle.dims_cap, theta)
        return two_point_distribution(params, trunc, theta), theta
    if method is Method.PERT2:
        theta = resolve_theta(params, 2)
        return work_distribution_2nd(params, theta), theta
    theta = resolve_theta(params, 4)
    return work_distribution_4th(params, theta), theta


def _moments(params, method, dist, theta):
    if method is Method.ORACLE:
        return exact_moments(dist, params)
    if method is Method.PERT2:
        return moments_2nd(params, theta)
    return moments_4th(params, theta)


def _safe(fn):
    try:
        return fn()
    except EngineError:
        return math.nan


def _evaluate(params, method, outputs, oracle):
    """Rows for one grid point and one method (several when k is requested)."""
    if method is Method.PERT4:
        resolve = lambda: resolve_theta(params, 4)  # noqa: E731
    else:
        resolve = lambda: resolve_theta(params, params.coupling.order or 2)  # noqa: E731
    need_dist = any(c in outputs for c in DISTRIBUTION_COLUMNS + ("off_line_mass",)) \
        or method is Method.ORACLE
    theta = resolve()
    dist = None
    if need_dist:
        dist, theta = _distribution(params, method, oracle)
    mom = None
    if any(c in outputs for c in ("mean_w", "second_w", "var_w", "mean_qh", "mean_qc",
                                  "sigma", "snr", "rf")):
        mom = _moments(params, method, dist, theta)
    variant = VARIANTS.get((params.n, params.m))
    scalars = {}
    for col in outputs:
        if col in DISTRIBUTION_COLUMNS:
            continue
        if col in ("mean_w", "second_w", "var_w", "mean_qh", "mean_qc"):
            v = getattr(mom, col)
        elif col == "sigma":
            v = mom.entropy_production
        elif col == "snr":
            v = mom.mean_w**2 / mom.var_w if mom.mean_w != 0 and mom.var_w > 0 else math.nan
        elif col == "rf":
            v = mom.var_w / mom.mean_w**2 if mom.mean_w != 0 else math.nan
        elif col == "eta":
            v = classify_regime(params).efficiency
        elif col == "theta_bar_2":
            v = theta_bar(params, 2).theta_bar
        elif col == "theta_bar_4":
            v = theta_bar(params, 4).theta_bar if variant else math.nan
        elif col == "delta":
            v = _safe(lambda: delta_coefficient(params.occupations(), variant)) \
                if variant else math.nan
        elif col == "regime":
            v = classify_regime(params).regime.value
        elif col == "off_line_mass":
            v = dist.off_line_mass
        elif col == "mean_w_swap":
            v = swap_mean_work(params, theta)
        scalars[col] = v
    if not any(c in outputs for c in DISTRIBUTION_COLUMNS):
        return [[scalars.get(c, "") for c in outputs] + [""]]
    rows = []
    for k, p in dist.points:
        vals = dict(scalars, k=k, probability=p)
        rows.append([vals[c] for c in outputs] + [""])
    return rows


def _evaluate_point(task):
    config, point = task
    out = []
    try:
        params = _point_params(config, point)
    except EngineError as exc:
        msg = f"{type(exc).__name__}: {exc}"
        return [[m.value, [[""] * len(config.outputs) + [msg]]] for m in config.methods]
    for method in config.methods:
        try:
            rows = _evaluate(params, method, config.outputs, config.oracle)
        except (EngineError, ArithmeticError) as exc:
            rows = [[""] * len(config.outputs) + [f"{type(exc).__name__}: {exc}"]]
        out.append([method.value, rows])
    return out


def _grid(config: SweepConfig) -> list[dict]:
    if not config.axes:
        return [{}]
    if len(config.axes) == 1:
        a = config.axes[0]
        return [{a.parameter: v} for v in a.values]
    a, b = config.axes
    return [{a.parameter: u, b.parameter: v} for u in a.values for v in b.values]


def run_sweep(config: SweepConfig, parallelism: int = 1) -> Table:
    """Evaluate every grid point for every method.

    Rows come out axis-major (first axis slowest) and method-minor whatever
    ``parallelism`` is; failures at a point land in the ``error`` column.
    """
    if int(parallelism) != parallelism or parallelism < 1:
        raise ConfigError(f"parallelism must be a positive integer, got {parallelism!r}")
    points = _grid(config)
    tasks = [(config, p) for p in points]
    if parallelism == 1 or len(tasks) == 1:
        results = [_evaluate_point(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (4 * parallelism))
        with ProcessPoolExecutor(max_workers=int(parallelism)) as pool:
            results = list(pool.map(_evaluate_point, tasks, chunksize=chunk))
    axis_names = [a.parameter for a in config.axes]
    columns = axis_names + ["method"] + list(config.outputs) + ["error"]
    rows = []
    for point, per_method in zip(points, results):
        lead = [point[n] for n in axis_names]
        for method, method_rows in per_method:
            for r in method_rows:
                rows.append(lead + [method] + r)
    return Table(columns, rows)


# -- convergence validation --------------------------------------------------


def _slope(theta, err):
    t, e = np.log(np.asarray(theta)), np.log(np.asarray(err))
    return float(np.polyfit(t, e, 1)[0])


def validate_convergence(
    params: EngineParams,
    theta_max: float,
    halvings: int = 3,
    dims_cap: int = DEFAULT_DIMS_CAP,
    tail_tol: float = VALIDATION_TAIL_TOLERANCE,
    leak_tol: float = DEFAULT_LEAKAGE_TOLERANCE,
) -> ValidationReport:
    """Fit the order of the perturbative distributions against the oracle.

    The grid is theta_max / 2**k for k < ``halvings``. The fourth-order
    expansion is included whenever (n, m) is one of its variants.

    The thermal tail cut by the truncation shifts the oracle by about
    theta^2 * sum_{l >= D} p_l c_l^2, so the default tail tolerance is much
    tighter than for plain simulation; otherwise the pert4 error hits that
    floor at small theta.
    """
    if int(halvings) != halvings or halvings < 3:
        raise ConfigError(f"halvings must be an integer >= 3, got {halvings!r}")
    if not theta_max > 0:
        raise ConfigError(f"theta_max must be positive, got {theta_max!r}")
    with_fourth = (params.n, params.m) in VARIANTS
    orders = (2, 4) if with_fourth else (2,)
    for order in orders:
        bound = theta_bar(params, order).theta_bar
        if theta_max > bound / 4.0 * (1.0 + 1e-12):
            raise CouplingBoundError(theta_max, bound / 4.0, order)
    grid = [theta_max / 2**k for k in range(int(halvings))]
    e2, e4 = [], []
    for theta in grid:
        trunc = adaptive_truncation(params, tail_tol, leak_tol, dims_cap, theta)
        exact = two_point_distribution(params, trunc, theta)
        e2.append(exact.max_abs_difference(work_distribution_2nd(params, theta)))
        if with_fourth:
            e4.append(exact.max_abs_difference(work_distribution_4th(params, theta)))
    return ValidationReport(
        grid, e2, e4 if with_fourth else None, _slope(grid, e2),
        _slope(grid, e4) if with_fourth else None,
    )


# -- output ------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return "" if v is None else str(v)


def emit_csv(table: Table, destination) -> None:
    """Write ``table`` as CSV with LF line endings and round-trip floats.

    ``destination`` is a path or a writable text stream.
    """
    if not table.rows:
        raise OutputError("refusing to write an empty table")
    if hasattr(destination, "write"):
        _write(table, destination)
        return
    path = os.fspath(destination)
    tmp = f"{path}.tmp{os.getpid()}"
    try:
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            _write(table, fh)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise OutputError(f"cannot write {path}: {exc}") from exc


def _write(table, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_fmt(v) for v in row])
