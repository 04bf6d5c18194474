"""JSON experiment configs: parsing, validation and model/state construction."""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..errors import ConfigurationError
from ..models import (
    FiveModeParams,
    FourModeParams,
    ThreeModeParams,
    FIVE_MODES,
    FOUR_MODES,
    THREE_MODES,
    build_h3,
    build_h4,
    build_h5,
    five_mode_basis,
    four_mode_basis,
    three_mode_basis,
)
from ..fock import TruncationSpec, build_basis
from ..observables import parse_metric
from ..propagator import EvolveConfig, TimeGrid
from ..states import (
    CoherentSpec,
    SqueezeSpec,
    TwoModeSqueezeSpec,
    default_cutoff,
    default_pair_cutoff,
)

SCHEMA_VERSION = 1
MODEL_MODES = {"three": THREE_MODES, "five": FIVE_MODES, "four": FOUR_MODES}
ANALYTIC_QUANTITIES = (
    "flux_coherent",
    "flux_ratio_squeezed",
    "squeezing_coherent",
    "squeezing_squeezed_input",
    "g2_fourmode_tmsv",
)


class ConfigIOError(OSError):
    """The config file could not be read or parsed."""

    category = "io"


def read_json(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigIOError(f"cannot read config {str(p)!r}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{p}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"{p}: top level must be a JSON object")
    return data


def config_hash(data: dict) -> str:
    canon = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigurationError(f"{where}: missing {key!r}")
    return d[key]


def _number(d: dict, key: str, where: str, default=None) -> float:
    v = d.get(key, default)
    if v is None:
        raise ConfigurationError(f"{where}: missing {key!r}")
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigurationError(f"{where}.{key} must be a finite number, got {v!r}")
    return float(v)


def _check_keys(d: dict, allowed: set, where: str):
    extra = set(d) - allowed
    if extra:
        raise ConfigurationError(f"{where}: unknown key(s) {sorted(extra)}")


# --- model -----------------------------------------------------------------

@dataclass(frozen=True)
class ModelConfig:
    kind: str
    params: Any  # ThreeModeParams | FiveModeParams | FourModeParams

    @property
    def modes(self):
        return MODEL_MODES[self.kind]

    @property
    def time_scale(self) -> float:
        """Coupling that turns raw time into the dimensionless ``lambda1 t``."""
        p = self.params
        if self.kind == "three":
            return p.lambda1
        if self.kind == "five":
            return p.epsilon1 * p.omega1 / p.delta1
        return p.lambda1p

    def hamiltonian(self, basis):
        return {"three": build_h3, "five": build_h5, "four": build_h4}[self.kind](basis, self.params)


def parse_model(d: dict) -> ModelConfig:
    where = "model"
    _check_keys(d, {"kind", "params"}, where)
    kind = _require(d, "kind", where)
    if kind not in MODEL_MODES:
        raise ConfigurationError(f"model.kind must be one of {sorted(MODEL_MODES)}, got {kind!r}")
    p = dict(d.get("params", {}))
    w = "model.params"
    if kind == "three":
        _check_keys(p, {"lambda1", "lambda2"}, w)
        params = ThreeModeParams(_number(p, "lambda1", w), _number(p, "lambda2", w))
    elif kind == "four":
        _check_keys(p, {"lambda1p", "lambda2p", "n0"}, w)
        n0 = p.get("n0")
        params = FourModeParams(_number(p, "lambda1p", w), _number(p, "lambda2p", w),
                                None if n0 is None else _number(p, "n0", w))
    else:
        explicit = {"epsilon1", "epsilon2", "omega1", "omega2", "delta1", "delta2"}
        effective = {"lambda1", "lambda2", "delta_over_lambda", "delta2_over_lambda"}
        _check_keys(p, explicit | effective, w)
        if set(p) & explicit:
            if set(p) & effective:
                raise ConfigurationError(f"{w}: give either microscopic couplings or lambdas, not both")
            params = FiveModeParams(*(_number(p, k, w) for k in
                                      ("epsilon1", "epsilon2", "omega1", "omega2", "delta1", "delta2")))
        else:
            lam1, lam2 = _number(p, "lambda1", w), _number(p, "lambda2", w)
            ratio = _number(p, "delta_over_lambda", w)
            ratio2 = _number(p, "delta2_over_lambda", w, ratio)
            if lam1 == 0:
                raise ConfigurationError(f"{w}: delta_over_lambda needs lambda1 != 0")
            params = FiveModeParams.from_effective(lam1, lam2, ratio * lam1, ratio2 * lam1)
    return ModelConfig(kind, params)


# --- initial state ---------------------------------------------------------

def parse_state(entries: list, modes) -> list:
    if not isinstance(entries, list):
        raise ConfigurationError("initial_state must be a list")
    specs = []
    used: set[str] = set()
    for i, e in enumerate(entries):
        where = f"initial_state[{i}]"
        if not isinstance(e, dict):
            raise ConfigurationError(f"{where} must be an object")
        kind = _require(e, "type", where)
        if kind == "two_mode_squeezed":
            _check_keys(e, {"type", "modes", "kappa", "angle"}, where)
            targets = tuple(_require(e, "modes", where))
            spec = TwoModeSqueezeSpec(targets, _number(e, "kappa", where), _number(e, "angle", where, 0.0))
        else:
            mode = _require(e, "mode", where)
            targets = (mode,)
            if kind == "coherent":
                _check_keys(e, {"type", "mode", "magnitude", "phase"}, where)
                spec = CoherentSpec(mode, _number(e, "magnitude", where), _number(e, "phase", where, 0.0))
            elif kind == "squeezed":
                _check_keys(e, {"type", "mode", "r", "angle", "alpha", "alpha_phase"}, where)
                disp = None
                if "alpha" in e:
                    disp = CoherentSpec(mode, _number(e, "alpha", where), _number(e, "alpha_phase", where, 0.0))
                spec = SqueezeSpec(mode, _number(e, "r", where), _number(e, "angle", where, 0.0), disp)
            elif kind == "fock":
                _check_keys(e, {"type", "mode", "n"}, where)
                n = _require(e, "n", where)
                if not isinstance(n, int) or isinstance(n, bool) or n < 0:
                    raise ConfigurationError(f"{where}.n must be a non-negative integer")
                spec = (mode, n)
            else:
                raise ConfigurationError(f"{where}: unknown state type {kind!r}")
        for m in targets:
            if m not in modes:
                raise ConfigurationError(f"{where}: mode {m!r} not in model modes {modes.labels}")
            if m in used:
                raise ConfigurationError(f"{where}: mode {m!r} already has a state")
            used.add(m)
        specs.append(spec)
    return specs


def _spec_cutoff(spec) -> int:
    if isinstance(spec, CoherentSpec):
        return default_cutoff(alpha_mag=spec.magnitude)
    if isinstance(spec, SqueezeSpec):
        mag = spec.displacement.magnitude if spec.displacement else 0.0
        return default_cutoff(alpha_mag=mag, r=spec.r)
    if isinstance(spec, TwoModeSqueezeSpec):
        return default_pair_cutoff(spec.kappa)
    return max(12, int(spec[1]) + 2)


def _is_pair_only(specs) -> bool:
    """Only a two-mode squeezed vacuum on ``a1, a2``, everything else in vacuum."""
    pairs = [s for s in specs if isinstance(s, TwoModeSqueezeSpec)]
    return (len(pairs) == 1 and len(specs) == 1 and set(pairs[0].modes) == {"a1", "a2"})


def parse_truncation(d: dict | None, model: ModelConfig, specs: list):
    """Return ``(build, description)`` where ``build(scale)`` makes the basis.

    ``scale`` multiplies every cutoff, for convergence checks.
    """
    d = dict(d or {})
    where = "truncation"
    _check_keys(d, {"cutoff", "output_cutoff", "charge_cutoff", "per_mode", "paired"}, where)
    auto = max([_spec_cutoff(s) for s in specs] + [12])
    if "per_mode" in d:
        if "cutoff" in d or "output_cutoff" in d:
            raise ConfigurationError(f"{where}: per_mode excludes cutoff/output_cutoff")
        per = d["per_mode"]
        if not isinstance(per, dict) or set(per) != set(model.modes.labels):
            raise ConfigurationError(f"{where}.per_mode must give a cutoff for each of {model.modes.labels}")
        charge = d.get("charge_cutoff")

        def build(scale=1):
            spec = TruncationSpec({k: int(v) * scale for k, v in per.items()},
                                  None if charge is None else int(charge) * scale)
            return build_basis(model.modes, spec)

        return build, {"per_mode": per, "charge_cutoff": charge}
    cutoff = int(d.get("cutoff", auto))
    out = d.get("output_cutoff")
    charge = d.get("charge_cutoff")
    if cutoff < 1:
        raise ConfigurationError(f"{where}.cutoff must be >= 1")
    if model.kind == "three":
        def build(scale=1):
            return three_mode_basis(cutoff * scale, None if out is None else int(out) * scale,
                                    None if charge is None else int(charge) * scale)
    elif model.kind == "five":
        if out is not None:
            raise ConfigurationError(f"{where}: output_cutoff applies to the three-mode model only")

        def build(scale=1):
            return five_mode_basis(cutoff * scale, None if charge is None else int(charge) * scale)
    else:
        if out is not None or charge is not None:
            raise ConfigurationError(f"{where}: the four-mode basis takes cutoff and paired only")
        paired = bool(d.get("paired", _is_pair_only(specs)))
        if paired and not _is_pair_only(specs):
            raise ConfigurationError(f"{where}: the paired basis only holds a two-mode squeezed vacuum on a1, a2")

        def build(scale=1):
            return four_mode_basis(cutoff * scale, paired)

        return build, {"cutoff": cutoff, "paired": paired}
    return build, {"cutoff": cutoff, "output_cutoff": out, "charge_cutoff": charge}


# --- grid, metrics, analytic ----------------------------------------------

@dataclass(frozen=True)
class GridConfig:
    t_max: float
    n_steps: int
    spacing: str = "linear"
    t_min: float | None = None
    units: str = "scaled"  # times given as lambda1 t ("scaled") or raw t
    times: tuple[float, ...] | None = None

    def build(self, time_scale: float) -> TimeGrid:
        factor = 1.0
        if self.units == "scaled":
            if time_scale == 0:
                raise ConfigurationError("scaled time units need a nonzero lambda1")
            factor = 1.0 / abs(time_scale)
        if self.times is not None:
            return TimeGrid(tuple(t * factor for t in self.times))
        if self.spacing == "log":
            return TimeGrid.logarithmic(self.t_min * factor, self.t_max * factor, self.n_steps)
        return TimeGrid.linear(self.t_max * factor, self.n_steps)


def parse_grid(d: dict) -> GridConfig:
    where = "time_grid"
    _check_keys(d, {"t_max", "n_steps", "spacing", "t_min", "units", "times"}, where)
    units = d.get("units", "scaled")
    if units not in ("scaled", "raw"):
        raise ConfigurationError(f"{where}.units must be 'scaled' or 'raw'")
    if "times" in d:
        times = tuple(float(t) for t in d["times"])
        TimeGrid(times)
        return GridConfig(max(times), len(times) - 1, units=units, times=times)
    t_max = _number(d, "t_max", where)
    n = _require(d, "n_steps", where)
    if not t_max > 0:
        raise ConfigurationError(f"{where}.t_max must be > 0")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ConfigurationError(f"{where}.n_steps must be an integer >= 1")
    spacing = d.get("spacing", "linear")
    if spacing not in ("linear", "log"):
        raise ConfigurationError(f"{where}.spacing must be 'linear' or 'log'")
    t_min = None
    if spacing == "log":
        t_min = _number(d, "t_min", where)
        if not 0 < t_min < t_max:
            raise ConfigurationError(f"{where}: need 0 < t_min < t_max")
    return GridConfig(t_max, n, spacing, t_min, units)


@dataclass(frozen=True)
class AnalyticRequest:
    quantity: str
    rel_tol: float = 0.02
    abs_tol: float = 0.0
    report_only: bool = False
    min_residual_order: float | None = None


def parse_analytic(entries: list) -> list[AnalyticRequest]:
    out = []
    for i, e in enumerate(entries or []):
        where = f"analytic[{i}]"
        if isinstance(e, str):
            e = {"quantity": e}
        _check_keys(e, {"quantity", "rel_tol", "abs_tol", "report_only", "min_residual_order"}, where)
        q = _require(e, "quantity", where)
        if q not in ANALYTIC_QUANTITIES:
            raise ConfigurationError(f"{where}: unknown quantity {q!r}; known: {list(ANALYTIC_QUANTITIES)}")
        mro = e.get("min_residual_order")
        out.append(AnalyticRequest(
            q,
            _number(e, "rel_tol", where, 0.02),
            _number(e, "abs_tol", where, 0.0),
            bool(e.get("report_only", False)),
            None if mro is None else _number(e, "min_residual_order", where),
        ))
    return out


def parse_evolve(d: dict | None) -> EvolveConfig:
    d = dict(d or {})
    known = set(EvolveConfig.__dataclass_fields__)
    _check_keys(d, known, "evolve")
    return EvolveConfig(**d)


# --- the whole experiment --------------------------------------------------

@dataclass
class ExperimentConfig:
    raw: dict
    name: str
    model: ModelConfig
    specs: list
    truncation: Any
    truncation_desc: dict
    grid: GridConfig
    metrics: list[str]
    analytic: list[AnalyticRequest]
    evolve: EvolveConfig
    output: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def build_basis(self, scale: int = 1):
        return self.truncation(scale)


TOP_KEYS = {"schema_version", "name", "model", "initial_state", "truncation", "time_grid",
            "metrics", "analytic", "evolve", "output"}


def _check_schema(data: dict, where: str):
    v = data.get("schema_version")
    if v != SCHEMA_VERSION:
        raise ConfigurationError(f"{where}: schema_version must be {SCHEMA_VERSION}, got {v!r}")


def parse_experiment(data: dict) -> ExperimentConfig:
    data = copy.deepcopy(data)
    _check_schema(data, "config")
    _check_keys(data, TOP_KEYS, "config")
    model = parse_model(_require(data, "model", "config"))
    specs = parse_state(data.get("initial_state", []), model.modes)
    build, desc = parse_truncation(data.get("truncation"), model, specs)
    grid = parse_grid(_require(data, "time_grid", "config"))
    metrics = list(data.get("metrics", []))
    for m in metrics:
        _, modes = parse_metric(m)
        for lab in modes:
            if lab not in model.modes:
                raise ConfigurationError(f"metric {m!r}: mode {lab!r} not in model modes {model.modes.labels}")
    output = dict(data.get("output", {}))
    _check_keys(output, {"dir", "format"}, "output")
    return ExperimentConfig(
        raw=data,
        name=str(data.get("name", "experiment")),
        model=model,
        specs=specs,
        truncation=build,
        truncation_desc=desc,
        grid=grid,
        metrics=metrics,
        analytic=parse_analytic(data.get("analytic", [])),
        evolve=parse_evolve(data.get("evolve")),
        output=output,
    )


def load_experiment(path) -> ExperimentConfig:
    return parse_experiment(read_json(path))


# --- sweeps ----------------------------------------------------------------

@dataclass
class SweepConfig:
    raw: dict
    base: dict
    axes: list[tuple[str, list]]
    metrics: list[str]
    times: list[float]


def _resolve(data, path: str):
    """Parent container and final key of a dotted path; list indices are integers."""
    parts = path.split(".")
    cur = data
    for part in parts[:-1]:
        cur = _step(cur, part, path)
    last = parts[-1]
    key = int(last) if isinstance(cur, list) and last.lstrip("-").isdigit() else last
    try:
        cur[key]
    except (KeyError, IndexError, TypeError):
        raise ConfigurationError(f"sweep path {path!r} does not resolve in the base config") from None
    return cur, key


def _step(cur, part, path):
    try:
        if isinstance(cur, list):
            return cur[int(part)]
        return cur[part]
    except (KeyError, IndexError, ValueError, TypeError):
        raise ConfigurationError(f"sweep path {path!r} does not resolve in the base config") from None


def set_path(data: dict, path: str, value) -> None:
    parent, key = _resolve(data, path)
    parent[key] = value


def parse_sweep(data: dict, base_dir: Path | None = None) -> SweepConfig:
    data = copy.deepcopy(data)
    _check_schema(data, "sweep")
    _check_keys(data, {"schema_version", "name", "base", "base_path", "axes", "reduction", "output"}, "sweep")
    if "base" in data:
        base = data["base"]
    elif "base_path" in data:
        p = Path(data["base_path"])
        if not p.is_absolute() and base_dir is not None:
            p = base_dir / p
        base = read_json(p)
    else:
        raise ConfigurationError("sweep: needs 'base' or 'base_path'")
    axes_raw = data.get("axes")
    if not isinstance(axes_raw, list) or not axes_raw:
        raise ConfigurationError("sweep.axes must be a non-empty list")
    axes = []
    for i, ax in enumerate(axes_raw):
        where = f"sweep.axes[{i}]"
        _check_keys(ax, {"path", "values"}, where)
        path = _require(ax, "path", where)
        values = _require(ax, "values", where)
        if not isinstance(values, list) or not values:
            raise ConfigurationError(f"{where}.values must be a non-empty list")
        _resolve(base, path)
        axes.append((path, values))
    red = dict(_require(data, "reduction", "sweep"))
    _check_keys(red, {"metrics", "times"}, "sweep.reduction")
    metrics = list(_require(red, "metrics", "sweep.reduction"))
    times = [float(t) for t in _require(red, "times", "sweep.reduction")]
    if not times or any(not t > 0 for t in times):
        raise ConfigurationError("sweep.reduction.times must be a non-empty list of positive times")
    for m in metrics:
        parse_metric(m)
    parse_experiment(base)
    return SweepConfig(data, base, axes, metrics, sorted(set(times)))
