"""Run experiments and sweeps from parsed configs."""
from __future__ import annotations

import copy
import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from .. import analytic
from ..errors import ConfigurationError, UndefinedStatisticError
from ..observables import ObservableSeries, g2_cross, population, series_report, squeezing
from ..propagator import Propagator
from ..states import CoherentSpec, SqueezeSpec, TwoModeSqueezeSpec, prepare
from .config import ExperimentConfig, SweepConfig, config_hash, parse_experiment, set_path

UNITS = {
    "hbar": 1,
    "time": "raw time t in inverse coupling units",
    "scaled_time": "dimensionless lambda1*t (lambda1' t for the four-mode model)",
}


@dataclass
class ReportBundle:
    series: ObservableSeries
    discrepancies: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "metadata": self.metadata,
            "series": self.series.to_json(),
            "discrepancies": [d.to_json() for d in self.discrepancies],
        }

    def write(self, out_dir, fmt: str = "csv") -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            path = out / "report.json"
            path.write_text(_dumps(self.to_json()))
            return [path]
        written = [out / "series.csv", out / "metadata.json"]
        written[0].write_text(self.series.to_csv())
        written[1].write_text(_dumps(self.metadata))
        if self.discrepancies:
            p = out / "discrepancies.json"
            p.write_text(_dumps([d.to_json() for d in self.discrepancies]))
            written.append(p)
        return written


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2) + "\n"


def _clean(obj):
    """NaN/inf are not JSON; write them as null."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _input_of(cfg: ExperimentConfig, kind):
    for s in cfg.specs:
        if isinstance(s, kind):
            return s
    return None


def _analytic_reports(cfg: ExperimentConfig, states, times) -> list:
    reports = []
    t = np.asarray(times)
    last = states[-1]
    t_end = float(t[-1])
    for req in cfg.analytic:
        policy = analytic.TolerancePolicy(req.rel_tol, req.abs_tol, req.report_only, req.min_residual_order)
        q = req.quantity
        if q == "g2_fourmode_tmsv":
            if cfg.model.kind != "four":
                raise ConfigurationError(f"{q} needs the four-mode model")
            tm = _input_of(cfg, TwoModeSqueezeSpec)
            if tm is None:
                raise ConfigurationError(f"{q} needs a two_mode_squeezed input")
            pred = analytic.ShortTimePrediction(
                "g2_bg", analytic.g2_fourmode_tmsv(tm.kappa), "complete transfer, lambda1' t = pi/2",
                "four-mode transfer", {"kappa": tm.kappa, "t": t_end})
            reports.append(analytic.compare(pred, g2_cross(last, "b", "g"), policy))
            continue
        if cfg.model.kind != "three":
            raise ConfigurationError(f"{q} compares against the three-mode model")
        p = cfg.model.params
        if q in ("flux_coherent", "squeezing_coherent"):
            coh = _input_of(cfg, CoherentSpec)
            if coh is None or coh.mode != "c":
                raise ConfigurationError(f"{q} needs a coherent input on c")
            if q == "flux_coherent":
                mask = t > 0
                pb, pg = analytic.flux_coherent(coh.magnitude, p.lambda1, p.lambda2, t[mask])
                nb = [population(s, "b") for s, m in zip(states, mask) if m]
                ng = [population(s, "g") for s, m in zip(states, mask) if m]
                params = {"alpha": coh.magnitude, "lambda1": p.lambda1, "lambda2": p.lambda2}
                reports.append(analytic.compare_series("n_b", t[mask], pb, nb, policy, params))
                reports.append(analytic.compare_series("n_g", t[mask], pg, ng, policy, params))
            else:
                vals = analytic.squeeze_coeffs_coherent(coh.magnitude, coh.phase, p.lambda1, p.lambda2, t_end)
                reports += _squeeze_reports(last, vals, ("S1_b", "S2_b", "S1_g", "S2_g"), policy,
                                            {"alpha": coh.magnitude, "phi": coh.phase, "t": t_end})
            continue
        sq = _input_of(cfg, SqueezeSpec)
        if sq is None or sq.mode != "c" or sq.displacement is not None:
            raise ConfigurationError(f"{q} needs a squeezed-vacuum input on c")
        if q == "flux_ratio_squeezed":
            pred = analytic.ShortTimePrediction(
                "ratio_g_b", analytic.flux_ratio_squeezed(sq.r, p.eta), "short time, lambda t << 1",
                "squeezed-vacuum flux", {"r": sq.r, "eta": p.eta, "t": t_end})
            nb = population(last, "b")
            ratio = population(last, "g") / nb if nb > 0 else math.nan
            reports.append(analytic.compare(pred, ratio, policy))
        else:
            vals = analytic.squeeze_coeffs_squeezed_input(sq.r, sq.angle, p.lambda1, p.lambda2, t_end)
            reports += _squeeze_reports(last, vals, ("S1_b", "S2_b", "S1_g", "S2_g"), policy,
                                        {"r": sq.r, "phi_s": sq.angle, "t": t_end})
    return reports


def _squeeze_reports(psi, predicted, names, policy, params) -> list:
    out = []
    for name, value in zip(names, predicted):
        comp, mode = name.split("_")
        try:
            rep = squeezing(psi, mode)
            numeric = rep.S1 if comp == "S1" else rep.S2
        except UndefinedStatisticError:
            numeric = math.nan
        pred = analytic.ShortTimePrediction(name, value, "short time, second order in t", "squeezing", params)
        out.append(analytic.compare(pred, numeric, policy))
    return out


def run(cfg: ExperimentConfig) -> ReportBundle:
    """Build, evolve and tabulate one experiment.  Deterministic for a fixed config."""
    start = time.perf_counter()
    basis = cfg.build_basis()
    h = cfg.model.hamiltonian(basis)
    psi0 = prepare(basis, cfg.specs)
    scale = cfg.model.time_scale
    grid = cfg.grid.build(scale)
    prop = Propagator(h, cfg.evolve, horizon=(grid.times[-1], len(grid)))
    states = prop.series(psi0, grid)
    series = series_report(states, grid, cfg.metrics, h, time_scale=scale if scale != 0 else None)
    discrepancies = _analytic_reports(cfg, states, grid.times)
    leak = max(s.leakage for s in states)
    flags = sorted({f for s in states for f in s.flags})
    meta = {
        "name": cfg.name,
        "config_hash": cfg.hash,
        "schema_version": cfg.raw["schema_version"],
        "model": cfg.model.kind,
        "basis_dim": basis.dim,
        "truncation": cfg.truncation_desc,
        "method": prop.method,
        "max_leakage": leak,
        "norm_deficit": psi0.norm_deficit,
        "flags": flags,
        "time_scale": scale,
        "units": UNITS,
        "wall_time_s": round(time.perf_counter() - start, 3),
    }
    return ReportBundle(series, discrepancies, meta)


def run_dict(data: dict) -> ReportBundle:
    return run(parse_experiment(data))


# --- sweeps ----------------------------------------------------------------

@dataclass
class SweepTable:
    header: list[str]
    rows: list[list]
    metadata: dict

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([_cell(x) for x in row])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"metadata": self.metadata, "columns": self.header, "rows": self.rows}

    def column(self, name: str) -> list:
        i = self.header.index(name)
        return [r[i] for r in self.rows]

    def write(self, out_dir, fmt: str = "csv") -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            p = out / "sweep.json"
            p.write_text(_dumps(self.to_json()))
            return [p]
        p, m = out / "sweep.csv", out / "sweep_metadata.json"
        p.write_text(self.to_csv())
        m.write_text(_dumps(self.metadata))
        return [p, m]


def _cell(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else f"{x:.12g}"
    return str(x)


def point_config(sweep: SweepConfig, values) -> dict:
    """Standalone experiment config for one sweep point."""
    data = copy.deepcopy(sweep.base)
    for (path, _), v in zip(sweep.axes, values):
        set_path(data, path, v)
    units = data.get("time_grid", {}).get("units", "scaled")
    data["time_grid"] = {"times": [0.0] + list(sweep.times), "units": units}
    data["metrics"] = list(sweep.metrics)
    data["analytic"] = []
    return data


def thread_count() -> int:
    env = os.environ.get("AMLASER_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigurationError(f"AMLASER_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigurationError("AMLASER_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def sweep(cfg: SweepConfig, out_dir=None, threads: int | None = None) -> SweepTable:
    """Cartesian product of the axes; one row per point in axis order."""
    points = list(product(*(vals for _, vals in cfg.axes)))
    configs = [parse_experiment(point_config(cfg, p)) for p in points]
    point_dir = Path(out_dir) / "points" if out_dir is not None else None

    def one(i):
        bundle = run(configs[i])
        if point_dir is not None:
            bundle.write(point_dir / f"point_{i:04d}")
        return bundle

    workers = min(threads or thread_count(), len(points))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        bundles = list(pool.map(one, range(len(points))))
    multi = len(cfg.times) > 1
    metric_names = list(bundles[0].series.columns)
    header = [path for path, _ in cfg.axes]
    for t in cfg.times:
        header += [f"{m}@{t:g}" if multi else m for m in metric_names]
    rows = []
    for p, b in zip(points, bundles):
        row = list(p)
        for k in range(1, len(cfg.times) + 1):
            row += [float(b.series.columns[m][k]) for m in metric_names]
        rows.append(row)
    meta = {
        "config_hash": config_hash(cfg.raw),
        "points": len(points),
        "basis_dim": [b.metadata["basis_dim"] for b in bundles],
        "max_leakage": max(b.metadata["max_leakage"] for b in bundles),
        "units": UNITS,
        "reduction_times": cfg.times,
    }
    return SweepTable(header, rows, meta)

