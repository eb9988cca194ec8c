"""Monte Carlo ensembles and parameter sweeps over protocol runs.

A sweep spans the Cartesian product of its axes; every (point, trajectory)
pair gets its own deterministic random seed derived from the sweep's base
seed with ``numpy.random.SeedSequence(seed_base, spawn_key=(point_index,
trajectory_index))``, so results do not depend on execution order or on how
work is distributed over processes.
"""
from __future__ import annotations

import csv
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np

from . import bayes
from .protocol import (ProtocolConfig, ProtocolError, run_protocol,
                       run_single_quadrature)

__all__ = [
    "SweepSpec",
    "PointResult",
    "SweepResult",
    "StepAverages",
    "run_sweep",
    "run_trajectory_metrics",
    "aggregate_trajectories",
    "emit_report",
    "read_report_csv",
    "derive_seed",
]

CSV_FLOAT = "%.17g"


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep and how many trajectories to run per point.

    ``axes`` maps dotted parameter paths (``nbar``, ``readout_fidelity``,
    ``controller.width_factor``, ...) to value lists.  ``run_kind`` selects
    the full protocol or the single-quadrature optimization workload.
    """

    axes: tuple[tuple[str, tuple], ...]
    trajectories: int = 100
    base: ProtocolConfig = field(default_factory=lambda: ProtocolConfig(mode="bayes"))
    run_kind: str = "protocol"        # "protocol" | "quadrature"
    seed_base: int = 0

    def __post_init__(self):
        if self.trajectories < 1:
            raise ValueError("trajectories must be >= 1")
        if self.run_kind not in ("protocol", "quadrature"):
            raise ValueError("run_kind must be 'protocol' or 'quadrature'")

    def points(self) -> list[dict]:
        """All parameter combinations, in row-major axis order."""
        if not self.axes:
            return [{}]
        names = [name for name, _ in self.axes]
        value_lists = [values for _, values in self.axes]
        return [dict(zip(names, combo))
                for combo in itertools.product(*value_lists)]

    def total_runs(self) -> int:
        return len(self.points()) * self.trajectories


def derive_seed(seed_base: int, point_index: int, trajectory_index: int) -> int:
    """Deterministic per-run seed, independent of scheduling."""
    seq = np.random.SeedSequence(seed_base,
                                 spawn_key=(point_index, trajectory_index))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def apply_overrides(config: ProtocolConfig, overrides: dict) -> ProtocolConfig:
    """Apply dotted-path overrides to a protocol configuration."""
    plain = {}
    controller_kwargs = {}
    for name, value in overrides.items():
        if name.startswith("controller."):
            controller_kwargs[name.split(".", 1)[1]] = value
        else:
            plain[name] = value
    if controller_kwargs:
        plain["controller"] = dc_replace(config.controller, **controller_kwargs)
    return dc_replace(config, **plain)


def run_trajectory_metrics(config: ProtocolConfig, run_kind: str) -> dict:
    """Run one trajectory and reduce it to scalar metrics."""
    if run_kind == "quadrature":
        result = run_single_quadrature(config)
        entropy_rel = (result.final_entropy_bits
                       - bayes.gaussian_entropy_bits(0.5))
        return {
            "final_entropy": entropy_rel,
            "final_entropy_abs": result.final_entropy_bits,
            "duration": result.duration,
            "measurement_count": float(result.measurement_count),
            "final_width": result.final_width,
            "entropy_steps": [r.entropy_bits for r in result.records],
            "width_steps": [r.belief_width for r in result.records],
        }
    record = run_protocol(config)
    metrics = {
        "final_entropy": record.final_entropy_rel_baseline,
        "final_entropy_abs": record.quadrature_2.final_entropy_bits,
        "duration": record.total_time,
        "measurement_count": float(record.quadrature_1.measurement_count
                                   + record.quadrature_2.measurement_count),
        "count_quadrature_1": float(record.quadrature_1.measurement_count),
        "count_quadrature_2": float(record.quadrature_2.measurement_count),
        "entropy_drop": record.entropy_drop_bits,
        "final_width": record.quadrature_2.final_width,
        "entropy_steps": [r.entropy_bits
                          for r in record.quadrature_1.records
                          + record.quadrature_2.records],
        "width_steps": [r.belief_width
                        for r in record.quadrature_1.records
                        + record.quadrature_2.records],
    }
    if record.gs_fidelity is not None:
        metrics["gs_fidelity"] = record.gs_fidelity
    if record.quad1_marginal_std is not None:
        metrics["quad1_marginal_std"] = record.quad1_marginal_std
    return metrics


def _run_task(args) -> tuple[int, int, dict | None, str | None]:
    point_index, traj_index, config, run_kind = args
    try:
        return point_index, traj_index, run_trajectory_metrics(config, run_kind), None
    except (ProtocolError, bayes.ImpossibleOutcomeError, ValueError) as exc:
        return point_index, traj_index, None, f"{type(exc).__name__}: {exc}"


@dataclass
class StepAverages:
    """Per-step ensemble statistics, aligned by step index.

    Trajectories shorter than the longest one hold their final value, so
    the mean stays defined (and monotone curves stay monotone) after
    individual runs stop.
    """

    mean: np.ndarray
    std: np.ndarray
    count: int


def aggregate_steps(series: list[list[float]]) -> StepAverages:
    if not series:
        raise ValueError("need at least one trajectory")
    longest = max(len(s) for s in series)
    filled = np.empty((len(series), longest))
    for i, s in enumerate(series):
        arr = np.asarray(s, dtype=float)
        if arr.size == 0:
            raise ValueError("empty per-step series")
        filled[i, :arr.size] = arr
        filled[i, arr.size:] = arr[-1]
    return StepAverages(mean=filled.mean(axis=0), std=filled.std(axis=0),
                        count=len(series))


def aggregate_trajectories(metric_dicts: list[dict]) -> dict:
    """Ensemble summary: per-step curves plus final-metric statistics."""
    if not metric_dicts:
        raise ValueError("need at least one trajectory record")
    out: dict = {
        "entropy_vs_step": aggregate_steps(
            [m["entropy_steps"] for m in metric_dicts]),
        "width_vs_step": aggregate_steps(
            [m["width_steps"] for m in metric_dicts]),
    }
    scalars: dict[str, list[float]] = {}
    for m in metric_dicts:
        for key, value in m.items():
            if isinstance(value, (int, float)):
                scalars.setdefault(key, []).append(float(value))
    out["finals"] = {
        key: {"mean": float(np.mean(vals)), "std": float(np.std(vals)),
              "n": len(vals), "values": vals}
        for key, vals in scalars.items()
    }
    return out


@dataclass
class PointResult:
    params: dict
    metrics: dict            # metric -> {mean, std, n}
    failures: list[str]


@dataclass
class SweepResult:
    spec_echo: dict
    points: list[PointResult]

    def metric_table(self, metric: str) -> list[dict]:
        """Rows of (axis values..., mean, std, n) for one metric."""
        rows = []
        for point in self.points:
            if metric not in point.metrics:
                continue
            row = dict(point.params)
            row.update(point.metrics[metric])
            rows.append(row)
        return rows

    def argmin(self, metric: str) -> PointResult:
        best = None
        for point in self.points:
            if metric in point.metrics:
                if best is None or (point.metrics[metric]["mean"]
                                    < best.metrics[metric]["mean"]):
                    best = point
        if best is None:
            raise KeyError(f"metric {metric!r} not present in any point")
        return best


def run_sweep(spec: SweepSpec, workers: int = 1,
              keep_step_curves: bool = False) -> SweepResult:
    """Run the whole sweep; failures are recorded per point, never fatal.

    ``workers > 1`` distributes (point, trajectory) tasks over processes;
    per-task seeds make the result identical to a serial run.
    """
    points = spec.points()
    tasks = []
    for p_idx, overrides in enumerate(points):
        config = apply_overrides(spec.base, overrides)
        for t_idx in range(spec.trajectories):
            seeded = dc_replace(config,
                                seed=derive_seed(spec.seed_base, p_idx, t_idx))
            tasks.append((p_idx, t_idx, seeded, spec.run_kind))

    results: dict[int, list[tuple[int, dict]]] = {i: [] for i in range(len(points))}
    failures: dict[int, list[str]] = {i: [] for i in range(len(points))}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for p_idx, t_idx, metrics, err in pool.map(_run_task, tasks,
                                                       chunksize=1):
                if err is None:
                    results[p_idx].append((t_idx, metrics))
                else:
                    failures[p_idx].append(f"trajectory {t_idx}: {err}")
    else:
        for task in tasks:
            p_idx, t_idx, metrics, err = _run_task(task)
            if err is None:
                results[p_idx].append((t_idx, metrics))
            else:
                failures[p_idx].append(f"trajectory {t_idx}: {err}")

    point_results = []
    for p_idx, overrides in enumerate(points):
        ordered = [m for _, m in sorted(results[p_idx], key=lambda kv: kv[0])]
        metrics_summary: dict[str, dict] = {}
        if ordered:
            agg = aggregate_trajectories(ordered)
            for key, stats in agg["finals"].items():
                entry = {"mean": stats["mean"], "std": stats["std"],
                         "n": stats["n"]}
                metrics_summary[key] = entry
            if keep_step_curves:
                metrics_summary["_entropy_vs_step"] = agg["entropy_vs_step"]
                metrics_summary["_width_vs_step"] = agg["width_vs_step"]
        point_results.append(PointResult(params=dict(overrides),
                                         metrics=metrics_summary,
                                         failures=failures[p_idx]))
    spec_echo = {
        "axes": [[name, list(values)] for name, values in spec.axes],
        "trajectories": spec.trajectories,
        "run_kind": spec.run_kind,
        "seed_base": spec.seed_base,
        "base_mode": spec.base.mode,
    }
    return SweepResult(spec_echo=spec_echo, points=point_results)


# ---------------------------------------------------------------------------
# reporting
# ---------------------------------------------------------------------------

REPORT_SCHEMA = "magcool-sweep/1"


def report_rows(result: SweepResult) -> list[dict]:
    """Long-format rows: one per (point, metric)."""
    axis_names = [name for name, _ in result.spec_echo["axes"]]
    rows = []
    for point in result.points:
        for metric, stats in sorted(point.metrics.items()):
            if metric.startswith("_"):
                continue
            row = {name: point.params.get(name) for name in axis_names}
            row["metric"] = metric
            row["mean"] = stats["mean"]
            row["std"] = stats["std"]
            row["n"] = stats["n"]
            rows.append(row)
    return rows


def emit_report(result: SweepResult, csv_path, json_path) -> None:
    """Write the long-format CSV and the JSON summary of a sweep."""
    axis_names = [name for name, _ in result.spec_echo["axes"]]
    fields = axis_names + ["metric", "mean", "std", "n"]
    rows = report_rows(result)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (CSV_FLOAT % v if isinstance(v, float) else v)
                             for k, v in row.items()})
    summary = {
        "schema": REPORT_SCHEMA,
        "spec": result.spec_echo,
        "points": [
            {"params": p.params,
             "metrics": {k: v for k, v in p.metrics.items()
                         if not k.startswith("_")},
             "failures": p.failures}
            for p in result.points
        ],
    }
    with open(json_path, "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)


def read_report_csv(path) -> list[dict]:
    """Parse an emitted CSV back into typed rows (round-trips floats)."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for key, value in row.items():
                if key == "metric":
                    parsed[key] = value
                elif key == "n":
                    parsed[key] = int(value)
                else:
                    parsed[key] = float(value) if value not in ("", None) else None
            rows.append(parsed)
    return rows
