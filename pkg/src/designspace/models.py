"""Process-model bindings evaluated during virtual experimentation.

Three bindings are available:

``benchmark``
    Analytic model with a ball-shaped feasible set, used for oracle tests.
    KPIs: a smooth quality index and a linear margin index, both functions of
    the distance to the nearest configured center.
``chromapcc``
    Twin-column periodic counter-current capture chromatography (see
    :mod:`designspace.chromapcc`).
``table``
    KPIs precomputed externally, joined to the sampled decisions by value.
"""

from __future__ import annotations

import numpy as np

from .errors import MissingKpi
from .problem import DesignProblem

BENCHMARK_KPI_NAMES = ["quality", "margin"]


def benchmark_kpis(decisions, centers=((0.5, 0.5, 0.5),)) -> np.ndarray:
    """KPIs of the analytic benchmark.

    quality = 90 + 10 * exp(-2 d^2) and margin = 10 - 8 d, where d is the
    distance to the nearest center. Thresholding either KPI at its value on a
    sphere of radius r makes the feasible set exactly the union of balls of
    radius r around the centers.
    """
    x = np.atleast_2d(np.asarray(decisions, dtype=float))
    cs = np.asarray(centers, dtype=float)
    dist = np.min(np.linalg.norm(x[:, None, :] - cs[None, :, :], axis=2), axis=1)
    quality = 90.0 + 10.0 * np.exp(-2.0 * dist**2)
    margin = 10.0 - 8.0 * dist
    return np.column_stack([quality, margin])


def benchmark_quality_threshold(radius: float) -> float:
    """quality value on the sphere of the given radius (constraint level)."""
    return 90.0 + 10.0 * float(np.exp(-2.0 * radius**2))


def benchmark_margin_threshold(radius: float) -> float:
    """margin value on the sphere of the given radius (constraint level)."""
    return 10.0 - 8.0 * radius


class BenchmarkModel:
    """Vectorized analytic benchmark binding."""

    kind = "benchmark"

    def __init__(self, options: dict):
        self.centers = tuple(tuple(map(float, c)) for c in options.get("centers", [[0.5, 0.5, 0.5]]))
        self.kpi_names = list(BENCHMARK_KPI_NAMES)

    def evaluate(self, decisions: np.ndarray, workers: int = 1) -> tuple[np.ndarray, list]:
        return benchmark_kpis(decisions, self.centers), []


class TableModel:
    """KPI lookup against an externally computed table of the same decisions."""

    kind = "table"

    def __init__(self, options: dict, problem: DesignProblem):
        import csv

        path = options["path"]
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [row for row in reader if row]
        for name in problem.decision_names + problem.kpi_names:
            if name not in header:
                raise MissingKpi(f"table {path} lacks column {name!r}")
        data = np.asarray(rows, dtype=float)
        dcols = [header.index(n) for n in problem.decision_names]
        kcols = [header.index(n) for n in problem.kpi_names]
        self.table_decisions = data[:, dcols]
        self.table_kpis = data[:, kcols]
        self.scale = np.maximum(np.abs(self.table_decisions).max(axis=0), 1.0)
        self.kpi_names = list(problem.kpi_names)

    def evaluate(self, decisions: np.ndarray, workers: int = 1) -> tuple[np.ndarray, list]:
        out = np.empty((len(decisions), self.table_kpis.shape[1]))
        failures = []
        for i, row in enumerate(decisions):
            err = np.max(np.abs(self.table_decisions - row) / self.scale, axis=1)
            j = int(np.argmin(err))
            if err[j] > 1e-9:
                failures.append((i, f"no table row matches decisions {row.tolist()}"))
                out[i] = np.nan
            else:
                out[i] = self.table_kpis[j]
        return out, failures


class ChromaPccModel:
    """Binding of the twin-column capture chromatography simulator."""

    kind = "chromapcc"

    def __init__(self, options: dict):
        from . import chromapcc

        params_path = options.get("params")
        self.params = (chromapcc.ColumnParams.from_json(params_path)
                       if params_path else chromapcc.default_params())
        self.schedule_options = options.get("schedule", {})
        self.css_tol = float(options.get("css_tol", 1e-4))
        self.max_cycles = int(options.get("max_cycles", 50))
        self.kpi_names = ["yield", "productivity"]

    def evaluate(self, decisions: np.ndarray, workers: int = 1) -> tuple[np.ndarray, list]:
        from . import chromapcc

        jobs = [
            (tuple(row), self.params, self.schedule_options, self.css_tol, self.max_cycles)
            for row in decisions
        ]
        out = np.full((len(jobs), 2), np.nan)
        failures: list[tuple[int, str]] = []
        if workers > 1 and len(jobs) > 1:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(chromapcc.evaluate_job, jobs))
        else:
            results = [chromapcc.evaluate_job(job) for job in jobs]
        for i, res in enumerate(results):
            if isinstance(res, str):
                failures.append((i, res))
            else:
                out[i] = res
        return out, failures


def bind_model(problem: DesignProblem):
    """Instantiate the model named by the problem definition."""
    spec = dict(problem.model)
    kind = spec.pop("kind", "benchmark")
    if kind == "benchmark":
        model = BenchmarkModel(spec)
    elif kind == "chromapcc":
        model = ChromaPccModel(spec)
    elif kind == "table":
        model = TableModel(spec, problem)
    else:
        raise MissingKpi(f"unknown model kind {kind!r}")
    missing = [k for k in problem.kpi_names if k not in model.kpi_names]
    if missing:
        raise MissingKpi(f"model {kind!r} does not produce KPIs {missing}")
    return model
