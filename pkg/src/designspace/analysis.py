"""Flexibility analysis on an identified design space: acceptable operating
regions, multivariate proven acceptable ranges, in-region KPI statistics,
and nominal-operating-point comparisons.

The AOR around a nominal point is the largest uniform box in
bounds-normalized coordinates whose 2^d vertices all stay inside the design
space; its per-decision physical half-ranges are the MPAR half-widths.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyRegion, MaxIterationsWarning, NopOutsideSpace
from .identify import DesignSpaceResult
from .problem import LabeledCloud


def _vertex_signs(dim: int) -> np.ndarray:
    return np.asarray(list(itertools.product((-1.0, 1.0), repeat=dim)))


@dataclass
class KpiStats:
    """Min/avg/max and a fixed-bin histogram of each KPI inside a region."""

    kpi_names: list[str]
    minimum: np.ndarray
    average: np.ndarray
    maximum: np.ndarray
    histograms: list[dict]
    n_samples: int
    n_after_support: int

    def to_dict(self) -> dict:
        return {
            "kpi_names": self.kpi_names,
            "minimum": self.minimum.tolist(),
            "average": self.average.tolist(),
            "maximum": self.maximum.tolist(),
            "histograms": self.histograms,
            "n_samples": self.n_samples,
            "n_after_support": self.n_after_support,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "KpiStats":
        return cls(
            kpi_names=doc["kpi_names"],
            minimum=np.asarray(doc["minimum"], dtype=float),
            average=np.asarray(doc["average"], dtype=float),
            maximum=np.asarray(doc["maximum"], dtype=float),
            histograms=doc["histograms"],
            n_samples=doc["n_samples"],
            n_after_support=doc["n_after_support"],
        )


@dataclass
class AorReport:
    """Acceptable operating region around one nominal operating point."""

    nop: np.ndarray                  # physical units
    half_width: float                # normalized, identical across decisions
    half_ranges: np.ndarray          # physical units per decision
    mpar_lower: np.ndarray
    mpar_upper: np.ndarray
    size_normalized: float           # (2 h)^d
    size_physical: float
    size_unit: str
    vertices: np.ndarray             # 2^d corners, physical units
    decision_names: list[str]
    kpi_stats: KpiStats | None
    iterations: int
    converged: bool
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": "designspace.aor/1",
            "nop": self.nop.tolist(),
            "half_width": self.half_width,
            "half_ranges": self.half_ranges.tolist(),
            "mpar_lower": self.mpar_lower.tolist(),
            "mpar_upper": self.mpar_upper.tolist(),
            "size_normalized": self.size_normalized,
            "size_physical": self.size_physical,
            "size_unit": self.size_unit,
            "vertices": self.vertices.tolist(),
            "decision_names": self.decision_names,
            "kpi_stats": None if self.kpi_stats is None else self.kpi_stats.to_dict(),
            "iterations": self.iterations,
            "converged": self.converged,
            "warnings": self.warnings,
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_dict(cls, doc: dict) -> "AorReport":
        stats = doc.get("kpi_stats")
        return cls(
            nop=np.asarray(doc["nop"], dtype=float),
            half_width=doc["half_width"],
            half_ranges=np.asarray(doc["half_ranges"], dtype=float),
            mpar_lower=np.asarray(doc["mpar_lower"], dtype=float),
            mpar_upper=np.asarray(doc["mpar_upper"], dtype=float),
            size_normalized=doc["size_normalized"],
            size_physical=doc["size_physical"],
            size_unit=doc["size_unit"],
            vertices=np.asarray(doc["vertices"], dtype=float),
            decision_names=doc["decision_names"],
            kpi_stats=None if stats is None else KpiStats.from_dict(stats),
            iterations=doc["iterations"],
            converged=doc["converged"],
            warnings=doc.get("warnings", []),
        )


def find_aor(space: DesignSpaceResult, nop, delta_tol: float = 1e-3,
             iter_max: int = 40, cloud: LabeledCloud | None = None,
             use_extras: bool = True) -> AorReport:
    """Bisect the largest uniform normalized box around the nominal point
    whose vertices all lie inside the design space.

    Raises
    ------
    NopOutsideSpace
        If the nominal point itself is not inside the design space.
    """
    shape = space.shape
    bounds = space.problem.bounds
    nop = np.asarray(nop, dtype=float)
    nop_n = bounds.normalize(nop)
    if not shape.contains(nop_n):
        raise NopOutsideSpace(f"nominal point {nop.tolist()} is outside the design space")

    signs = _vertex_signs(space.problem.dim)
    lo, hi = 0.0, 1.0
    converged = False
    iterations = 0
    for iterations in range(1, iter_max + 1):
        fc = lo + (hi - lo) / 2.0
        verts = nop_n + fc * signs
        if bool(np.all(shape.contains_many(verts))):
            lo = fc
            if (hi - lo) <= delta_tol:
                converged = True
                break
        else:
            hi = fc

    warn_list: list[str] = []
    if not converged:
        warnings.warn(f"AOR bisection hit iter_max={iter_max}",
                      MaxIterationsWarning, stacklevel=2)
        warn_list.append("bisection hit iteration cap")

    h = lo
    widths = bounds.widths
    half_ranges = h * widths
    verts_phys = bounds.denormalize(nop_n + h * signs)
    dim = space.problem.dim

    stats = None
    if cloud is not None:
        box = (nop_n - h, nop_n + h)
        try:
            stats = kpi_stats(box, cloud,
                              extras=_space_extras(space) if use_extras else None)
        except EmptyRegion:
            warn_list.append("no samples inside the AOR box")

    return AorReport(
        nop=nop,
        half_width=h,
        half_ranges=half_ranges,
        mpar_lower=nop - half_ranges,
        mpar_upper=nop + half_ranges,
        size_normalized=(2.0 * h) ** dim,
        size_physical=(2.0 * h) ** dim * float(np.prod(widths)),
        size_unit=space.size_unit,
        vertices=verts_phys,
        decision_names=list(space.problem.decision_names),
        kpi_stats=stats,
        iterations=iterations,
        converged=converged,
        warnings=warn_list,
    )


def mpar(report: AorReport) -> tuple[np.ndarray, np.ndarray]:
    """Per-decision multivariate proven acceptable range (lower, upper)."""
    return report.mpar_lower.copy(), report.mpar_upper.copy()


def _space_extras(space: DesignSpaceResult):
    if space.extra_decisions is None or len(space.extra_decisions) == 0:
        return None
    return space.extra_decisions, space.extra_kpis


def kpi_stats(region, cloud: LabeledCloud, extras=None, nbins: int = 20) -> KpiStats:
    """KPI statistics over the samples whose decisions fall inside a region.

    ``region`` is either an alpha shape (design space) or a normalized box
    given as a (lower, upper) pair. ``extras`` optionally supplies
    interpolator-predicted (decisions, kpis) support points that densify the
    statistics.

    Raises
    ------
    EmptyRegion
        If no sample lies inside the region.
    """
    decisions_n = cloud.normalized
    kpis = cloud.kpis
    n_truth_inside = 0

    def select(dec_n: np.ndarray) -> np.ndarray:
        if isinstance(region, tuple):
            lo, hi = region
            return np.all((dec_n >= lo) & (dec_n <= hi), axis=1)
        return region.contains_many(dec_n)

    inside = select(decisions_n)
    values = kpis[inside]
    n_truth_inside = int(inside.sum())
    n_total = n_truth_inside

    if extras is not None:
        extra_dec, extra_kpis = extras
        extra_n = cloud.problem.bounds.normalize(extra_dec)
        einside = select(extra_n)
        if np.any(einside):
            values = np.vstack([values, extra_kpis[einside]]) if len(values) else extra_kpis[einside]
        n_total = n_truth_inside + int(einside.sum())

    if len(values) == 0:
        raise EmptyRegion("no samples inside the requested region")

    histograms = []
    for j, name in enumerate(cloud.problem.kpi_names):
        col = values[:, j]
        counts, edges = np.histogram(col, bins=nbins, range=(col.min(), col.max()))
        histograms.append({"kpi": name, "edges": edges.tolist(), "counts": counts.tolist()})

    return KpiStats(
        kpi_names=list(cloud.problem.kpi_names),
        minimum=values.min(axis=0),
        average=values.mean(axis=0),
        maximum=values.max(axis=0),
        histograms=histograms,
        n_samples=n_truth_inside,
        n_after_support=n_total,
    )


@dataclass
class NopComparison:
    """Side-by-side flexibility comparison of two nominal operating points."""

    report_a: AorReport
    report_b: AorReport
    aor_size_delta_pct: float
    mpar_delta_pct: np.ndarray
    kpi_delta_pct: dict

    def to_dict(self) -> dict:
        return {
            "schema": "designspace.compare/1",
            "nop_a": self.report_a.to_dict(),
            "nop_b": self.report_b.to_dict(),
            "aor_size_delta_pct": self.aor_size_delta_pct,
            "mpar_delta_pct": self.mpar_delta_pct.tolist(),
            "kpi_delta_pct": self.kpi_delta_pct,
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def _pct_change(a: float, b: float) -> float:
    if a == 0.0:
        return 0.0 if b == 0.0 else float("inf")
    return (b - a) / abs(a) * 100.0


def compare_nops(space: DesignSpaceResult, nop_a, nop_b,
                 cloud: LabeledCloud | None = None, delta_tol: float = 1e-3,
                 iter_max: int = 40) -> NopComparison:
    """AOR/MPAR/KPI deltas between two nominal operating points (percentages
    are the change from the first to the second point)."""
    rep_a = find_aor(space, nop_a, delta_tol=delta_tol, iter_max=iter_max, cloud=cloud)
    rep_b = find_aor(space, nop_b, delta_tol=delta_tol, iter_max=iter_max, cloud=cloud)

    mpar_delta = np.asarray([
        _pct_change(ha, hb)
        for ha, hb in zip(rep_a.half_ranges, rep_b.half_ranges)
    ])
    kpi_delta: dict = {}
    if rep_a.kpi_stats is not None and rep_b.kpi_stats is not None:
        for j, name in enumerate(rep_a.kpi_stats.kpi_names):
            kpi_delta[name] = {
                "minimum_pct": _pct_change(rep_a.kpi_stats.minimum[j], rep_b.kpi_stats.minimum[j]),
                "average_pct": _pct_change(rep_a.kpi_stats.average[j], rep_b.kpi_stats.average[j]),
                "maximum_pct": _pct_change(rep_a.kpi_stats.maximum[j], rep_b.kpi_stats.maximum[j]),
            }
    return NopComparison(
        report_a=rep_a,
        report_b=rep_b,
        aor_size_delta_pct=_pct_change(rep_a.size_physical, rep_b.size_physical),
        mpar_delta_pct=mpar_delta,
        kpi_delta_pct=kpi_delta,
    )


def format_aor_report(report: AorReport, units: list[str] | None = None) -> str:
    """Human-readable AOR/MPAR summary table."""
    units = units or [""] * len(report.decision_names)
    lines = [
        "Acceptable operating region",
        f"  normalized half-width : {report.half_width:.6g}",
        f"  AOR size              : {report.size_physical:.6g} {report.size_unit}",
    ]
    for name, unit, center, half in zip(report.decision_names, units,
                                        report.nop, report.half_ranges):
        suffix = f" {unit}" if unit else ""
        lines.append(f"  range {name:12s}: {center:g} +/- {half:.4g}{suffix}")
    if report.kpi_stats is not None:
        s = report.kpi_stats
        lines.append(f"  samples inside        : {s.n_samples}"
                     + (f" ({s.n_after_support} after support)"
                        if s.n_after_support != s.n_samples else ""))
        for j, name in enumerate(s.kpi_names):
            lines.append(f"  {name:14s} min/avg/max: "
                         f"{s.minimum[j]:.4g} / {s.average[j]:.4g} / {s.maximum[j]:.4g}")
    if not report.converged:
        lines.append("  WARNING: bisection hit its iteration cap")
    return "\n".join(lines)


def format_comparison(cmp: NopComparison, units: list[str] | None = None) -> str:
    """Human-readable two-point comparison (percentages: first -> second)."""
    a, b = cmp.report_a, cmp.report_b
    lines = [
        "Nominal operating point comparison",
        f"  AOR size : {a.size_physical:.4g} -> {b.size_physical:.4g} {a.size_unit} "
        f"({cmp.aor_size_delta_pct:+.1f}%)",
    ]
    for j, name in enumerate(a.decision_names):
        lines.append(
            f"  MPAR {name:12s}: {a.nop[j]:g} +/- {a.half_ranges[j]:.4g} -> "
            f"{b.nop[j]:g} +/- {b.half_ranges[j]:.4g} ({cmp.mpar_delta_pct[j]:+.1f}%)")
    for name, deltas in cmp.kpi_delta_pct.items():
        sa, sb = a.kpi_stats, b.kpi_stats
        j = sa.kpi_names.index(name)
        lines.append(
            f"  {name} min/avg/max: "
            f"{sa.minimum[j]:.4g}/{sa.average[j]:.4g}/{sa.maximum[j]:.4g} -> "
            f"{sb.minimum[j]:.4g}/{sb.average[j]:.4g}/{sb.maximum[j]:.4g} "
            f"({deltas['minimum_pct']:+.1f}%/{deltas['average_pct']:+.1f}%/{deltas['maximum_pct']:+.1f}%)")
    return "\n".join(lines)
