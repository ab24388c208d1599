"""Design-space identification: the alpha-radius bisection search and the
tolerance-based, resolution-support, and combinatorial methods.

All geometry runs in bounds-normalized coordinates. The search finds the
largest alpha radius whose shape keeps the number of enclosed
constraint-violating points within the allowed percentage; the three methods
differ in that percentage and in whether interpolator-predicted satisfied
points are added to densify the cloud.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry
from .errors import BracketInvalid, EmptyShape, MaxIterationsWarning, NoUnifiedShape
from .geometry import AlphaShape, Normalization, Triangulation, alpha_complex, delaunay
from .problem import DesignProblem, LabeledCloud, classify
from .sampling import unit_sobol

# extra points are drawn from the Sobol sequence far past any main batch so
# support points never coincide with truth samples
EXTRA_POINT_SKIP = 2**17

DEFAULT_BRACKET = (1e-3, 1e3)
BRACKET_REPAIR_LIMIT = 60


@dataclass
class AlphaSearchResult:
    """Outcome of one alpha-radius bisection."""

    shape: AlphaShape | None
    alpha_radius: float
    alpha_multiplier: float
    v_num: int
    in_shape_mask: np.ndarray      # over the violated cloud
    iterations: int
    converged: bool
    saturated: bool                # admissible all the way to the convex hull
    bracket_repairs: int
    alpha_m_low: float = 0.0       # final bisection bracket
    alpha_m_high: float = 0.0

    @property
    def n_regions(self) -> int:
        return 0 if self.shape is None else self.shape.n_regions


def _allowed_violations(v_max_pct: float, n_sat: int, v_num: int) -> float:
    return v_max_pct * (n_sat + v_num) / 100.0


def find_alpha_radius(p_sat, p_vio, v_max_pct: float,
                      alpha_m_bounds: tuple[float, float] = DEFAULT_BRACKET,
                      delta_tol: float = 1e-3, iter_max: int = 50,
                      alpha_base: float | None = None,
                      normalization: Normalization | None = None) -> AlphaSearchResult:
    """Bisect for the largest alpha radius meeting the violation tolerance.

    The multiplier interval [alpha_mL, alpha_mU] scales the base radius
    ``alpha_base`` (product of normalized upper bounds over the dimension,
    i.e. 1/d in normalized coordinates). The lower end must satisfy the
    violation constraint and the upper end must violate it; brackets that do
    not are repaired by halving/doubling. When no admissible radius ever
    produces a violation (convex satisfied clouds), the search saturates at
    the convex hull and returns it.

    Raises
    ------
    BracketInvalid
        If the lower bracket cannot be made admissible within the repair
        budget.
    """
    p_sat = np.atleast_2d(np.asarray(p_sat, dtype=float))
    p_vio = np.atleast_2d(np.asarray(p_vio, dtype=float))
    if p_vio.size == 0:
        p_vio = p_vio.reshape(0, p_sat.shape[1])
    n_sat = len(p_sat)
    d = p_sat.shape[1]
    if alpha_base is None:
        alpha_base = 1.0 / d
    tri: Triangulation = delaunay(p_sat)
    max_cr = tri.max_circumradius

    def build(alpha_m: float):
        alpha_r = alpha_base * alpha_m
        try:
            shape = alpha_complex(tri, alpha_r, normalization)
        except EmptyShape:
            return None, 0, np.zeros(len(p_vio), dtype=bool)
        if len(p_vio):
            mask = shape.contains_many(p_vio)
        else:
            mask = np.zeros(0, dtype=bool)
        return shape, int(mask.sum()), mask

    def admissible(v_num: int) -> bool:
        return v_num <= _allowed_violations(v_max_pct, n_sat, v_num)

    lo, hi = float(alpha_m_bounds[0]), float(alpha_m_bounds[1])
    if not 0 < lo < hi:
        raise BracketInvalid(f"invalid multiplier bounds {alpha_m_bounds}")

    repairs = 0
    lo_shape, lo_v, lo_mask = build(lo)
    while not admissible(lo_v):
        repairs += 1
        if repairs > BRACKET_REPAIR_LIMIT:
            raise BracketInvalid(
                f"lower bracket still has {lo_v} violations after "
                f"{BRACKET_REPAIR_LIMIT} halvings")
        lo /= 2.0
        lo_shape, lo_v, lo_mask = build(lo)

    saturated = False
    hi_shape, hi_v, _ = build(hi)
    while admissible(hi_v):
        if alpha_base * hi >= max_cr:
            # the filter is exhausted: the convex hull itself is admissible,
            # so it is the largest alpha shape
            saturated = True
            break
        repairs += 1
        if repairs > BRACKET_REPAIR_LIMIT:
            raise BracketInvalid(
                f"upper bracket keeps satisfying the tolerance after "
                f"{BRACKET_REPAIR_LIMIT} doublings")
        hi *= 2.0
        hi_shape, hi_v, _ = build(hi)

    if saturated:
        mask = hi_shape.contains_many(p_vio) if len(p_vio) else np.zeros(0, dtype=bool)
        return AlphaSearchResult(shape=hi_shape, alpha_radius=alpha_base * hi,
                                 alpha_multiplier=hi, v_num=hi_v,
                                 in_shape_mask=mask, iterations=0, converged=True,
                                 saturated=True, bracket_repairs=repairs,
                                 alpha_m_low=hi, alpha_m_high=hi)

    best = (lo_shape, lo, lo_v, lo_mask)
    converged = False
    iterations = 0
    for iterations in range(1, iter_max + 1):
        mid = lo + (hi - lo) / 2.0
        shape, v_num, mask = build(mid)
        if admissible(v_num):
            lo = mid
            best = (shape, mid, v_num, mask)
            if (hi - lo) <= delta_tol:
                converged = True
                break
        else:
            hi = mid

    if not converged:
        warnings.warn(
            f"alpha-radius bisection hit iter_max={iter_max} "
            f"(gap {hi - lo:.3e} > {delta_tol:.3e})",
            MaxIterationsWarning, stacklevel=2)

    shape, mult, v_num, mask = best
    return AlphaSearchResult(shape=shape, alpha_radius=alpha_base * mult,
                             alpha_multiplier=mult, v_num=v_num,
                             in_shape_mask=mask, iterations=iterations,
                             converged=converged, saturated=False,
                             bracket_repairs=repairs,
                             alpha_m_low=lo, alpha_m_high=hi)


@dataclass
class DesignSpaceResult:
    """An identified design space plus method metadata."""

    method: str
    problem: DesignProblem
    shape: AlphaShape
    alpha_radius: float
    alpha_multiplier: float
    v_max_pct: float
    n_regions: int
    n_shape_points: int
    in_shape_violations: list[dict]
    size_normalized: float
    size_physical: float
    size_unit: str
    extra_power: int | None = None
    extra_decisions: np.ndarray | None = None
    extra_kpis: np.ndarray | None = None
    tolerance_grid: list[dict] = field(default_factory=list)
    power_grid: list[dict] = field(default_factory=list)
    search: dict = field(default_factory=dict)
    audit: dict | None = None
    timings: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def n_violations(self) -> int:
        return len(self.in_shape_violations)

    def to_dict(self) -> dict:
        doc = {
            "schema": "designspace.dsp/1",
            "method": self.method,
            "problem": self.problem.to_dict(),
            "shape": self.shape.to_dict(),
            "alpha_radius": self.alpha_radius,
            "alpha_multiplier": self.alpha_multiplier,
            "v_max_pct": self.v_max_pct,
            "n_regions": self.n_regions,
            "n_shape_points": self.n_shape_points,
            "in_shape_violations": self.in_shape_violations,
            "size_normalized": self.size_normalized,
            "size_physical": self.size_physical,
            "size_unit": self.size_unit,
            "extra_power": self.extra_power,
            "extra_decisions": None if self.extra_decisions is None else self.extra_decisions.tolist(),
            "extra_kpis": None if self.extra_kpis is None else self.extra_kpis.tolist(),
            "tolerance_grid": self.tolerance_grid,
            "power_grid": self.power_grid,
            "search": self.search,
            "audit": self.audit,
            "timings": self.timings,
            "warnings": self.warnings,
        }
        return doc

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_dict(cls, doc: dict) -> "DesignSpaceResult":
        extra_d = doc.get("extra_decisions")
        extra_k = doc.get("extra_kpis")
        return cls(
            method=doc["method"],
            problem=DesignProblem.from_dict(doc["problem"]),
            shape=AlphaShape.from_dict(doc["shape"]),
            alpha_radius=doc["alpha_radius"],
            alpha_multiplier=doc["alpha_multiplier"],
            v_max_pct=doc["v_max_pct"],
            n_regions=doc["n_regions"],
            n_shape_points=doc["n_shape_points"],
            in_shape_violations=doc["in_shape_violations"],
            size_normalized=doc["size_normalized"],
            size_physical=doc["size_physical"],
            size_unit=doc["size_unit"],
            extra_power=doc.get("extra_power"),
            extra_decisions=None if extra_d is None else np.asarray(extra_d, dtype=float),
            extra_kpis=None if extra_k is None else np.asarray(extra_k, dtype=float),
            tolerance_grid=doc.get("tolerance_grid", []),
            power_grid=doc.get("power_grid", []),
            search=doc.get("search", {}),
            audit=doc.get("audit"),
            timings=doc.get("timings", {}),
            warnings=doc.get("warnings", []),
        )

    @classmethod
    def from_json(cls, path) -> "DesignSpaceResult":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _violation_records(cloud: LabeledCloud, mask_over_vio: np.ndarray) -> list[dict]:
    vio_rows = np.nonzero(~cloud.satisfied)[0]
    records = []
    for local, row in enumerate(vio_rows):
        if not mask_over_vio[local]:
            continue
        records.append({
            "index": int(row),
            "decisions": cloud.decisions[row].tolist(),
            "kpis": cloud.kpis[row].tolist(),
            "violated_constraints": [str(cloud.problem.constraints[j])
                                     for j in cloud.violated_constraints[row]],
        })
    return records


def _make_result(method: str, cloud: LabeledCloud, search: AlphaSearchResult,
                 v_max_pct: float, n_shape_points: int, started: float,
                 **extra_fields) -> DesignSpaceResult:
    problem = cloud.problem
    shape = search.shape
    size_n = shape.measure()
    widths = problem.bounds.widths
    return DesignSpaceResult(
        method=method,
        problem=problem,
        shape=shape,
        alpha_radius=search.alpha_radius,
        alpha_multiplier=search.alpha_multiplier,
        v_max_pct=v_max_pct,
        n_regions=search.n_regions,
        n_shape_points=n_shape_points,
        in_shape_violations=_violation_records(cloud, search.in_shape_mask),
        size_normalized=size_n,
        size_physical=size_n * float(np.prod(widths)),
        size_unit=problem.size_unit,
        search={
            "iterations": search.iterations,
            "converged": search.converged,
            "saturated": search.saturated,
            "bracket_repairs": search.bracket_repairs,
        },
        timings={"total_s": time.perf_counter() - started},
        warnings=([] if search.converged else ["bisection hit iteration cap"]),
        **extra_fields,
    )


def identify_tolerance(cloud: LabeledCloud, step: float = 0.25, cap: float = 5.0,
                       **search_kwargs) -> DesignSpaceResult:
    """Smallest violation tolerance (on a 0.25 % grid) whose largest
    admissible alpha shape forms exactly one region.

    Raises
    ------
    NoUnifiedShape
        If the region count never reaches 1 before the tolerance cap.
    """
    started = time.perf_counter()
    norm = Normalization(lower=cloud.problem.bounds.lower.copy(),
                         upper=cloud.problem.bounds.upper.copy())
    grid: list[dict] = []
    v = 0.0
    while v <= cap + 1e-12:
        search = find_alpha_radius(cloud.sat_normalized, cloud.vio_normalized, v,
                                   normalization=norm, **search_kwargs)
        grid.append({
            "v_max_pct": v,
            "n_regions": search.n_regions,
            "alpha_radius": search.alpha_radius,
            "v_num": search.v_num,
        })
        if search.shape is not None and search.n_regions == 1:
            return _make_result("tolerance", cloud, search, v, cloud.n_sat,
                                started, tolerance_grid=grid)
        v += step
    raise NoUnifiedShape(
        f"no single-region shape up to v_max={cap}% "
        f"(region counts: {[g['n_regions'] for g in grid]})")


def _identify_with_support(method: str, cloud: LabeledCloud, interpolator,
                           v_max_pct: float, start_power: int, power_cap: int,
                           extra_skip: int, search_kwargs: dict) -> DesignSpaceResult:
    started = time.perf_counter()
    problem = cloud.problem
    norm = Normalization(lower=problem.bounds.lower.copy(),
                         upper=problem.bounds.upper.copy())
    grid: list[dict] = []
    for power in range(start_power, power_cap + 1):
        extra_n = unit_sobol(problem.dim, power, skip=extra_skip)
        extra_phys = problem.bounds.denormalize(extra_n)
        extra_kpis = interpolator.predict(extra_phys)
        extra_cloud = classify(extra_phys, extra_kpis, problem)
        p_sat = np.vstack([cloud.sat_normalized, extra_n[extra_cloud.satisfied]])
        search = find_alpha_radius(p_sat, cloud.vio_normalized, v_max_pct,
                                   normalization=norm, **search_kwargs)
        grid.append({
            "power": power,
            "n_extra_satisfied": int(extra_cloud.n_sat),
            "n_regions": search.n_regions,
            "alpha_radius": search.alpha_radius,
            "v_num": search.v_num,
        })
        if search.shape is not None and search.n_regions == 1:
            return _make_result(
                method, cloud, search, v_max_pct, len(p_sat), started,
                power_grid=grid,
                extra_power=power,
                extra_decisions=extra_phys[extra_cloud.satisfied],
                extra_kpis=extra_kpis[extra_cloud.satisfied],
            )
    raise NoUnifiedShape(
        f"no single-region shape up to 2^{power_cap} extra points "
        f"(region counts: {[g['n_regions'] for g in grid]})")


def identify_resolution_support(cloud: LabeledCloud, interpolator,
                                start_power: int = 10, power_cap: int = 16,
                                extra_skip: int = EXTRA_POINT_SKIP,
                                **search_kwargs) -> DesignSpaceResult:
    """Densify the satisfied cloud with interpolator-predicted points until a
    zero-violation single-region shape appears."""
    return _identify_with_support("resolution_support", cloud, interpolator,
                                  0.0, start_power, power_cap, extra_skip,
                                  search_kwargs)


def identify_combinatorial(cloud: LabeledCloud, interpolator,
                           v_max_pct: float = 0.25, start_power: int = 10,
                           power_cap: int = 16, extra_skip: int = EXTRA_POINT_SKIP,
                           **search_kwargs) -> DesignSpaceResult:
    """Resolution support with a nonzero violation tolerance: unified shapes
    form from fewer extra points at the cost of admitted violations."""
    return _identify_with_support("combinatorial", cloud, interpolator,
                                  v_max_pct, start_power, power_cap, extra_skip,
                                  search_kwargs)


def audit_extras(result: DesignSpaceResult, truth_fn, fraction: float = 0.05,
                 seed: int = 0) -> dict:
    """Re-simulate a random sample of the predicted-satisfied extra points
    with the truth model and report how often the prediction misclassified.

    ``truth_fn`` maps an (n, d) decision matrix to an (n, n_kpi) KPI matrix.
    """
    if result.extra_decisions is None or len(result.extra_decisions) == 0:
        return {"n_audited": 0, "n_misclassified": 0}
    rng = np.random.Generator(np.random.PCG64(seed))
    n = len(result.extra_decisions)
    k = max(1, int(round(fraction * n)))
    rows = rng.choice(n, size=min(k, n), replace=False)
    rows.sort()
    truth_kpis = np.atleast_2d(np.asarray(truth_fn(result.extra_decisions[rows])))
    truth_cloud = classify(result.extra_decisions[rows], truth_kpis, result.problem)
    mis = int((~truth_cloud.satisfied).sum())
    return {"n_audited": int(len(rows)), "n_misclassified": mis,
            "misclassified_fraction": mis / len(rows)}
