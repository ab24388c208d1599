"""Problem definition, outcome classification, and labeled-cloud I/O."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InvalidBounds, MissingKpi
from .sampling import Bounds


@dataclass(frozen=True)
class Constraint:
    """A performance constraint on one KPI, e.g. yield >= 99."""

    kpi: str
    op: str  # "<=" or ">="
    value: float

    def __post_init__(self):
        if self.op not in ("<=", ">="):
            raise ValueError(f"constraint op must be '<=' or '>=', got {self.op!r}")

    def satisfied(self, values: np.ndarray) -> np.ndarray:
        if self.op == "<=":
            return values <= self.value
        return values >= self.value

    def __str__(self) -> str:
        return f"{self.kpi} {self.op} {self.value:g}"


@dataclass(frozen=True)
class DesignProblem:
    """Decision bounds, performance constraints, and the model binding."""

    decision_names: list[str]
    decision_units: list[str]
    bounds: Bounds
    kpi_names: list[str]
    kpi_units: list[str]
    constraints: list[Constraint]
    model: dict = field(default_factory=dict)
    sampling: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.decision_names) != len(self.bounds):
            raise InvalidBounds("one bound pair per decision is required")
        for c in self.constraints:
            if c.kpi not in self.kpi_names:
                raise MissingKpi(f"constraint references unknown KPI {c.kpi!r}")

    @property
    def dim(self) -> int:
        return len(self.decision_names)

    @property
    def size_unit(self) -> str:
        units = [u for u in self.decision_units if u]
        return " * ".join(units) if units else "-"

    def to_dict(self) -> dict:
        return {
            "decisions": [
                {"name": n, "unit": u}
                for n, u in zip(self.decision_names, self.decision_units)
            ],
            "bounds": {"lower": self.bounds.lower.tolist(), "upper": self.bounds.upper.tolist()},
            "kpis": [
                {"name": n, "unit": u}
                for n, u in zip(self.kpi_names, self.kpi_units)
            ],
            "constraints": [
                {"kpi": c.kpi, "op": c.op, "value": c.value} for c in self.constraints
            ],
            "model": self.model,
            "sampling": self.sampling,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DesignProblem":
        decisions = doc["decisions"]
        kpis = doc["kpis"]
        return cls(
            decision_names=[d["name"] for d in decisions],
            decision_units=[d.get("unit", "") for d in decisions],
            bounds=Bounds(lower=np.asarray(doc["bounds"]["lower"], dtype=float),
                          upper=np.asarray(doc["bounds"]["upper"], dtype=float)),
            kpi_names=[k["name"] for k in kpis],
            kpi_units=[k.get("unit", "") for k in kpis],
            constraints=[Constraint(c["kpi"], c["op"], float(c["value"]))
                         for c in doc.get("constraints", [])],
            model=doc.get("model", {}),
            sampling=doc.get("sampling", {}),
        )

    @classmethod
    def from_json(cls, path) -> "DesignProblem":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


@dataclass
class LabeledCloud:
    """Sampled decision vectors with KPI values and satisfied/violated labels.

    The satisfied and violated subsets partition the cloud: a row is
    satisfied iff every constraint holds for its KPIs.
    """

    problem: DesignProblem
    decisions: np.ndarray
    kpis: np.ndarray
    satisfied: np.ndarray
    violated_constraints: list[tuple[int, ...]]

    def __len__(self) -> int:
        return len(self.decisions)

    @property
    def normalized(self) -> np.ndarray:
        return self.problem.bounds.normalize(self.decisions)

    @property
    def n_sat(self) -> int:
        return int(self.satisfied.sum())

    @property
    def n_vio(self) -> int:
        return int((~self.satisfied).sum())

    @property
    def sat_normalized(self) -> np.ndarray:
        return self.normalized[self.satisfied]

    @property
    def vio_normalized(self) -> np.ndarray:
        return self.normalized[~self.satisfied]

    def to_csv(self, path) -> None:
        names = self.problem.decision_names + self.problem.kpi_names + ["satisfied"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(names)
            for dec, kpi, sat in zip(self.decisions, self.kpis, self.satisfied):
                writer.writerow([f"{v:.17g}" for v in dec]
                                + [f"{v:.17g}" for v in kpi]
                                + [int(sat)])

    @classmethod
    def from_csv(cls, path, problem: DesignProblem) -> "LabeledCloud":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [row for row in reader if row]
        expected = problem.decision_names + problem.kpi_names + ["satisfied"]
        if header != expected:
            raise MissingKpi(f"cloud columns {header} do not match problem columns {expected}")
        nd = problem.dim
        nk = len(problem.kpi_names)
        if not rows:
            return classify(np.empty((0, nd)), np.empty((0, nk)), problem)
        data = np.asarray(rows, dtype=float)
        # labels are recomputed from the KPIs so the satisfied flag can never
        # drift from the constraint set
        return classify(data[:, :nd], data[:, nd:nd + nk], problem)


def classify(decisions, kpis, problem: DesignProblem) -> LabeledCloud:
    """Label each row satisfied iff all performance constraints hold.

    Raises
    ------
    MissingKpi
        If the KPI matrix does not provide one column per problem KPI.
    """
    dec = np.atleast_2d(np.asarray(decisions, dtype=float))
    kp = np.atleast_2d(np.asarray(kpis, dtype=float))
    if dec.shape[0] == 0:
        dec = dec.reshape(0, problem.dim)
        kp = kp.reshape(0, len(problem.kpi_names))
    if kp.shape[1] != len(problem.kpi_names):
        raise MissingKpi(
            f"expected {len(problem.kpi_names)} KPI columns, got {kp.shape[1]}")
    if kp.shape[0] != dec.shape[0]:
        raise MissingKpi("KPI rows do not match decision rows")

    n = dec.shape[0]
    ok = np.ones(n, dtype=bool)
    per_constraint = []
    for c in problem.constraints:
        col = problem.kpi_names.index(c.kpi)
        holds = c.satisfied(kp[:, col])
        per_constraint.append(holds)
        ok &= holds
    violated = []
    for i in range(n):
        violated.append(tuple(j for j, holds in enumerate(per_constraint) if not holds[i]))
    return LabeledCloud(problem=problem, decisions=dec, kpis=kp,
                        satisfied=ok, violated_constraints=violated)


def refine_bounds(problem: DesignProblem, new_bounds: Bounds) -> DesignProblem:
    """Tighten the decision bounds; the new bounds must nest in the old ones."""
    if not new_bounds.within(problem.bounds):
        raise InvalidBounds("refined bounds must lie within the current bounds")
    return replace(problem, bounds=new_bounds)


def filter_cloud(cloud: LabeledCloud, problem: DesignProblem) -> LabeledCloud:
    """Rows of a cloud that fall inside another problem's bounds, relabeled."""
    keep = problem.bounds.contains(cloud.decisions)
    return classify(cloud.decisions[keep], cloud.kpis[keep], problem)


def merge_clouds(a: LabeledCloud, b: LabeledCloud) -> LabeledCloud:
    """Concatenate two clouds sharing the same problem definition."""
    if a.problem.to_dict() != b.problem.to_dict():
        raise InvalidBounds("clouds belong to different problems")
    return classify(np.vstack([a.decisions, b.decisions]),
                    np.vstack([a.kpis, b.kpis]), a.problem)
