import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from designspace.problem import Constraint, DesignProblem
from designspace.sampling import Bounds


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def benchmark_problem():
    """Sphere benchmark: feasible set is the ball |x - 0.5| <= 0.35."""
    return DesignProblem.from_json(
        Path(__file__).parents[1] / "src/designspace/problems/benchmark_sphere.json")


def two_ball_problem(radius=0.18, centers=((0.3, 0.3, 0.3), (0.7, 0.7, 0.7))):
    """Non-convex benchmark variant: two disjoint feasible balls."""
    from designspace.models import (benchmark_margin_threshold,
                                    benchmark_quality_threshold)

    return DesignProblem(
        decision_names=["x1", "x2", "x3"],
        decision_units=["", "", ""],
        bounds=Bounds(lower=np.zeros(3), upper=np.ones(3)),
        kpi_names=["quality", "margin"],
        kpi_units=["", ""],
        constraints=[
            Constraint("quality", ">=", benchmark_quality_threshold(radius)),
            Constraint("margin", ">=", benchmark_margin_threshold(radius)),
        ],
        model={"kind": "benchmark", "centers": [list(c) for c in centers]},
        sampling={"sp": 11, "skip": 0},
    )
