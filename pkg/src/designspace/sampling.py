"""Quasi-random generation of design-decision vectors within bounds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .errors import InvalidBounds


@dataclass(frozen=True)
class Bounds:
    """Elementwise lower/upper bounds of the design decisions (physical units)."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise InvalidBounds("lower and upper must be 1D vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InvalidBounds("bounds must be finite")
        if not np.all(lo < hi):
            raise InvalidBounds("lower bounds must be strictly below upper bounds")

    def __len__(self) -> int:
        return len(self.lower)

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def normalize(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.lower) / self.widths

    def denormalize(self, u) -> np.ndarray:
        return self.lower + np.asarray(u, dtype=float) * self.widths

    def contains(self, x) -> np.ndarray:
        arr = np.atleast_2d(np.asarray(x, dtype=float))
        return np.all((arr >= self.lower) & (arr <= self.upper), axis=1)

    def within(self, other: "Bounds") -> bool:
        return bool(np.all(self.lower >= other.lower) and np.all(self.upper <= other.upper))


@dataclass(frozen=True)
class SampleBatch:
    """A batch of 2^sp decision vectors inside their bounds."""

    inputs: np.ndarray
    sp: int
    skip: int = 0

    def __len__(self) -> int:
        return len(self.inputs)

    def to_csv(self, path, names: list[str]) -> None:
        if len(names) != self.inputs.shape[1]:
            raise ValueError("one column name per decision is required")
        header = ",".join(names)
        np.savetxt(path, self.inputs, delimiter=",", header=header, comments="", fmt="%.17g")


def unit_sobol(dim: int, sp: int, skip: int = 0) -> np.ndarray:
    """First 2^sp points of the unscrambled Sobol sequence on [0, 1]^dim.

    The sequence starts at the all-zeros point when ``skip`` is 0; the first
    2^k rows of a 2^(k+1) batch equal the 2^k batch.
    """
    if sp < 1:
        raise ValueError("sp must be >= 1")
    gen = qmc.Sobol(d=dim, scramble=False)
    if skip:
        gen.fast_forward(skip)
    return gen.random(2**sp)


def sobol(dim: int, bounds: Bounds, sp: int, skip: int = 0) -> SampleBatch:
    """Generate 2^sp quasi-random decision vectors within the bounds.

    Deterministic for fixed (dim, sp, skip). Each point is
    theta_L + u * (theta_U - theta_L) with u from the unit-cube Sobol
    sequence.
    """
    if dim != len(bounds):
        raise InvalidBounds(f"dim={dim} does not match bounds of length {len(bounds)}")
    u = unit_sobol(dim, sp, skip)
    return SampleBatch(inputs=bounds.denormalize(u), sp=sp, skip=skip)
