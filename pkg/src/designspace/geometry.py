"""Simplicial geometry in 2D and 3D: Delaunay triangulations, alpha shapes,
containment queries, connected regions, and measures.

All operations expect bounds-normalized coordinates (each axis scaled to
[0, 1]); physical sizes are recovered by multiplying by the product of the
bound widths. Shapes are immutable once constructed and safe for concurrent
read-only queries.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay as _SciPyDelaunay
from scipy.spatial import QhullError

from .errors import (
    DegenerateInput,
    DegenerateSimplex,
    DimensionMismatch,
    EmptyShape,
)

# Simplices thinner than this (normalized volume) are discarded before any
# circumradius is computed; near-degenerate slivers have unstable circumradii.
DEGENERACY_TOL = 1e-12

# Barycentric slack: a point whose coordinates are all >= -CONTAINMENT_TOL is
# treated as inside, so shape boundaries count as admissible.
CONTAINMENT_TOL = 1e-9


def _as_points(points) -> np.ndarray:
    try:
        arr = np.asarray(points, dtype=float)
    except ValueError as exc:
        raise DimensionMismatch(f"point dimensions are inconsistent: {exc}") from exc
    if arr.ndim != 2:
        raise DimensionMismatch(f"expected an (n, d) point array, got shape {arr.shape}")
    d = arr.shape[1]
    if d not in (2, 3):
        raise DimensionMismatch(f"only 2D and 3D point clouds are supported, got d={d}")
    if not np.all(np.isfinite(arr)):
        raise DegenerateInput("point coordinates must be finite")
    return arr


def simplex_volumes(points: np.ndarray, simplices: np.ndarray) -> np.ndarray:
    """Unsigned volumes (areas in 2D) of the given simplices."""
    d = points.shape[1]
    verts = points[simplices]
    edges = verts[:, 1:, :] - verts[:, :1, :]
    return np.abs(np.linalg.det(edges)) / math.factorial(d)


def _circumdata(points: np.ndarray, simplices: np.ndarray):
    """Circumcenters and circumradii for a batch of simplices.

    Degenerate simplices (volume below ``DEGENERACY_TOL``) get NaN entries so
    that no alpha filter ever retains them.
    """
    d = points.shape[1]
    verts = points[simplices]
    v0 = verts[:, 0, :]
    edges = verts[:, 1:, :] - verts[:, :1, :]
    vols = np.abs(np.linalg.det(edges)) / math.factorial(d)
    ok = vols > DEGENERACY_TOL

    centers = np.full_like(v0, np.nan)
    radii = np.full(len(simplices), np.nan)
    if np.any(ok):
        # circumcenter x solves (v_i - v_0) . (x - v_0) = |v_i - v_0|^2 / 2
        rhs = 0.5 * np.sum(edges[ok] ** 2, axis=2)
        offset = np.linalg.solve(edges[ok], rhs[..., None])[..., 0]
        centers[ok] = v0[ok] + offset
        radii[ok] = np.linalg.norm(offset, axis=1)
    return centers, radii, vols


def circumradius(simplex_vertices) -> float:
    """Radius of the circumscribing circle/sphere of a single simplex.

    Raises
    ------
    DegenerateSimplex
        If the vertices are affinely dependent within tolerance.
    """
    verts = _as_points(simplex_vertices)
    d = verts.shape[1]
    if verts.shape[0] != d + 1:
        raise DimensionMismatch(f"a {d}D simplex needs {d + 1} vertices, got {verts.shape[0]}")
    simplices = np.arange(d + 1)[None, :]
    _, radii, vols = _circumdata(verts, simplices)
    if not vols[0] > DEGENERACY_TOL:
        raise DegenerateSimplex(f"simplex volume {vols[0]:.3e} below tolerance {DEGENERACY_TOL}")
    return float(radii[0])


@dataclass(frozen=True)
class Triangulation:
    """Delaunay triangulation of a point cloud.

    ``neighbors[i, k]`` is the simplex sharing the facet opposite vertex ``k``
    of simplex ``i`` (-1 when that facet is on the convex hull). Degenerate
    slivers keep their slot in ``simplices`` but carry NaN circumradii so they
    are never retained by an alpha filter.
    """

    points: np.ndarray
    simplices: np.ndarray
    neighbors: np.ndarray
    circumradii: np.ndarray
    volumes: np.ndarray

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def max_circumradius(self) -> float:
        finite = self.circumradii[np.isfinite(self.circumradii)]
        if finite.size == 0:
            raise DegenerateInput("triangulation contains no non-degenerate simplex")
        return float(finite.max())

    @property
    def min_circumradius(self) -> float:
        finite = self.circumradii[np.isfinite(self.circumradii)]
        if finite.size == 0:
            raise DegenerateInput("triangulation contains no non-degenerate simplex")
        return float(finite.min())


def delaunay(points) -> Triangulation:
    """Delaunay triangulation of a 2D or 3D point cloud.

    The empty-circumsphere property holds within floating-point predicate
    tolerance; cospherical ties are broken deterministically by the underlying
    qhull vertex ordering.

    Raises
    ------
    DegenerateInput
        Fewer than d+1 points, or all points coaffine.
    DimensionMismatch
        Ragged input or unsupported dimension.
    """
    pts = _as_points(points)
    n, d = pts.shape
    if n < d + 1:
        raise DegenerateInput(f"need at least {d + 1} points in {d}D, got {n}")
    try:
        tri = _SciPyDelaunay(pts)
    except QhullError as exc:
        raise DegenerateInput(f"degenerate point cloud (qhull: {str(exc).splitlines()[0]})") from exc
    if tri.simplices.size == 0:
        raise DegenerateInput("triangulation produced no simplices")
    _, radii, vols = _circumdata(pts, tri.simplices)
    return Triangulation(
        points=pts,
        simplices=tri.simplices.copy(),
        neighbors=tri.neighbors.copy(),
        circumradii=radii,
        volumes=vols,
    )


@dataclass(frozen=True)
class Normalization:
    """Per-axis physical bounds used to map a shape back to physical units."""

    lower: np.ndarray
    upper: np.ndarray

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def to_unit(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.lower) / self.widths

    def to_physical(self, u: np.ndarray) -> np.ndarray:
        return self.lower + np.asarray(u, dtype=float) * self.widths


class _SimplexIndex:
    """Uniform-grid index over simplices for batched barycentric queries."""

    def __init__(self, points: np.ndarray, simplices: np.ndarray):
        self.d = points.shape[1]
        verts = points[simplices]
        self.v0 = verts[:, 0, :]
        edges = np.swapaxes(verts[:, 1:, :] - verts[:, :1, :], 1, 2)
        # Shapes produced here never retain degenerate simplices, so the
        # edge matrices are invertible.
        self.inv = np.linalg.inv(edges)
        self.lo = verts.min(axis=1)
        self.hi = verts.max(axis=1)
        self.bbox_lo = self.lo.min(axis=0)
        self.bbox_hi = self.hi.max(axis=0)
        span = np.maximum(self.bbox_hi - self.bbox_lo, 1e-30)
        res = int(np.clip(round(len(simplices) ** (1.0 / self.d)), 4, 64))
        self.res = res
        self.cell = span / res

        cl = self._cell_coords(self.lo)
        ch = self._cell_coords(self.hi)
        buckets: dict[int, list[int]] = {}
        if self.d == 2:
            for j in range(len(simplices)):
                for ix in range(cl[j, 0], ch[j, 0] + 1):
                    for iy in range(cl[j, 1], ch[j, 1] + 1):
                        buckets.setdefault(ix * res + iy, []).append(j)
        else:
            for j in range(len(simplices)):
                for ix in range(cl[j, 0], ch[j, 0] + 1):
                    for iy in range(cl[j, 1], ch[j, 1] + 1):
                        for iz in range(cl[j, 2], ch[j, 2] + 1):
                            buckets.setdefault((ix * res + iy) * res + iz, []).append(j)
        self.buckets = {key: np.asarray(val) for key, val in buckets.items()}

    def _cell_coords(self, x: np.ndarray) -> np.ndarray:
        c = np.floor((x - self.bbox_lo) / self.cell).astype(int)
        return np.clip(c, 0, self.res - 1)

    def _cell_ids(self, x: np.ndarray) -> np.ndarray:
        c = self._cell_coords(x)
        ids = c[:, 0]
        for k in range(1, self.d):
            ids = ids * self.res + c[:, k]
        return ids

    def contains(self, queries: np.ndarray, tol: float) -> np.ndarray:
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        out = np.zeros(len(q), dtype=bool)
        pad = tol * 10.0
        inbox = np.all((q >= self.bbox_lo - pad) & (q <= self.bbox_hi + pad), axis=1)
        idx = np.nonzero(inbox)[0]
        if idx.size == 0:
            return out
        ids = self._cell_ids(q[idx])
        order = np.argsort(ids, kind="stable")
        ids_sorted = ids[order]
        splits = np.nonzero(np.diff(ids_sorted))[0] + 1
        for group in np.split(order, splits):
            cand = self.buckets.get(int(ids[group[0]]))
            if cand is None:
                continue
            qg = q[idx[group]]
            # barycentric weights of every query against every candidate
            diff = qg[:, None, :] - self.v0[cand][None, :, :]
            w = np.einsum("cij,qcj->qci", self.inv[cand], diff)
            inside = np.all(w >= -tol, axis=2) & (w.sum(axis=2) <= 1.0 + tol)
            out[idx[group]] = inside.any(axis=1)
        return out


@dataclass
class AlphaShape:
    """Alpha shape: Delaunay simplices whose circumradius is at most
    ``alpha_radius``, with boundary facets and connected-region labels.

    ``boundary_facets`` are the (d-1)-simplices referenced by exactly one
    retained simplex. ``region_labels`` assigns each retained simplex to a
    connected component under shared-facet adjacency.
    """

    points: np.ndarray
    simplices: np.ndarray
    boundary_facets: np.ndarray
    alpha_radius: float
    region_labels: np.ndarray
    n_regions: int
    simplex_volumes: np.ndarray
    normalization: Normalization | None = None
    _index: _SimplexIndex | None = field(default=None, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def measure(self) -> float:
        return float(self.simplex_volumes.sum())

    def region_measures(self) -> np.ndarray:
        out = np.zeros(self.n_regions)
        np.add.at(out, self.region_labels, self.simplex_volumes)
        return out

    def _ensure_index(self) -> _SimplexIndex:
        if self._index is None:
            self._index = _SimplexIndex(self.points, self.simplices)
        return self._index

    def contains(self, query, tol: float = CONTAINMENT_TOL) -> bool:
        return bool(self.contains_many(np.atleast_2d(query), tol=tol)[0])

    def contains_many(self, queries, tol: float = CONTAINMENT_TOL) -> np.ndarray:
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        if q.shape[1] != self.dim:
            raise DimensionMismatch(f"query dimension {q.shape[1]} != shape dimension {self.dim}")
        return self._ensure_index().contains(q, tol)

    def to_dict(self) -> dict:
        alpha = self.alpha_radius
        doc = {
            "points": self.points.tolist(),
            "simplices": self.simplices.tolist(),
            "boundary_facets": self.boundary_facets.tolist(),
            "alpha_radius": None if math.isinf(alpha) else alpha,
            "region_labels": self.region_labels.tolist(),
            "normalization": None,
        }
        if self.normalization is not None:
            doc["normalization"] = {
                "lower": self.normalization.lower.tolist(),
                "upper": self.normalization.upper.tolist(),
            }
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "AlphaShape":
        points = np.asarray(doc["points"], dtype=float)
        simplices = np.asarray(doc["simplices"], dtype=int)
        labels = np.asarray(doc["region_labels"], dtype=int)
        alpha = doc.get("alpha_radius")
        norm = None
        if doc.get("normalization"):
            norm = Normalization(
                lower=np.asarray(doc["normalization"]["lower"], dtype=float),
                upper=np.asarray(doc["normalization"]["upper"], dtype=float),
            )
        return cls(
            points=points,
            simplices=simplices,
            boundary_facets=np.asarray(doc["boundary_facets"], dtype=int),
            alpha_radius=math.inf if alpha is None else float(alpha),
            region_labels=labels,
            n_regions=int(labels.max()) + 1 if labels.size else 0,
            simplex_volumes=simplex_volumes(points, simplices),
            normalization=norm,
        )


def _connected_regions(retained_ids: np.ndarray, neighbors: np.ndarray, keep: np.ndarray) -> np.ndarray:
    """Label connected components of retained simplices via breadth-first
    search over shared-facet adjacency."""
    pos = -np.ones(len(keep), dtype=int)
    pos[retained_ids] = np.arange(len(retained_ids))
    labels = -np.ones(len(retained_ids), dtype=int)
    current = 0
    for start in range(len(retained_ids)):
        if labels[start] >= 0:
            continue
        queue = deque([start])
        labels[start] = current
        while queue:
            s = queue.popleft()
            for nb in neighbors[retained_ids[s]]:
                if nb < 0 or not keep[nb]:
                    continue
                p = pos[nb]
                if labels[p] < 0:
                    labels[p] = current
                    queue.append(p)
        current += 1
    return labels


def alpha_complex(tri: Triangulation, alpha_radius: float,
                  normalization: Normalization | None = None) -> AlphaShape:
    """Alpha shape from a precomputed triangulation (reused by bisection).

    Raises
    ------
    EmptyShape
        If no simplex has circumradius <= ``alpha_radius``.
    """
    if not alpha_radius > 0:
        raise ValueError("alpha_radius must be positive")
    keep = tri.circumradii <= alpha_radius  # NaN circumradii never pass
    if not np.any(keep):
        raise EmptyShape(f"no simplex has circumradius <= {alpha_radius}")
    retained_ids = np.nonzero(keep)[0]
    retained = tri.simplices[retained_ids]

    # A facet is boundary when the neighbor across it is absent or filtered.
    nb = tri.neighbors[retained_ids]
    nb_dropped = (nb < 0) | ~keep[np.clip(nb, 0, None)]
    d1 = tri.simplices.shape[1]
    facets = []
    for k in range(d1):
        rows = np.nonzero(nb_dropped[:, k])[0]
        if rows.size:
            cols = [j for j in range(d1) if j != k]
            facets.append(retained[rows][:, cols])
    boundary = np.vstack(facets) if facets else np.empty((0, d1 - 1), dtype=int)

    labels = _connected_regions(retained_ids, tri.neighbors, keep)
    return AlphaShape(
        points=tri.points,
        simplices=retained,
        boundary_facets=boundary,
        alpha_radius=float(alpha_radius),
        region_labels=labels,
        n_regions=int(labels.max()) + 1,
        simplex_volumes=tri.volumes[retained_ids],
        normalization=normalization,
    )


def alpha_shape(points, alpha_radius: float,
                normalization: Normalization | None = None) -> AlphaShape:
    """Alpha shape of a point cloud at the given alpha radius."""
    return alpha_complex(delaunay(points), alpha_radius, normalization)


def convex_hull(points, normalization: Normalization | None = None) -> AlphaShape:
    """Convex hull expressed as the alpha shape at infinite alpha radius."""
    return alpha_complex(delaunay(points), math.inf, normalization)


def contains(shape: AlphaShape, query, tol: float = CONTAINMENT_TOL) -> bool:
    """True iff the query point lies in some retained simplex (boundary
    points count as inside)."""
    return shape.contains(query, tol=tol)


def count_regions(shape: AlphaShape) -> tuple[int, np.ndarray]:
    """Number of connected components of retained simplices plus labels."""
    if shape.simplices.size == 0:
        raise EmptyShape("shape has no retained simplices")
    return shape.n_regions, shape.region_labels


def measure(shape: AlphaShape) -> float:
    """Total area (2D) or volume (3D) of the retained simplices."""
    if shape.simplices.size == 0:
        return 0.0
    return shape.measure()
