"""Headless figure rendering for the six supported kinds.

Every renderer returns the counts of the elements it drew; tests assert on
those counts rather than on pixels.
"""

from __future__ import annotations

import itertools

import matplotlib
matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.collections import LineCollection, PolyCollection
from mpl_toolkits.mplot3d.art3d import Line3DCollection, Poly3DCollection

from .manifest import Manifest, SchemaError

SAT_COLOR = "#e8821e"
VIO_COLOR = "#3b6fb6"
REGION_CMAP = "tab10"


def _axis_labels(problem: dict) -> list[str]:
    labels = []
    for d in problem["decisions"]:
        unit = d.get("unit") or ""
        labels.append(f"{d['name']} ({unit})" if unit else d["name"])
    return labels


def _new_axes(dim: int):
    fig = plt.figure(figsize=(7, 6))
    if dim == 3:
        ax = fig.add_subplot(111, projection="3d")
    else:
        ax = fig.add_subplot(111)
        ax.set_aspect("equal", adjustable="datalim")
    return fig, ax


def render_cloud3d(manifest: Manifest, out, **_) -> dict:
    """Scatter of the labeled cloud, satisfied and violated colored apart."""
    cloud = manifest.cloud()
    dec = cloud["decisions"]
    sat = cloud["satisfied"]
    dim = dec.shape[1]
    fig, ax = _new_axes(dim)
    groups = 0
    for mask, color, label in ((sat, SAT_COLOR, "satisfied"),
                               (~sat, VIO_COLOR, "violated")):
        if not np.any(mask):
            continue
        groups += 1
        ax.scatter(*dec[mask].T, s=6, c=color, label=label,
                   alpha=0.85 if color == SAT_COLOR else 0.25)
    labels = _axis_labels(cloud["problem"])
    ax.set_xlabel(labels[0])
    ax.set_ylabel(labels[1])
    if dim == 3:
        ax.set_zlabel(labels[2])
    ax.legend(loc="upper right")
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return {"points": int(len(dec)), "groups": groups}


def _facet_regions(shape: dict) -> np.ndarray:
    """Region label of the retained simplex owning each boundary facet."""
    simplices = [frozenset(s) for s in shape["simplices"]]
    labels = shape["region_labels"]
    owners = {}
    for simplex, label in zip(simplices, labels):
        for facet in itertools.combinations(sorted(simplex), len(simplex) - 1):
            owners.setdefault(frozenset(facet), label)
    out = []
    for facet in shape["boundary_facets"]:
        key = frozenset(facet)
        if key not in owners:
            raise SchemaError("shape.boundary_facets",
                              f"facet {sorted(facet)} not part of any simplex")
        out.append(owners[key])
    return np.asarray(out, dtype=int)


def render_shape(manifest: Manifest, out, method=None, **_) -> dict:
    """Boundary mesh of the design space, one color per connected region."""
    dsp = manifest.dsp(method)
    shape = dsp["shape"]
    points = np.asarray(shape["points"], dtype=float)
    facets = np.asarray(shape["boundary_facets"], dtype=int)
    regions = _facet_regions(shape)
    dim = points.shape[1]
    cmap = plt.get_cmap(REGION_CMAP)
    colors = [cmap(r % 10) for r in regions]

    fig, ax = _new_axes(dim)
    if dim == 3:
        polys = Poly3DCollection(points[facets], facecolors=colors,
                                 edgecolor="k", linewidths=0.15, alpha=0.55)
        ax.add_collection3d(polys)
        ax.auto_scale_xyz(*[points[:, i] for i in range(3)])
    else:
        ax.add_collection(LineCollection(points[facets], colors=colors, linewidths=1.2))
        ax.autoscale()
    labels = _axis_labels(dsp["problem"]) if "problem" in dsp else None
    if labels:
        ax.set_xlabel(labels[0])
        ax.set_ylabel(labels[1])
        if dim == 3:
            ax.set_zlabel(labels[2])
    ax.set_title(f"{dsp.get('method', 'design space')}: "
                 f"{dsp.get('n_regions')} region(s)")
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return {"facets": int(len(facets)),
            "regions": int(len(np.unique(regions)))}


def _box_edges(vertices: np.ndarray) -> list[tuple[int, int]]:
    """Index pairs of box corners differing along exactly one axis."""
    dim = int(round(np.log2(len(vertices))))
    signs = list(itertools.product((0, 1), repeat=dim))
    edges = []
    for i, a in enumerate(signs):
        for j, b in enumerate(signs):
            if i < j and sum(x != y for x, y in zip(a, b)) == 1:
                edges.append((i, j))
    return edges


def render_aor(manifest: Manifest, out, aor_index=0, **_) -> dict:
    """Wireframe of the acceptable operating region around its NOP."""
    aor = manifest.aor(aor_index)
    verts = np.asarray(aor["vertices"], dtype=float)
    nop = np.asarray(aor["nop"], dtype=float)
    edges = _box_edges(verts)
    dim = verts.shape[1]
    fig, ax = _new_axes(dim)
    segments = [(verts[i], verts[j]) for i, j in edges]
    if dim == 3:
        ax.add_collection3d(Line3DCollection(segments, colors="crimson", linewidths=1.5))
        ax.scatter(*nop[None, :].T, c="purple", marker="x", s=60)
        ax.auto_scale_xyz(*[verts[:, i] for i in range(3)])
    else:
        ax.add_collection(LineCollection(segments, colors="crimson", linewidths=1.5))
        ax.scatter(*nop[None, :].T, c="purple", marker="x", s=60)
        ax.autoscale()
    for axis_name, setter in zip(aor["decision_names"],
                                 (ax.set_xlabel, ax.set_ylabel,
                                  getattr(ax, "set_zlabel", None))[:dim]):
        setter(axis_name)
    ax.set_title(f"AOR, half-width {aor.get('half_width', 0.0):.4g} (normalized)")
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return {"edges": len(edges), "vertices": int(len(verts))}


def render_kpi_heat(manifest: Manifest, out, kpi=None, **_) -> dict:
    """Satisfied cloud colored by one KPI's value."""
    cloud = manifest.cloud()
    problem = cloud["problem"]
    kpi_names = [k["name"] for k in problem["kpis"]]
    if kpi is None:
        kpi = kpi_names[0]
    if kpi not in kpi_names:
        raise SchemaError("kpi", f"{kpi!r} not one of {kpi_names}")
    j = kpi_names.index(kpi)
    sat = cloud["satisfied"]
    dec = cloud["decisions"][sat]
    values = cloud["kpis"][sat, j]
    dim = dec.shape[1]
    fig, ax = _new_axes(dim)
    art = ax.scatter(*dec.T, c=values, cmap="viridis", s=8)
    fig.colorbar(art, ax=ax, label=kpi, shrink=0.7)
    labels = _axis_labels(problem)
    ax.set_xlabel(labels[0])
    ax.set_ylabel(labels[1])
    if dim == 3:
        ax.set_zlabel(labels[2])
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return {"points": int(len(dec)), "kpi": kpi}


def render_kpi_hist(manifest: Manifest, out, aor_index=0, **_) -> dict:
    """Histograms of each KPI inside the acceptable operating region."""
    aor = manifest.aor(aor_index)
    stats = aor.get("kpi_stats")
    if not stats or not stats.get("histograms"):
        raise SchemaError("aor.kpi_stats.histograms", "required field missing")
    hists = stats["histograms"]
    fig, axes = plt.subplots(1, len(hists), figsize=(5 * len(hists), 4))
    if len(hists) == 1:
        axes = [axes]
    bars = 0
    for ax, hist in zip(axes, hists):
        edges = np.asarray(hist["edges"], dtype=float)
        counts = np.asarray(hist["counts"], dtype=float)
        ax.bar(edges[:-1], counts, width=np.diff(edges), align="edge",
               color=SAT_COLOR, edgecolor="k", linewidth=0.3)
        ax.set_xlabel(hist["kpi"])
        ax.set_ylabel("samples")
        bars += len(counts)
    fig.suptitle(f"KPI distributions in the AOR "
                 f"({stats.get('n_after_support', '?')} samples)")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return {"bars": bars, "panels": len(hists)}


def render_compare(manifest: Manifest, out, **_) -> dict:
    """Side-by-side flexibility panels for two nominal operating points."""
    cmp = manifest.compare()
    rep_a, rep_b = cmp["nop_a"], cmp["nop_b"]
    names = rep_a["decision_names"]
    fig, axes = plt.subplots(1, 3, figsize=(14, 4))
    bars = 0

    axes[0].bar([0, 1], [rep_a["size_physical"], rep_b["size_physical"]],
                color=[SAT_COLOR, VIO_COLOR], tick_label=["NOP1", "NOP2"])
    axes[0].set_title(f"AOR size ({cmp.get('aor_size_delta_pct', 0.0):+.1f}%)")
    bars += 2

    x = np.arange(len(names))
    axes[1].bar(x - 0.2, rep_a["half_ranges"], width=0.4, color=SAT_COLOR, label="NOP1")
    axes[1].bar(x + 0.2, rep_b["half_ranges"], width=0.4, color=VIO_COLOR, label="NOP2")
    axes[1].set_xticks(x, names)
    axes[1].set_title("MPAR half-ranges")
    axes[1].legend()
    bars += 2 * len(names)

    stats_a, stats_b = rep_a.get("kpi_stats"), rep_b.get("kpi_stats")
    if stats_a and stats_b:
        kpi_names = stats_a["kpi_names"]
        xk = np.arange(len(kpi_names))
        axes[2].bar(xk - 0.2, stats_a["average"], width=0.4, color=SAT_COLOR, label="NOP1")
        axes[2].bar(xk + 0.2, stats_b["average"], width=0.4, color=VIO_COLOR, label="NOP2")
        axes[2].set_xticks(xk, kpi_names)
        axes[2].set_title("average KPI in AOR")
        axes[2].legend()
        bars += 2 * len(kpi_names)
    else:
        axes[2].axis("off")

    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return {"panels": 3, "bars": bars}


RENDERERS = {
    "cloud3d": render_cloud3d,
    "shape": render_shape,
    "aor": render_aor,
    "kpi-heat": render_kpi_heat,
    "kpi-hist": render_kpi_hist,
    "compare": render_compare,
}


def render(manifest_path, kind: str, out, **options) -> dict:
    """Render one figure kind from a manifest; returns drawn-element counts."""
    if kind not in RENDERERS:
        raise SchemaError("kind", f"unknown figure kind {kind!r}")
    manifest = Manifest(manifest_path)
    return RENDERERS[kind](manifest, out, **options)
