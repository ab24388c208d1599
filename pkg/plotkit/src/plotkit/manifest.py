"""Manifest loading and schema validation for designspace artifacts.

plotkit is a pure reader: it never mutates the artifacts it consumes, and
every violation is reported with the path of the failing field.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


class SchemaError(Exception):
    """An artifact is missing or malformed; ``field`` names the culprit."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


def _require(doc: dict, field: str, context: str):
    node = doc
    for part in field.split("."):
        if not isinstance(node, dict) or part not in node:
            raise SchemaError(f"{context}.{field}", "required field missing")
        node = node[part]
    return node


class Manifest:
    """Resolved artifact bundle rooted at the manifest's directory."""

    def __init__(self, path):
        self.path = Path(path)
        if not self.path.exists():
            raise SchemaError("manifest", f"{self.path} does not exist")
        with open(self.path) as fh:
            self.doc = json.load(fh)
        if self.doc.get("schema") != "designspace.manifest/1":
            raise SchemaError("manifest.schema",
                              f"unsupported schema {self.doc.get('schema')!r}")
        self.root = self.path.parent
        self.artifacts = _require(self.doc, "artifacts", "manifest")

    def resolve(self, name: str) -> Path:
        path = self.root / name
        if not path.exists():
            raise SchemaError(f"manifest.artifacts.{name}", f"{path} does not exist")
        return path

    def problem(self) -> dict:
        with open(self.resolve(_require(self.doc, "problem", "manifest"))) as fh:
            doc = json.load(fh)
        _require(doc, "decisions", "problem")
        _require(doc, "kpis", "problem")
        return doc

    def cloud(self):
        problem = self.problem()
        names = ([d["name"] for d in problem["decisions"]]
                 + [k["name"] for k in problem["kpis"]] + ["satisfied"])
        path = self.resolve(_require(self.artifacts, "cloud", "manifest.artifacts"))
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [row for row in reader if row]
        if header != names:
            raise SchemaError("cloud.header",
                              f"columns {header} do not match problem columns {names}")
        data = (np.asarray(rows, dtype=float)
                if rows else np.empty((0, len(names))))
        n_dec = len(problem["decisions"])
        n_kpi = len(problem["kpis"])
        return {
            "problem": problem,
            "decisions": data[:, :n_dec],
            "kpis": data[:, n_dec:n_dec + n_kpi],
            "satisfied": data[:, -1].astype(bool),
        }

    def dsp(self, method: str | None = None) -> dict:
        table = _require(self.artifacts, "dsp", "manifest.artifacts")
        if method is None:
            method = sorted(table)[0]
        if method not in table:
            raise SchemaError(f"manifest.artifacts.dsp.{method}", "method not bundled")
        with open(self.resolve(table[method])) as fh:
            doc = json.load(fh)
        shape = _require(doc, "shape", f"dsp.{method}")
        for field in ("points", "simplices", "boundary_facets", "region_labels"):
            _require(shape, field, f"dsp.{method}.shape")
        return doc

    def aor(self, index: int = 0) -> dict:
        names = _require(self.artifacts, "aor", "manifest.artifacts")
        if not names:
            raise SchemaError("manifest.artifacts.aor", "no AOR reports bundled")
        with open(self.resolve(names[index])) as fh:
            doc = json.load(fh)
        for field in ("nop", "vertices", "half_ranges", "decision_names"):
            _require(doc, field, "aor")
        return doc

    def compare(self) -> dict:
        with open(self.resolve(_require(self.artifacts, "compare",
                                        "manifest.artifacts"))) as fh:
            doc = json.load(fh)
        for field in ("nop_a", "nop_b", "mpar_delta_pct"):
            _require(doc, field, "compare")
        return doc
