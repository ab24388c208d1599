import hashlib
import json
from pathlib import Path

import pytest

from plotkit import Manifest, SchemaError, render
from plotkit.cli import main


def cloud_size(manifest_path):
    lines = (manifest_path.parent / "cloud.csv").read_text().strip().splitlines()
    return len(lines) - 1, sum(int(r.rsplit(",", 1)[1]) for r in lines[1:])


class TestRenderers:
    def test_cloud3d_counts(self, manifest_path, tmp_path):
        total, n_sat = cloud_size(manifest_path)
        counts = render(manifest_path, "cloud3d", tmp_path / "cloud.png")
        assert counts == {"points": total, "groups": 2}
        assert (tmp_path / "cloud.png").stat().st_size > 0

    def test_shape_counts(self, manifest_path, tmp_path):
        dsp = json.loads((manifest_path.parent / "dsp_tolerance.json").read_text())
        counts = render(manifest_path, "shape", tmp_path / "shape.svg")
        assert counts["facets"] == len(dsp["shape"]["boundary_facets"])
        assert counts["regions"] == dsp["n_regions"]

    def test_aor_box_has_twelve_edges(self, manifest_path, tmp_path):
        counts = render(manifest_path, "aor", tmp_path / "aor.png")
        assert counts == {"edges": 12, "vertices": 8}

    def test_kpi_heat_draws_satisfied_points(self, manifest_path, tmp_path):
        _, n_sat = cloud_size(manifest_path)
        counts = render(manifest_path, "kpi-heat", tmp_path / "heat.png", kpi="margin")
        assert counts == {"points": n_sat, "kpi": "margin"}

    def test_kpi_hist_bins(self, manifest_path, tmp_path):
        counts = render(manifest_path, "kpi-hist", tmp_path / "hist.png")
        assert counts["panels"] == 2
        assert counts["bars"] == 40

    def test_compare_panels(self, manifest_path, tmp_path):
        counts = render(manifest_path, "compare", tmp_path / "cmp.png")
        assert counts["panels"] == 3
        assert counts["bars"] == 2 + 2 * 3 + 2 * 2


class TestCli:
    def test_all_kinds_via_cli(self, manifest_path, tmp_path, capsys):
        for kind in ("cloud3d", "shape", "aor", "kpi-heat", "kpi-hist", "compare"):
            out = tmp_path / f"{kind}.png"
            assert main([kind, "--manifest", str(manifest_path), "--out", str(out)]) == 0
            logged = capsys.readouterr().out
            assert logged.startswith(f"plotkit {kind}:")
            assert "=" in logged
            assert out.exists()

    def test_unknown_kind_is_usage_error(self, manifest_path, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["sparkline", "--manifest", str(manifest_path),
                  "--out", str(tmp_path / "x.png")])
        assert err.value.code == 2


class TestPureReader:
    def test_inputs_untouched_and_rerender_idempotent(self, manifest_path, tmp_path):
        fingerprint = {
            p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(manifest_path.parent.iterdir()) if p.is_file()
        }
        first = render(manifest_path, "shape", tmp_path / "a.png")
        second = render(manifest_path, "shape", tmp_path / "b.png")
        assert first == second
        after = {
            p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(manifest_path.parent.iterdir()) if p.is_file()
        }
        assert after == fingerprint


class TestSchemaErrors:
    def _copy_bundle(self, manifest_path, tmp_path):
        import shutil

        dest = tmp_path / "bundle"
        shutil.copytree(manifest_path.parent, dest)
        return dest / "manifest.json"

    def test_missing_artifact_file(self, manifest_path, tmp_path):
        broken = self._copy_bundle(manifest_path, tmp_path)
        (broken.parent / "cloud.csv").unlink()
        with pytest.raises(SchemaError) as err:
            render(broken, "cloud3d", tmp_path / "x.png")
        assert "cloud.csv" in str(err.value)

    def test_header_mismatch_names_field(self, manifest_path, tmp_path):
        broken = self._copy_bundle(manifest_path, tmp_path)
        rows = (broken.parent / "cloud.csv").read_text().splitlines()
        rows[0] = rows[0].replace("quality", "wat")
        (broken.parent / "cloud.csv").write_text("\n".join(rows) + "\n")
        with pytest.raises(SchemaError) as err:
            render(broken, "cloud3d", tmp_path / "x.png")
        assert err.value.field == "cloud.header"

    def test_missing_shape_field_path_reported(self, manifest_path, tmp_path):
        broken = self._copy_bundle(manifest_path, tmp_path)
        doc = json.loads((broken.parent / "dsp_tolerance.json").read_text())
        del doc["shape"]["simplices"]
        (broken.parent / "dsp_tolerance.json").write_text(json.dumps(doc))
        code = main(["shape", "--manifest", str(broken),
                     "--out", str(tmp_path / "x.png")])
        assert code == 1

    def test_unsupported_manifest_schema(self, manifest_path, tmp_path):
        broken = self._copy_bundle(manifest_path, tmp_path)
        doc = json.loads(broken.read_text())
        doc["schema"] = "designspace.manifest/999"
        broken.write_text(json.dumps(doc))
        with pytest.raises(SchemaError) as err:
            Manifest(broken)
        assert err.value.field == "manifest.schema"
