import json
import subprocess
import sys
from pathlib import Path

import pytest

BENCH_PROBLEM = {
    "decisions": [
        {"name": "x1", "unit": ""},
        {"name": "x2", "unit": ""},
        {"name": "x3", "unit": ""},
    ],
    "bounds": {"lower": [0.0, 0.0, 0.0], "upper": [1.0, 1.0, 1.0]},
    "kpis": [{"name": "quality", "unit": ""}, {"name": "margin", "unit": ""}],
    "constraints": [
        {"kpi": "quality", "op": ">=", "value": 97.82704538241867},
        {"kpi": "margin", "op": ">=", "value": 7.2},
    ],
    "model": {"kind": "benchmark", "centers": [[0.5, 0.5, 0.5]]},
    "sampling": {"sp": 8, "skip": 0},
}


def designspace(*argv):
    """Drive the designspace CLI as an external process."""
    proc = subprocess.run([sys.executable, "-m", "designspace.cli",
                           *[str(a) for a in argv]],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="session")
def manifest_path(tmp_path_factory):
    """Benchmark artifact bundle produced through the designspace CLI."""
    root = tmp_path_factory.mktemp("bundle")
    problem = root / "benchmark.json"
    problem.write_text(json.dumps(BENCH_PROBLEM))
    out = root / "out"
    designspace("run", "--problem", problem, "--out", out)
    designspace("identify", "--problem", problem, "--out", out,
                "--method", "tolerance")
    designspace("aor", "--problem", problem, "--out", out, "--nop", "0.5,0.5,0.5")
    designspace("compare", "--problem", problem, "--out", out,
                "--nop-a", "0.5,0.5,0.5", "--nop-b", "0.55,0.5,0.5")
    designspace("report", "--problem", problem, "--out", out)
    return out / "manifest.json"
