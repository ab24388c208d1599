"""plotkit command line: render one figure kind from a designspace manifest.

Exit codes: 0 success, 1 schema mismatch (stderr names the failing field),
2 usage error.
"""

from __future__ import annotations

import argparse
import sys

from .manifest import SchemaError
from .render import RENDERERS, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotkit", description="Render figures from designspace artifacts")
    parser.add_argument("kind", choices=sorted(RENDERERS))
    parser.add_argument("--manifest", required=True, help="manifest.json path")
    parser.add_argument("--out", required=True, help="output image (.png or .svg)")
    parser.add_argument("--method", default=None,
                        help="which identified design space to draw (shape kind)")
    parser.add_argument("--kpi", default=None, help="KPI for the heat map")
    parser.add_argument("--aor-index", type=int, default=0,
                        help="which bundled AOR report to draw")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        counts = render(args.manifest, args.kind, args.out, method=args.method,
                        kpi=args.kpi, aor_index=args.aor_index)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 1
    summary = " ".join(f"{k}={v}" for k, v in counts.items())
    print(f"plotkit {args.kind}: {summary} -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
