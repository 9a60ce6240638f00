"""CLI: render one figure from a JSON spec file.

    traceplots --spec figure.json

The spec file holds {"kind": "convergence" | "policy-heatmap" | "call-bars",
"inputs": [{"path": "...", "label": "..."}], "out": "figure.png",
"title": "...", "x_label": "...", "y_label": "..."}.
"""

from __future__ import annotations

import argparse
import sys

from .figures import FigureSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="traceplots",
                                     description="render benchmark CSVs to figures")
    parser.add_argument("--spec", required=True, help="JSON figure spec")
    args = parser.parse_args(argv)
    out = render(FigureSpec.from_json(args.spec))
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
