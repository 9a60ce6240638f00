"""Render benchmark CSVs into figures.

Pure file-to-file transforms over the benchmark harness's documented CSV
schemas; nothing here recomputes optimization quantities.

Figure kinds:
  * ``convergence``: objective value per iteration, one labeled curve per
    input CSV (aggregate ``f_mean`` or per-seed ``f`` column), log-scale y;
  * ``policy-heatmap``: action index (y) by optimization step (x), colored by
    the per-step action probabilities in the ``prob_*`` columns;
  * ``call-bars``: mean value/gradient call counts per optimizer with
    standard-deviation error bars, from a comparison CSV.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["FigureSpec", "load_columns", "heatmap_matrix", "render"]

FIGURE_KINDS = ("convergence", "policy-heatmap", "call-bars")


class SchemaError(ValueError):
    """Input CSV is empty or lacks the columns a figure kind needs."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: list[dict]              # [{"path": ..., "label": ...}, ...]
    out: str
    title: str = ""
    x_label: str = ""
    y_label: str = ""

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {FIGURE_KINDS}")
        if not self.inputs:
            raise ValueError("figure needs at least one input CSV")

    @classmethod
    def from_json(cls, path) -> "FigureSpec":
        raw = json.loads(Path(path).read_text())
        return cls(
            kind=raw["kind"],
            inputs=raw["inputs"],
            out=raw["out"],
            title=raw.get("title", ""),
            x_label=raw.get("x_label", ""),
            y_label=raw.get("y_label", ""),
        )


def load_columns(path) -> dict[str, list]:
    """Read a CSV as named columns; empty cells become None, numbers floats."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        cols: dict[str, list] = {name: [] for name in header}
        for row in reader:
            for name, cell in zip(header, row):
                if cell == "":
                    cols[name].append(None)
                else:
                    try:
                        cols[name].append(float(cell))
                    except ValueError:
                        cols[name].append(cell)
    if not cols or all(len(v) == 0 for v in cols.values()):
        raise SchemaError(f"{path}: no data rows")
    return cols


def _require(cols: dict, names: list[str], path) -> None:
    missing = [n for n in names if n not in cols]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")


def heatmap_matrix(cols: dict) -> np.ndarray:
    """(actions, steps) probability matrix from a trace's prob_* columns;
    steps without a decision contribute zero columns."""
    prob_names = sorted(
        (n for n in cols if n.startswith("prob_")), key=lambda n: int(n.split("_")[1])
    )
    if not prob_names:
        raise SchemaError("trace has no prob_* columns")
    steps = len(cols[prob_names[0]])
    mat = np.zeros((len(prob_names), steps))
    for i, name in enumerate(prob_names):
        for k, cell in enumerate(cols[name]):
            mat[i, k] = 0.0 if cell is None else float(cell)
    return mat


def _render_convergence(spec: FigureSpec, ax) -> None:
    for item in spec.inputs:
        cols = load_columns(item["path"])
        if "f_mean" in cols:
            y = cols["f_mean"]
        else:
            _require(cols, ["f"], item["path"])
            y = cols["f"]
        _require(cols, ["k"], item["path"])
        x = [v for v, fv in zip(cols["k"], y) if fv is not None]
        y = [fv for fv in y if fv is not None]
        ax.plot(x, y, label=item.get("label", Path(item["path"]).stem))
    ax.set_yscale("log")
    ax.set_xlabel(spec.x_label or "iteration")
    ax.set_ylabel(spec.y_label or "objective")
    ax.legend()


def _render_heatmap(spec: FigureSpec, ax, fig) -> None:
    cols = load_columns(spec.inputs[0]["path"])
    mat = heatmap_matrix(cols)
    im = ax.imshow(mat, aspect="auto", origin="lower", interpolation="nearest",
                   cmap="viridis", vmin=0.0, vmax=1.0)
    ax.set_xlabel(spec.x_label or "iteration")
    ax.set_ylabel(spec.y_label or "evicted slot")
    fig.colorbar(im, ax=ax, label="action probability")


def _render_call_bars(spec: FigureSpec, ax) -> None:
    cols = load_columns(spec.inputs[0]["path"])
    _require(
        cols,
        ["optimizer", "mean_value_calls", "std_value_calls",
         "mean_grad_calls", "std_grad_calls"],
        spec.inputs[0]["path"],
    )
    names = cols["optimizer"]
    x = np.arange(len(names))
    width = 0.38
    ax.bar(x - width / 2, cols["mean_value_calls"], width,
           yerr=cols["std_value_calls"], capsize=3, label="value calls")
    ax.bar(x + width / 2, cols["mean_grad_calls"], width,
           yerr=cols["std_grad_calls"], capsize=3, label="gradient calls")
    ax.set_xticks(x, names, rotation=45, ha="right")
    ax.set_ylabel(spec.y_label or "calls")
    ax.legend()


def render(spec: FigureSpec) -> Path:
    """Draw the figure and write it to ``spec.out``; raises before writing
    anything if an input is empty or off-schema."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    try:
        if spec.kind == "convergence":
            _render_convergence(spec, ax)
        elif spec.kind == "policy-heatmap":
            _render_heatmap(spec, ax, fig)
        else:
            _render_call_bars(spec, ax)
        if spec.title:
            ax.set_title(spec.title)
        fig.tight_layout()
        out = Path(spec.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, dpi=150)
        return out
    finally:
        plt.close(fig)
