"""Figure builders over the estimation CLI's delimited text outputs.

Five figure kinds, one per output schema:

* ``density``  panels of exact vs mixture-approximated densities
               (columns u, exact, approx, diff; one panel per input file)
* ``diff``     the exact-minus-approximate difference panels
* ``trace``    sample paths (columns iteration, value)
* ``acf``      sample autocorrelations (columns lag, acf)
* ``band``     95% credible band, posterior median, and the moving-average
               volatility proxy (columns t, lower, median, upper, proxy)

This package never imports the estimation library; the CSV schemas are the
whole contract.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "svmix-report"  # deterministic SVG ids

import matplotlib.pyplot as plt
import pandas as pd

KINDS = ("density", "diff", "trace", "acf", "band")

_REQUIRED = {
    "density": ["u", "exact", "approx"],
    "diff": ["u", "diff"],
    "trace": ["iteration", "value"],
    "acf": ["lag", "acf"],
    "band": ["t", "lower", "median", "upper", "proxy"],
}


class SchemaError(ValueError):
    """Input file lacks a column the figure kind requires."""


@dataclass
class FigureSpec:
    inputs: list[str]
    kind: str
    output: str
    title: str = ""
    labels: list[str] = field(default_factory=list)

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; choose from {KINDS}")
        if not self.inputs:
            raise ValueError("at least one input file is required")


def _load(path: str, kind: str) -> pd.DataFrame:
    frame = pd.read_csv(path)
    if frame.empty:
        raise ValueError(f"{path} has no data rows")
    missing = [c for c in _REQUIRED[kind] if c not in frame.columns]
    if missing:
        raise SchemaError(f"{path} is missing column(s) {missing} required by {kind!r}")
    return frame


def build_figure(spec: FigureSpec) -> plt.Figure:
    """Assemble the matplotlib figure without touching the filesystem output."""
    spec.validate()
    frames = [_load(p, spec.kind) for p in spec.inputs]
    labels = spec.labels or [Path(p).stem for p in spec.inputs]

    if spec.kind in ("density", "diff"):
        fig, axes = plt.subplots(1, len(frames), figsize=(4.0 * len(frames), 3.2),
                                 squeeze=False)
        for ax, frame, label in zip(axes[0], frames, labels):
            if spec.kind == "density":
                ax.plot(frame["u"], frame["exact"], lw=1.2, label="exact")
                ax.plot(frame["u"], frame["approx"], lw=1.0, ls="--", label="approximation")
                ax.legend(fontsize=8)
            else:
                ax.plot(frame["u"], frame["diff"], lw=1.0)
                ax.axhline(0.0, color="grey", lw=0.6)
            ax.set_title(label, fontsize=9)
            ax.set_xlabel("u")
    elif spec.kind == "trace":
        fig, axes = plt.subplots(len(frames), 1, figsize=(7.0, 1.8 * len(frames)),
                                 squeeze=False, sharex=True)
        for ax, frame, label in zip(axes[:, 0], frames, labels):
            ax.plot(frame["iteration"], frame["value"], lw=0.4)
            ax.set_ylabel(label, fontsize=8)
        axes[-1, 0].set_xlabel("iteration")
    elif spec.kind == "acf":
        fig, axes = plt.subplots(len(frames), 1, figsize=(7.0, 1.8 * len(frames)),
                                 squeeze=False, sharex=True)
        for ax, frame, label in zip(axes[:, 0], frames, labels):
            ax.plot(frame["lag"], frame["acf"], lw=0.9)
            ax.axhline(0.0, color="grey", lw=0.6)
            ax.set_ylim(-0.3, 1.02)
            ax.set_ylabel(label, fontsize=8)
        axes[-1, 0].set_xlabel("lag")
    else:  # band
        frame = frames[0]
        fig, ax = plt.subplots(figsize=(8.0, 3.4))
        ax.fill_between(frame["t"], frame["lower"], frame["upper"], color="#9ecae1",
                        alpha=0.6, label="95% interval")
        ax.plot(frame["t"], frame["median"], color="#08519c", lw=1.0, label="posterior median")
        ax.plot(frame["t"], frame["proxy"], color="#d95f02", lw=0.8, ls=":",
                label="moving-average proxy")
        ax.set_xlabel("t")
        ax.legend(fontsize=8)
    if spec.title:
        fig.suptitle(spec.title, fontsize=10)
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> str:
    """Write the figure to ``spec.output``; inputs are never modified.

    Timestamp metadata is stripped so identical inputs give identical bytes.
    """
    fig = build_figure(spec)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fmt = out.suffix.lstrip(".").lower() or "png"
    metadata = {"Date": None} if fmt == "svg" else {"Software": "svmix-report"}
    try:
        fig.savefig(out, dpi=150, metadata=metadata)
    finally:
        plt.close(fig)
    return str(out)
