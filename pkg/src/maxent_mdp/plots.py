"""Matplotlib figure rendering for report outputs.

Figures are written straight to files next to the delimited outputs; the CSV
and JSON files remain the canonical data. Grid heatmaps recover cell
coordinates from ``c{x}_{y}`` state names (product states aggregate over the
automaton component).
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import InvalidModelError  # noqa: E402
from .gridworld import parse_cell_name  # noqa: E402


def residence_heatmap(state_names: tuple[str, ...], xi: tuple[float, ...], path: str) -> str:
    """Heatmap of expected residence time per grid cell.

    Product state names of the form ``c{x}_{y}|q`` are summed over the
    automaton component. Infinite residence renders at the finite maximum.
    """
    cells: dict[tuple[int, int], float] = {}
    for name, value in zip(state_names, xi):
        cell_part = name.split("|", 1)[0]
        try:
            cell = parse_cell_name(cell_part)
        except (InvalidModelError, ValueError):
            raise InvalidModelError(
                f"state {name!r} does not carry grid coordinates; heatmaps need a grid model"
            ) from None
        cells[cell] = cells.get(cell, 0.0) + value
    width = max(x for x, _ in cells) + 1
    height = max(y for _, y in cells) + 1
    finite = [v for v in cells.values() if math.isfinite(v)]
    cap = max(finite) if finite else 1.0
    img = np.full((height, width), np.nan)
    for (x, y), v in cells.items():
        img[y, x] = min(v, cap) if math.isfinite(v) else cap

    fig, ax = plt.subplots(figsize=(6, 5))
    mesh = ax.imshow(img, origin="lower", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="expected residence time")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title("Expected residence time per cell")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def sweep_curves(rows: list[dict], path: str) -> str:
    """Achieved entropy and expected observation count against the swept value."""
    ok = [r for r in rows if r["status"] == "ok"]
    if not ok:
        raise InvalidModelError("no successful sweep points to plot")
    xs = [r["value"] for r in ok]
    numeric = all(isinstance(x, (int, float)) for x in xs)
    positions = xs if numeric else list(range(len(xs)))

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(positions, [r["achieved_bits"] for r in ok], "o-")
    ax1.set_ylabel("achieved entropy (bits)")
    ax2.plot(positions, [r["o_avg"] for r in ok], "s-", color="tab:red")
    ax2.set_ylabel("expected observations")
    for ax in (ax1, ax2):
        ax.set_xlabel(ok[0]["variable"])
        if not numeric:
            ax.set_xticks(positions)
            ax.set_xticklabels([str(x) for x in xs], rotation=30, ha="right")
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
