"""Experiment orchestration: sweep one knob across a grid of values and
tabulate objective, achieved entropy, predictability, and reach probability.

Points run in a worker pool (size from the MAXENT_THREADS environment
variable, default 1); rows are emitted in grid order regardless of completion
order, so output files are deterministic for a fixed seed.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

from .errors import DomainError, InvalidModelError
from .graph import chain_reach_probability
from .model import Mdp, induce_chain
from .observer import expected_observations
from .product import synthesize_constrained
from .rabin import Dra
from .synthesis import SynthesisOptions, synthesize_max_entropy

CSV_COLUMNS = (
    "variable",
    "value",
    "status",
    "objective_bits",
    "achieved_bits",
    "o_avg",
    "reach_probability",
    "wall_time_s",
)


class SweepVariable(str, Enum):
    GAMMA = "gamma"
    BETA = "beta"
    ELL = "ell"
    TASK = "task"


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep: a base model, the knob to move, and its value grid.

    For gamma/beta/ell sweeps the grid must be numeric and sorted; for task
    sweeps it is a list of (name, Dra) pairs tried in order. ``beta`` and
    ``gamma`` fix the non-swept knobs where the pipeline needs them.
    """

    mdp: Mdp
    variable: SweepVariable
    grid: tuple = ()
    dra: Dra | None = None
    beta: float | None = None
    gamma: float | None = None
    ell: float | None = None
    epsilon: float = 1e-6
    tol: float = 1e-8
    seed: int = 0
    output_dir: str = "."
    tasks: tuple[tuple[str, Dra], ...] = field(default=())

    def __post_init__(self):
        if self.variable is SweepVariable.TASK:
            if not self.tasks:
                raise InvalidModelError("task sweep needs a non-empty task list")
        else:
            if not self.grid:
                raise InvalidModelError("sweep grid must be non-empty")
            vals = [float(v) for v in self.grid]
            if sorted(vals) != vals:
                raise InvalidModelError("sweep grid must be sorted ascending")


def _format_value(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _run_point(spec: ExperimentSpec, value) -> dict:
    start = time.perf_counter()
    row = {
        "variable": spec.variable.value,
        "value": value if not isinstance(value, tuple) else value[0],
        "status": "ok",
        "objective_bits": math.nan,
        "achieved_bits": math.nan,
        "o_avg": math.nan,
        "reach_probability": math.nan,
        "wall_time_s": math.nan,
    }
    try:
        gamma = spec.gamma
        beta = spec.beta
        ell = spec.ell
        dra = spec.dra
        if spec.variable is SweepVariable.GAMMA:
            gamma = float(value)
        elif spec.variable is SweepVariable.BETA:
            beta = float(value)
        elif spec.variable is SweepVariable.ELL:
            ell = float(value)
        else:
            _, dra = value

        opts = SynthesisOptions(ell=ell, gamma=gamma, epsilon=spec.epsilon, tol=spec.tol)
        if dra is not None:
            if beta is None:
                raise InvalidModelError("constrained sweep needs a beta value")
            res = synthesize_constrained(spec.mdp, dra, beta, opts)
            chain = induce_chain(res.product.mdp, res.result.policy)
            row["objective_bits"] = (
                res.result.objective_bits if res.result.objective_bits is not None else math.inf
            )
            row["achieved_bits"] = res.result.achieved_bits
            row["reach_probability"] = res.beta_achieved
        else:
            res = synthesize_max_entropy(spec.mdp, opts)
            chain = induce_chain(spec.mdp, res.policy)
            row["objective_bits"] = (
                res.objective_bits if res.objective_bits is not None else math.inf
            )
            row["achieved_bits"] = res.achieved_bits
            row["reach_probability"] = math.nan
        row["o_avg"] = expected_observations(chain).o_avg
    except DomainError as exc:
        row["status"] = f"infeasible: {exc}"
    row["wall_time_s"] = time.perf_counter() - start
    return row


def run_sweep(spec: ExperimentSpec) -> list[dict]:
    """Evaluate every grid point; failed points become status rows."""
    points = list(spec.tasks) if spec.variable is SweepVariable.TASK else list(spec.grid)
    workers = max(1, int(os.environ.get("MAXENT_THREADS", "1")))
    if workers == 1:
        return [_run_point(spec, v) for v in points]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda v: _run_point(spec, v), points))


def rows_to_csv(rows: list[dict]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        cells = []
        for col in CSV_COLUMNS:
            v = row[col]
            if isinstance(v, float):
                cells.append(f"{v:.12g}")
            else:
                cells.append(str(v).replace(",", ";"))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
