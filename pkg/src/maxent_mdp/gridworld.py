"""Grid-world MDP construction.

Cells are (x, y) with x in [0, width), y in [0, height); the state name of a
cell is ``c{x}_{y}``. Every non-absorbing cell has the four compass actions.
An action reaches the chosen neighbor with probability ``p_main`` and slips
with probability ``p_slip`` each to the two cells flanking that neighbor
across the movement axis (moving up: up-left and up-right). Boundary and wall
handling:

* main target blocked -> the agent stays in place, and the slip targets
  become the cells flanking the current cell instead;
* slip target blocked -> its mass folds onto the main outcome.

Absorbing cells keep all four actions, each a self-loop with probability 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidModelError
from .model import Mdp

Cell = tuple[int, int]

ACTION_NAMES = ("left", "right", "up", "down")
_DELTA = {"left": (-1, 0), "right": (1, 0), "up": (0, 1), "down": (0, -1)}
# Slip axis is orthogonal to the move axis.
_SLIPS = {
    "left": ((0, 1), (0, -1)),
    "right": ((0, 1), (0, -1)),
    "up": ((-1, 0), (1, 0)),
    "down": ((-1, 0), (1, 0)),
}


def cell_name(c: Cell) -> str:
    return f"c{c[0]}_{c[1]}"


def parse_cell_name(name: str) -> Cell:
    if not name.startswith("c") or "_" not in name:
        raise InvalidModelError(f"not a grid cell name: {name!r}")
    x, y = name[1:].split("_", 1)
    return int(x), int(y)


@dataclass(frozen=True)
class GridWorldSpec:
    """Declarative description of a slippery grid world.

    ``walls`` are cells removed from the state space entirely; ``absorbing``
    cells exist but cannot be left. ``labels`` maps a proposition name to the
    set of cells carrying it.
    """

    width: int
    height: int
    initial: Cell
    absorbing: frozenset[Cell] = frozenset()
    walls: frozenset[Cell] = frozenset()
    labels: dict[str, frozenset[Cell]] = field(default_factory=dict)
    p_main: float = 0.7
    p_slip: float = 0.15

    def __post_init__(self):
        object.__setattr__(self, "initial", tuple(self.initial))
        object.__setattr__(self, "absorbing", frozenset(tuple(c) for c in self.absorbing))
        object.__setattr__(self, "walls", frozenset(tuple(c) for c in self.walls))
        object.__setattr__(
            self, "labels", {k: frozenset(tuple(c) for c in v) for k, v in self.labels.items()}
        )
        if self.width < 1 or self.height < 1:
            raise InvalidModelError("grid dimensions must be positive")
        if abs(self.p_main + 2 * self.p_slip - 1.0) > 1e-9:
            raise InvalidModelError("p_main + 2*p_slip must equal 1")
        if not (0 <= self.p_slip <= 0.5 and 0 < self.p_main <= 1):
            raise InvalidModelError("probabilities out of range")
        if self.initial in self.walls:
            raise InvalidModelError("initial cell is a wall")
        if self.initial in self.absorbing and (self.width * self.height - len(self.walls)) > 1:
            raise InvalidModelError("initial cell must not be absorbing")
        if not self._inside(self.initial):
            raise InvalidModelError("initial cell outside the grid")
        for c in self.walls | self.absorbing:
            if not self._inside(c):
                raise InvalidModelError(f"cell {c} outside the grid")
        for name, cells in self.labels.items():
            for c in cells:
                if not self._inside(c) or c in self.walls:
                    raise InvalidModelError(f"labeled cell {c} ({name}) is not a state")

    def _inside(self, c: Cell) -> bool:
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    def cells(self) -> list[Cell]:
        return [
            (x, y)
            for y in range(self.height)
            for x in range(self.width)
            if (x, y) not in self.walls
        ]


def build_gridworld(spec: GridWorldSpec) -> Mdp:
    """Expand a :class:`GridWorldSpec` into an explicit MDP."""
    cells = spec.cells()
    index = {c: i for i, c in enumerate(cells)}
    blocked = lambda c: not spec._inside(c) or c in spec.walls  # noqa: E731

    actions = []
    trans = []
    for c in cells:
        if c in spec.absorbing:
            actions.append(ACTION_NAMES)
            trans.append(tuple({index[c]: 1.0} for _ in ACTION_NAMES))
            continue
        actions.append(ACTION_NAMES)
        per_action = []
        for name in ACTION_NAMES:
            dx, dy = _DELTA[name]
            main = (c[0] + dx, c[1] + dy)
            main_tgt = c if blocked(main) else main
            dist: dict[int, float] = {index[main_tgt]: spec.p_main}
            for sx, sy in _SLIPS[name]:
                slip = (main_tgt[0] + sx, main_tgt[1] + sy)
                tgt = main_tgt if blocked(slip) else slip
                dist[index[tgt]] = dist.get(index[tgt], 0.0) + spec.p_slip
            dist = {t: p for t, p in dist.items() if p > 0}
            per_action.append(dist)
        trans.append(tuple(per_action))

    ap = tuple(sorted(spec.labels))
    labels = tuple(
        frozenset(name for name in ap if c in spec.labels[name]) for c in cells
    )
    return Mdp(
        states=tuple(cell_name(c) for c in cells),
        initial=index[spec.initial],
        actions=tuple(actions),
        trans=tuple(trans),
        ap=ap,
        labels=labels,
    )
