"""Versioned JSON formats for models, grid specs, and policies.

Serialization is deterministic: key order is fixed by construction and floats
use Python's shortest round-trip repr, so identical objects produce
byte-identical files.
"""

from __future__ import annotations

import json
from typing import Any

from .errors import FormatError
from .gridworld import GridWorldSpec
from .model import Mdp, StationaryPolicy

MDP_FORMAT = "maxent-mdp/1"
GRID_FORMAT = "maxent-gridworld/1"
SWEEP_FORMAT = "maxent-sweep/1"


def mdp_to_json(mdp: Mdp) -> dict[str, Any]:
    return {
        "format": MDP_FORMAT,
        "states": list(mdp.states),
        "initial": mdp.states[mdp.initial],
        "ap": list(mdp.ap),
        "labels": {
            mdp.states[s]: sorted(mdp.labels[s])
            for s in range(mdp.n_states)
            if mdp.labels[s]
        },
        "actions": {mdp.states[s]: list(mdp.actions[s]) for s in range(mdp.n_states)},
        "transitions": [
            [mdp.states[s], mdp.actions[s][a], mdp.states[t], p]
            for s in range(mdp.n_states)
            for a in range(mdp.n_actions(s))
            for t, p in sorted(mdp.trans[s][a].items())
        ],
    }


def mdp_from_json(doc: dict[str, Any]) -> Mdp:
    if doc.get("format") != MDP_FORMAT:
        raise FormatError(f"expected format {MDP_FORMAT!r}, got {doc.get('format')!r}")
    try:
        states = tuple(doc["states"])
        if len(set(states)) != len(states):
            raise FormatError("duplicate state names")
        index = {name: i for i, name in enumerate(states)}
        ap = tuple(doc.get("ap", []))
        labels = []
        raw_labels = doc.get("labels", {})
        for name in states:
            labels.append(frozenset(raw_labels.get(name, [])))
        actions = []
        a_index: list[dict[str, int]] = []
        for name in states:
            acts = tuple(doc["actions"][name])
            if len(set(acts)) != len(acts):
                raise FormatError(f"duplicate action names at state {name!r}")
            actions.append(acts)
            a_index.append({a: i for i, a in enumerate(acts)})
        trans: list[list[dict[int, float]]] = [
            [dict() for _ in acts] for acts in actions
        ]
        for s_name, a_name, t_name, p in doc["transitions"]:
            if s_name not in index or t_name not in index:
                raise FormatError(f"transition references unknown state: {s_name!r} -> {t_name!r}")
            s = index[s_name]
            if a_name not in a_index[s]:
                raise FormatError(f"transition references unknown action {a_name!r} at {s_name!r}")
            dist = trans[s][a_index[s][a_name]]
            t = index[t_name]
            if t in dist:
                raise FormatError(f"duplicate transition entry ({s_name},{a_name},{t_name})")
            dist[t] = float(p)
        return Mdp(
            states=states,
            initial=index[doc["initial"]],
            actions=tuple(actions),
            trans=tuple(tuple(per) for per in trans),
            ap=ap,
            labels=tuple(labels),
        )
    except KeyError as exc:
        raise FormatError(f"missing key in MDP JSON: {exc}") from None


def gridworld_to_json(spec: GridWorldSpec) -> dict[str, Any]:
    return {
        "format": GRID_FORMAT,
        "width": spec.width,
        "height": spec.height,
        "initial": list(spec.initial),
        "absorbing": sorted(list(c) for c in spec.absorbing),
        "walls": sorted(list(c) for c in spec.walls),
        "labels": {name: sorted(list(c) for c in cells) for name, cells in sorted(spec.labels.items())},
        "p_main": spec.p_main,
        "p_slip": spec.p_slip,
    }


def gridworld_from_json(doc: dict[str, Any]) -> GridWorldSpec:
    if doc.get("format") != GRID_FORMAT:
        raise FormatError(f"expected format {GRID_FORMAT!r}, got {doc.get('format')!r}")
    try:
        return GridWorldSpec(
            width=int(doc["width"]),
            height=int(doc["height"]),
            initial=tuple(doc["initial"]),
            absorbing=frozenset(tuple(c) for c in doc.get("absorbing", [])),
            walls=frozenset(tuple(c) for c in doc.get("walls", [])),
            labels={k: frozenset(tuple(c) for c in v) for k, v in doc.get("labels", {}).items()},
            p_main=float(doc.get("p_main", 0.7)),
            p_slip=float(doc.get("p_slip", 0.15)),
        )
    except KeyError as exc:
        raise FormatError(f"missing key in grid JSON: {exc}") from None


def policy_to_json(mdp: Mdp, policy: StationaryPolicy) -> dict[str, dict[str, float]]:
    return policy.as_named(mdp)


def policy_from_json(mdp: Mdp, doc: dict[str, dict[str, float]]) -> StationaryPolicy:
    return StationaryPolicy.from_named(mdp, doc)


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2) + "\n"


def load_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from None
