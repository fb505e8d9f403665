"""Deterministic Rabin automata: model, HOA-subset and JSON parsing, and
programmatic builders for common reach/avoid task shapes.

The HOA support is deliberately narrow: version 1, explicit labels over AP
indices, state-based acceptance, ``acc-name: Rabin``, deterministic and total
transition structure. Anything else is rejected with a located diagnostic.
Translating temporal-logic formulas into automata is out of scope; automata
arrive as files or are built directly.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass

from .errors import FormatError

Letter = frozenset[str]


@dataclass(frozen=True)
class Dra:
    """Deterministic Rabin automaton over the alphabet 2^AP.

    ``transition[q]`` maps every letter (frozenset of AP names) to the next
    state; a run accepts iff for some pair (J, K) it eventually avoids J and
    visits K infinitely often.
    """

    states: tuple[str, ...]
    initial: int
    ap: tuple[str, ...]
    transition: tuple[dict[Letter, int], ...]
    pairs: tuple[tuple[frozenset[int], frozenset[int]], ...]

    def __post_init__(self):
        n = len(self.states)
        if not 0 <= self.initial < n:
            raise FormatError("initial automaton state out of range")
        if not self.pairs:
            raise FormatError("a Rabin automaton needs at least one acceptance pair")
        letters = set(self.letters())
        object.__setattr__(self, "transition", tuple(dict(t) for t in self.transition))
        if len(self.transition) != n:
            raise FormatError("one transition map per state required")
        for q, table in enumerate(self.transition):
            if set(table) != letters:
                missing = letters - set(table)
                raise FormatError(
                    f"state {self.states[q]} is not total: no edge for letters {sorted(map(sorted, missing))}"
                )
            for dest in table.values():
                if not 0 <= dest < n:
                    raise FormatError("transition target out of range")
        for j, k in self.pairs:
            if not (j <= frozenset(range(n)) and k <= frozenset(range(n))):
                raise FormatError("acceptance pair references unknown states")

    @property
    def n_states(self) -> int:
        return len(self.states)

    def letters(self) -> list[Letter]:
        return [
            frozenset(combo)
            for r in range(len(self.ap) + 1)
            for combo in itertools.combinations(self.ap, r)
        ]

    def step(self, q: int, label: frozenset[str]) -> int:
        """Advance on a label set; propositions outside this automaton's
        alphabet are ignored."""
        return self.transition[q][frozenset(label) & frozenset(self.ap)]

    def run(self, word: list[frozenset[str]]) -> list[int]:
        qs = [self.initial]
        for letter in word:
            qs.append(self.step(qs[-1], letter))
        return qs

    def accepts_lasso(self, prefix: list[frozenset[str]], cycle: list[frozenset[str]]) -> bool:
        """Decide acceptance of the ultimately-periodic word prefix . cycle^w."""
        if not cycle:
            raise FormatError("cycle must be non-empty")
        q = self.run(prefix)[-1]
        seen = {}
        trace = [q]
        while q not in seen:
            seen[q] = len(trace) - 1
            for letter in cycle:
                q = self.step(q, letter)
            trace.append(q)
        periodic = set(trace[seen[q]:])
        # expand to the states visited inside the periodic cycles
        visited = set()
        for q0 in periodic:
            qq = q0
            for letter in cycle:
                qq = self.step(qq, letter)
                visited.add(qq)
        return any(not (visited & j) and (visited & k) for j, k in self.pairs)


# --------------------------------------------------------------------------
# builders


def always_accepting_dra(ap: tuple[str, ...]) -> Dra:
    """One state, accepts every word (J empty, K the whole state set)."""
    letters = [
        frozenset(c) for r in range(len(ap) + 1) for c in itertools.combinations(ap, r)
    ]
    return Dra(
        states=("q0",),
        initial=0,
        ap=tuple(ap),
        transition=({letter: 0 for letter in letters},),
        pairs=((frozenset(), frozenset({0})),),
    )


def reach_stay_dra(target: str, avoid: tuple[str, ...] = (), extra_ap: tuple[str, ...] = ()) -> Dra:
    """Automaton for "eventually settle in target-labeled states, never touch
    an avoid label".

    States: waiting (target currently false), entered (target just became
    true), settled (target true again), plus a trap when ``avoid`` is
    non-empty. Accepting pair: avoid {waiting, trap}, revisit {settled};
    words accepted are exactly those where an avoid label never occurs and all
    but finitely many letters carry the target label.
    """
    ap = tuple(dict.fromkeys((target, *avoid, *extra_ap)))
    names = ["waiting", "entered", "settled"] + (["trap"] if avoid else [])
    idx = {n: i for i, n in enumerate(names)}
    letters = [
        frozenset(c) for r in range(len(ap) + 1) for c in itertools.combinations(ap, r)
    ]

    def nxt(q: int, letter: Letter) -> int:
        if avoid and (letter & frozenset(avoid)):
            return idx["trap"]
        if q == idx.get("trap"):
            return idx["trap"]
        if target in letter:
            return idx["entered"] if q == idx["waiting"] else idx["settled"]
        return idx["waiting"]

    transition = tuple({letter: nxt(q, letter) for letter in letters} for q in range(len(names)))
    j = frozenset({idx["waiting"]} | ({idx["trap"]} if avoid else set()))
    k = frozenset({idx["settled"]})
    return Dra(tuple(names), idx["waiting"], ap, transition, ((j, k),))


def sequenced_reach_dra(
    waypoints: tuple[str, ...], target: str, avoid: tuple[str, ...] = ()
) -> Dra:
    """Visit the waypoint labels in order, then settle in the target label,
    never touching an avoid label. Simultaneous labels cascade (a letter
    carrying the next several waypoints advances past all of them)."""
    ap = tuple(dict.fromkeys((*waypoints, target, *avoid)))
    names = [f"stage{i}" for i in range(len(waypoints))] + ["waiting", "entered", "settled"]
    if avoid:
        names.append("trap")
    idx = {n: i for i, n in enumerate(names)}
    letters = [
        frozenset(c) for r in range(len(ap) + 1) for c in itertools.combinations(ap, r)
    ]

    def nxt(q: int, letter: Letter) -> int:
        if avoid and (letter & frozenset(avoid)):
            return idx["trap"]
        if avoid and q == idx["trap"]:
            return idx["trap"]
        stage = q if q < len(waypoints) else None
        if stage is not None:
            while stage < len(waypoints) and waypoints[stage] in letter:
                stage += 1
            if stage < len(waypoints):
                return idx[f"stage{stage}"]
            q = idx["waiting"]  # fall through to the reach-stay part
        if target in letter:
            return idx["entered"] if q == idx["waiting"] else idx["settled"]
        return idx["waiting"]

    transition = tuple({letter: nxt(q, letter) for letter in letters} for q in range(len(names)))
    j = frozenset(i for n, i in idx.items() if n not in ("entered", "settled"))
    k = frozenset({idx["settled"]})
    initial = idx["stage0"] if waypoints else idx["waiting"]
    return Dra(tuple(names), initial, ap, transition, ((j, k),))


# --------------------------------------------------------------------------
# HOA subset


class _LabelParser:
    """Recursive descent over HOA label expressions: | > & > ! with t/f and
    AP indices as atoms."""

    def __init__(self, text: str, n_ap: int):
        self.tokens = re.findall(r"[0-9]+|[tf!&|()]", text.replace(" ", ""))
        if "".join(self.tokens) != text.replace(" ", ""):
            raise FormatError(f"bad label expression: {text!r}")
        self.pos = 0
        self.n_ap = n_ap

    def parse(self):
        node = self._or()
        if self.pos != len(self.tokens):
            raise FormatError(f"trailing tokens in label expression at {self.tokens[self.pos:]}")
        return node

    def _peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _or(self):
        left = self._and()
        while self._peek() == "|":
            self.pos += 1
            right = self._and()
            left = ("or", left, right)
        return left

    def _and(self):
        left = self._not()
        while self._peek() == "&":
            self.pos += 1
            right = self._not()
            left = ("and", left, right)
        return left

    def _not(self):
        if self._peek() == "!":
            self.pos += 1
            return ("not", self._not())
        return self._atom()

    def _atom(self):
        tok = self._peek()
        if tok == "(":
            self.pos += 1
            node = self._or()
            if self._peek() != ")":
                raise FormatError("unbalanced parentheses in label expression")
            self.pos += 1
            return node
        if tok in ("t", "f"):
            self.pos += 1
            return ("const", tok == "t")
        if tok is not None and tok.isdigit():
            self.pos += 1
            i = int(tok)
            if i >= self.n_ap:
                raise FormatError(f"label references AP index {i}, but only {self.n_ap} APs declared")
            return ("ap", i)
        raise FormatError(f"unexpected token {tok!r} in label expression")


def _eval_label(node, letter_bits: frozenset[int]) -> bool:
    kind = node[0]
    if kind == "const":
        return node[1]
    if kind == "ap":
        return node[1] in letter_bits
    if kind == "not":
        return not _eval_label(node[1], letter_bits)
    if kind == "and":
        return _eval_label(node[1], letter_bits) and _eval_label(node[2], letter_bits)
    return _eval_label(node[1], letter_bits) or _eval_label(node[2], letter_bits)


_PAIR_RE = re.compile(r"Fin\s*\(\s*(\d+)\s*\)\s*&\s*Inf\s*\(\s*(\d+)\s*\)")


def parse_hoa(text: str) -> Dra:
    lines = [ln.strip() for ln in text.splitlines()]
    header: list[str] = []
    body: list[str] = []
    section = header
    for ln in lines:
        if not ln or ln.startswith("/*"):
            continue
        if ln == "--BODY--":
            section = body
            continue
        if ln == "--END--":
            break
        section.append(ln)

    n_states = None
    start = None
    ap: list[str] = []
    acc_name = None
    acceptance = None
    for ln in header:
        key, _, rest = ln.partition(":")
        key = key.strip()
        rest = rest.strip()
        if key == "HOA":
            if rest != "v1":
                raise FormatError(f"unsupported HOA version {rest!r}")
        elif key == "States":
            n_states = int(rest)
        elif key == "Start":
            if start is not None or not rest.isdigit():
                raise FormatError("exactly one deterministic start state required")
            start = int(rest)
        elif key == "AP":
            parts = rest.split(None, 1)
            count = int(parts[0])
            names = re.findall(r'"((?:[^"\\]|\\.)*)"', parts[1] if len(parts) > 1 else "")
            if len(names) != count:
                raise FormatError(f"AP header declares {count} names, found {len(names)}")
            ap = names
        elif key == "acc-name":
            acc_name = rest
        elif key == "Acceptance":
            acceptance = rest
    if n_states is None or start is None or acceptance is None:
        raise FormatError("HOA header must declare States, Start and Acceptance")
    if acc_name is not None and not acc_name.startswith("Rabin"):
        raise FormatError(f"only Rabin acceptance is supported, got acc-name {acc_name!r}")

    acc_parts = acceptance.split(None, 1)
    n_sets = int(acc_parts[0])
    pair_matches = _PAIR_RE.findall(acc_parts[1] if len(acc_parts) > 1 else "")
    if not pair_matches:
        raise FormatError(f"acceptance condition is not in Rabin pair form: {acceptance!r}")
    pair_sets = [(int(f), int(i)) for f, i in pair_matches]
    if any(f >= n_sets or i >= n_sets for f, i in pair_sets):
        raise FormatError("acceptance references undeclared sets")

    n_ap = len(ap)
    letters_bits = [
        frozenset(c) for r in range(n_ap + 1) for c in itertools.combinations(range(n_ap), r)
    ]

    state_re = re.compile(r"^State:\s*(\d+)(?:\s+\"[^\"]*\")?\s*(\{[^}]*\})?\s*$")
    edge_re = re.compile(r"^\[(?P<label>[^\]]*)\]\s*(?P<dest>\d+)\s*(?P<acc>\{[^}]*\})?\s*$")

    membership: dict[int, set[int]] = {}
    edges: dict[int, list[tuple[object, int]]] = {}
    current: int | None = None
    for ln in body:
        m = state_re.match(ln)
        if m:
            current = int(m.group(1))
            if current >= n_states:
                raise FormatError(f"state {current} out of declared range")
            if current in edges:
                raise FormatError(f"state {current} declared twice")
            edges[current] = []
            sets_txt = m.group(2)
            membership[current] = (
                {int(x) for x in sets_txt.strip("{} \t").split()} if sets_txt else set()
            )
            continue
        m = edge_re.match(ln)
        if m:
            if current is None:
                raise FormatError(f"edge before any State line: {ln!r}")
            if m.group("acc"):
                raise FormatError("transition-based acceptance is not supported")
            node = _LabelParser(m.group("label"), n_ap).parse()
            edges[current].append((node, int(m.group("dest"))))
            continue
        raise FormatError(f"unrecognized body line: {ln!r}")

    if set(edges) != set(range(n_states)):
        raise FormatError("every declared state needs a State line")

    transition = []
    for q in range(n_states):
        table: dict[Letter, int] = {}
        for bits in letters_bits:
            hits = [dest for node, dest in edges[q] if _eval_label(node, bits)]
            letter_names = frozenset(ap[i] for i in bits)
            if len(hits) > 1:
                raise FormatError(
                    f"nondeterministic: state {q} has {len(hits)} edges for letter "
                    f"{sorted(letter_names) or '{}'}"
                )
            if not hits:
                raise FormatError(
                    f"not total: state {q} has no edge for letter {sorted(letter_names) or '{}'}"
                )
            table[letter_names] = hits[0]
        transition.append(table)

    pairs = tuple(
        (
            frozenset(q for q in range(n_states) if f in membership[q]),
            frozenset(q for q in range(n_states) if i in membership[q]),
        )
        for f, i in pair_sets
    )
    return Dra(
        states=tuple(f"q{q}" for q in range(n_states)),
        initial=start,
        ap=tuple(ap),
        transition=tuple(transition),
        pairs=pairs,
    )


def to_hoa(dra: Dra) -> str:
    """Serialize in the same HOA subset accepted by :func:`parse_hoa`."""
    ap_index = {name: i for i, name in enumerate(dra.ap)}
    out = [
        "HOA: v1",
        f"States: {dra.n_states}",
        f"Start: {dra.initial}",
        "AP: {} {}".format(len(dra.ap), " ".join(f'"{a}"' for a in dra.ap)),
        f"acc-name: Rabin {len(dra.pairs)}",
        "Acceptance: {} {}".format(
            2 * len(dra.pairs),
            " | ".join(f"(Fin({2 * i}) & Inf({2 * i + 1}))" for i in range(len(dra.pairs))),
        ),
        "--BODY--",
    ]
    for q in range(dra.n_states):
        sets = [
            str(2 * i) for i, (j, _) in enumerate(dra.pairs) if q in j
        ] + [str(2 * i + 1) for i, (_, k) in enumerate(dra.pairs) if q in k]
        suffix = f" {{{' '.join(sets)}}}" if sets else ""
        out.append(f'State: {q} "{dra.states[q]}"{suffix}')
        for letter, dest in sorted(dra.transition[q].items(), key=lambda kv: sorted(kv[0])):
            if dra.ap:
                lits = [
                    (str(ap_index[a]) if a in letter else f"!{ap_index[a]}") for a in dra.ap
                ]
                label = "&".join(lits)
            else:
                label = "t"
            out.append(f"[{label}] {dest}")
    out.append("--END--")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# JSON format

DRA_FORMAT = "maxent-dra/1"


def dra_to_json(dra: Dra) -> dict:
    return {
        "format": DRA_FORMAT,
        "states": list(dra.states),
        "initial": dra.states[dra.initial],
        "ap": list(dra.ap),
        "transitions": [
            [dra.states[q], sorted(letter), dra.states[dest]]
            for q in range(dra.n_states)
            for letter, dest in sorted(dra.transition[q].items(), key=lambda kv: sorted(kv[0]))
        ],
        "rabin_pairs": [
            {"J": sorted(dra.states[q] for q in j), "K": sorted(dra.states[q] for q in k)}
            for j, k in dra.pairs
        ],
    }


def dra_from_json(doc: dict) -> Dra:
    if doc.get("format") != DRA_FORMAT:
        raise FormatError(f"expected format {DRA_FORMAT!r}, got {doc.get('format')!r}")
    try:
        states = tuple(doc["states"])
        index = {n: i for i, n in enumerate(states)}
        ap = tuple(doc["ap"])
        transition: list[dict[Letter, int]] = [{} for _ in states]
        for q_name, letter, dest in doc["transitions"]:
            letter = frozenset(letter)
            if not letter <= frozenset(ap):
                raise FormatError(f"letter {sorted(letter)} uses unknown propositions")
            table = transition[index[q_name]]
            if letter in table:
                raise FormatError(f"nondeterministic: duplicate edge at {q_name} on {sorted(letter)}")
            table[letter] = index[dest]
        pairs = tuple(
            (
                frozenset(index[n] for n in pair["J"]),
                frozenset(index[n] for n in pair["K"]),
            )
            for pair in doc["rabin_pairs"]
        )
        return Dra(states, index[doc["initial"]], ap, tuple(transition), pairs)
    except KeyError as exc:
        raise FormatError(f"missing key in DRA JSON: {exc}") from None


def parse_dra(text: str) -> Dra:
    """Parse either HOA (sniffed by the ``HOA:`` magic) or the JSON format."""
    stripped = text.lstrip()
    if stripped.startswith("HOA:"):
        return parse_hoa(text)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"input is neither HOA nor valid JSON: {exc}") from None
    return dra_from_json(doc)
