"""Argument graphs: tagged arguments connected by a directed attack relation.

Graphs are immutable after construction and safe to share across concurrent
rollouts. Attack arcs point from attacker to attackee.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence


class GraphFormatError(ValueError):
    """Raised when a graph file violates the format or its invariants."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        location = ""
        if path is not None:
            location = f"{path}:" if line is None else f"{path}:{line}:"
        super().__init__(f"{location} {message}".strip())
        self.path = path
        self.line = line


class UnknownArgumentError(KeyError):
    """Lookup of an argument id that is not in the graph."""


@dataclass(frozen=True)
class Argument:
    """One argument: an opaque id, its text, and the concerns it touches."""

    id: str
    text: str = ""
    concerns: frozenset[str] = frozenset()


class ArgumentGraph:
    """Directed attack graph with a designated persuasion goal.

    ``arcs`` holds (attacker, attackee) pairs. The goal may be ``None`` only
    for graphs induced from plays that did not include the goal.
    """

    __slots__ = ("nodes", "arcs", "goal", "_attackers", "_initial")

    def __init__(
        self,
        nodes: Iterable[Argument],
        arcs: Iterable[tuple[str, str]],
        goal: str | None,
    ):
        self.nodes: dict[str, Argument] = {}
        for argument in nodes:
            if argument.id in self.nodes:
                raise ValueError(f"duplicate argument id {argument.id!r}")
            self.nodes[argument.id] = argument
        self.arcs: frozenset[tuple[str, str]] = frozenset(arcs)
        for attacker, attackee in self.arcs:
            if attacker not in self.nodes:
                raise ValueError(f"arc attacker {attacker!r} is not a node")
            if attackee not in self.nodes:
                raise ValueError(f"arc attackee {attackee!r} is not a node")
        if goal is not None and goal not in self.nodes:
            raise ValueError(f"goal {goal!r} is not a node")
        self.goal = goal
        attackers: dict[str, set[str]] = {a: set() for a in self.nodes}
        for attacker, attackee in self.arcs:
            attackers[attackee].add(attacker)
        self._attackers = {a: frozenset(bs) for a, bs in attackers.items()}
        self._initial = frozenset(a for a, bs in self._attackers.items() if not bs)

    def __contains__(self, argument_id: str) -> bool:
        return argument_id in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:
        return f"ArgumentGraph(nodes={len(self.nodes)}, arcs={len(self.arcs)}, goal={self.goal!r})"

    def argument(self, argument_id: str) -> Argument:
        try:
            return self.nodes[argument_id]
        except KeyError:
            raise UnknownArgumentError(argument_id) from None

    def attackers(self, argument_id: str) -> frozenset[str]:
        """All direct attackers of the given argument."""
        if argument_id not in self.nodes:
            raise UnknownArgumentError(argument_id)
        return self._attackers[argument_id]

    def initial_arguments(self) -> frozenset[str]:
        """Arguments with no attackers at all."""
        return self._initial

    def concerns_of(self, argument_id: str) -> frozenset[str]:
        return self.argument(argument_id).concerns


def indirect_relation(graph: ArgumentGraph, a: str, b: str) -> frozenset[str]:
    """Path-parity relation from ``a`` to ``b``: subset of {"attacks", "defends"}.

    ``a`` indirectly attacks ``b`` iff a directed path of odd length exists,
    and defends it iff a path of non-zero even length exists. In cyclic
    graphs both can hold, so the full set of kinds is returned.
    """
    if a not in graph.nodes:
        raise UnknownArgumentError(a)
    if b not in graph.nodes:
        raise UnknownArgumentError(b)
    successors: dict[str, list[str]] = {n: [] for n in graph.nodes}
    for attacker, attackee in graph.arcs:
        successors[attacker].append(attackee)
    # BFS over (node, parity) states; parity = path length mod 2. Arrival at
    # b is recorded before the visited check so a cycle back to the start
    # node still reports (the start state itself is not an arrival).
    seen = {(a, 0)}
    frontier = [(a, 0)]
    kinds: set[str] = set()
    while frontier:
        nxt = []
        for node, parity in frontier:
            for succ in successors[node]:
                state = (succ, 1 - parity)
                if succ == b:
                    kinds.add("attacks" if state[1] == 1 else "defends")
                if state not in seen:
                    seen.add(state)
                    nxt.append(state)
        frontier = nxt
    return frozenset(kinds)


def induced_graph(graph: ArgumentGraph, played: Sequence[Iterable[str]]) -> ArgumentGraph:
    """Subgraph restricted to the union of played argument sets.

    Keeps every arc with both endpoints played; the goal is preserved only
    when it was played. Monotone in the play list.
    """
    kept: set[str] = set()
    for step_args in played:
        for argument_id in step_args:
            if argument_id not in graph.nodes:
                raise UnknownArgumentError(argument_id)
            kept.add(argument_id)
    arcs = [(x, y) for (x, y) in graph.arcs if x in kept and y in kept]
    goal = graph.goal if graph.goal in kept else None
    return ArgumentGraph((graph.nodes[a] for a in kept), arcs, goal)


def _line_of(text: str, token: str) -> int | None:
    """Best-effort line number of the first occurrence of ``token``."""
    index = text.find(token)
    if index < 0:
        return None
    return text.count("\n", 0, index) + 1


def load_graph(path: str | Path) -> ArgumentGraph:
    """Load and validate a graph file.

    Format: a JSON object with ``nodes`` (list of {id, text, concerns}),
    ``arcs`` (list of [attacker, attackee] pairs) and ``goal`` (an id).
    Self-attacks and duplicate arcs are accepted with a warning.
    """
    path = Path(path)
    raw = path.read_text()
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"invalid JSON: {exc.msg}", path=str(path), line=exc.lineno) from None
    return parse_graph(data, source=str(path), raw=raw)


def parse_graph(data: object, *, source: str = "<graph>", raw: str = "") -> ArgumentGraph:
    """Validate an already-parsed graph object. See :func:`load_graph`."""

    def fail(message: str, token: str | None = None) -> GraphFormatError:
        line = _line_of(raw, token) if token else None
        return GraphFormatError(message, path=source, line=line)

    if not isinstance(data, dict):
        raise fail("top level must be an object")
    for key in ("nodes", "arcs", "goal"):
        if key not in data:
            raise fail(f"missing required field {key!r}")

    arguments: list[Argument] = []
    seen_ids: set[str] = set()
    for index, node in enumerate(data["nodes"]):
        if not isinstance(node, dict) or "id" not in node:
            raise fail(f"nodes[{index}] must be an object with an 'id'")
        node_id = node["id"]
        if not isinstance(node_id, str) or not node_id:
            raise fail(f"nodes[{index}].id must be a nonempty string")
        if node_id in seen_ids:
            raise fail(f"duplicate argument id {node_id!r}", token=f'"{node_id}"')
        seen_ids.add(node_id)
        concerns = node.get("concerns", [])
        if not isinstance(concerns, list) or any(not isinstance(c, str) for c in concerns):
            raise fail(f"nodes[{index}].concerns must be a list of strings", token=f'"{node_id}"')
        arguments.append(
            Argument(id=node_id, text=node.get("text", ""), concerns=frozenset(concerns))
        )

    arcs: list[tuple[str, str]] = []
    arc_seen: set[tuple[str, str]] = set()
    for index, arc in enumerate(data["arcs"]):
        if not isinstance(arc, (list, tuple)) or len(arc) != 2:
            raise fail(f"arcs[{index}] must be an [attacker, attackee] pair")
        attacker, attackee = arc
        for endpoint in (attacker, attackee):
            if endpoint not in seen_ids:
                raise fail(
                    f"arcs[{index}] endpoint {endpoint!r} is not a declared node",
                    token=f'"{endpoint}"',
                )
        if attacker == attackee:
            warnings.warn(f"{source}: self-attack on {attacker!r} accepted", stacklevel=2)
        if (attacker, attackee) in arc_seen:
            warnings.warn(
                f"{source}: duplicate arc ({attacker!r}, {attackee!r}) collapsed", stacklevel=2
            )
        arc_seen.add((attacker, attackee))
        arcs.append((attacker, attackee))

    goal = data["goal"]
    if goal not in seen_ids:
        raise fail(f"goal {goal!r} is not a declared node", token='"goal"')
    return ArgumentGraph(arguments, arcs, goal)


def dump_graph(graph: ArgumentGraph, path: str | Path) -> None:
    """Write a graph back out in the loader's format."""
    data = {
        "nodes": [
            {"id": a.id, "text": a.text, "concerns": sorted(a.concerns)}
            for a in sorted(graph.nodes.values(), key=lambda a: a.id)
        ],
        "arcs": sorted([list(arc) for arc in graph.arcs]),
        "goal": graph.goal,
    }
    Path(path).write_text(json.dumps(data, indent=2) + "\n")
