"""Belief propagation over the dialogue-induced graph.

Three belief stages per argument: the initial belief when played, the
attacked belief once counterarguments land, and the reinstated belief after
defenders are taken into account. The reinstated belief of the goal is the
end-of-dialogue evaluation the strategist maximizes.

Two modes are shipped. EXAMPLE_FAITHFUL (default) restricts the dampening
coefficients to attackers that are actually believed (initial belief above
0.5) and applies reinstatement exactly when such an attacker exists; it
reproduces the published worked example. LITERAL_DEFINITION keeps the
textbook reading (coefficients over all attackers, reinstatement only when
no attacker's reinstated belief exceeds 0.5) for auditability; the two
disagree on chains of length three and more.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping

from aps.dialogue import Dialogue
from aps.graph import ArgumentGraph


class CyclicInducedGraphError(ValueError):
    """Propagation needs a well-founded evaluation order."""


class PropagationMode(enum.Enum):
    EXAMPLE_FAITHFUL = "example_faithful"
    LITERAL_DEFINITION = "literal_definition"


@dataclass(frozen=True)
class BeliefStages:
    """Per-argument belief stages plus the dampening coefficients."""

    init: dict[str, float]
    att: dict[str, float]
    reinst: dict[str, float]
    k_init: dict[str, float]
    k_reinst: dict[str, float]

    def dump(self, order: Iterable[str]) -> str:
        """Debug table of (init, k_init, att, k_reinst, reinst) per argument."""
        lines = ["argument  init    k_init  att     k_reinst reinst"]
        for a in order:
            lines.append(
                f"{a:<9} {self.init[a]:<7.4f} {self.k_init[a]:<7.4f} "
                f"{self.att[a]:<7.4f} {self.k_reinst[a]:<8.4f} {self.reinst[a]:.4f}"
            )
        return "\n".join(lines)


def sigma_coefficient(values: Iterable[float]) -> float:
    """Dampening coefficient of a set of attacker beliefs.

    The inclusion-exclusion sum over subsets collapses to the product of
    (1 - b) terms; the empty set gives 1.
    """
    result = 1.0
    for value in values:
        if not (0.0 <= value <= 1.0):
            raise ValueError(f"belief {value} outside [0, 1]")
        result *= 1.0 - value
    return result


def effective_attackers(
    induced: ArgumentGraph, init: Mapping[str, float], argument_id: str
) -> frozenset[str]:
    """Attackers that are actually believed (initial belief above 0.5)."""
    return frozenset(
        b for b in induced.attackers(argument_id) if init[b] > 0.5
    )


def _topological_order(graph: ArgumentGraph) -> list[str]:
    """Nodes ordered so every attacker precedes what it attacks."""
    incoming = {a: len(graph.attackers(a)) for a in graph.nodes}
    targets: dict[str, list[str]] = {a: [] for a in graph.nodes}
    for attacker, attackee in graph.arcs:
        targets[attacker].append(attackee)
    ready = sorted(a for a, count in incoming.items() if count == 0)
    order: list[str] = []
    while ready:
        node = ready.pop()
        order.append(node)
        for target in sorted(targets[node], reverse=True):
            incoming[target] -= 1
            if incoming[target] == 0:
                ready.append(target)
    if len(order) != len(graph.nodes):
        cyclic = sorted(a for a, count in incoming.items() if count > 0)
        raise CyclicInducedGraphError(f"cycle among played arguments: {cyclic}")
    return order


def propagate(
    induced: ArgumentGraph,
    init: Mapping[str, float],
    mode: PropagationMode = PropagationMode.EXAMPLE_FAITHFUL,
) -> BeliefStages:
    """Compute attacked and reinstated beliefs over an acyclic induced graph."""
    missing = [a for a in induced.nodes if a not in init]
    if missing:
        raise KeyError(f"no initial belief for {sorted(missing)}")
    for a in induced.nodes:
        if not (0.0 <= init[a] <= 1.0):
            raise ValueError(f"initial belief of {a!r} outside [0, 1]")
    order = _topological_order(induced)

    init_map = {a: float(init[a]) for a in induced.nodes}
    att: dict[str, float] = {}
    reinst: dict[str, float] = {}
    k_init: dict[str, float] = {}
    k_reinst: dict[str, float] = {}

    literal = mode is PropagationMode.LITERAL_DEFINITION
    for a in order:
        attackers = induced.attackers(a)
        effective = effective_attackers(induced, init_map, a)
        coefficient_set = attackers if literal else effective
        k_init[a] = sigma_coefficient(init_map[b] for b in coefficient_set)
        att[a] = init_map[a] * k_init[a] if effective else init_map[a]
        k_reinst[a] = sigma_coefficient(reinst[b] for b in coefficient_set)
        if literal:
            reinstate = bool(attackers) and all(reinst[b] <= 0.5 for b in attackers)
        else:
            reinstate = bool(effective)
        reinst[a] = att[a] + k_reinst[a] * (1.0 - att[a]) if reinstate else att[a]
    return BeliefStages(init=init_map, att=att, reinst=reinst, k_init=k_init, k_reinst=k_reinst)


def goal_belief(stages: BeliefStages, goal: str) -> float:
    """Reinstated belief of the persuasion goal."""
    if goal not in stages.reinst:
        raise KeyError(f"goal {goal!r} was never played")
    return stages.reinst[goal]


def dialogue_induced_dag(dialogue: Dialogue) -> ArgumentGraph:
    """The dialogue-induced graph with forward arcs dropped.

    The full arc restriction can point from an earlier move to a later one
    (mutual attacks); those back-references are removed so the evaluation
    order rooted at the goal is well founded. A cycle surviving within a
    single step's argument set is an error.
    """
    induced = dialogue.induced()
    step_of = {a: dialogue.step_of(a) for a in induced.nodes}
    arcs = [
        (attacker, attackee)
        for attacker, attackee in induced.arcs
        if step_of[attacker] >= step_of[attackee]
    ]
    return ArgumentGraph((induced.nodes[a] for a in induced.nodes), arcs, induced.goal)


def dialogue_stages(
    dialogue: Dialogue,
    init: Mapping[str, float],
    mode: PropagationMode = PropagationMode.EXAMPLE_FAITHFUL,
) -> BeliefStages:
    """Propagate beliefs over a dialogue's (pruned) induced graph."""
    return propagate(dialogue_induced_dag(dialogue), init, mode)
