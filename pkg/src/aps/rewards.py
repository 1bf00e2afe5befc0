"""Concern-based dialogue scoring and the combined reward.

A system move is penalized for leaving out sibling arguments whose concerns
the population prefers to the concerns it chose; the dialogue's concern
score averages those penalties over its system steps. The reward multiplies
the concern score by the end-of-dialogue reinstated belief in the goal.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from aps.concerns import PrefScoreFn
from aps.dialogue import Actor, Dialogue
from aps.graph import ArgumentGraph
from aps.propagation import BeliefStages, goal_belief


@dataclass(frozen=True)
class ConcernContext:
    """Concern assignment plus the preference score source.

    The assignment normally comes from the graph's own concern tags;
    arguments without tags count as having no concerns (warned once at
    construction when explicit assignments leave graph arguments uncovered).
    """

    assignment: dict[str, frozenset[str]]
    pref_score: PrefScoreFn

    @classmethod
    def from_graph(cls, graph: ArgumentGraph, pref_score: PrefScoreFn) -> "ConcernContext":
        return cls(
            assignment={a: graph.concerns_of(a) for a in graph.nodes},
            pref_score=pref_score,
        )

    @classmethod
    def explicit(
        cls,
        graph: ArgumentGraph,
        assignment: dict[str, frozenset[str] | set[str]],
        pref_score: PrefScoreFn,
    ) -> "ConcernContext":
        uncovered = sorted(set(graph.nodes) - set(assignment))
        if uncovered:
            warnings.warn(f"no concern assignment for {uncovered}; treated as empty")
        full = {a: frozenset(assignment.get(a, ())) for a in graph.nodes}
        return cls(assignment=full, pref_score=pref_score)

    def concerns_of(self, argument_id: str) -> frozenset[str]:
        return self.assignment.get(argument_id, frozenset())


def siblings(dialogue: Dialogue, argument_id: str) -> frozenset[str]:
    """Arguments that attack anything the given argument attacked at its step.

    Ranges over the full graph's attackers (not just menu leftovers), so the
    argument itself is always among its siblings. Undefined for arguments
    not played after step 1.
    """
    step = dialogue.step_of(argument_id)
    if step is None or step == 1:
        raise ValueError(f"{argument_id!r} was not played in response to anything")
    graph = dialogue.graph
    previous = dialogue.args_at(step - 1)
    result: set[str] = set()
    for target in previous:
        if (argument_id, target) in graph.arcs:
            result |= graph.attackers(target)
    return frozenset(result)


def _step_concerns(dialogue: Dialogue, context: ConcernContext, step: int) -> frozenset[str]:
    played = dialogue.args_at(step)
    out: set[str] = set()
    for a in played:
        out |= context.concerns_of(a)
    return frozenset(out)


def _sibling_concerns(dialogue: Dialogue, context: ConcernContext, step: int) -> frozenset[str]:
    out: set[str] = set()
    for a in dialogue.args_at(step):
        for sibling in siblings(dialogue, a):
            out |= context.concerns_of(sibling)
    return frozenset(out)


def non_chosen_score(dialogue: Dialogue, context: ConcernContext, i: int) -> float:
    """Average preference for the concerns the system left on the table.

    Scores the system step 2i+1: for every chosen concern C and every
    excluded sibling concern C', accumulate PrefScore(C', C) normalized by
    both set sizes. Zero when either set is empty.
    """
    step = 2 * i + 1
    if step < 3 or step > dialogue.length:
        raise ValueError(f"no system step {step} to score")
    chosen = _step_concerns(dialogue, context, step)
    if not chosen:
        return 0.0
    excluded = _sibling_concerns(dialogue, context, step) - chosen
    if not excluded:
        return 0.0
    total = 0.0
    for c in chosen:
        for c_prime in excluded:
            total += context.pref_score(c_prime, c) / len(excluded)
    return total / len(chosen)


def concern_score(dialogue: Dialogue, context: ConcernContext) -> float:
    """Average of (1 - non-chosen score) over the scored system steps.

    System steps after the first that posited at least one argument are
    scored; a dialogue too short to have any (or whose system steps are all
    terminal empty moves) scores the neutral 1. This skips the explicit
    empty termination move rather than counting it as a scored step.
    """
    scored_steps = [
        move.step
        for move in dialogue.moves
        if move.actor is Actor.SYSTEM and move.step >= 3 and move.arguments
    ]
    if not scored_steps:
        return 1.0
    total = sum(
        1.0 - non_chosen_score(dialogue, context, (step - 1) // 2)
        for step in scored_steps
    )
    return total / len(scored_steps)


def reward(dialogue: Dialogue, context: ConcernContext, stages: BeliefStages) -> float:
    """Concern score times the reinstated belief in the persuasion goal."""
    if not dialogue.terminated:
        raise ValueError("reward is defined on terminated dialogues")
    goal = dialogue.graph.goal
    if goal is None or dialogue.step_of(goal) is None:
        raise ValueError("the persuasion goal was never played")
    value = concern_score(dialogue, context) * goal_belief(stages, goal)
    if math.isnan(value):
        raise ValueError("reward is undefined")
    return value
