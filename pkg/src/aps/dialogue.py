"""Dialogue state machine for the incomplete asymmetric protocol.

The system posits sets of counterarguments on odd steps; the user answers
each attacked argument on even steps by picking counterarguments from a menu
or one of two null options (``acc``: agree, no counter; ``rej``: disagree,
no listed counter applies). Dialogues are immutable; ``apply_move`` returns
a new value, so rollouts can branch freely.

Protocol conditions (referenced by number in violations):

1. every argument comes from the graph
2. system moves on odd steps, user moves on even steps
3. the first move posits exactly the persuasion goal
4. user moves are menu moves (a valid choice per attacked argument)
5. system moves after step 3 posit unplayed attackers of the previous move
6. step 3 counters every step-2 argument that still has an unplayed attacker
7. system moves from step 5 on carry at most two non-initial arguments
8. termination occurs exactly at the final step (empty system move, or a
   user turn with no available menu moves)
"""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass, replace
from typing import Iterator

from aps.graph import ArgumentGraph, induced_graph

NULL_ACC = "acc"
NULL_REJ = "rej"


class Actor(enum.Enum):
    SYSTEM = "system"
    USER = "user"


class TerminationReason(enum.Enum):
    SYSTEM_STOPPED = "system_stopped"
    NO_USER_MOVES = "no_user_moves"


class ProtocolViolation(ValueError):
    """An illegal move. ``condition`` names the violated protocol rule."""

    def __init__(self, condition: int, message: str):
        super().__init__(f"protocol condition {condition}: {message}")
        self.condition = condition


@dataclass(frozen=True)
class Move:
    """One dialogue move. Null markers are (argument-id, kind) pairs.

    Null markers are typed markers, not pseudo-arguments: ``arguments``
    contains graph arguments only.
    """

    step: int
    actor: Actor
    arguments: frozenset[str] = frozenset()
    nulls: frozenset[tuple[str, str]] = frozenset()

    def key(self) -> tuple:
        """Canonical hashable key, used to index search-tree children."""
        return (tuple(sorted(self.arguments)), tuple(sorted(self.nulls)))

    def null_for(self, argument_id: str) -> str | None:
        for target, kind in self.nulls:
            if target == argument_id:
                return kind
        return None


@dataclass(frozen=True)
class Violation:
    condition: int
    step: int
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def conditions(self) -> set[int]:
        return {v.condition for v in self.violations}


@dataclass(frozen=True)
class Dialogue:
    """An alternating sequence of system and user moves over one graph."""

    graph: ArgumentGraph
    moves: tuple[Move, ...] = ()
    status: TerminationReason | None = None

    @property
    def length(self) -> int:
        return len(self.moves)

    @property
    def next_step(self) -> int:
        return len(self.moves) + 1

    @property
    def terminated(self) -> bool:
        return self.status is not None

    def move_at(self, step: int) -> Move:
        return self.moves[step - 1]

    def args_at(self, step: int) -> frozenset[str]:
        return self.moves[step - 1].arguments

    def played_before(self, step: int) -> set[str]:
        """All arguments uttered strictly before the given step."""
        played: set[str] = set()
        for move in self.moves[: step - 1]:
            played |= move.arguments
        return played

    def played(self) -> set[str]:
        return self.played_before(self.length + 1)

    def step_of(self, argument_id: str) -> int | None:
        """First step at which an argument was played, if any."""
        for move in self.moves:
            if argument_id in move.arguments:
                return move.step
        return None

    def induced(self) -> ArgumentGraph:
        """The subgraph induced by everything played so far."""
        return induced_graph(self.graph, [m.arguments for m in self.moves])


def new_dialogue(graph: ArgumentGraph) -> Dialogue:
    if graph.goal is None:
        raise ValueError("dialogue requires a graph with a goal")
    return Dialogue(graph=graph)


def options(dialogue: Dialogue, argument_id: str, step: int) -> frozenset[str]:
    """Attackers of the argument not yet played at any earlier step."""
    attackers = dialogue.graph.attackers(argument_id)
    if not attackers:
        return frozenset()
    return attackers - dialogue.played_before(step)


def _option_union(dialogue: Dialogue, step: int) -> frozenset[str]:
    previous = dialogue.args_at(step - 1)
    union: set[str] = set()
    for argument_id in previous:
        union |= options(dialogue, argument_id, step)
    return frozenset(union)


def _required_counters(dialogue: Dialogue, step: int) -> dict[str, frozenset[str]]:
    """Step-2 arguments that step 3 must counter, with their open options.

    Arguments with no unplayed attackers are exempt (otherwise no valid
    dialogue would exist when the graph runs out of counters).
    """
    if step != 3:
        return {}
    required = {}
    for argument_id in dialogue.args_at(2):
        open_options = options(dialogue, argument_id, step)
        if open_options:
            required[argument_id] = open_options
    return required


def check_system_move(dialogue: Dialogue, move: Move) -> None:
    """Raise ProtocolViolation if the move is not legal at the current step."""
    step = dialogue.next_step
    if step % 2 == 0:
        raise ProtocolViolation(2, f"step {step} is a user turn")
    if move.nulls:
        raise ProtocolViolation(4, "system moves carry no null markers")
    unknown = [a for a in move.arguments if a not in dialogue.graph]
    if unknown:
        raise ProtocolViolation(1, f"unknown arguments {sorted(unknown)}")
    if step == 1:
        if move.arguments != frozenset({dialogue.graph.goal}):
            raise ProtocolViolation(3, "first move must posit exactly the goal")
        return
    stray = move.arguments - _option_union(dialogue, step)
    if stray:
        raise ProtocolViolation(
            5, f"arguments {sorted(stray)} are not unplayed attackers of the previous move"
        )
    for argument_id, open_options in _required_counters(dialogue, step).items():
        if not (move.arguments & open_options):
            raise ProtocolViolation(6, f"step 3 leaves {argument_id!r} uncountered")
    if step >= 5:
        non_initial = move.arguments - dialogue.graph.initial_arguments()
        if len(non_initial) > 2:
            raise ProtocolViolation(
                7, f"{len(non_initial)} non-initial arguments posited, at most 2 allowed"
            )


def menu_listing(dialogue: Dialogue, argument_id: str, step: int) -> frozenset[str]:
    """Menu shown against one argument: open options plus the null markers.

    Empty when the argument has no attackers at all; the null markers are
    present whenever attackers exist, even with every option already played.
    """
    if argument_id not in dialogue.args_at(step - 1):
        raise ValueError(f"{argument_id!r} was not posited at step {step - 1}")
    if not dialogue.graph.attackers(argument_id):
        return frozenset()
    return options(dialogue, argument_id, step) | {NULL_REJ, NULL_ACC}


def _attacked_previous(dialogue: Dialogue, step: int) -> list[str]:
    """Previous-step arguments that have attackers in the graph (menu targets)."""
    return sorted(
        a for a in dialogue.args_at(step - 1) if dialogue.graph.attackers(a)
    )


def check_user_move(dialogue: Dialogue, move: Move) -> None:
    """Raise ProtocolViolation if the move is not a valid menu move."""
    step = dialogue.next_step
    if step % 2 == 1:
        raise ProtocolViolation(2, f"step {step} is a system turn")
    unknown = [a for a in move.arguments if a not in dialogue.graph]
    if unknown:
        raise ProtocolViolation(1, f"unknown arguments {sorted(unknown)}")
    targets = _attacked_previous(dialogue, step)
    if not targets:
        raise ProtocolViolation(8, "no menu moves are available at this step")
    null_targets = [t for t, _ in move.nulls]
    if len(null_targets) != len(set(null_targets)):
        raise ProtocolViolation(4, "more than one null marker for the same argument")
    for target, kind in move.nulls:
        if target not in targets:
            raise ProtocolViolation(4, f"null marker for {target!r}, which shows no menu")
        if kind not in (NULL_ACC, NULL_REJ):
            raise ProtocolViolation(4, f"unknown null kind {kind!r}")
    claimed: set[str] = set()
    for target in targets:
        open_options = options(dialogue, target, step)
        picked = move.arguments & open_options
        null_kind = move.null_for(target)
        if null_kind is not None and picked:
            raise ProtocolViolation(
                4, f"null marker and counterarguments both answer {target!r}"
            )
        if null_kind is None and not picked:
            raise ProtocolViolation(4, f"no choice made for attacked argument {target!r}")
        claimed |= picked
    stray = move.arguments - claimed
    if stray:
        raise ProtocolViolation(
            4, f"arguments {sorted(stray)} answer nothing in the previous move"
        )


def _has_menu_moves(dialogue: Dialogue) -> bool:
    return bool(_attacked_previous(dialogue, dialogue.next_step))


def apply_move(dialogue: Dialogue, move: Move) -> Dialogue:
    """Validate and append a move, handling both termination rules.

    An empty system move terminates the dialogue (condition 8a). When a
    system move leaves the user without any menu move, an explicit empty
    user move is appended and the dialogue terminates (condition 8b), which
    makes the protocol's "final step" concrete in the transcript.
    """
    if dialogue.terminated:
        raise ProtocolViolation(8, "dialogue already terminated")
    step = dialogue.next_step
    if move.step != step:
        move = replace(move, step=step)
    if move.actor is Actor.SYSTEM:
        check_system_move(dialogue, move)
        extended = replace(dialogue, moves=dialogue.moves + (move,))
        if step > 1 and not move.arguments:
            return replace(extended, status=TerminationReason.SYSTEM_STOPPED)
        if not _has_menu_moves(extended):
            marker = Move(step=step + 1, actor=Actor.USER)
            return replace(
                extended,
                moves=extended.moves + (marker,),
                status=TerminationReason.NO_USER_MOVES,
            )
        return extended
    check_user_move(dialogue, move)
    if not move.arguments and not move.nulls:
        raise ProtocolViolation(4, "user moves must answer every attacked argument")
    return replace(dialogue, moves=dialogue.moves + (move,))


def posit_moves(
    dialogue: Dialogue,
    *,
    max_move_size: int = 6,
    constrained: bool = True,
) -> list[Move]:
    """Candidate system moves at the current step, in a deterministic order.

    With ``constrained`` (the default used by strategies), candidates honor
    conditions 6 and 7 during generation and move size is capped; the raw
    definition is exponential in the option set. The empty move is included
    whenever it is legal (it terminates the dialogue).
    """
    step = dialogue.next_step
    if step % 2 == 0:
        raise ProtocolViolation(2, f"step {step} is a user turn")
    if step == 1:
        # the raw definition allows any singleton; condition 3 narrows the
        # playable first move to the goal
        if constrained:
            return [Move(step=1, actor=Actor.SYSTEM, arguments=frozenset({dialogue.graph.goal}))]
        return [
            Move(step=1, actor=Actor.SYSTEM, arguments=frozenset({a}))
            for a in sorted(dialogue.graph.nodes)
        ]
    pool = sorted(_option_union(dialogue, step))
    required = _required_counters(dialogue, step)
    initial = dialogue.graph.initial_arguments()
    cap = max(max_move_size, len(required)) if constrained else len(pool)

    candidates: list[Move] = []
    for size in range(0, min(cap, len(pool)) + 1):
        for combo in itertools.combinations(pool, size):
            chosen = frozenset(combo)
            if constrained:
                if any(not (chosen & opts) for opts in required.values()):
                    continue
                if step >= 5 and len(chosen - initial) > 2:
                    continue
                if size == 0 and required:
                    continue
            candidates.append(Move(step=step, actor=Actor.SYSTEM, arguments=chosen))
    if not candidates and required:
        # Cover move of last resort: one option per argument that must be
        # countered, ignoring the size cap.
        cover = frozenset(min(opts) for opts in required.values())
        candidates.append(Move(step=step, actor=Actor.SYSTEM, arguments=cover))
    return candidates


def _menu_picks(
    dialogue: Dialogue, target: str, step: int
) -> Iterator[tuple[frozenset[str], tuple[str, str] | None]]:
    """All picks for one attacked argument: option subsets or a single null."""
    open_options = sorted(options(dialogue, target, step))
    for size in range(1, len(open_options) + 1):
        for combo in itertools.combinations(open_options, size):
            yield frozenset(combo), None
    yield frozenset(), (target, NULL_REJ)
    yield frozenset(), (target, NULL_ACC)


def menu_moves(dialogue: Dialogue, *, limit: int | None = 100_000) -> list[Move]:
    """All candidate user moves at the current step.

    Every attacked previous-step argument gets exactly one pick: a nonempty
    subset of its open options or one null marker. Returns [] when nothing
    in the previous move has attackers (termination condition 8b). Unions
    that would pair a null for one argument with a counterargument that also
    answers it are excluded (picks stay mutually exclusive per argument).
    """
    step = dialogue.next_step
    if step % 2 == 1:
        raise ProtocolViolation(2, f"step {step} is a system turn")
    targets = _attacked_previous(dialogue, step)
    if not targets:
        return []
    per_target = [list(_menu_picks(dialogue, t, step)) for t in targets]
    count = 1
    for picks in per_target:
        count *= len(picks)
        if limit is not None and count > limit:
            raise ValueError(f"menu move enumeration exceeds limit ({limit})")
    moves: list[Move] = []
    seen: set[tuple] = set()
    for assignment in itertools.product(*per_target):
        arguments: set[str] = set()
        nulls: set[tuple[str, str]] = set()
        for picked, null in assignment:
            arguments |= picked
            if null is not None:
                nulls.add(null)
        if any(arguments & options(dialogue, t, step) for t, _ in nulls):
            continue
        move = Move(
            step=step, actor=Actor.USER, arguments=frozenset(arguments), nulls=frozenset(nulls)
        )
        if move.key() in seen:
            continue
        seen.add(move.key())
        moves.append(move)
    return moves


def validate(dialogue: Dialogue, *, in_progress: bool = False) -> ValidationReport:
    """Check a transcript against all eight protocol conditions.

    Works on arbitrary (possibly hand-built) move sequences; engine-produced
    dialogues always pass. Violations carry the condition number. By default
    the transcript is treated as a complete dialogue record, so a final step
    that is not a termination step violates condition 8; pass ``in_progress``
    to validate a prefix of an ongoing dialogue instead (early termination is
    still flagged).
    """
    graph = dialogue.graph
    violations: list[Violation] = []

    def flag(condition: int, step: int, message: str) -> None:
        violations.append(Violation(condition, step, message))

    replay = Dialogue(graph=graph)
    for move in dialogue.moves:
        step = replay.next_step
        expected = Actor.SYSTEM if step % 2 == 1 else Actor.USER
        if move.actor is not expected:
            flag(2, step, f"expected {expected.value} at step {step}")
            break
        unknown = sorted(a for a in move.arguments if a not in graph)
        if unknown:
            flag(1, step, f"unknown arguments {unknown}")
            break
        if move.actor is Actor.SYSTEM:
            if step == 1 and move.arguments != frozenset({graph.goal}):
                flag(3, step, "first move must posit exactly the goal")
            if step == 3:
                for target in _required_counters(replay, step):
                    if not (move.arguments & graph.attackers(target)):
                        flag(6, step, f"step 3 leaves {target!r} uncountered")
            if step > 3:
                stray = sorted(move.arguments - _option_union(replay, step))
                if stray:
                    flag(5, step, f"arguments {stray} are not in the posit move set")
            if step >= 5:
                non_initial = move.arguments - graph.initial_arguments()
                if len(non_initial) > 2:
                    flag(7, step, f"{len(non_initial)} non-initial arguments")
        else:
            is_final = step == dialogue.length
            if not move.arguments and not move.nulls:
                # Only valid as the explicit 8b termination marker.
                if not is_final or _has_menu_moves(replay):
                    flag(4, step, "empty user move where menu moves exist")
            else:
                try:
                    check_user_move(replay, move)
                except ProtocolViolation as exc:
                    # A nonempty user move where no menu exists is "not a
                    # menu move" (condition 4), not a termination defect.
                    flag(4 if exc.condition == 8 else exc.condition, step, str(exc))
        replay = replace(replay, moves=replay.moves + (move,))

    # Condition 8: termination exactly at the final step. Skipped when the
    # transcript is already structurally broken (unknown arguments or bad
    # turn order make the menu computation meaningless).
    if not any(v.condition in (1, 2) for v in violations):
        for index, move in enumerate(dialogue.moves):
            step = index + 1
            is_final = step == dialogue.length
            holds_8a = move.actor is Actor.SYSTEM and step > 1 and not move.arguments
            holds_8b = False
            if move.actor is Actor.USER and not move.arguments and not move.nulls:
                prefix = Dialogue(graph=graph, moves=dialogue.moves[: step - 1])
                holds_8b = step >= 2 and not _has_menu_moves(prefix)
            if is_final:
                if not in_progress and not (holds_8a or holds_8b):
                    flag(8, step, "final step is not a termination step")
            elif holds_8a or holds_8b:
                flag(8, step, "termination condition holds before the final step")
    return ValidationReport(tuple(violations))


@dataclass(frozen=True)
class DialogueStructure:
    complete: bool
    linear: bool


def classify(dialogue: Dialogue) -> DialogueStructure:
    """Structural flags of a finished dialogue.

    Complete: every user argument is countered within the induced subgraph
    (equivalently, every leaf sits at even depth from the goal) and no
    ``rej`` null was selected. Linear: at most one argument per move and the
    induced subgraph is a single chain from the goal.
    """
    if not dialogue.terminated:
        raise ValueError("classify requires a terminated dialogue")
    induced = dialogue.induced()
    complete = True
    for move in dialogue.moves:
        if any(kind == NULL_REJ for _, kind in move.nulls):
            complete = False
        if move.actor is Actor.USER:
            for argument_id in move.arguments:
                if not induced.attackers(argument_id):
                    complete = False

    ordered: list[str] = []
    linear = True
    for move in dialogue.moves:
        if len(move.arguments) > 1:
            linear = False
        ordered.extend(sorted(move.arguments))
    if linear and ordered:
        chain_arcs = {(ordered[i + 1], ordered[i]) for i in range(len(ordered) - 1)}
        if set(induced.arcs) != chain_arcs:
            linear = False
    return DialogueStructure(complete=complete, linear=linear)


# --- transcript wire format -------------------------------------------------

def move_record(move: Move) -> dict:
    return {
        "step": move.step,
        "actor": move.actor.value,
        "arguments": sorted(move.arguments),
        "nulls": [
            {"argument": target, "kind": kind} for target, kind in sorted(move.nulls)
        ],
    }


def move_from_record(record: dict) -> Move:
    return Move(
        step=record["step"],
        actor=Actor(record["actor"]),
        arguments=frozenset(record["arguments"]),
        nulls=frozenset((n["argument"], n["kind"]) for n in record["nulls"]),
    )


def transcript(dialogue: Dialogue, *, graph_label: str = "") -> dict:
    return {
        "v": 1,
        "graph": graph_label,
        "status": dialogue.status.value if dialogue.status else "in_progress",
        "moves": [move_record(m) for m in dialogue.moves],
    }


def dialogue_from_transcript(record: dict, graph: ArgumentGraph) -> Dialogue:
    status = None if record["status"] == "in_progress" else TerminationReason(record["status"])
    moves = tuple(move_from_record(m) for m in record["moves"])
    return Dialogue(graph=graph, moves=moves, status=status)


def canonical_json(data: object) -> str:
    """Canonical serialization used for byte-exact transcript comparison."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"))
