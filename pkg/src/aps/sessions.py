"""Transport-free dialogue sessions.

One SessionEngine owns one dialogue: it posits the goal on creation,
translates menu selections into protocol moves, asks the configured
strategy for system replies, and tracks the before/after beliefs. The HTTP
layer and the command-line replay both drive this engine, which is what
makes a scripted wire dialogue and an engine-only trace byte-identical
under the same seed.
"""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from aps.analytics import TrialRecord
from aps.concerns import UserProfile
from aps.dialogue import (
    Actor,
    Move,
    ProtocolViolation,
    apply_move,
    menu_listing,
    new_dialogue,
    transcript,
)
from aps.graph import ArgumentGraph
from aps.rewards import ConcernContext
from aps.strategy import MctsStrategist, StrategyConfig, baseline_choose
from aps.usermodel import UserModel

STANCE_MIN, STANCE_MAX = -3.0, 3.0


class SessionError(ValueError):
    """Session-level failure with a stable machine-readable code."""

    def __init__(self, code: str, message: str, condition: int | None = None):
        super().__init__(message)
        self.code = code
        self.condition = condition


def _parse_selection(selection: Mapping) -> tuple[str, list[str] | None, str | None]:
    if "argument" not in selection:
        raise SessionError("invalid_selection", "selection missing 'argument'")
    argument = selection["argument"]
    has_counters = bool(selection.get("counterarguments"))
    null_kind = selection.get("null")
    if has_counters and null_kind:
        raise SessionError(
            "invalid_selection",
            f"selection for {argument!r} mixes counterarguments with a null option",
        )
    if not has_counters and not null_kind:
        raise SessionError(
            "invalid_selection", f"selection for {argument!r} picks nothing"
        )
    if null_kind is not None and null_kind not in ("acc", "rej"):
        raise SessionError("invalid_selection", f"unknown null kind {null_kind!r}")
    counters = list(selection.get("counterarguments") or []) if has_counters else None
    return argument, counters, null_kind


@dataclass
class EngineConfig:
    simulations: int = 1000
    max_move_size: int = 6
    exploration: float | None = None
    ttl_seconds: float = 86400.0


class SessionEngine:
    """One dialogue session: goal posit on creation, then submit/record."""

    def __init__(
        self,
        graph: ArgumentGraph,
        graph_id: str,
        user_model: UserModel,
        *,
        strategy: str = "advanced",
        stance: float = 1.0,
        profile: UserProfile | None = None,
        seed: int = 0,
        debug: bool = False,
        config: EngineConfig | None = None,
        session_id: str | None = None,
    ):
        if strategy not in ("advanced", "baseline"):
            raise SessionError("invalid_strategy", f"unknown strategy {strategy!r}")
        if not (STANCE_MIN <= stance <= STANCE_MAX) or stance == 0:
            raise SessionError(
                "invalid_value", "stance must be in [-3, 3] and nonzero"
            )
        self.session_id = session_id or uuid.uuid4().hex
        self.graph = graph
        self.graph_id = graph_id
        self.user_model = user_model
        self.strategy = strategy
        self.stance = stance
        self.profile = profile
        self.seed = seed
        self.debug = debug
        self.config = config or EngineConfig()
        self.belief_before: float | None = stance
        self.belief_after: float | None = None
        self.created_at = time.time()
        self.last_trace: list | None = None

        self.context = ConcernContext.from_graph(
            graph, user_model.pref_score_fn(profile)
        )
        strategy_config = StrategyConfig(
            simulations=self.config.simulations,
            max_move_size=self.config.max_move_size,
            seed=seed,
            **(
                {"exploration": self.config.exploration}
                if self.config.exploration is not None
                else {}
            ),
        )
        self._strategist = (
            MctsStrategist(
                new_dialogue(graph), user_model, self.context, strategy_config, profile
            )
            if strategy == "advanced"
            else None
        )
        self._baseline_rng = np.random.default_rng(seed)
        self.dialogue = apply_move(
            new_dialogue(graph),
            Move(step=1, actor=Actor.SYSTEM, arguments=frozenset({graph.goal})),
        )

    # -- views ---------------------------------------------------------------

    @property
    def terminated(self) -> bool:
        return self.dialogue.terminated

    def listings(self) -> list[dict]:
        """Menus for the pending user turn, in stable argument order."""
        if self.terminated or self.dialogue.next_step % 2 == 1:
            return []
        step = self.dialogue.next_step
        items = []
        for argument_id in sorted(self.dialogue.args_at(step - 1)):
            listed = menu_listing(self.dialogue, argument_id, step)
            if not listed:
                continue
            counters = sorted(listed - {"acc", "rej"})
            items.append(
                {
                    "argument": argument_id,
                    "text": self.graph.argument(argument_id).text,
                    "counterarguments": [
                        {"id": c, "text": self.graph.argument(c).text} for c in counters
                    ],
                    "nulls": ["rej", "acc"],
                }
            )
        return items

    def transcript(self) -> dict:
        return transcript(self.dialogue, graph_label=self.graph_id)

    def goal_text(self) -> dict:
        return {"id": self.graph.goal, "text": self.graph.argument(self.graph.goal).text}

    def trial_record(self) -> TrialRecord | None:
        if self.belief_after is None or self.belief_before is None or not self.terminated:
            return None
        return TrialRecord(
            dialogue=self.dialogue,
            strategy=self.strategy,
            belief_before=self.belief_before,
            belief_after=self.belief_after,
            graph_label=self.graph_id,
        )

    # -- actions --------------------------------------------------------------

    def submit(self, selections: Sequence[Mapping]) -> dict:
        """Apply a user menu move and compute the system's reply."""
        if self.terminated:
            raise SessionError("terminated", "the dialogue is already over")
        if self.dialogue.next_step % 2 == 1:
            raise SessionError("not_your_turn", "waiting for a system move")
        step = self.dialogue.next_step
        arguments: set[str] = set()
        nulls: set[tuple[str, str]] = set()
        seen_targets: set[str] = set()
        for selection in selections:
            target, counters, null_kind = _parse_selection(selection)
            if target in seen_targets:
                raise SessionError(
                    "invalid_selection", f"two selections for {target!r}"
                )
            seen_targets.add(target)
            if null_kind is not None:
                nulls.add((target, null_kind))
            else:
                arguments.update(counters)
        move = Move(
            step=step,
            actor=Actor.USER,
            arguments=frozenset(arguments),
            nulls=frozenset(nulls),
        )
        try:
            self.dialogue = apply_move(self.dialogue, move)
        except ProtocolViolation as exc:
            raise SessionError("protocol_violation", str(exc), exc.condition) from None

        system_move = self._choose_system_move()
        self.dialogue = apply_move(self.dialogue, system_move)
        return {
            "system_move": {
                "step": system_move.step,
                "arguments": sorted(system_move.arguments),
            },
            "listings": self.listings(),
            "terminated": self.terminated,
            "status": self.dialogue.status.value if self.dialogue.status else "in_progress",
            "trace": self.last_trace if self.debug else None,
        }

    def _choose_system_move(self) -> Move:
        if self._strategist is not None:
            move = self._strategist.choose(self.dialogue)
            self.last_trace = [
                {
                    "arguments": sorted(stat.move.arguments),
                    "visits": stat.visits,
                    "mean_reward": round(stat.mean_reward, 6),
                }
                for stat in self._strategist.trace()
            ]
            return move
        return baseline_choose(
            self.dialogue, self._baseline_rng, max_move_size=self.config.max_move_size
        )

    def record_belief(self, phase: str, value: float) -> None:
        if not (STANCE_MIN <= value <= STANCE_MAX):
            raise SessionError("invalid_value", f"belief {value} outside [-3, 3]")
        if phase == "before":
            if value == 0:
                raise SessionError("invalid_value", "a zero before-belief is not permitted")
            if self.dialogue.length > 1:
                raise SessionError(
                    "phase_order", "the before-belief is fixed once the dialogue starts"
                )
            self.belief_before = value
        elif phase == "after":
            if not self.terminated:
                raise SessionError(
                    "phase_order", "the after-belief is recorded once the dialogue ends"
                )
            self.belief_after = value
        else:
            raise SessionError("invalid_value", f"unknown phase {phase!r}")
