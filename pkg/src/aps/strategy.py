"""Dialogue strategies: the tree-search strategist and the random baseline.

The strategist runs Monte Carlo Tree Search over decision nodes (system
turns, UCB1 selection) and chance nodes (user turns, resolved by sampling a
simulated user per rollout). Terminal rewards combine the concern score
with the reinstated goal belief under the rollout user's sampled beliefs.
Single-threaded and bit-reproducible under a fixed seed; the search tree is
re-rooted as the real dialogue advances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from aps.concerns import PreferenceRanking
from aps.dialogue import (
    Actor,
    Dialogue,
    Move,
    apply_move,
    new_dialogue,
    options,
    posit_moves,
)
from aps.propagation import dialogue_stages
from aps.rewards import ConcernContext, reward
from aps.usermodel import UserModel


@dataclass(frozen=True)
class StrategyConfig:
    simulations: int = 1000
    exploration: float = math.sqrt(2.0)
    max_move_size: int = 6
    seed: int | None = None
    # imagined opponents may withhold believed counterarguments; turning
    # this off makes the simulated user deterministic given its beliefs
    user_withholds: bool = True

    def __post_init__(self):
        if self.simulations < 1:
            raise ValueError("simulations must be >= 1")


@dataclass
class SimulatedUser:
    """One imagined opponent: coherent belief draws plus a ranking.

    ``withhold`` enables the random filtering of believed counterarguments;
    turning it off yields a deterministic opponent that always plays
    everything it believes (used by optimality tests and scripted trials).
    """

    beliefs: dict[str, float]
    ranking: PreferenceRanking
    rng: np.random.Generator
    withhold: bool = True

    def belief(self, argument_id: str) -> float:
        return self.beliefs.get(argument_id, 0.5)


def _rank_of(ranking: PreferenceRanking, concern: str) -> int:
    # unranked concerns sort after everything the user did rank
    try:
        return ranking.order.index(concern)
    except ValueError:
        return len(ranking.order)


def _candidate_score(
    candidate: str,
    target: str,
    user: SimulatedUser,
    context: ConcernContext,
    graph,
) -> float:
    """Belief-weighted preference score that orders believed counters.

    Counts sibling concerns the candidate's own concerns weakly dominate,
    normalized by the sibling concern count; bare belief when the target
    has no sibling concerns.
    """
    belief = user.belief(candidate)
    sibling_concerns: set[str] = set()
    for sibling in graph.attackers(target):
        sibling_concerns |= context.concerns_of(sibling)
    if not sibling_concerns:
        return belief
    dominated = 0
    for c in context.concerns_of(candidate):
        for c_prime in sibling_concerns:
            if _rank_of(user.ranking, c) <= _rank_of(user.ranking, c_prime):
                dominated += 1
    return belief * dominated / len(sibling_concerns)


def simulate_user_move(
    dialogue: Dialogue, user: SimulatedUser, context: ConcernContext
) -> Move:
    """Sample, order, and filter a user response per attacked argument.

    Per attacked system argument: keep the menu options the user believes
    (draw above 0.5), order them by the belief-preference score, then keep
    a random-length prefix (the user may withhold arguments). An argument
    left with nothing gets the agreeing null when nothing was believed and
    the rejecting null when believed counters were withheld.
    """
    step = dialogue.next_step
    if step % 2 == 1:
        raise ValueError("user moves happen on even steps")
    graph = dialogue.graph
    targets = sorted(a for a in dialogue.args_at(step - 1) if graph.attackers(a))
    if not targets:
        raise ValueError("no menu to answer")
    arguments: set[str] = set()
    nulls: set[tuple[str, str]] = set()
    for target in targets:
        menu = sorted(options(dialogue, target, step))
        believed = [b for b in menu if user.belief(b) > 0.5]
        believed.sort(key=lambda b: (-_candidate_score(b, target, user, context, graph), b))
        if user.withhold:
            keep = int(user.rng.integers(0, len(believed) + 1))
        else:
            keep = len(believed)
        kept = believed[:keep]
        if kept:
            arguments.update(kept)
        elif believed:
            nulls.add((target, "rej"))
        else:
            nulls.add((target, "acc"))
    nulls = {
        (t, k)
        for t, k in nulls
        if not (arguments & options(dialogue, t, step))
    }
    return Move(step=step, actor=Actor.USER, arguments=frozenset(arguments), nulls=frozenset(nulls))


class SearchNode:
    """One dialogue state in the search tree."""

    __slots__ = ("children", "moves", "untried", "visits", "total_reward")

    def __init__(self):
        self.children: dict[tuple, SearchNode] = {}
        self.moves: dict[tuple, Move] = {}
        self.untried: list[Move] | None = None
        self.visits = 0
        self.total_reward = 0.0

    @property
    def mean_reward(self) -> float:
        return self.total_reward / self.visits if self.visits else 0.0


def ucb1_select(node: SearchNode, exploration: float) -> tuple:
    """Key of the child maximizing mean reward plus the exploration bonus.

    Unvisited children win immediately, in insertion order; ties resolve to
    the earliest child.
    """
    if not node.children:
        raise ValueError("node has no children")
    log_parent = math.log(max(node.visits, 1))
    best_key, best_value = None, -math.inf
    for key, child in node.children.items():
        if child.visits == 0:
            return key
        value = child.mean_reward + exploration * math.sqrt(log_parent / child.visits)
        if value > best_value:
            best_key, best_value = key, value
    return best_key


@dataclass(frozen=True)
class CandidateStat:
    move: Move
    visits: int
    mean_reward: float


class MctsStrategist:
    """Search strategist for one dialogue, reusable across real moves.

    ``choose`` runs the configured number of simulations from the current
    root and returns the child move with the highest mean reward; feeding
    the applied moves back through ``observe`` moves the root down so later
    searches keep the relevant subtree's statistics.
    """

    def __init__(
        self,
        dialogue: Dialogue,
        user_model: UserModel,
        context: ConcernContext,
        config: StrategyConfig = StrategyConfig(),
        profile=None,
    ):
        self.dialogue = dialogue
        self.user_model = user_model
        self.context = context
        self.config = config
        self.profile = profile
        self.rng = np.random.default_rng(config.seed)
        self.root = SearchNode()

    # -- public API -------------------------------------------------------

    def choose(self, dialogue: Dialogue | None = None) -> Move:
        """Best system move at the current state after a fresh search pass."""
        if dialogue is not None and dialogue.moves != self.dialogue.moves:
            self._resync(dialogue)
        if self.dialogue.terminated:
            raise ValueError("dialogue already terminated")
        if self.dialogue.next_step % 2 == 0:
            raise ValueError("not a system turn")
        for _ in range(self.config.simulations):
            self._simulate_once()
        best_key, best_mean = None, -math.inf
        for key, child in self.root.children.items():
            if child.visits and child.mean_reward > best_mean:
                best_key, best_mean = key, child.mean_reward
        if best_key is None:
            return Move(step=self.dialogue.next_step, actor=Actor.SYSTEM)
        return self.root.moves[best_key]

    def observe(self, move: Move) -> None:
        """Advance the real dialogue and re-root the retained subtree."""
        key = move.key()
        self.root = self.root.children.get(key) or SearchNode()
        self.dialogue = apply_move(self.dialogue, move)

    def trace(self) -> list[CandidateStat]:
        """Root statistics for debugging panels and regression snapshots."""
        return [
            CandidateStat(
                move=self.root.moves[key], visits=child.visits, mean_reward=child.mean_reward
            )
            for key, child in self.root.children.items()
        ]

    # -- internals ----------------------------------------------------------

    def _resync(self, dialogue: Dialogue) -> None:
        """Move the root down along the extra observed moves when possible."""
        extends = (
            dialogue.length >= self.dialogue.length
            and dialogue.moves[: self.dialogue.length] == self.dialogue.moves
        )
        if extends:
            for move in dialogue.moves[self.dialogue.length :]:
                self.root = self.root.children.get(move.key()) or SearchNode()
        else:
            self.root = SearchNode()
        self.dialogue = dialogue

    def _sample_user(self) -> SimulatedUser:
        beliefs = self.user_model.sample_beliefs(self.dialogue.graph, self.rng)
        ranking = self.user_model.sample_ranking(self.rng, self.profile)
        return SimulatedUser(
            beliefs=beliefs,
            ranking=ranking,
            rng=self.rng,
            withhold=self.config.user_withholds,
        )

    def _legal_moves(self, dialogue: Dialogue) -> list[Move]:
        return posit_moves(dialogue, max_move_size=self.config.max_move_size)

    def _simulate_once(self) -> None:
        user = self._sample_user()
        path = [self.root]
        node = self.root
        state = self.dialogue
        while not state.terminated:
            if state.next_step % 2 == 1:  # decision
                if node.untried is None:
                    node.untried = self._legal_moves(state)
                if node.untried:
                    move = node.untried.pop(0)
                    state = apply_move(state, move)
                    child = SearchNode()
                    node.children[move.key()] = child
                    node.moves[move.key()] = move
                    node = child
                    path.append(node)
                    break
                key = ucb1_select(node, self.config.exploration)
                state = apply_move(state, node.moves[key])
                node = node.children[key]
                path.append(node)
            else:  # chance: resolved by the simulated user
                move = simulate_user_move(state, user, self.context)
                state = apply_move(state, move)
                key = move.key()
                child = node.children.get(key)
                if child is None:
                    child = SearchNode()
                    node.children[key] = child
                    node.moves[key] = move
                node = child
                path.append(node)
        state = self._rollout(state, user)
        value = self._terminal_reward(state, user)
        for visited in path:
            visited.visits += 1
            visited.total_reward += value

    def _rollout(self, state: Dialogue, user: SimulatedUser) -> Dialogue:
        while not state.terminated:
            if state.next_step % 2 == 1:
                candidates = self._legal_moves(state)
                move = candidates[int(self.rng.integers(0, len(candidates)))]
            else:
                move = simulate_user_move(state, user, self.context)
            state = apply_move(state, move)
        return state

    def _terminal_reward(self, state: Dialogue, user: SimulatedUser) -> float:
        stages = dialogue_stages(state, user.beliefs)
        return reward(state, self.context, stages)


def choose_move(
    dialogue: Dialogue,
    user_model: UserModel,
    context: ConcernContext,
    config: StrategyConfig = StrategyConfig(),
    profile=None,
) -> Move:
    """One-shot system move choice (a fresh strategist per call)."""
    return MctsStrategist(dialogue, user_model, context, config, profile).choose()


def baseline_choose(
    dialogue: Dialogue, rng: np.random.Generator, *, max_move_size: int = 6
) -> Move:
    """Uniform random draw among moves countering the previous user move.

    Falls back to the terminating empty move when no counter exists.
    """
    if dialogue.terminated:
        raise ValueError("dialogue already terminated")
    if dialogue.next_step % 2 == 0:
        raise ValueError("not a system turn")
    candidates = [
        m for m in posit_moves(dialogue, max_move_size=max_move_size) if m.arguments
    ]
    if not candidates:
        return Move(step=dialogue.next_step, actor=Actor.SYSTEM)
    return candidates[int(rng.integers(0, len(candidates)))]


def play_dialogue(
    graph,
    choose_system_move,
    user: SimulatedUser,
    context: ConcernContext,
) -> Dialogue:
    """Run one full dialogue: a system policy against a simulated user."""
    dialogue = apply_move(
        new_dialogue(graph), Move(step=1, actor=Actor.SYSTEM, arguments=frozenset({graph.goal}))
    )
    while not dialogue.terminated:
        if dialogue.next_step % 2 == 1:
            move = choose_system_move(dialogue)
        else:
            move = simulate_user_move(dialogue, user, context)
        dialogue = apply_move(dialogue, move)
    return dialogue
