"""Batch strategy comparison on synthetic user populations.

Each trial samples one coherent user from the population model, runs a full
dialogue under the configured strategy, and scores it. Synthetic before and
after beliefs map the goal's initial and reinstated beliefs onto the -3..3
scale (a simulation convention so the analytics binning applies; the human
study collected these from participants). Trials are seeded independently
from the master seed, so arms and trials reproduce bit-exactly and in any
order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from aps.analytics import TrialRecord
from aps.concerns import UserProfile
from aps.dialogue import new_dialogue
from aps.graph import ArgumentGraph
from aps.propagation import dialogue_stages, goal_belief
from aps.rewards import ConcernContext, concern_score
from aps.strategy import (
    MctsStrategist,
    SimulatedUser,
    StrategyConfig,
    baseline_choose,
    play_dialogue,
)
from aps.usermodel import UserModel

STRATEGIES = ("advanced", "baseline")


@dataclass(frozen=True)
class SimulationPlan:
    graphs: dict[str, ArgumentGraph]
    strategies: tuple[str, ...] = STRATEGIES
    trials: int = 100
    seed: int = 0
    simulations: int = 1000
    max_move_size: int = 6
    user_withholds: bool = True
    flagged_graph: str | None = None
    profiles: tuple[UserProfile, ...] = ()

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        unknown = set(self.strategies) - set(STRATEGIES)
        if unknown:
            raise ValueError(f"unknown strategies {sorted(unknown)}")
        if not self.graphs:
            raise ValueError("at least one graph required")


@dataclass(frozen=True)
class TrialResult:
    record: TrialRecord
    reward: float
    trial: int
    seed: int


@dataclass
class SimulationReport:
    results: dict[str, list[TrialResult]] = field(default_factory=dict)

    def mean_reward(self, strategy: str) -> float:
        rewards = [r.reward for r in self.results[strategy]]
        return sum(rewards) / len(rewards)

    def mean_change(self, strategy: str) -> float:
        changes = [r.record.change for r in self.results[strategy]]
        return sum(changes) / len(changes)

    def records(self, strategy: str) -> list[TrialRecord]:
        return [r.record for r in self.results[strategy]]


def _trial_seed(master: int, arm: int, trial: int) -> int:
    return int(np.random.SeedSequence([master, arm, trial]).generate_state(1)[0])


def scaled_belief(value: float) -> float:
    """Map a unit-interval belief onto the -3..3 report scale."""
    return 6.0 * value - 3.0


def run_trial(
    graph: ArgumentGraph,
    graph_label: str,
    strategy: str,
    user_model: UserModel,
    *,
    seed: int,
    simulations: int = 1000,
    max_move_size: int = 6,
    user_withholds: bool = True,
    profile: UserProfile | None = None,
) -> tuple[TrialRecord, float]:
    """One full dialogue against one sampled user; returns record + reward."""
    rng = np.random.default_rng(seed)
    beliefs = user_model.sample_beliefs(graph, rng)
    ranking = user_model.sample_ranking(rng, profile)
    trial_user = SimulatedUser(
        beliefs=beliefs, ranking=ranking, rng=rng, withhold=user_withholds
    )
    context = ConcernContext.from_graph(graph, user_model.pref_score_fn(profile))
    if strategy == "advanced":
        config = StrategyConfig(
            simulations=simulations,
            max_move_size=max_move_size,
            seed=seed,
            user_withholds=user_withholds,
        )
        strategist = MctsStrategist(new_dialogue(graph), user_model, context, config, profile)
        choose = strategist.choose
    else:
        policy_rng = np.random.default_rng([seed, 1])
        choose = lambda d: baseline_choose(d, policy_rng, max_move_size=max_move_size)  # noqa: E731
    dialogue = play_dialogue(graph, choose, trial_user, context)
    stages = dialogue_stages(dialogue, beliefs)
    goal_value = goal_belief(stages, graph.goal)
    trial_reward = concern_score(dialogue, context) * goal_value
    before = scaled_belief(beliefs[graph.goal])
    if before == 0.0:
        before = 1e-9  # a zero before-belief is not a permitted record
    record = TrialRecord(
        dialogue=dialogue,
        strategy=strategy,
        belief_before=before,
        belief_after=scaled_belief(goal_value),
        graph_label=graph_label,
    )
    return record, trial_reward


def run_simulation(plan: SimulationPlan, user_model: UserModel) -> SimulationReport:
    """Run every arm of the plan; trials cycle through the plan's graphs."""
    report = SimulationReport()
    labels = sorted(plan.graphs)
    for arm, strategy in enumerate(plan.strategies):
        results = []
        for trial in range(plan.trials):
            label = labels[trial % len(labels)]
            profile = (
                plan.profiles[trial % len(plan.profiles)] if plan.profiles else None
            )
            seed = _trial_seed(plan.seed, arm, trial)
            record, trial_reward = run_trial(
                plan.graphs[label],
                label,
                strategy,
                user_model,
                seed=seed,
                simulations=plan.simulations,
                max_move_size=plan.max_move_size,
                user_withholds=plan.user_withholds,
                profile=profile,
            )
            results.append(
                TrialResult(record=record, reward=trial_reward, trial=trial, seed=seed)
            )
        report.results[strategy] = results
    return report


def comparison_summary(plan: SimulationPlan, report: SimulationReport) -> dict:
    arms = {}
    for strategy in plan.strategies:
        arms[strategy] = {
            "trials": plan.trials,
            "mean_reward": round(report.mean_reward(strategy), 6),
            "mean_change": round(report.mean_change(strategy), 6),
        }
    summary = {"v": 1, "seed": plan.seed, "arms": arms}
    if "advanced" in arms and "baseline" in arms and arms["baseline"]["mean_reward"] > 0:
        lift = arms["advanced"]["mean_reward"] / arms["baseline"]["mean_reward"] - 1.0
        summary["advanced_over_baseline"] = round(lift, 6)
    return summary
