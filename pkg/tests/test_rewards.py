import numpy as np
import pytest

from aps.concerns import table_pref_scores
from aps.propagation import BeliefStages, dialogue_stages
from aps.rewards import (
    ConcernContext,
    concern_score,
    non_chosen_score,
    reward,
    siblings,
)

from conftest import random_dialogue, random_graph, run_moves, system, user

# pairwise scores of the worked scoring example; both orientations of the
# (C2, C3) pair are pinned to the published numbers
EXAMPLE_SCORES = {
    ("C1", "C2"): 0.25,
    ("C1", "C3"): 0.25,
    ("C2", "C3"): 0.25,
    ("C3", "C2"): 0.25,
    ("C4", "C2"): 0.25,
    ("C4", "C3"): 0.25,
}


@pytest.fixture
def example_context(layered_graph):
    return ConcernContext.from_graph(layered_graph, table_pref_scores(EXAMPLE_SCORES))


def fixed_stages(goal, value):
    return BeliefStages(
        init={goal: value}, att={goal: value}, reinst={goal: value},
        k_init={goal: 1.0}, k_reinst={goal: 1.0},
    )


class TestSiblings:
    def test_includes_co_attackers(self, scored_dialogue):
        assert siblings(scored_dialogue, "A32") == {"A31", "A32"}

    def test_single_attacker_target_is_itself(self, scored_dialogue):
        assert siblings(scored_dialogue, "A42") == {"A42"}

    def test_goal_rejected(self, scored_dialogue):
        with pytest.raises(ValueError):
            siblings(scored_dialogue, "A10")

    def test_unplayed_rejected(self, scored_dialogue):
        with pytest.raises(ValueError):
            siblings(scored_dialogue, "A31")


class TestNonChosenScore:
    def test_first_system_response(self, scored_dialogue, example_context):
        assert non_chosen_score(scored_dialogue, example_context, 1) == pytest.approx(
            0.25, abs=1e-12
        )

    def test_second_system_response(self, scored_dialogue, example_context):
        assert non_chosen_score(scored_dialogue, example_context, 2) == pytest.approx(
            0.25, abs=1e-12
        )

    def test_zero_when_all_siblings_chosen(self, example_context, layered_graph):
        dialogue = run_moves(
            layered_graph,
            [system(1, "A10"), user(2, "A21", "A22"), system(3, "A31", "A32", "A33", "A34")],
        )
        assert non_chosen_score(dialogue, example_context, 1) == 0.0

    def test_out_of_range_step(self, scored_dialogue, example_context):
        with pytest.raises(ValueError):
            non_chosen_score(scored_dialogue, example_context, 3)

    def test_invariant_under_move_internal_order(self, layered_graph, example_context):
        first = run_moves(
            layered_graph, [system(1, "A10"), user(2, "A22", "A21"), system(3, "A33", "A32")]
        )
        second = run_moves(
            layered_graph, [system(1, "A10"), user(2, "A21", "A22"), system(3, "A32", "A33")]
        )
        assert non_chosen_score(first, example_context, 1) == non_chosen_score(
            second, example_context, 1
        )


class TestConcernScore:
    def test_worked_example(self, scored_dialogue, example_context):
        assert concern_score(scored_dialogue, example_context) == pytest.approx(
            0.75, abs=1e-12
        )

    def test_bare_goal_posit_neutral(self, layered_graph, example_context):
        dialogue = run_moves(
            layered_graph, [system(1, "A10"), user(2, nulls=[("A10", "acc")]), system(3)]
        )
        assert concern_score(dialogue, example_context) == 1.0

    def test_all_steps_with_empty_exsibcon(self, layered_graph, example_context):
        dialogue = run_moves(
            layered_graph,
            [system(1, "A10"), user(2, "A21", "A22"), system(3, "A31", "A32", "A33", "A34")],
        )
        assert concern_score(dialogue, example_context) == 1.0

    def test_in_unit_interval_over_random_inputs(self):
        rng = np.random.default_rng(23)
        concerns = ["K1", "K2", "K3", "K4"]
        for _ in range(150):
            graph = random_graph(rng, allow_cycles=False)
            assignment = {
                a: frozenset(
                    rng.choice(concerns, size=rng.integers(0, 3), replace=False).tolist()
                )
                for a in graph.nodes
            }
            table = {
                (a, b): float(rng.uniform(0, 1))
                for a in concerns
                for b in concerns
                if a != b
            }
            context = ConcernContext(
                assignment=assignment, pref_score=table_pref_scores(table)
            )
            dialogue = random_dialogue(graph, rng)
            score = concern_score(dialogue, context)
            assert 0.0 <= score <= 1.0


class TestReward:
    def test_worked_example_product(self, scored_dialogue, example_context):
        stages = fixed_stages("A10", 0.8)
        assert reward(scored_dialogue, example_context, stages) == pytest.approx(
            0.6, abs=1e-12
        )

    def test_zero_goal_belief_annihilates(self, scored_dialogue, example_context):
        stages = fixed_stages("A10", 0.0)
        assert reward(scored_dialogue, example_context, stages) == 0.0

    def test_perfect_scores(self, layered_graph, example_context):
        dialogue = run_moves(
            layered_graph, [system(1, "A10"), user(2, nulls=[("A10", "acc")]), system(3)]
        )
        stages = fixed_stages("A10", 1.0)
        assert reward(dialogue, example_context, stages) == 1.0

    def test_monotone_in_goal_belief(self, scored_dialogue, example_context):
        values = [
            reward(scored_dialogue, example_context, fixed_stages("A10", v))
            for v in (0.0, 0.2, 0.5, 0.9, 1.0)
        ]
        assert values == sorted(values)

    def test_requires_termination(self, layered_graph, example_context):
        dialogue = run_moves(layered_graph, [system(1, "A10")])
        with pytest.raises(ValueError):
            reward(dialogue, example_context, fixed_stages("A10", 0.5))

    def test_full_pipeline_with_propagation(self, scored_dialogue, example_context):
        init = {"A10": 0.9, "A21": 0.4, "A22": 0.3, "A32": 0.6, "A33": 0.7, "A42": 0.2, "A52": 0.8}
        stages = dialogue_stages(scored_dialogue, init)
        value = reward(scored_dialogue, example_context, stages)
        # no believed attacker of the goal: reinst(goal) stays at init
        assert value == pytest.approx(0.75 * 0.9, abs=1e-12)
