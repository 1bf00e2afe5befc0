import numpy as np
import pytest

from aps.dialogue import (
    Actor,
    Dialogue,
    Move,
    apply_move,
    menu_moves,
    new_dialogue,
    options,
    posit_moves,
)
from aps.graph import Argument, ArgumentGraph


def make_graph(arcs, goal, concerns=None, extra_nodes=()):
    """Small-graph builder: nodes inferred from arcs plus extras."""
    concerns = concerns or {}
    ids = {goal, *extra_nodes}
    for attacker, attackee in arcs:
        ids.add(attacker)
        ids.add(attackee)
    nodes = [
        Argument(id=i, text=f"argument {i}", concerns=frozenset(concerns.get(i, ())))
        for i in sorted(ids)
    ]
    return ArgumentGraph(nodes, arcs, goal)


@pytest.fixture
def chain_graph():
    # A4 -> A3 -> A2 -> A1, goal A1.
    return make_graph([("A2", "A1"), ("A3", "A2"), ("A4", "A3")], "A1")


@pytest.fixture
def mutual_graph():
    # A1 and A2 attack each other; A3 attacks A2.
    return make_graph([("A1", "A2"), ("A2", "A1"), ("A3", "A2")], "A1")


CONCERN_TAGS = {
    "A31": ["C1"],
    "A32": ["C2"],
    "A33": ["C3"],
    "A34": ["C4"],
    "A52": ["C2"],
    "A53": ["C3"],
}

LAYERED_ARCS = [
    ("A21", "A10"),
    ("A22", "A10"),
    ("A31", "A21"),
    ("A32", "A21"),
    ("A33", "A22"),
    ("A34", "A22"),
    ("A42", "A32"),
    ("A52", "A42"),
    ("A53", "A42"),
]


@pytest.fixture
def layered_graph():
    """Three-layer graph with concern tags on the leaf counterarguments."""
    return make_graph(LAYERED_ARCS, "A10", concerns=CONCERN_TAGS)


def system(step, *args):
    return Move(step=step, actor=Actor.SYSTEM, arguments=frozenset(args))


def user(step, *args, nulls=()):
    return Move(
        step=step, actor=Actor.USER, arguments=frozenset(args), nulls=frozenset(nulls)
    )


def run_moves(graph, moves):
    dialogue = new_dialogue(graph)
    for move in moves:
        dialogue = apply_move(dialogue, move)
    return dialogue


@pytest.fixture
def scored_dialogue(layered_graph):
    """Five-step dialogue over the layered graph used by the scoring tests."""
    return run_moves(
        layered_graph,
        [
            system(1, "A10"),
            user(2, "A21", "A22"),
            system(3, "A32", "A33"),
            user(4, "A42"),
            system(5, "A52"),
        ],
    )


def random_graph(rng, max_nodes=8, arc_prob=0.45, allow_cycles=False):
    """Random digraph with node '0' as goal; DAG unless allow_cycles."""
    n = int(rng.integers(3, max_nodes + 1))
    ids = [str(i) for i in range(n)]
    arcs = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if not allow_cycles and j > i:
                continue
            if rng.random() < arc_prob:
                arcs.append((ids[i], ids[j]))
    nodes = [Argument(id=i) for i in ids]
    return ArgumentGraph(nodes, arcs, "0")


def random_user_move(dialogue, rng):
    """A random legal menu move, built per attacked argument."""
    step = dialogue.next_step
    targets = sorted(
        a for a in dialogue.args_at(step - 1) if dialogue.graph.attackers(a)
    )
    if not targets:
        return None
    arguments, nulls = set(), set()
    for target in targets:
        open_options = sorted(options(dialogue, target, step))
        roll = rng.random()
        if not open_options or roll < 0.25:
            kind = "acc" if rng.random() < 0.5 else "rej"
            nulls.add((target, kind))
        else:
            count = int(rng.integers(1, len(open_options) + 1))
            picked = rng.choice(open_options, size=count, replace=False)
            arguments.update(picked.tolist())
    # Shared counterarguments already answer a target; its null must go.
    nulls = {
        (t, k) for t, k in nulls if not (arguments & set(options(dialogue, t, step)))
    }
    if not arguments and not nulls:
        nulls = {(targets[0], "acc")}
    return user(step, *arguments, nulls=nulls)


def random_dialogue(graph, rng, max_move_size=4):
    """Roll a full dialogue to termination with random legal moves."""
    dialogue = new_dialogue(graph)
    dialogue = apply_move(dialogue, system(1, graph.goal))
    while not dialogue.terminated:
        if dialogue.next_step % 2 == 1:
            candidates = posit_moves(dialogue, max_move_size=max_move_size)
            move = candidates[int(rng.integers(0, len(candidates)))]
        else:
            move = random_user_move(dialogue, rng)
            assert move is not None, "user turn reached with no menu"
        dialogue = apply_move(dialogue, move)
    return dialogue


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for name, status, seconds in RESULTS:
            terminalreporter.write_line(f"[{status}] {name} ({seconds:.2f}s)")
