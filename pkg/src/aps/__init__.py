"""Automated persuasion system engine.

Conducts asymmetric argumentation dialogues against a user, choosing
counterarguments by Monte Carlo Tree Search over a user model that combines
beta-mixture beliefs with concern preferences. Includes a simulation harness
comparing the search strategy against a random baseline.
"""

from aps.graph import Argument, ArgumentGraph, GraphFormatError, load_graph
from aps.dialogue import (
    Actor,
    Dialogue,
    Move,
    ProtocolViolation,
    TerminationReason,
)

__all__ = [
    "Actor",
    "Argument",
    "ArgumentGraph",
    "Dialogue",
    "GraphFormatError",
    "Move",
    "ProtocolViolation",
    "TerminationReason",
    "load_graph",
]
