"""Population user model: belief mixtures plus a concern preference source.

The model answers two needs: drawing one coherent imagined user (beliefs
for every argument plus a preference ranking) for opponent simulation, and
providing the pairwise preference score function the reward uses. When a
tree bundle and a profile are available, preferences are predicted from the
profile; otherwise recorded population rankings are used directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from aps.beliefs import BetaComponent, BetaMixture, sample_belief
from aps.concerns import (
    PrefScoreFn,
    PreferenceRanking,
    PreferenceTreeBundle,
    UserProfile,
    population_pref_scores,
    predict_pref_score,
    tree_pref_scores,
)
from aps.graph import ArgumentGraph

UNIFORM_BELIEF = BetaMixture.single(BetaComponent(1.0, 1.0))


@dataclass
class UserModel:
    """Per-argument belief mixtures and a source of concern preferences."""

    mixtures: dict[str, BetaMixture] = field(default_factory=dict)
    rankings: list[PreferenceRanking] = field(default_factory=list)
    trees: PreferenceTreeBundle | None = None
    concern_vocabulary: tuple[str, ...] = ()
    default_mixture: BetaMixture = UNIFORM_BELIEF

    def mixture_for(self, argument_id: str) -> BetaMixture:
        return self.mixtures.get(argument_id, self.default_mixture)

    def sample_beliefs(self, graph: ArgumentGraph, rng: np.random.Generator) -> dict[str, float]:
        """One coherent belief draw for every argument in the graph."""
        return {a: sample_belief(self.mixture_for(a), rng) for a in sorted(graph.nodes)}

    def pref_score_fn(self, profile: UserProfile | None = None) -> PrefScoreFn:
        population = population_pref_scores(self.rankings) if self.rankings else None
        if self.trees is not None and profile is not None:
            if population is not None:
                return tree_pref_scores(self.trees, profile, fallback=population)
            return tree_pref_scores(self.trees, profile)
        if population is not None:
            return population
        return lambda c_prime, c: 1.0 if c_prime == c else 0.5

    def sample_ranking(
        self, rng: np.random.Generator, profile: UserProfile | None = None
    ) -> PreferenceRanking:
        """Draw a preference ranking for one imagined user.

        Recorded rankings are drawn uniformly. Without any, a ranking is
        synthesized from tree-predicted pairwise ratios by weighted
        sequential sampling: each position picks a remaining concern with
        probability proportional to how strongly it beats the rest.
        """
        if self.rankings:
            return self.rankings[int(rng.integers(0, len(self.rankings)))]
        vocabulary = list(self.concern_vocabulary)
        if not vocabulary:
            return PreferenceRanking(participant_id="synthetic", order=())
        if self.trees is None or profile is None:
            order = [vocabulary[i] for i in rng.permutation(len(vocabulary))]
            return PreferenceRanking(participant_id="synthetic", order=tuple(order))
        remaining = sorted(vocabulary)
        order: list[str] = []
        while remaining:
            weights = []
            for c in remaining:
                weight = 1.0
                for other in remaining:
                    if other != c:
                        weight *= predict_pref_score(self.trees, profile, c, other)
                weights.append(weight)
            total = sum(weights)
            if total <= 0:
                probabilities = [1.0 / len(remaining)] * len(remaining)
            else:
                probabilities = [w / total for w in weights]
            index = int(rng.choice(len(remaining), p=probabilities))
            order.append(remaining.pop(index))
        return PreferenceRanking(participant_id="synthetic", order=tuple(order))

    @classmethod
    def fixed_beliefs(
        cls,
        beliefs: dict[str, float],
        ranking_order: tuple[str, ...] = (),
        rankings: list[PreferenceRanking] | None = None,
    ) -> "UserModel":
        """Point-mass model for scripted opponents and deterministic tests."""
        model_rankings = rankings or (
            [PreferenceRanking(participant_id="fixed", order=ranking_order)]
            if ranking_order
            else []
        )
        return cls(
            mixtures={a: BetaMixture.point(v) for a, v in beliefs.items()},
            rankings=model_rankings,
        )
