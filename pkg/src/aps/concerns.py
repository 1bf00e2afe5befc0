"""Concerns, preference rankings, and preference prediction trees.

Preferences over concern types come either from recorded population
rankings (linear orders per participant) or from per-pair binary decision
trees over a personality/demographics profile, whose leaves carry the ratio
of people preferring the pair's first concern.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

PrefScoreFn = Callable[[str, str], float]

OCEAN_FEATURES = (
    "openness",
    "conscientiousness",
    "extroversion",
    "agreeableness",
    "neuroticism",
)
TIPI_MIN, TIPI_MAX = 1.0, 7.0


@dataclass(frozen=True)
class PreferenceRanking:
    """One participant's linear order over concerns, most preferred first."""

    participant_id: str
    order: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.order)) != len(self.order):
            raise ValueError("ranking must list every concern exactly once")

    def rank(self, concern: str) -> int:
        try:
            return self.order.index(concern)
        except ValueError:
            raise KeyError(f"{concern!r} not ranked by {self.participant_id!r}") from None

    def weakly_prefers(self, c_prime: str, c: str) -> bool:
        """c is at least as preferred as c' reads rank(c) <= rank(c')."""
        return self.rank(c_prime) <= self.rank(c)


def pref_score_population(
    rankings: Sequence[PreferenceRanking], c_prime: str, c: str
) -> float:
    """Fraction of the population preferring c' at least as much as c."""
    if not rankings:
        raise ValueError("empty population")
    if c_prime == c:
        return 1.0
    hits = sum(1 for r in rankings if r.weakly_prefers(c_prime, c))
    return hits / len(rankings)


def population_pref_scores(rankings: Sequence[PreferenceRanking]) -> PrefScoreFn:
    cache: dict[tuple[str, str], float] = {}

    def score(c_prime: str, c: str) -> float:
        key = (c_prime, c)
        if key not in cache:
            cache[key] = pref_score_population(rankings, c_prime, c)
        return cache[key]

    return score


def table_pref_scores(table: Mapping[tuple[str, str], float], default: float = 0.5) -> PrefScoreFn:
    """Preference scores from an explicit pairwise table (tests, fixtures)."""

    def score(c_prime: str, c: str) -> float:
        if c_prime == c:
            return 1.0
        if (c_prime, c) in table:
            return table[(c_prime, c)]
        if (c, c_prime) in table:
            return 1.0 - table[(c, c_prime)]
        return default

    return score


@dataclass(frozen=True)
class UserProfile:
    """TIPI personality scores plus the demographics the trees split on."""

    openness: float = 4.0
    conscientiousness: float = 4.0
    extroversion: float = 4.0
    agreeableness: float = 4.0
    neuroticism: float = 4.0
    age: int = 30
    sex: str = "female"
    is_student: bool = False
    children: int = 0
    children_in_education: int = 0

    def __post_init__(self):
        for name in OCEAN_FEATURES:
            value = getattr(self, name)
            if not (TIPI_MIN <= value <= TIPI_MAX):
                raise ValueError(f"{name} = {value} outside the TIPI scale [1, 7]")

    def as_features(self) -> dict[str, float]:
        features = {name: float(getattr(self, name)) for name in OCEAN_FEATURES}
        features["age"] = float(self.age)
        features["sex_female"] = 1.0 if self.sex == "female" else 0.0
        features["is_student"] = 1.0 if self.is_student else 0.0
        features["children"] = float(self.children)
        features["children_in_education"] = float(self.children_in_education)
        return features

    @classmethod
    def from_record(cls, record: Mapping[str, object]) -> "UserProfile":
        kwargs: dict[str, object] = {}
        for name in OCEAN_FEATURES:
            if name in record:
                kwargs[name] = float(record[name])
        if "age" in record:
            kwargs["age"] = int(float(record["age"]))
        if "sex" in record:
            kwargs["sex"] = str(record["sex"])
        if "is_student" in record:
            kwargs["is_student"] = str(record["is_student"]).lower() in ("1", "true", "yes")
        for name in ("children", "children_in_education"):
            if name in record:
                kwargs[name] = int(float(record[name]))
        return cls(**kwargs)


# --- preference trees ---------------------------------------------------------

@dataclass(frozen=True)
class TreeSplit:
    feature: str
    threshold: float
    left: "TreeSplit | TreeLeaf"   # feature < threshold
    right: "TreeSplit | TreeLeaf"


@dataclass(frozen=True)
class TreeLeaf:
    ratio: float  # fraction preferring the pair's first concern

    def __post_init__(self):
        if not (0.0 <= self.ratio <= 1.0):
            raise ValueError("leaf ratio must be in [0, 1]")


@dataclass(frozen=True)
class PreferenceTree:
    """Threshold tree for one ordered concern pair (first, second).

    Leaf ratios are oriented to the first element: the value is the
    probability that ``first`` is preferred to ``second``. ``params`` keeps
    the (max_depth, min_leaf) the trainer settled on; it is not serialized.
    """

    first: str
    second: str
    root: TreeSplit | TreeLeaf
    params: tuple[int, int] | None = None

    def ratio(self, profile: UserProfile) -> float:
        features = profile.as_features()
        node = self.root
        while isinstance(node, TreeSplit):
            node = node.left if features[node.feature] < node.threshold else node.right
        return node.ratio

    def depth(self) -> int:
        def walk(node) -> int:
            if isinstance(node, TreeLeaf):
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(self.root)


class PreferenceTreeBundle:
    """All pairwise trees of a corpus, indexed by ordered concern pair."""

    def __init__(self, trees: Iterable[PreferenceTree] = ()):
        self.trees: dict[tuple[str, str], PreferenceTree] = {}
        for tree in trees:
            self.trees[(tree.first, tree.second)] = tree

    def add(self, tree: PreferenceTree) -> None:
        self.trees[(tree.first, tree.second)] = tree

    def lookup(self, c_prime: str, c: str) -> tuple[PreferenceTree, bool] | None:
        """The tree covering the pair plus whether it is stored flipped."""
        if (c_prime, c) in self.trees:
            return self.trees[(c_prime, c)], False
        if (c, c_prime) in self.trees:
            return self.trees[(c, c_prime)], True
        return None

    def save(self, path: str | Path) -> None:
        def encode(node):
            if isinstance(node, TreeLeaf):
                return {"ratio": node.ratio}
            return {
                "feature": node.feature,
                "threshold": node.threshold,
                "left": encode(node.left),
                "right": encode(node.right),
            }

        data = {
            "v": 1,
            "pairs": [
                {"first": first, "second": second, "tree": encode(tree.root)}
                for (first, second), tree in sorted(self.trees.items())
            ],
        }
        Path(path).write_text(json.dumps(data, indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "PreferenceTreeBundle":
        def decode(node):
            if "ratio" in node:
                return TreeLeaf(ratio=float(node["ratio"]))
            return TreeSplit(
                feature=node["feature"],
                threshold=float(node["threshold"]),
                left=decode(node["left"]),
                right=decode(node["right"]),
            )

        data = json.loads(Path(path).read_text())
        bundle = cls()
        for pair in data["pairs"]:
            bundle.add(
                PreferenceTree(
                    first=pair["first"], second=pair["second"], root=decode(pair["tree"])
                )
            )
        return bundle


def predict_pref_score(
    bundle: PreferenceTreeBundle,
    profile: UserProfile,
    c_prime: str,
    c: str,
    *,
    fallback: PrefScoreFn | None = None,
) -> float:
    """Tree-predicted probability that c' is preferred to c.

    Missing pairs fall back to the population score when available, then to
    the neutral 0.5.
    """
    if c_prime == c:
        return 1.0
    found = bundle.lookup(c_prime, c)
    if found is None:
        return fallback(c_prime, c) if fallback is not None else 0.5
    tree, flipped = found
    ratio = tree.ratio(profile)
    return 1.0 - ratio if flipped else ratio


def tree_pref_scores(
    bundle: PreferenceTreeBundle,
    profile: UserProfile,
    *,
    fallback: PrefScoreFn | None = None,
) -> PrefScoreFn:
    def score(c_prime: str, c: str) -> float:
        return predict_pref_score(bundle, profile, c_prime, c, fallback=fallback)

    return score


# --- training -----------------------------------------------------------------

@dataclass(frozen=True)
class TreeTrainConfig:
    depth_grid: tuple[int, ...] = (1, 2, 3, 4)
    min_leaf_grid: tuple[int, ...] = (1, 2, 5, 10)
    folds: int = 5


def _split_error(labels_left: np.ndarray, labels_right: np.ndarray) -> int:
    # misclassification count under majority-vote leaves
    left_first = int(labels_left.sum())
    right_first = int(labels_right.sum())
    return min(left_first, labels_left.size - left_first) + min(
        right_first, labels_right.size - right_first
    )


def _grow(
    features: np.ndarray,
    labels: np.ndarray,
    names: Sequence[str],
    depth: int,
    max_depth: int,
    min_leaf: int,
) -> TreeSplit | TreeLeaf:
    n = labels.size
    n_first = int(labels.sum())
    if depth >= max_depth or n < 2 * min_leaf or n_first in (0, n):
        return TreeLeaf(ratio=n_first / n)
    parent_error = min(n_first, n - n_first)
    best = None  # (error, feature index, threshold)
    for j, name in enumerate(names):
        column = features[:, j]
        values = np.unique(column)
        if values.size < 2:
            continue
        thresholds = (values[:-1] + values[1:]) / 2.0
        for threshold in thresholds:
            mask = column < threshold
            if mask.sum() < min_leaf or (n - mask.sum()) < min_leaf:
                continue
            error = _split_error(labels[mask], labels[~mask])
            if best is None or error < best[0]:
                best = (error, j, float(threshold))
    if best is None or best[0] >= parent_error:
        return TreeLeaf(ratio=n_first / n)
    _, j, threshold = best
    mask = features[:, j] < threshold
    return TreeSplit(
        feature=names[j],
        threshold=threshold,
        left=_grow(features[mask], labels[mask], names, depth + 1, max_depth, min_leaf),
        right=_grow(features[~mask], labels[~mask], names, depth + 1, max_depth, min_leaf),
    )


def _hamming_loss(tree: PreferenceTree, profiles, labels) -> float:
    wrong = 0
    for profile, label in zip(profiles, labels):
        predicted = tree.ratio(profile) >= 0.5
        wrong += int(predicted != bool(label))
    return wrong / len(labels)


def train_preference_tree(
    pair: tuple[str, str],
    rows: Sequence[tuple[UserProfile, str]],
    config: TreeTrainConfig = TreeTrainConfig(),
    rng: np.random.Generator | None = None,
) -> PreferenceTree:
    """Fit the tree for one ordered pair from (profile, preferred) rows.

    Greedy binary threshold splits minimize misclassification; tree depth
    and minimum leaf size are chosen by cross-validated Hamming loss over
    the configured grid, ties preferring shallower and coarser trees.
    Degenerate single-class data yields a single leaf.
    """
    first, second = pair
    if not rows:
        raise ValueError("training data must be nonempty")
    for _, preferred in rows:
        if preferred not in (first, second):
            raise ValueError(f"label {preferred!r} is not in the pair {pair}")
    profiles = [profile for profile, _ in rows]
    names = sorted(profiles[0].as_features())
    features = np.array([[p.as_features()[f] for f in names] for p in profiles])
    labels = np.array([1 if preferred == first else 0 for _, preferred in rows])

    def fit(depth: int, min_leaf: int, rows_mask: np.ndarray) -> PreferenceTree:
        return PreferenceTree(
            first=first,
            second=second,
            root=_grow(features[rows_mask], labels[rows_mask], names, 0, depth, min_leaf),
            params=(depth, min_leaf),
        )

    n = len(rows)
    folds = min(config.folds, n)
    if folds >= 2 and labels.min() != labels.max():
        rng = rng or np.random.default_rng(0)
        permutation = rng.permutation(n)
        fold_of = np.empty(n, dtype=int)
        for index, row in enumerate(permutation):
            fold_of[row] = index % folds
        best_key = None
        best_params = (config.depth_grid[0], config.min_leaf_grid[0])
        for depth in config.depth_grid:
            for min_leaf in config.min_leaf_grid:
                losses = []
                for fold in range(folds):
                    train_mask = fold_of != fold
                    if labels[train_mask].size == 0:
                        continue
                    tree = fit(depth, min_leaf, train_mask)
                    held = np.nonzero(~train_mask)[0]
                    losses.append(
                        _hamming_loss(
                            tree, [profiles[i] for i in held], labels[held]
                        )
                    )
                mean_loss = float(np.mean(losses))
                key = (round(mean_loss, 12), depth, -min_leaf)
                if best_key is None or key < best_key:
                    best_key = key
                    best_params = (depth, min_leaf)
        depth, min_leaf = best_params
    else:
        depth, min_leaf = max(config.depth_grid), min(config.min_leaf_grid)
    return fit(depth, min_leaf, np.ones(n, dtype=bool))


def train_tree_bundle(
    rankings: Sequence[PreferenceRanking],
    profiles: Mapping[str, UserProfile],
    config: TreeTrainConfig = TreeTrainConfig(),
    rng: np.random.Generator | None = None,
) -> PreferenceTreeBundle:
    """One tree per ordered concern pair, labels derived from the rankings."""
    concerns = sorted({c for r in rankings for c in r.order})
    bundle = PreferenceTreeBundle()
    for i, first in enumerate(concerns):
        for second in concerns[i + 1 :]:
            rows = [
                (profiles[r.participant_id], first if r.weakly_prefers(first, second) else second)
                for r in rankings
                if r.participant_id in profiles
            ]
            if not rows:
                continue
            bundle.add(train_preference_tree((first, second), rows, config, rng))
    return bundle


# --- files ---------------------------------------------------------------------

def load_rankings(path: str | Path) -> list[PreferenceRanking]:
    """Read a rankings CSV: participant_id, concern, rank (0 = top)."""
    rows: dict[str, list[tuple[int, str]]] = {}
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        required = {"participant_id", "concern", "rank"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns {sorted(required)}")
        for row in reader:
            rows.setdefault(row["participant_id"], []).append(
                (int(row["rank"]), row["concern"])
            )
    rankings = []
    for participant_id, entries in sorted(rows.items()):
        entries.sort()
        rankings.append(
            PreferenceRanking(
                participant_id=participant_id,
                order=tuple(concern for _, concern in entries),
            )
        )
    return rankings


def save_rankings(rankings: Sequence[PreferenceRanking], path: str | Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["participant_id", "concern", "rank"])
        for ranking in rankings:
            for rank, concern in enumerate(ranking.order):
                writer.writerow([ranking.participant_id, concern, rank])


def load_profiles(path: str | Path) -> dict[str, UserProfile]:
    """Read a profiles CSV keyed by participant_id."""
    profiles: dict[str, UserProfile] = {}
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or "participant_id" not in reader.fieldnames:
            raise ValueError(f"{path}: expected a participant_id column")
        for row in reader:
            participant_id = row.pop("participant_id")
            profiles[participant_id] = UserProfile.from_record(row)
    return profiles
