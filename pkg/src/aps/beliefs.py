"""Belief representation: beta components, mixtures, fitting, and selection.

One mixture models the population distribution of belief in one argument.
Fitting is hard-assignment EM with a method-of-moments maximization step;
the component count is chosen by the normalized entropy criterion.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import betaln, logsumexp
from scipy.stats import beta as beta_dist

EPSILON = 1e-6
MAX_EM_ITERATIONS = 200
DEFAULT_RESTARTS = 8


class EstimationError(ValueError):
    """Moment estimation infeasible for the given samples."""


@dataclass(frozen=True)
class BetaComponent:
    """One beta distribution with shape parameters alpha, beta > 0."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("beta shape parameters must be positive")

    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    def variance(self) -> float:
        total = self.alpha + self.beta
        return self.alpha * self.beta / (total * total * (total + 1))


@dataclass(frozen=True)
class BetaMixture:
    """Weighted sum of beta components; weights sum to one."""

    components: tuple[BetaComponent, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.components) != len(self.weights) or not self.components:
            raise ValueError("components and weights must align and be nonempty")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")

    @classmethod
    def single(cls, component: BetaComponent) -> "BetaMixture":
        return cls(components=(component,), weights=(1.0,))

    @classmethod
    def point(cls, value: float, concentration: float = 1e6) -> "BetaMixture":
        """Near-degenerate mixture used for scripted or fixed-belief users."""
        value = min(max(value, EPSILON), 1 - EPSILON)
        return cls.single(
            BetaComponent(alpha=value * concentration, beta=(1 - value) * concentration)
        )


def beta_pdf(component: BetaComponent, x) -> float | np.ndarray:
    """Density of one beta component; +inf at endpoints with shape < 1."""
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0) | (arr > 1)):
        raise ValueError("belief values live in [0, 1]")
    result = beta_dist.pdf(arr, component.alpha, component.beta)
    return float(result) if np.isscalar(x) else result


def mixture_pdf(mixture: BetaMixture, x) -> float | np.ndarray:
    """Weighted sum of component densities."""
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0) | (arr > 1)):
        raise ValueError("belief values live in [0, 1]")
    total = sum(
        w * beta_dist.pdf(arr, c.alpha, c.beta)
        for c, w in zip(mixture.components, mixture.weights)
    )
    return float(total) if np.isscalar(x) else total


def mixture_cdf(mixture: BetaMixture, x) -> float | np.ndarray:
    arr = np.asarray(x, dtype=float)
    total = sum(
        w * beta_dist.cdf(arr, c.alpha, c.beta)
        for c, w in zip(mixture.components, mixture.weights)
    )
    return float(total) if np.isscalar(x) else total


def sample_belief(mixture: BetaMixture, rng: np.random.Generator) -> float:
    """Draw one belief: pick a component by weight, then a beta variate."""
    index = int(rng.choice(len(mixture.weights), p=np.asarray(mixture.weights)))
    component = mixture.components[index]
    return float(rng.beta(component.alpha, component.beta))


def moments_estimate(samples: Sequence[float]) -> BetaComponent:
    """Method-of-moments estimate from samples in [0, 1].

    Uses the population variance. Requires 0 < variance < mean(1 - mean).
    """
    arr = np.asarray(samples, dtype=float)
    if arr.size < 2:
        raise EstimationError("at least two samples required")
    mean = float(arr.mean())
    variance = float((arr * arr).mean() - mean * mean)
    if variance <= 0:
        raise EstimationError("sample variance must be positive")
    if variance >= mean * (1 - mean):
        raise EstimationError("sample variance too large for a beta fit")
    scale = mean * (1 - mean) / variance - 1
    return BetaComponent(alpha=mean * scale, beta=(1 - mean) * scale)


# --- hard-assignment EM ------------------------------------------------------

def _log_density_matrix(x: np.ndarray, alphas: np.ndarray, betas: np.ndarray) -> np.ndarray:
    """(n, C) matrix of component log densities."""
    xs = x[:, None]
    return (
        (alphas - 1) * np.log(xs)
        + (betas - 1) * np.log1p(-xs)
        - betaln(alphas, betas)
    )


@dataclass(frozen=True)
class MixtureFit:
    """Result of one EM fit: model, hard assignment, and likelihood trace."""

    mixture: BetaMixture
    assignment: np.ndarray
    log_likelihood: float
    trace: tuple[float, ...]


def _initial_assignment(
    n: int, n_components: int, restart: int, order: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    if restart == 0:
        # contiguous quantile blocks of the sorted samples
        assignment = np.empty(n, dtype=int)
        for c, block in enumerate(np.array_split(order, n_components)):
            assignment[block] = c
        return assignment
    return rng.integers(0, n_components, size=n)


def _reseed_component(
    assignment: np.ndarray,
    component: int,
    x: np.ndarray,
    log_density: np.ndarray | None,
) -> None:
    """Give a collapsed component the two globally worst-fit samples."""
    if log_density is not None:
        badness = -log_density.max(axis=1)
    else:
        badness = np.abs(x - x.mean())
    # never steal from a component that would collapse in turn
    order = np.argsort(-badness)
    taken = 0
    for index in order:
        donor = assignment[index]
        if donor != component and np.count_nonzero(assignment == donor) > 2:
            assignment[index] = component
            taken += 1
            if taken == 2:
                return
    raise EstimationError("not enough samples to populate every component")


def fit_mixture_em(
    samples: Sequence[float],
    n_components: int,
    rng: np.random.Generator,
    *,
    max_iters: int = MAX_EM_ITERATIONS,
    restarts: int = DEFAULT_RESTARTS,
) -> MixtureFit:
    """Fit a beta mixture by hard EM with moments-based maximization.

    Each iteration re-estimates every component from its assigned samples,
    then reassigns each sample to its highest-density component; weights are
    assignment fractions. The best of ``restarts`` initializations by
    completed-data log-likelihood wins. Iteration stops on a stable
    assignment, on ``max_iters``, or as soon as an iteration would lower the
    completed-data log-likelihood (the moments step is an approximation of
    the maximizer, so ascent is enforced rather than assumed).
    """
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    x = np.clip(np.asarray(samples, dtype=float), EPSILON, 1 - EPSILON)
    n = x.size
    if n < 2 * n_components:
        raise EstimationError(f"{n} samples cannot populate {n_components} components")
    order = np.argsort(x)

    best: MixtureFit | None = None
    for restart in range(max(1, restarts)):
        assignment = _initial_assignment(n, n_components, restart, order, rng)
        log_density: np.ndarray | None = None
        previous_ll = -np.inf
        trace: list[float] = []
        snapshot: tuple | None = None
        for _ in range(max_iters):
            alphas = np.empty(n_components)
            betas = np.empty(n_components)
            try:
                for c in range(n_components):
                    while True:
                        members = x[assignment == c]
                        try:
                            estimate = moments_estimate(members)
                            break
                        except EstimationError:
                            _reseed_component(assignment, c, x, log_density)
                    alphas[c], betas[c] = estimate.alpha, estimate.beta
            except EstimationError:
                break  # this restart cannot populate every component
            log_density = _log_density_matrix(x, alphas, betas)
            new_assignment = log_density.argmax(axis=1)
            counts = np.bincount(new_assignment, minlength=n_components)
            weights = counts / n
            with np.errstate(divide="ignore"):
                log_weights = np.log(weights)
            ll = float(
                (log_weights[new_assignment] + log_density[np.arange(n), new_assignment]).sum()
            )
            if ll < previous_ll - 1e-12:
                break  # keep the previous, better state
            trace.append(ll)
            snapshot = (alphas.copy(), betas.copy(), weights.copy(), new_assignment.copy(), ll)
            stable = bool((new_assignment == assignment).all())
            assignment = new_assignment
            previous_ll = ll
            if stable:
                break
        if snapshot is None:
            continue
        alphas, betas, weights, assignment, ll = snapshot
        # components emptied by the final reassignment keep zero weight
        kept = [
            (BetaComponent(alphas[c], betas[c]), float(weights[c]))
            for c in range(n_components)
        ]
        mixture = BetaMixture(
            components=tuple(c for c, _ in kept), weights=tuple(w for _, w in kept)
        )
        fit = MixtureFit(
            mixture=mixture,
            assignment=assignment,
            log_likelihood=ll,
            trace=tuple(trace),
        )
        if best is None or fit.log_likelihood > best.log_likelihood:
            best = fit
    if best is None:
        raise EstimationError("every EM restart failed")
    return best


# --- normalized entropy criterion --------------------------------------------

def _observed_loglik_and_entropy(mixture: BetaMixture, x: np.ndarray) -> tuple[float, float]:
    alphas = np.array([c.alpha for c in mixture.components])
    betas = np.array([c.beta for c in mixture.components])
    weights = np.asarray(mixture.weights)
    log_density = _log_density_matrix(x, alphas, betas)
    with np.errstate(divide="ignore"):
        log_joint = log_density + np.log(weights)
    log_mix = logsumexp(log_joint, axis=1)
    responsibilities = np.exp(log_joint - log_mix[:, None])
    entropy_terms = np.where(
        responsibilities > 0, responsibilities * (log_joint - log_mix[:, None]), 0.0
    )
    entropy = -float(entropy_terms.sum())
    return float(log_mix.sum()), entropy


def nec_score(
    mixture: BetaMixture,
    samples: Sequence[float],
    *,
    single_component_loglik: float | None = None,
) -> float:
    """Normalized entropy criterion of a fitted mixture on its data.

    Uses soft responsibilities; E(1) = 0 by convention and the one-component
    score is the conventional 1, which makes a single component selectable.
    Raises EstimationError when the likelihood matches the one-component fit
    (the criterion is undefined there).
    """
    x = np.clip(np.asarray(samples, dtype=float), EPSILON, 1 - EPSILON)
    if len(mixture.components) == 1:
        return 1.0
    loglik, entropy = _observed_loglik_and_entropy(mixture, x)
    if single_component_loglik is None:
        single = BetaMixture.single(moments_estimate(x))
        single_component_loglik, _ = _observed_loglik_and_entropy(single, x)
    denominator = loglik - single_component_loglik
    if abs(denominator) < 1e-12:
        raise EstimationError("NEC undefined: no likelihood gain over one component")
    return entropy / denominator


def select_component_count(
    samples: Sequence[float],
    candidate_counts: Iterable[int],
    rng: np.random.Generator,
    *,
    restarts: int = DEFAULT_RESTARTS,
) -> tuple[int, dict[int, MixtureFit]]:
    """Fit every candidate count and return (best count, fits by count).

    The best count minimizes the NEC; counts with an undefined score are
    excluded. Ties prefer fewer components.
    """
    counts = sorted(set(candidate_counts))
    if not counts:
        raise ValueError("candidate_counts must be nonempty")
    x = np.clip(np.asarray(samples, dtype=float), EPSILON, 1 - EPSILON)
    single = BetaMixture.single(moments_estimate(x))
    single_ll, _ = _observed_loglik_and_entropy(single, x)

    fits: dict[int, MixtureFit] = {}
    scores: dict[int, float] = {}
    for count in counts:
        fit = fit_mixture_em(samples, count, rng, restarts=restarts)
        fits[count] = fit
        if count > 1:
            loglik, _ = _observed_loglik_and_entropy(fit.mixture, x)
            if loglik <= single_ll + 1e-12:
                # no likelihood gain over one component: the criterion is
                # undefined (equal) or the fit is dominated (worse); either
                # way the count cannot beat the one-component reference
                continue
        try:
            scores[count] = nec_score(
                fit.mixture, samples, single_component_loglik=single_ll
            )
        except EstimationError:
            continue
    if not scores:
        raise EstimationError("NEC undefined for every candidate count")
    best = min(scores, key=lambda c: (scores[c], c))
    return best, fits


# --- dataset and bundle files -------------------------------------------------

SLIDER_MIN, SLIDER_MAX = -5.0, 5.0


def slider_to_unit(value: float) -> float:
    """Map a raw survey slider value (-5..5) to a clamped belief in (0, 1)."""
    if not (SLIDER_MIN <= value <= SLIDER_MAX):
        raise ValueError(f"slider value {value} outside [{SLIDER_MIN}, {SLIDER_MAX}]")
    return min(max((value + 5.0) / 10.0, EPSILON), 1 - EPSILON)


def load_belief_dataset(path: str | Path) -> dict[str, list[float]]:
    """Read a belief survey CSV: argument_id, participant_id, value.

    The file carries raw slider values (-5..5); the returned samples are
    mapped to the clamped unit interval, in file order per argument.
    """
    dataset: dict[str, list[float]] = {}
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        required = {"argument_id", "participant_id", "value"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns {sorted(required)}")
        for row in reader:
            dataset.setdefault(row["argument_id"], []).append(
                slider_to_unit(float(row["value"]))
            )
    return dataset


def save_mixture_bundle(mixtures: dict[str, BetaMixture], path: str | Path) -> None:
    data = {
        "v": 1,
        "arguments": {
            arg: [
                {"alpha": c.alpha, "beta": c.beta, "weight": w}
                for c, w in zip(m.components, m.weights)
            ]
            for arg, m in sorted(mixtures.items())
        },
    }
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def load_mixture_bundle(path: str | Path) -> dict[str, BetaMixture]:
    data = json.loads(Path(path).read_text())
    mixtures = {}
    for arg, rows in data["arguments"].items():
        weights = np.array([r["weight"] for r in rows], dtype=float)
        weights = weights / weights.sum()
        mixtures[arg] = BetaMixture(
            components=tuple(BetaComponent(r["alpha"], r["beta"]) for r in rows),
            weights=tuple(float(w) for w in weights),
        )
    return mixtures
