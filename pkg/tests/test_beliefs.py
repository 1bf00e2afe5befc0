import math

import numpy as np
import pytest
from scipy import integrate, stats

from aps.beliefs import (
    BetaComponent,
    BetaMixture,
    EstimationError,
    beta_pdf,
    fit_mixture_em,
    load_belief_dataset,
    load_mixture_bundle,
    mixture_cdf,
    mixture_pdf,
    moments_estimate,
    nec_score,
    sample_belief,
    save_mixture_bundle,
    select_component_count,
    slider_to_unit,
)

FIG4_MIXTURE = BetaMixture(
    components=(BetaComponent(0.12, 0.45), BetaComponent(3.41, 3.38)),
    weights=(0.15, 0.85),
)


class TestBetaPdf:
    def test_uniform(self):
        component = BetaComponent(1.0, 1.0)
        for x in (0.0, 0.25, 0.5, 1.0):
            assert beta_pdf(component, x) == pytest.approx(1.0)

    def test_bell_mean(self):
        component = BetaComponent(3.41, 3.38)
        assert component.mean() == pytest.approx(0.5022091310751104, abs=1e-12)

    def test_u_shape_diverges_at_endpoints(self):
        component = BetaComponent(0.12, 0.45)
        assert beta_pdf(component, 0.0) == math.inf
        assert beta_pdf(component, 1.0) == math.inf
        assert beta_pdf(component, 1e-9) > 1e3

    def test_domain_error(self):
        with pytest.raises(ValueError):
            beta_pdf(BetaComponent(2, 2), 1.5)

    @pytest.mark.parametrize("alpha,beta", [(1, 1), (2, 5), (3.41, 3.38), (9, 1.5)])
    def test_integrates_to_one(self, alpha, beta):
        component = BetaComponent(alpha, beta)
        total, _ = integrate.quad(lambda x: beta_pdf(component, x), 0, 1)
        assert total == pytest.approx(1.0, abs=1e-6)


class TestMomentsEstimate:
    def test_survey_series(self):
        # frozen from the closed-form formulas on 0.6,0.5,0.6,0.7,0.6,0.7
        estimate = moments_estimate([0.6, 0.5, 0.6, 0.7, 0.6, 0.7])
        assert estimate.alpha == pytest.approx(30.25294117647059, rel=1e-12)
        assert estimate.beta == pytest.approx(18.805882352941175, rel=1e-12)

    def test_symmetric_samples(self):
        estimate = moments_estimate([0.3, 0.7, 0.4, 0.6, 0.5, 0.5])
        assert estimate.alpha == pytest.approx(estimate.beta)

    def test_zero_variance_rejected(self):
        with pytest.raises(EstimationError):
            moments_estimate([0.4, 0.4, 0.4])

    def test_inverts_mean_and_variance(self, rng):
        for _ in range(50):
            raw = rng.beta(rng.uniform(0.5, 8), rng.uniform(0.5, 8), size=40)
            try:
                estimate = moments_estimate(raw)
            except EstimationError:
                continue
            mean = raw.mean()
            variance = (raw * raw).mean() - mean * mean
            assert estimate.mean() == pytest.approx(mean, abs=1e-12)
            assert estimate.variance() == pytest.approx(variance, abs=1e-12)


class TestMixturePdf:
    def test_fig4_mixture_formula(self):
        xs = np.linspace(0.05, 0.95, 7)
        expected = 0.15 * stats.beta.pdf(xs, 0.12, 0.45) + 0.85 * stats.beta.pdf(
            xs, 3.41, 3.38
        )
        assert mixture_pdf(FIG4_MIXTURE, xs) == pytest.approx(expected)

    def test_single_component_equals_component(self):
        mixture = BetaMixture.single(BetaComponent(2, 5))
        assert mixture_pdf(mixture, 0.3) == pytest.approx(beta_pdf(BetaComponent(2, 5), 0.3))

    def test_duplicate_components_collapse(self):
        mixture = BetaMixture(
            components=(BetaComponent(2, 3), BetaComponent(2, 3)), weights=(0.5, 0.5)
        )
        assert mixture_pdf(mixture, 0.4) == pytest.approx(beta_pdf(BetaComponent(2, 3), 0.4))

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            BetaMixture(components=(BetaComponent(1, 1),), weights=(0.5,))


class TestSampleBelief:
    def test_uniform_mean(self):
        rng = np.random.default_rng(5)
        mixture = BetaMixture.single(BetaComponent(1, 1))
        draws = np.array([sample_belief(mixture, rng) for _ in range(100_000)])
        assert draws.mean() == pytest.approx(0.5, abs=0.01)

    def test_concentrated_component(self):
        rng = np.random.default_rng(6)
        mixture = BetaMixture.single(BetaComponent(5000, 5000))
        draws = [sample_belief(mixture, rng) for _ in range(1000)]
        assert all(abs(d - 0.5) < 0.05 for d in draws)

    def test_seed_determinism(self):
        first = [sample_belief(FIG4_MIXTURE, np.random.default_rng(42)) for _ in range(1)]
        second = [sample_belief(FIG4_MIXTURE, np.random.default_rng(42)) for _ in range(1)]
        rng_a, rng_b = np.random.default_rng(9), np.random.default_rng(9)
        seq_a = [sample_belief(FIG4_MIXTURE, rng_a) for _ in range(200)]
        seq_b = [sample_belief(FIG4_MIXTURE, rng_b) for _ in range(200)]
        assert first == second
        assert seq_a == seq_b

    def test_empirical_cdf_matches_mixture_cdf(self):
        rng = np.random.default_rng(7)
        draws = np.array([sample_belief(FIG4_MIXTURE, rng) for _ in range(100_000)])
        statistic = stats.kstest(draws, lambda x: mixture_cdf(FIG4_MIXTURE, x)).statistic
        assert statistic < 0.02


class TestFitMixtureEM:
    def test_single_component_recovery(self):
        rng = np.random.default_rng(11)
        samples = rng.beta(2, 5, size=2000)
        fit = fit_mixture_em(samples, 1, rng)
        component = fit.mixture.components[0]
        assert component.alpha == pytest.approx(2.0, rel=0.15)
        assert component.beta == pytest.approx(5.0, rel=0.15)
        assert fit.mixture.weights == (1.0,)

    def test_two_separated_clusters(self):
        rng = np.random.default_rng(12)
        a = rng.beta(80, 20, size=700)
        b = rng.beta(20, 80, size=300)
        samples = np.concatenate([a, b])
        fit = fit_mixture_em(samples, 2, rng)
        weights = sorted(fit.mixture.weights)
        assert weights[0] == pytest.approx(0.3, abs=0.05)
        assert weights[1] == pytest.approx(0.7, abs=0.05)
        means = sorted(c.mean() for c in fit.mixture.components)
        assert means[0] == pytest.approx(0.2, abs=0.05)
        assert means[1] == pytest.approx(0.8, abs=0.05)

    def test_loglik_nondecreasing_within_restart(self):
        rng = np.random.default_rng(13)
        samples = np.concatenate([rng.beta(6, 2, 300), rng.beta(2, 8, 200)])
        fit = fit_mixture_em(samples, 2, rng)
        trace = fit.trace
        assert all(later >= earlier - 1e-9 for earlier, later in zip(trace, trace[1:]))

    def test_too_few_samples(self):
        rng = np.random.default_rng(14)
        with pytest.raises(EstimationError):
            fit_mixture_em([0.2, 0.4, 0.9], 2, rng)


class TestNec:
    def test_single_component_convention(self):
        # E(1) = 0 by convention; the one-component score is the reference 1
        samples = np.random.default_rng(15).beta(2, 5, 500)
        mixture = BetaMixture.single(moments_estimate(samples))
        assert nec_score(mixture, samples) == 1.0

    def test_bimodal_selects_two(self):
        rng = np.random.default_rng(16)
        samples = np.concatenate([rng.beta(60, 15, 500), rng.beta(15, 60, 500)])
        best, fits = select_component_count(samples, [1, 2, 3], rng, restarts=4)
        assert best == 2
        assert set(fits) == {1, 2, 3}

    def test_unimodal_selects_one(self):
        rng = np.random.default_rng(17)
        samples = rng.beta(4, 4, size=800)
        best, _ = select_component_count(samples, [1, 2, 3], rng, restarts=4)
        assert best == 1


class TestFiles:
    def test_slider_mapping(self):
        assert slider_to_unit(0.0) == pytest.approx(0.5)
        assert slider_to_unit(5.0) == pytest.approx(1 - 1e-6)
        assert slider_to_unit(-5.0) == pytest.approx(1e-6)
        with pytest.raises(ValueError):
            slider_to_unit(7.0)

    def test_dataset_maps_sliders_to_unit_interval(self, tmp_path):
        path = tmp_path / "beliefs.csv"
        path.write_text(
            "argument_id,participant_id,value\n"
            "a,p1,1.0\n"
            "a,p2,-2.5\n"
            "b,p1,4.75\n"
        )
        dataset = load_belief_dataset(path)
        assert dataset["a"] == pytest.approx([0.6, 0.25])
        assert dataset["b"] == pytest.approx([0.975])
        assert all(0 < v < 1 for values in dataset.values() for v in values)

    def test_bundle_round_trip(self, tmp_path):
        path = tmp_path / "bundle.json"
        save_mixture_bundle({"a": FIG4_MIXTURE}, path)
        loaded = load_mixture_bundle(path)
        assert loaded["a"].weights == pytest.approx(FIG4_MIXTURE.weights)
        assert [c.alpha for c in loaded["a"].components] == [0.12, 3.41]
