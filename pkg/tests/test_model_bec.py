import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import logsumexp

import model_bec
from core import HBAR, DataError, Dataset, ModificationParams, Run, amplification
from model_bec import (
    RUBIDIUM_MASS,
    BecDoubleWellModel,
    BecModel,
    BecParams,
    BecRates,
    BecSingleWellModel,
    bin_probabilities,
    cell_probability,
    coherence_rate,
    g_factor_double_well,
    heating_marginal,
    jz_variance_single_well,
    likelihood_bec,
    loss_log_weights,
    p_j,
    rates_double_well,
    rates_single_well,
    rescaled_variance,
)


class TestBecParams:
    def test_defaults(self):
        params = BecParams()
        assert params.j0 == 600
        assert params.j_min == 540
        assert params.jz_var0 == pytest.approx(0.41**2 * 300)
        assert params.jz_var0 * params.jy_var0 == pytest.approx(600**2 / 4)

    def test_uncertainty_bound(self):
        with pytest.raises(DataError):
            BecParams(jz_var0=10.0, jy_var0=10.0)

    def test_odd_atom_number(self):
        with pytest.raises(DataError):
            BecParams(n_atoms=101)


class TestRates:
    def setup_method(self):
        self.params = BecParams()
        self.amp = amplification(RUBIDIUM_MASS)

    def test_phase_flip_maximum_and_loss_ratio(self):
        lengths = np.geomspace(1.0e-8, 1.0e-5, 400)
        rates = [rates_double_well(self.params, ModificationParams.from_length(1.0, length)) for length in lengths]
        gamma_p = np.array([float(r.gamma_p[0]) for r in rates]) / self.amp
        best = int(np.argmax(gamma_p))
        gamma_l = float(rates[best].gamma_l[0]) / self.amp
        assert gamma_p[best] == pytest.approx(1.7, rel=0.05)
        assert gamma_l == pytest.approx(0.11, rel=0.15)
        assert gamma_p[best] / gamma_l == pytest.approx(15.5, rel=0.25)

    @pytest.mark.parametrize("length", [3.0e-8, 3.0e-7, 3.0e-6])
    def test_coherence_rate_identity(self, length):
        mod = ModificationParams.from_length(1.0, length)
        rates = rates_double_well(self.params, mod)
        expected = float(rates.gamma_l[0]) + 0.5 * float(rates.gamma_p[0])
        assert coherence_rate(self.params, mod.sigma_q) == pytest.approx(expected, rel=1e-6)

    def test_rates_scale_with_inverse_tau(self):
        first = rates_double_well(self.params, ModificationParams.from_length(1.0, 1.0e-7))
        second = rates_double_well(self.params, ModificationParams.from_length(2.0, 1.0e-7))
        assert float(first.gamma_p[0]) == pytest.approx(2.0 * float(second.gamma_p[0]))

    def test_spin_flip_rate_positive(self):
        rates = rates_single_well(self.params, ModificationParams.from_length(1.0, 1.0e-7))
        assert float(rates.gamma_s[0]) > 0
        assert float(rates.gamma_p[0]) == 0.0


class TestImbalanceDensity:
    def setup_method(self):
        self.params = BecParams(epsilon_over_hbar=1.0)

    def test_cell_matches_integral_of_density(self):
        value, _ = integrate.quad(lambda m: p_j(m, 10, self.params, 0.5, 0.3), 2.0, 3.0)
        assert float(cell_probability(2.0, 3.0, 10, 0.5, 0.3)) == pytest.approx(value, rel=1e-8)

    @pytest.mark.parametrize("g", [0.0, 0.3, 0.9, 0.999])
    def test_bins_sum_to_one(self, g):
        edges = np.arange(-50.5, 51.0, 1.0)
        assert bin_probabilities(edges, 50, self.params, g, 1.7).sum() == pytest.approx(1.0, abs=1e-12)

    def test_density_vanishes_outside_support(self):
        assert p_j(12.0, 10, self.params, 0.5, 0.0) == 0.0

    def test_small_spin_rejected(self):
        with pytest.raises(DataError):
            p_j(0.0, 0, self.params, 0.5, 0.0)


class TestNome:
    def test_initial_value(self):
        params = BecParams()
        g = g_factor_double_well(params, BecRates(), 0.0)
        assert g == pytest.approx(math.exp(-params.jy_var0 / (2 * params.j0**2)))

    def test_phase_flips_add_half_rate(self):
        params = BecParams(zeta=0.0)
        base = g_factor_double_well(params, BecRates(), 1.0)
        flipped = g_factor_double_well(params, BecRates(gamma_p=0.4), 1.0)
        assert flipped / base == pytest.approx(math.exp(-0.2))

    def test_negative_time(self):
        with pytest.raises(DataError):
            g_factor_double_well(BecParams(), BecRates(), -1.0)


class TestLoss:
    def setup_method(self):
        self.params = BecParams(n_atoms=40)

    def test_weights_normalized_over_all_survivors(self):
        log_w = loss_log_weights(self.params, np.array([0.3, 2.0]), 1.0, np.arange(0, 21))
        assert np.allclose(logsumexp(log_w, axis=0), 0.0, atol=1e-12)

    def test_no_loss_keeps_everything(self):
        assert heating_marginal(self.params, BecRates(gamma_l=np.array([0.0])), 1.0)[0] == pytest.approx(0.0)

    def test_rescaled_variance_identity(self):
        assert rescaled_variance(42.0, 20, 20) == pytest.approx(42.0)

    def test_rescaled_variance_grows_relative_to_spin(self):
        assert rescaled_variance(42.0, 20, 18) / 18**2 > 42.0 / 20**2


class TestSingleWell:
    def test_variance_limits(self):
        params = BecParams()
        rates = BecRates(gamma_s=1.0)
        assert jz_variance_single_well(params, rates, 0.0) == pytest.approx(params.jz_var0)
        assert jz_variance_single_well(params, rates, 1.0e3) == pytest.approx((params.jz_var0 + params.j0**2) / 3.0)

    def test_likelihood_cells_sum_to_one(self):
        model = BecSingleWellModel(BecParams(n_atoms=60))
        m = np.arange(-30, 31)
        table = model.likelihood_table(m, {"t": 5.0e-3}, np.array([1.0e12, math.inf]), HBAR / 1.0e-7)
        assert np.allclose(table.sum(axis=0), 1.0, atol=1e-10)


class TestDoubleWellModel:
    def setup_method(self):
        self.params = BecParams(n_atoms=80)
        self.model = BecDoubleWellModel(self.params)
        self.sigma_q = ModificationParams.from_length(1.0, 2.0e-7).sigma_q
        self.amp = amplification(RUBIDIUM_MASS)

    def test_conditioned_likelihood_normalized(self):
        m = np.arange(-40, 41)
        tau = np.array([self.amp * 0.05, self.amp * 1.0, math.inf])
        table = self.model.likelihood_table(m, {"t": 10.0e-3}, tau, self.sigma_q)
        assert np.allclose(table.sum(axis=0), 1.0, atol=1e-9)

    def test_heating_marginal_falls_with_loss_rate(self):
        log_marginal = heating_marginal(self.params, BecRates(gamma_l=np.array([0.1, 10.0, 1.0e3])), 10.0e-3)
        assert np.all(log_marginal <= 1.0e-12)
        assert np.all(np.diff(log_marginal) < 0)

    def test_unmodified_matches_unconditioned(self):
        m = [-3.0, 0.0, 7.0]
        context = {"t": 4.0e-3}
        conditioned = self.model.likelihood_table(m, context, np.array([math.inf]), self.sigma_q)
        unconditioned = self.model.unconditioned_table(m, context, np.array([math.inf]), self.sigma_q)
        assert np.allclose(conditioned, unconditioned, rtol=1e-12)

    def test_scalar_likelihood(self):
        mod = ModificationParams(tau_e=self.amp, sigma_q=self.sigma_q)
        table = self.model.likelihood_table([3.0], {"t": 2.0e-3}, np.array([self.amp]), self.sigma_q)
        assert likelihood_bec(3.0, {"t": 2.0e-3}, mod, self.params) == pytest.approx(table[0, 0])

    def test_vectorized_mixture_matches_sum_over_survivors(self, monkeypatch):
        monkeypatch.setattr(model_bec, "PAIR_CHUNK", 7)
        m = np.array([-3.0, 0.0, 7.0, 40.0])
        t = 6.0e-3
        tau = np.array([self.amp * 0.02, self.amp * 0.5, math.inf])
        rates = self.model.rates_grid(tau, self.sigma_q)
        g = self.model.g_factor(rates, t)
        j_values = np.arange(0, self.params.j0 + 1)
        weights = np.exp(loss_log_weights(self.params, rates.gamma_l, t, j_values))
        rotation = self.params.epsilon_over_hbar * t
        expected = np.zeros((m.size, tau.size))
        for j, row in zip(j_values, weights):
            if j == 0:
                cells = np.where(m == 0.0, 1.0, 0.0)[:, None]
            else:
                cells = cell_probability(m[:, None] - 0.5, m[:, None] + 0.5, j, g[None, :], rotation)
            expected += row[None, :] * cells
        table = self.model.unconditioned_table(m, {"t": t}, tau, self.sigma_q)
        assert np.allclose(table, expected, rtol=1e-9, atol=1e-10)

    def test_fisher_cells_cover_the_support(self):
        cells = self.model.fisher_outcomes({"t": 3.0e-3})
        assert len(cells) == 2 * self.params.j0 + 1
        table = self.model.likelihood_table(cells, {"t": 3.0e-3}, np.array([self.amp * 0.1]), self.sigma_q)
        assert table.sum() == pytest.approx(1.0, abs=1e-9)

    def test_prior_candidates_skip_zero_delay(self):
        runs = tuple(Run(0.0, {"t": t}) for t in np.linspace(0.0, 20.0e-3, 41))
        candidates = self.model.prior_candidates(Dataset(runs=runs, experiment_id="bec_double_well"))
        assert len(candidates) == 5
        assert all(c["t"] > 0 for c in candidates)

    def test_base_model_is_abstract(self):
        with pytest.raises(TypeError):
            BecModel(self.params)

    def test_missing_delay(self):
        with pytest.raises(DataError):
            self.model.outcome_space({})

    def test_initial_draws_have_phase_spread_variance(self):
        params = BecParams()
        model = BecDoubleWellModel(params)
        rng = np.random.default_rng(11)
        mod = ModificationParams.from_length(math.inf, 1.0e-7)
        draws = np.array([m for m, _ in model.sample({"t": 0.0}, mod, 10_000, rng)])
        assert np.all(np.abs(draws) <= params.j0)
        assert np.var(draws) == pytest.approx(params.jy_var0, rel=0.05)

    def test_coherent_state_draws_have_number_variance(self):
        params = BecParams(jz_var0=300.0, jy_var0=300.0)
        model = BecDoubleWellModel(params)
        rng = np.random.default_rng(12)
        mod = ModificationParams.from_length(math.inf, 1.0e-7)
        draws = np.array([m for m, _ in model.sample({"t": 0.0}, mod, 10_000, rng)])
        assert np.var(draws) == pytest.approx(params.jz_var0, rel=0.05)

    def test_initial_draws_follow_the_likelihood_variance(self):
        params = BecParams()
        model = BecDoubleWellModel(params)
        g0 = float(model.g_factor(BecRates(), 0.0)[0])
        assert -2.0 * params.j0**2 * math.log(g0) == pytest.approx(params.jy_var0, rel=1e-9)
