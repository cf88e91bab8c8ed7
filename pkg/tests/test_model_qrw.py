import math

import numpy as np
import pytest

from core import DataError, Dataset, ModificationParams, amplification
from model_qrw import (
    CESIUM_MASS,
    SITES,
    QrwModel,
    QrwParams,
    heating_check,
    leggett_garg_lhs,
    leggett_garg_sum,
    reduction_factor,
    reduction_factor_grid,
    site_probabilities,
    site_probabilities_grid,
)


class TestReductionFactor:
    def setup_method(self):
        self.params = QrwParams()
        self.amp = amplification(CESIUM_MASS)

    def test_unmodified_walk_keeps_coherence(self):
        mod = ModificationParams.from_length(tau_e=math.inf, hbar_over_sigma_q=1.0e-7)
        assert reduction_factor(self.params.t_rest, self.params, mod) == 1.0

    def test_zero_hold_keeps_displacement_loss(self):
        mod = ModificationParams.from_length(tau_e=self.amp * 1.0e-4, hbar_over_sigma_q=self.params.site_spacing / 10.0)
        value = reduction_factor(0.0, self.params, mod)
        assert 0.0 < value < 1.0

    def test_short_kick_length_decoheres_like_which_way_information(self):
        # hbar/sigma_q << d: both deficits approach 1
        mod = ModificationParams.from_length(tau_e=self.amp * 1.0e-4, hbar_over_sigma_q=self.params.site_spacing / 1.0e4)
        expected = math.exp(-(2.0 * self.params.t_shift + self.params.t_rest) / 1.0e-4)
        assert reduction_factor(self.params.t_rest, self.params, mod) == pytest.approx(expected, rel=1e-3)

    def test_long_kick_length_leaves_walk_coherent(self):
        mod = ModificationParams.from_length(tau_e=self.amp * 1.0e-4, hbar_over_sigma_q=self.params.site_spacing * 1.0e4)
        assert reduction_factor(self.params.t_rest, self.params, mod) == pytest.approx(1.0, abs=1e-6)

    def test_decreases_with_hold_time(self):
        tau = np.array([self.amp * 1.0e-4])
        sigma_q = 1.0e-27
        short = reduction_factor_grid(self.params.t_rest, self.params, tau, sigma_q)[0]
        long = reduction_factor_grid(self.params.t_shift + 2 * self.params.t_rest, self.params, tau, sigma_q)[0]
        assert long < short

    def test_negative_hold_rejected(self):
        with pytest.raises(DataError):
            reduction_factor_grid(-1.0, self.params, np.array([1.0]), 1.0e-27)


class TestSiteProbabilities:
    def setup_method(self):
        self.params = QrwParams()
        self.coherent = ModificationParams.from_length(tau_e=math.inf, hbar_over_sigma_q=1.0e-7)
        self.classical = ModificationParams.from_length(tau_e=1.0e-12, hbar_over_sigma_q=1.0e-9)

    def test_quantum_limit(self):
        values = site_probabilities("full", self.params, self.coherent)
        assert np.allclose(values, [1 / 16, 5 / 8, 1 / 8, 1 / 8, 1 / 16], rtol=0, atol=1e-15)

    def test_classical_limit(self):
        values = site_probabilities("full", self.params, self.classical)
        assert np.allclose(values, [1 / 16, 1 / 4, 3 / 8, 1 / 4, 1 / 16], rtol=0, atol=1e-15)

    @pytest.mark.parametrize("protocol", ["full", "postselect_left", "postselect_right"])
    def test_sums_to_one(self, protocol):
        tau = np.logspace(5, 9, 7)
        table = site_probabilities_grid(protocol, self.params, tau, 1.0e-27)
        assert np.allclose(table.sum(axis=0), 1.0, atol=1e-14)
        assert np.all(table >= 0)

    def test_postselections_mirror(self):
        left = site_probabilities("postselect_left", self.params, self.coherent)
        right = site_probabilities("postselect_right", self.params, self.coherent)
        assert np.allclose(left, right[::-1])
        assert left[-1] == 0.0

    def test_outer_sites_carry_no_information(self):
        table = site_probabilities_grid("full", self.params, np.logspace(0, 14, 5), 1.0e-27)
        assert np.allclose(table[0], 1 / 16)
        assert np.allclose(table[-1], 1 / 16)

    def test_unknown_protocol(self):
        with pytest.raises(DataError):
            site_probabilities("sideways", self.params, self.coherent)


class TestLeggettGarg:
    def setup_method(self):
        self.params = QrwParams()
        self.length = self.params.site_spacing / 10.0

    def test_lhs_positive_and_monotone(self):
        tau = np.logspace(8, 14, 25)
        values = [leggett_garg_lhs(self.params, ModificationParams.from_length(t, self.length)) for t in tau]
        assert all(v > 0 for v in values)
        assert all(b >= a for a, b in zip(values, values[1:]))
        assert values[-1] == pytest.approx(2.0, abs=1e-3)

    def test_lhs_vanishes_for_strong_modification(self):
        mod = ModificationParams.from_length(1.0e-3, self.length)
        assert leggett_garg_lhs(self.params, mod) == pytest.approx(0.0, abs=1e-12)

    def test_site_sum_is_a_quarter_of_lhs(self):
        mod = ModificationParams.from_length(amplification(CESIUM_MASS) * 3.0e-5, self.length)
        assert leggett_garg_sum(self.params, mod) == pytest.approx(leggett_garg_lhs(self.params, mod) / 4.0, abs=1e-14)


class TestHeatingCheck:
    def test_energy_gain_scales_with_duration(self):
        params = QrwParams()
        mod = ModificationParams.from_length(1.0e10, 1.0e-7)
        first = heating_check(params, mod, 1.0e-3)
        second = heating_check(params, mod, 2.0e-3)
        assert second.energy_gain == pytest.approx(2.0 * first.energy_gain)
        assert first.temperature_increase > 0

    def test_walk_heating_at_prior_quantile(self):
        params = QrwParams()
        mod = ModificationParams.from_length(16.75e-6 * amplification(CESIUM_MASS), params.site_spacing / 10.0)
        estimate = heating_check(params, mod, params.walk_duration)
        assert 5.6e-6 / 2.0 < estimate.temperature_increase < 5.6e-6 * 2.0
        assert estimate.temperature_increase == pytest.approx(6.04e-6, rel=0.01)

    def test_free_atom_heats_twice_as_much(self):
        params = QrwParams()
        mod = ModificationParams.from_length(1.0e10, 1.0e-7)
        trapped = heating_check(params, mod, 1.0e-3)
        free = heating_check(params, mod, 1.0e-3, trapped=False)
        assert free.energy_gain == trapped.energy_gain
        assert free.temperature_increase == pytest.approx(2.0 * trapped.temperature_increase)

    def test_negative_duration(self):
        with pytest.raises(DataError):
            heating_check(QrwParams(), ModificationParams.from_length(1.0, 1.0e-7), -1.0)


class TestQrwModel:
    def setup_method(self):
        self.model = QrwModel()

    def test_prior_candidates_use_full_walk(self):
        data = Dataset(runs=(), experiment_id="qrw")
        assert self.model.prior_candidates(data) == [{"protocol": "full"}]

    def test_likelihood_table_rows_follow_outcomes(self):
        table = self.model.likelihood_table([2, -1], {"protocol": "full"}, np.array([math.inf]), 1.0e-27)
        assert np.allclose(table[:, 0], [1 / 16, 5 / 8])

    def test_sample_counts(self):
        rng = np.random.default_rng(3)
        mod = ModificationParams.from_length(math.inf, 1.0e-7)
        draws = self.model.sample({"protocol": "full"}, mod, 1000, rng)
        assert sum(count for _, count in draws) == 1000
        assert all(site in SITES for site, _ in draws)

    def test_unknown_protocol_in_context(self):
        with pytest.raises(DataError):
            self.model.outcome_space({"protocol": "sideways"})

    def test_invalid_params(self):
        with pytest.raises(DataError):
            QrwParams(t_shift=0.0)
