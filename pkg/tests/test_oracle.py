import math

import numpy as np
import pytest

from core import HBAR, DomainError, ModificationParams, NumericalError, amplification
from model_nanobeam import OUTCOMES, NanobeamParams, coincidence_table, cuboid_dimensions, geometric_factor, xi
from model_qrw import CESIUM_MASS, PROTOCOLS, QrwParams, site_probabilities
from oracle import (
    DickeState,
    coherent_state_x,
    evolve_dicke,
    geometric_factor_quadrature,
    measure_after_recombiner,
    nanobeam_char_quadrature,
    one_axis_squeeze,
    qrw_density_matrix_walk,
    shear_diffusion_mc,
    spin_operators,
)


class TestSpin:
    @pytest.mark.parametrize("j", [0.5, 1.5, 4.0])
    def test_algebra(self, j):
        jx, jy, jz = spin_operators(j)
        assert np.allclose(jx @ jy - jy @ jx, 1j * jz)
        assert np.allclose(jx @ jx + jy @ jy + jz @ jz, j * (j + 1) * np.eye(int(2 * j + 1)))

    def test_coherent_state(self):
        j = 10.0
        psi = coherent_state_x(j)
        jx, _, jz = spin_operators(j)
        assert np.vdot(psi, psi).real == pytest.approx(1.0)
        assert np.vdot(psi, jx @ psi).real == pytest.approx(j)
        assert np.vdot(psi, jz @ jz @ psi).real == pytest.approx(j / 2.0)

    def test_state_validation(self):
        with pytest.raises(DomainError):
            DickeState(0.3, np.eye(1))
        with pytest.raises(DomainError):
            DickeState(1.0, np.eye(2) / 2.0)
        with pytest.raises(NumericalError):
            DickeState(1.0, np.eye(3))
        with pytest.raises(NumericalError):
            DickeState(0.5, np.array([[1.5, 0.0], [0.0, -0.5]]))


class TestSqueezing:
    def test_reaches_target(self):
        state = one_axis_squeeze(10.0, 2.0)
        _, _, jz = spin_operators(10.0)
        assert state.expectation(jz @ jz).real == pytest.approx(2.0, rel=0.01)
        assert np.trace(state.rho).real == pytest.approx(1.0, abs=1e-10)

    def test_coherent_target(self):
        state = one_axis_squeeze(10.0, 5.0)
        jx, _, _ = spin_operators(10.0)
        assert state.expectation(jx).real == pytest.approx(10.0)

    def test_rejects_anti_squeezing(self):
        with pytest.raises(DomainError):
            one_axis_squeeze(10.0, 6.0)


class TestDickeEvolution:
    def setup_method(self):
        psi = coherent_state_x(8.0)
        self.state = DickeState(8.0, np.outer(psi, psi.conj()))
        self.jx, _, _ = spin_operators(8.0)

    def test_phase_flips_shrink_mean_spin(self):
        evolved = evolve_dicke(self.state, 0.0, 0.0, 0.3, 2.0)
        assert evolved.expectation(self.jx).real == pytest.approx(8.0 * math.exp(-0.3), rel=1e-10)
        assert evolved.min_eigenvalue() > -1e-8

    def test_negative_rate(self):
        with pytest.raises(DomainError):
            evolve_dicke(self.state, 0.0, 0.0, -1.0, 1.0)

    def test_recombiner_output(self):
        probabilities = measure_after_recombiner(self.state)
        m = self.state.m_values
        assert probabilities.sum() == pytest.approx(1.0)
        assert probabilities @ m == pytest.approx(0.0, abs=1e-10)
        assert probabilities @ m**2 == pytest.approx(4.0)


class TestQrwWalk:
    def test_unmodified_walk_matches_analytic(self):
        params = QrwParams()
        mod = ModificationParams.from_length(math.inf, params.site_spacing)
        walk = qrw_density_matrix_walk(params, mod)
        for protocol, simulated in zip(PROTOCOLS, (walk.full, walk.postselect_left, walk.postselect_right)):
            assert simulated == pytest.approx(site_probabilities(protocol, params, mod), abs=1e-12)

    def test_modified_walk_matches_analytic(self):
        params = QrwParams()
        mod = ModificationParams.from_length(amplification(CESIUM_MASS) * 2.0e-5, params.site_spacing / 10.0)
        walk = qrw_density_matrix_walk(params, mod)
        assert walk.full == pytest.approx(site_probabilities("full", params, mod), abs=1e-10)
        assert walk.full.sum() == pytest.approx(1.0)
        assert sum(walk.branch_weights) == pytest.approx(1.0)


class TestGeometricQuadrature:
    @pytest.mark.parametrize("scale", [0.1, 1.0, 10.0])
    def test_geometric_factor(self, scale):
        params = NanobeamParams()
        sigma_q = HBAR / (scale * cuboid_dimensions(params)[2])
        value = geometric_factor_quadrature(params, sigma_q)
        assert math.isfinite(value)
        assert value == pytest.approx(geometric_factor(params, sigma_q), rel=1e-4)

    def test_long_wavelength_scaling(self):
        # the antisymmetric mode carries no net displacement, so U falls off like sigma_q^4
        params = NanobeamParams()
        sigma_q = HBAR / (100.0 * cuboid_dimensions(params)[2])
        ratio = geometric_factor_quadrature(params, sigma_q) / geometric_factor_quadrature(params, sigma_q / 2.0)
        assert ratio == pytest.approx(16.0, rel=1e-3)

    def test_too_fine_resolution(self):
        with pytest.raises(DomainError):
            geometric_factor_quadrature(NanobeamParams(), HBAR / 1.0e-10)

    def test_rejects_non_positive_sigma(self):
        with pytest.raises(DomainError):
            geometric_factor_quadrature(NanobeamParams(), 0.0)


class TestNanobeamQuadrature:
    def setup_method(self):
        self.params = NanobeamParams()
        self.t = 123.0e-9
        self.theta = self.params.delta_omega * self.t + self.params.phi0

    def test_unmodified_correlations(self):
        mod = ModificationParams.from_length(math.inf, 1.0e-7)
        result = nanobeam_char_quadrature(self.params, mod, self.theta, self.t, nodes=20, xi_value=1.0)
        assert [result[key] for key in ("pp", "pm", "mp", "mm")] == pytest.approx([0.5, 0.0, 0.0, 0.5], abs=1e-6)

    @pytest.mark.parametrize("x", [0.1, 1.0, 4.0])
    def test_outcomes_sum_to_heralding_survival(self, x):
        mod = ModificationParams.from_length(self.t / x, 1.0e-7)
        result = nanobeam_char_quadrature(self.params, mod, self.theta, self.t, nodes=20, xi_value=1.0)
        assert sum(result.values()) == pytest.approx(1.0 - 4.0 * x / (2.0 + x) ** 3, abs=1e-8)
        assert sum(result.values()) < 1.0

    @pytest.mark.parametrize("x", [0.1, 1.0])
    def test_matches_model_times_survival(self, x):
        mod = ModificationParams.from_length(self.t / x, 1.0e-7)
        result = nanobeam_char_quadrature(self.params, mod, self.theta, self.t, nodes=20, xi_value=1.0)
        # the model sees its own xi; rescale tau so both describe the same x
        tau = xi(self.params, mod.sigma_q) * self.t / x
        table = coincidence_table(self.params, self.theta, self.t, np.array([tau]), mod.sigma_q)[:, 0]
        survival = 1.0 - 4.0 * x / (2.0 + x) ** 3
        expected = table * survival
        assert [result[key] for key in OUTCOMES] == pytest.approx(list(expected), abs=1e-6)


class TestShearMonteCarlo:
    def test_needs_enough_samples(self):
        with pytest.raises(DomainError):
            shear_diffusion_mc(0.05, 1.0e-4, 100.0, 5.0, 5.0, 10.0, n_samples=100)

    def test_seeded(self):
        kwargs = dict(n_samples=10_000, n_steps=20, seed=4)
        first = shear_diffusion_mc(0.05, 1.0e-4, 100.0, 5.0, 5.0, 10.0, **kwargs)
        assert shear_diffusion_mc(0.05, 1.0e-4, 100.0, 5.0, 5.0, 10.0, **kwargs) == first

    def test_pure_shear(self):
        # without diffusion the update is linear, so the variance follows exactly up to sampling error
        variance = shear_diffusion_mc(0.05, 0.0, 100.0, 5.0, 5.0, 10.0, n_samples=40_000, n_steps=10, seed=1)
        expected = 25.0 + 4.0 * 0.05**2 * 100.0 * 25.0
        assert variance == pytest.approx(expected, rel=5.0 * math.sqrt(2.0 / 40_000))

    @pytest.mark.slow
    def test_threaded_chunks(self):
        variance = shear_diffusion_mc(0.05, 1.0e-4, 100.0, 5.0, 5.0, 10.0, n_samples=100_000, n_steps=500, workers=4)
        expected = 25.0 + 4.0 * 0.05**2 * 100.0 * (25.0 + 100.0**2 * 1.0e-4 * 10.0 / 6.0)
        assert variance == pytest.approx(expected, rel=4.0 * math.sqrt(2.0 / 100_000))
