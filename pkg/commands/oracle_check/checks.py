import math
from dataclasses import dataclass
from logging import Logger
from typing import Callable, Dict, List, Sequence

import numpy as np

from core import HBAR, DomainError, MacroscopicityError, ModificationParams, NumericalError
from model_bec import BecParams, BecRates, bin_probabilities, g_factor_double_well
from model_nanobeam import NanobeamParams, coincidence_table, cuboid_dimensions, geometric_factor, xi
from model_qrw import PROTOCOLS, QrwParams, site_probabilities
from oracle import (
    evolve_dicke,
    geometric_factor_quadrature,
    measure_after_recombiner,
    nanobeam_char_quadrature,
    one_axis_squeeze,
    qrw_density_matrix_walk,
    shear_diffusion_mc,
    spin_operators,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tolerance


def check_qrw(seed: int) -> List[CheckResult]:
    """Analytic site distributions against the density-matrix walk, 20 random parameter draws."""
    rng = np.random.default_rng(seed)
    params = QrwParams()
    worst = 0.0
    for _ in range(20):
        mod = ModificationParams.from_length(
            tau_e=10.0 ** rng.uniform(4.0, 9.0), hbar_over_sigma_q=params.site_spacing * 10.0 ** rng.uniform(-2.0, 1.0)
        )
        walk = qrw_density_matrix_walk(params, mod)
        for protocol, simulated in zip(PROTOCOLS, (walk.full, walk.postselect_left, walk.postselect_right)):
            worst = max(worst, float(np.max(np.abs(site_probabilities(protocol, params, mod) - simulated))))
    return [CheckResult("qrw_walk_max_abs", worst, 1.0e-10)]


def check_bec(seed: int) -> List[CheckResult]:
    """Theta-function imbalance histogram against exact Dicke evolution, N = 100, <Jz^2> = N/5."""
    state = one_axis_squeeze(50, 20.0)
    _, jy, jz = spin_operators(50)
    jz_var = state.expectation(jz @ jz).real
    jy_var = state.expectation(jy @ jy).real
    rate = 0.002
    params = BecParams(
        n_atoms=100, epsilon_over_hbar=1.0, zeta=rate, jz_var0=jz_var, jy_var0=max(jy_var, 50.0**2 / (4.0 * jz_var))
    )
    rates = BecRates(gamma_p=rate)
    edges = np.arange(-50.5, 51.0, 1.0)
    results = []
    for label, t in (("t0", 0.0), ("t1", 5.25 * math.pi), ("t2", 400.0 * math.pi)):
        exact = measure_after_recombiner(evolve_dicke(state, 1.0, rate, rate, t))
        analytic = bin_probabilities(edges, 50, params, float(g_factor_double_well(params, rates, t)), t)
        results.append(CheckResult(f"bec_total_variation_{label}", 0.5 * float(np.sum(np.abs(exact - analytic))), 0.05))
    return results


def check_geometric_factor(seed: int) -> List[CheckResult]:
    params = NanobeamParams()
    _, _, lz = cuboid_dimensions(params)
    worst = 0.0
    for scale in (0.1, 1.0, 10.0):
        sigma_q = HBAR / (scale * lz)
        closed = geometric_factor(params, sigma_q)
        worst = max(worst, abs(closed - geometric_factor_quadrature(params, sigma_q)) / closed)
    return [CheckResult("nanobeam_geometric_factor_rel", worst, 1.0e-4)]


def check_nanobeam(seed: int) -> List[CheckResult]:
    """
    Coincidence probabilities against the phase-space integral at x = xi t / tau_e of 0.1 and 1.

    The integral is not renormalized: its four outcomes sum to the heralding survival 1 - 4x/(2+x)^3,
    and the model's conditional probabilities times that survival must reproduce each of them.
    """
    params = NanobeamParams()
    _, _, lz = cuboid_dimensions(params)
    sigma_q = HBAR / lz
    t = 123.0e-9
    theta = params.delta_omega * t + params.phi0
    xi_value = xi(params, sigma_q)
    results = []
    for x in (0.1, 1.0):
        mod = ModificationParams(tau_e=xi_value * t / x, sigma_q=sigma_q)
        survival = 1.0 - 4.0 * x / (2.0 + x) ** 3
        analytic = coincidence_table(params, theta, t, np.array([mod.tau_e]), sigma_q)[:, 0] * survival
        reference = nanobeam_char_quadrature(params, mod, theta, t, xi_value=xi_value)
        simulated = np.array([reference[outcome] for outcome in ("pp", "pm", "mp", "mm")])
        deviation = float(np.max(np.abs(analytic - simulated) / np.maximum(analytic, 1.0e-12)))
        results.append(CheckResult(f"nanobeam_char_rel_x{x:g}", deviation, 0.05))
        results.append(CheckResult(f"nanobeam_survival_abs_x{x:g}", abs(float(simulated.sum()) - survival), 1.0e-4))
    return results


def check_shear(seed: int) -> List[CheckResult]:
    """Monte Carlo variance of j_y against the closed short-time form, in standard errors."""
    zeta, gamma_s, j, sigma_y, sigma_z, t = 0.05, 1.0e-4, 100.0, 5.0, 5.0, 10.0
    n_samples = 100_000
    expected = sigma_y**2 + 4.0 * zeta**2 * t**2 * (sigma_z**2 + j**2 * gamma_s * t / 6.0)
    variance = shear_diffusion_mc(zeta, gamma_s, j, sigma_y, sigma_z, t, n_samples=n_samples, seed=seed)
    standard_error = expected * math.sqrt(2.0 / (n_samples - 1))
    return [CheckResult("shear_variance_standard_errors", abs(variance - expected) / standard_error, 3.0)]


CHECKS: Dict[str, Callable[[int], List[CheckResult]]] = {
    "qrw": check_qrw,
    "bec": check_bec,
    "geometric": check_geometric_factor,
    "nanobeam": check_nanobeam,
    "shear": check_shear,
}


def oracle_check_callback(names: Sequence[str], seed: int, echo: Callable[[str], None], logger: Logger) -> int:
    selected = sorted(CHECKS) if "all" in names else list(dict.fromkeys(names))
    failed = []
    try:
        for name in selected:
            for result in CHECKS[name](seed):
                status = "ok" if result.passed else "FAIL"
                echo(f"{result.name} deviation={result.deviation:.3e} tolerance={result.tolerance:.1e} {status}")
                if not result.passed:
                    failed.append(result.name)
    except (MacroscopicityError, DomainError) as e:
        logger.error(e)
        return e.exit_code
    if failed:
        logger.error(f"oracle disagreement in {', '.join(failed)}")
        return NumericalError.exit_code
    return 0
