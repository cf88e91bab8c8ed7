"""
Entangled nanomechanical oscillators read out by Stokes/anti-Stokes photon coincidences.

The modification diffuses the heralded phonon mode of each beam; its strength enters the
coincidence statistics only through xi t / tau_e, with xi set by the geometric factor U.
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from core import (
    ATOMIC_MASS_UNIT,
    ELECTRON_MASS,
    ELECTRON_VOLT,
    HBAR,
    DataError,
    Dataset,
    ExperimentModel,
    ModificationParams,
    NumericalError,
    OutcomeSpace,
    dataset_log_likelihood_grid,
    require_point_modification,
)
from specfun import erf_real, sine_mode_kernel

logger = logging.getLogger(__name__)

OUTCOMES: Tuple[str, ...] = ("pp", "pm", "mp", "mm")
SIGNS = {"pp": (1, 1), "pm": (1, -1), "mp": (-1, 1), "mm": (-1, -1)}
PROTOCOLS: Tuple[str, ...] = ("phase_sweep", "time_sweep")
SILICON_MASS = 27.9769265 * ATOMIC_MASS_UNIT
# below this hbar/sigma_q the crystal is no longer a continuous mass density
ATOMIC_SWITCH_LENGTH = 5.0e-10
# below this a = Lz sigma_q / hbar the closed longitudinal factor loses all digits to cancellation
SMALL_A = 0.05
HERMITE_NODES = 60


@dataclass(frozen=True)
class NanobeamParams:
    eff_mass: float = 9.0e-17
    omega: float = 2.0 * math.pi * 5.0e9
    delta_omega: float = 2.0 * math.pi * 4.5e7
    phi0: Optional[float] = None
    sound_speed: float = 8433.0
    density: float = 2300.0
    binding_energy: float = 4.6 * ELECTRON_VOLT
    si_mass: float = SILICON_MASS

    def __post_init__(self):
        for name in ("eff_mass", "omega", "sound_speed", "density", "binding_energy", "si_mass"):
            if not getattr(self, name) > 0:
                raise DataError(f"{name} must be positive, got {getattr(self, name)}")
        if self.delta_omega < 0:
            raise DataError(f"delta_omega must be non-negative, got {self.delta_omega}")
        if self.phi0 is None:
            # fitted offset reported for the measured beams: 1.8 rad - delta_omega * 123 ns
            object.__setattr__(self, "phi0", 1.8 - self.delta_omega * 123.0e-9)

    @property
    def atom_count(self) -> float:
        lx, ly, lz = cuboid_dimensions(self)
        return self.density * lx * ly * lz / self.si_mass


def cuboid_dimensions(params: NanobeamParams) -> Tuple[float, float, float]:
    """
    Edge lengths (Lx, Ly, Lz) of the silicon cuboid carrying the longitudinal sine mode.

    Lz is half an acoustic wavelength; the square cross-section follows from the effective
    mass, which is half the cuboid mass for a sine mode.
    """
    lz = math.pi * params.sound_speed / params.omega
    lx = math.sqrt(2.0 * params.eff_mass / (params.density * lz))
    return lx, lx, lz


def critical_momentum(params: NanobeamParams) -> float:
    """Momentum transfer that ejects a silicon atom from the lattice."""
    return math.sqrt(2.0 * params.si_mass * params.binding_energy)


def transverse_factor(b: float) -> float:
    """E[(1 - cos(b k)) / k^2] for a standard normal k."""
    if b < 1.0e-4:
        return b**2 / 2.0 - b**4 / 8.0
    return math.sqrt(math.pi / 2.0) * b * float(erf_real(b / math.sqrt(2.0))) - 1.0 + math.exp(-(b**2) / 2.0)


def longitudinal_factor(a: float) -> float:
    """
    E[u^4 (1 + cos u) / (pi^2 - u^2)^2] for u ~ N(0, a^2).

    Closed form through sine_mode_kernel for moderate and large a; Gauss-Hermite for tiny a where
    the closed combination cancels catastrophically.
    """
    if a < SMALL_A:
        nodes, weights = np.polynomial.hermite.hermgauss(HERMITE_NODES)
        u = math.sqrt(2.0) * a * nodes
        values = u**4 * (1.0 + np.cos(u)) / (math.pi**2 - u**2) ** 2
        return float(np.dot(weights, values) / math.sqrt(math.pi))
    c = math.sqrt(math.pi / 2.0) / a
    kappa = 1.0 / (a * math.sqrt(2.0))
    h0 = sine_mode_kernel(a, 0.0)
    ha = sine_mode_kernel(a, a)
    a0 = 1.0 + math.exp(-(a**2) / 2.0)
    a1 = c / math.pi * (h0 + ha).imag
    zeta1 = math.pi / (a * math.sqrt(2.0))
    zeta2 = (math.pi - 1j * a**2) / (a * math.sqrt(2.0))
    x = -2.0 * zeta1 * h0 - 2.0 * zeta2 * ha + 2j / math.sqrt(math.pi) * a0
    b2 = -c * kappa * x.imag - math.pi * math.exp(-(math.pi**2) / (2.0 * a**2)) / (a * math.sqrt(2.0 * math.pi))
    a2 = (b2 + a1) / (2.0 * math.pi**2)
    return max(a0 - 2.0 * math.pi**2 * a1 + math.pi**4 * a2, 0.0)


def continuum_geometric_factor(params: NanobeamParams, sigma_q: float) -> float:
    lx, ly, lz = cuboid_dimensions(params)
    scale = sigma_q / HBAR
    prefactor = 4.0 * (params.density / ELECTRON_MASS) ** 2 * (HBAR / sigma_q) ** 4
    return prefactor * transverse_factor(lx * scale) * transverse_factor(ly * scale) * longitudinal_factor(lz * scale)


def atomic_geometric_factor(params: NanobeamParams, sigma_q: float) -> float:
    """Single-atom regime: kicks are kept only while every momentum component stays below q_c."""
    q_c = critical_momentum(params)
    ratio = q_c / (math.sqrt(2.0) * sigma_q)
    window = float(erf_real(ratio))
    truncated_second_moment = sigma_q**2 * window - math.sqrt(2.0 / math.pi) * sigma_q * q_c * math.exp(-(ratio**2))
    prefactor = params.atom_count * params.si_mass**2 / (4.0 * HBAR**2 * ELECTRON_MASS**2)
    return prefactor * window**2 * max(truncated_second_moment, 0.0)


def geometric_factor(params: NanobeamParams, sigma_q: float) -> float:
    """U_<(sigma) in 1/m^2, switching to the atomic regime below 5 angstrom."""
    if not sigma_q > 0:
        raise DataError(f"sigma_q must be positive, got {sigma_q}")
    if HBAR / sigma_q < ATOMIC_SWITCH_LENGTH:
        return atomic_geometric_factor(params, sigma_q)
    return continuum_geometric_factor(params, sigma_q)


def xi(params: NanobeamParams, sigma_q: float) -> float:
    return 2.0 * geometric_factor(params, sigma_q) * HBAR / (params.eff_mass * params.omega)


def coincidence_table(
    params: NanobeamParams, theta: float, t: float, tau_values: np.ndarray, sigma_q: float
) -> np.ndarray:
    """Probabilities of (pp, pm, mp, mm), shape (4, len(tau_values))."""
    if t < 0:
        raise DataError(f"t must be non-negative, got {t}")
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.nan_to_num(xi(params, sigma_q) * t / np.asarray(tau_values, dtype=float), nan=0.0)
    visibility = 4.0 / (2.0 + x) ** 4 * math.cos(theta - params.delta_omega * t - params.phi0)
    offset = 0.25 - x / (2.0 + x) ** 3
    norm = 1.0 - 4.0 * x / (2.0 + x) ** 3
    table = np.array([(offset + s1 * s2 * visibility) / norm for s1, s2 in (SIGNS[o] for o in OUTCOMES)])
    if np.any(table < -1.0e-12):
        raise NumericalError(f"negative coincidence probability at theta={theta}, t={t}, sigma_q={sigma_q:.6e}")
    return np.maximum(table, 0.0)


def likelihood_coincidence(
    outcome: str, context: Mapping[str, Any], params: NanobeamParams, mod: ModificationParams
) -> float:
    require_point_modification(mod)
    if outcome not in SIGNS:
        raise DataError(f"unknown coincidence outcome: {outcome!r}")
    table = coincidence_table(params, float(context["theta"]), float(context["t"]), np.array([mod.tau_e]), mod.sigma_q)
    return float(table[OUTCOMES.index(outcome), 0])


class NanobeamModel(ExperimentModel):
    """Coincidence likelihood; the context carries the phase theta (rad) and delay t (s)."""

    experiment_id = "nanobeam"

    def __init__(self, params: NanobeamParams = NanobeamParams()):
        self.params = params

    def outcome_space(self, context: Mapping[str, Any]) -> OutcomeSpace:
        if "theta" not in context or "t" not in context:
            raise DataError(f"nanobeam runs need theta and t in their context, got {dict(context)}")
        if context.get("protocol", "phase_sweep") not in PROTOCOLS:
            raise DataError(f"unknown nanobeam protocol: {context.get('protocol')!r}")
        return OutcomeSpace.discrete(OUTCOMES)

    def likelihood_table(
        self, outcomes: Sequence[str], context: Mapping[str, Any], tau_values: np.ndarray, sigma_q: float
    ) -> np.ndarray:
        table = coincidence_table(self.params, float(context["theta"]), float(context["t"]), tau_values, sigma_q)
        return table[[OUTCOMES.index(outcome) for outcome in outcomes]]

    def sample(self, context: Mapping[str, Any], mod: ModificationParams, n_runs: int, rng: np.random.Generator):
        require_point_modification(mod)
        probabilities = self.likelihood_table(OUTCOMES, context, np.array([mod.tau_e]), mod.sigma_q)[:, 0]
        counts = rng.multinomial(n_runs, probabilities / probabilities.sum())
        return [(outcome, int(count)) for outcome, count in zip(OUTCOMES, counts) if count > 0]


def fit_phase(data: Dataset, params: NanobeamParams, mod: ModificationParams, n_scan: int = 64) -> float:
    """Maximum-likelihood phase offset phi0 in [0, 2 pi), by a coarse scan and golden-section refinement."""
    require_point_modification(mod)
    if not len(data):
        raise DataError("cannot fit a phase offset to an empty dataset")

    def negative_log_likelihood(phi: float) -> float:
        model = NanobeamModel(NanobeamParams(**{**params.__dict__, "phi0": float(phi)}))
        value = dataset_log_likelihood_grid(model, data, np.array([mod.tau_e]), mod.sigma_q)[0]
        return -value if np.isfinite(value) else np.inf

    grid = np.linspace(0.0, 2.0 * math.pi, n_scan, endpoint=False)
    scores = np.array([negative_log_likelihood(phi) for phi in grid])
    best = int(np.argmin(scores))
    step = grid[1] - grid[0]
    bracket = (grid[best] - step, grid[best], grid[best] + step)
    phi = optimize.golden(negative_log_likelihood, brack=bracket, tol=1.0e-6)
    logger.debug(f"fitted phase offset {phi % (2.0 * math.pi):.6f} rad over {len(data)} runs")
    return float(phi % (2.0 * math.pi))
