"""
Four-step atomic quantum random walk under a classicalizing modification.

A Cs atom is split and displaced in an optical lattice four times and its final site is
recorded. The modification shrinks the coherence between neighbouring sites by the
reduction factor R(t), which morphs the site distribution from the quantum walk into the
classical binomial walk.
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Sequence, Tuple

import numpy as np

from core import (
    ATOMIC_MASS_UNIT,
    BOLTZMANN,
    HBAR,
    DataError,
    Dataset,
    ExperimentModel,
    ModificationParams,
    OutcomeSpace,
    amplification,
    require_point_modification,
)
from specfun import erf_real

logger = logging.getLogger(__name__)

SITES: Tuple[int, ...] = (-2, -1, 0, 1, 2)
PROTOCOLS: Tuple[str, ...] = ("full", "postselect_left", "postselect_right")
CESIUM_MASS = 132.905451933 * ATOMIC_MASS_UNIT


@dataclass(frozen=True)
class QrwParams:
    t_shift: float = 21.0e-6
    t_rest: float = 5.0e-6
    site_spacing: float = 433.0e-9
    atom_mass: float = CESIUM_MASS

    def __post_init__(self):
        for name in ("t_shift", "t_rest", "site_spacing", "atom_mass"):
            if not getattr(self, name) > 0:
                raise DataError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def walk_duration(self) -> float:
        """Four pulses and four displacements."""
        return 4.0 * (self.t_shift + self.t_rest)


def _coherence_deficits(params: QrwParams, sigma_q: float) -> Tuple[float, float]:
    """Deficits (displacement, rest) multiplying T_d and t_hold in the exponent of R."""
    x = params.site_spacing * sigma_q / (math.sqrt(2.0) * HBAR)
    if x < 1.0e-3:
        moving = x**2 / 3.0 - x**4 / 10.0
    else:
        moving = 1.0 - math.sqrt(math.pi) * float(erf_real(x)) / (2.0 * x)
    resting = -math.expm1(-(x**2))
    return moving, resting


def reduction_factor_grid(t_hold: float, params: QrwParams, tau_values: np.ndarray, sigma_q: float) -> np.ndarray:
    """R(t_hold) for many tau_e at once."""
    if t_hold < 0:
        raise DataError(f"t_hold must be non-negative, got {t_hold}")
    moving, resting = _coherence_deficits(params, sigma_q)
    exponent = amplification(params.atom_mass) * (2.0 * params.t_shift * moving + t_hold * resting)
    with np.errstate(divide="ignore", over="ignore"):
        return np.exp(-exponent / np.asarray(tau_values, dtype=float))


def reduction_factor(t_hold: float, params: QrwParams, mod: ModificationParams) -> float:
    require_point_modification(mod)
    return float(reduction_factor_grid(t_hold, params, np.array([mod.tau_e]), mod.sigma_q)[0])


def site_probabilities_grid(protocol: str, params: QrwParams, tau_values: np.ndarray, sigma_q: float) -> np.ndarray:
    """Site distribution over (-2, ..., 2), shape (5, len(tau_values))."""
    short = reduction_factor_grid(params.t_rest, params, tau_values, sigma_q)
    if protocol == "full":
        long = reduction_factor_grid(params.t_shift + 2.0 * params.t_rest, params, tau_values, sigma_q)
        ones = np.ones_like(short)
        return np.array(
            [
                ones / 16.0,
                0.25 + short / 4.0 + long / 8.0,
                0.375 - short / 4.0,
                0.25 - long / 8.0,
                ones / 16.0,
            ]
        )
    if protocol == "postselect_left":
        ones = np.ones_like(short)
        return np.array([ones / 8.0, 0.375 + short / 4.0, 0.375 - short / 4.0, ones / 8.0, 0.0 * ones])
    if protocol == "postselect_right":
        return site_probabilities_grid("postselect_left", params, tau_values, sigma_q)[::-1]
    raise DataError(f"unknown random walk protocol: {protocol!r}")


def site_probabilities(protocol: str, params: QrwParams, mod: ModificationParams) -> np.ndarray:
    require_point_modification(mod)
    return site_probabilities_grid(protocol, params, np.array([mod.tau_e]), mod.sigma_q)[:, 0]


def leggett_garg_lhs(params: QrwParams, mod: ModificationParams) -> float:
    """R(T_r) + R(T_d + 2 T_r); the inequality in modification form is violated when this is positive."""
    require_point_modification(mod)
    return reduction_factor(params.t_rest, params, mod) + reduction_factor(
        params.t_shift + 2.0 * params.t_rest, params, mod
    )


def leggett_garg_sum(params: QrwParams, mod: ModificationParams) -> float:
    """
    Signed site sum of the Leggett-Garg inequality, evaluated for the walker started in the lower
    hyperfine state (mirrored distributions), which equals a quarter of `leggett_garg_lhs`.
    """
    full = site_probabilities("full", params, mod)[::-1]
    left = site_probabilities("postselect_right", params, mod)
    right = site_probabilities("postselect_left", params, mod)
    signs = np.sign(np.array(SITES, dtype=float))
    return float(np.sum(signs * (full - 0.5 * (left + right))))


@dataclass(frozen=True)
class HeatingEstimate:
    energy_gain: float
    temperature_increase: float


def heating_check(params: QrwParams, mod: ModificationParams, duration: float, trapped: bool = True) -> HeatingEstimate:
    """
    Heating of an atom by isotropic Gaussian momentum kicks.

    Each kick transfers a momentum of variance sigma_q^2 per axis and kicks arrive at rate
    (m/m_e)^2 / tau_e, so dE/dt = 3 sigma_q^2 (m/m_e)^2 / (2 m tau_e). The gain is converted to a
    temperature by equipartition: E = 3 k_B T for an atom held in the lattice, where the potential
    energy takes an equal share, and E = 3 k_B T / 2 for a free atom.
    """
    require_point_modification(mod)
    if duration < 0:
        raise DataError(f"duration must be non-negative, got {duration}")
    rate = 3.0 * mod.sigma_q**2 * amplification(params.atom_mass) / (2.0 * params.atom_mass * mod.tau_e)
    energy = rate * duration
    degrees_of_freedom = 6.0 if trapped else 3.0
    return HeatingEstimate(energy_gain=energy, temperature_increase=2.0 * energy / (degrees_of_freedom * BOLTZMANN))


class QrwModel(ExperimentModel):
    """Final-site likelihood; the context carries the protocol tag."""

    experiment_id = "qrw"

    def __init__(self, params: QrwParams = QrwParams()):
        self.params = params

    def prior_candidates(self, data: Dataset) -> List[Dict[str, Any]]:
        """The full walk: two of its five sites carry no tau_e dependence."""
        return [{"protocol": "full"}]

    def outcome_space(self, context: Mapping[str, Any]) -> OutcomeSpace:
        if context.get("protocol", "full") not in PROTOCOLS:
            raise DataError(f"unknown random walk protocol: {context.get('protocol')!r}")
        return OutcomeSpace.discrete(SITES)

    def likelihood_table(
        self, outcomes: Sequence[int], context: Mapping[str, Any], tau_values: np.ndarray, sigma_q: float
    ) -> np.ndarray:
        table = site_probabilities_grid(context.get("protocol", "full"), self.params, tau_values, sigma_q)
        rows = [SITES.index(int(site)) for site in outcomes]
        return table[rows]

    def sample(self, context: Mapping[str, Any], mod: ModificationParams, n_runs: int, rng: np.random.Generator):
        probabilities = site_probabilities(context.get("protocol", "full"), self.params, mod)
        counts = rng.multinomial(n_runs, probabilities / probabilities.sum())
        return [(site, int(count)) for site, count in zip(SITES, counts) if count > 0]
