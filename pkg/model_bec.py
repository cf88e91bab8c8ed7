"""
Ramsey interferometry with a two-mode Bose-Einstein condensate.

The modification acts on the collective spin of N0 = 2 J0 atoms through phase flips (double
well), spin flips (single well) and particle loss. The measured number imbalance m follows a
theta-function density whose nome g(t) collects every source of phase spreading.
"""
import logging
import math
from abc import abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from bayes import condition_on_heating
from core import (
    ATOMIC_MASS_UNIT,
    HBAR,
    DataError,
    Dataset,
    ExperimentModel,
    ModificationParams,
    OutcomeSpace,
    amplification,
    require_point_modification,
)
from specfun import log_binomial, theta3, theta3_integral

logger = logging.getLogger(__name__)

RUBIDIUM_MASS = 86.909180527 * ATOMIC_MASS_UNIT
# relative weight below which a surviving-J term is dropped from the loss mixture
MIXTURE_CUTOFF = 1.0e-12
BLUR_NODES = 9
# outcome-by-pair cells evaluated per batch of the loss mixture
PAIR_CHUNK = 400_000
MAX_PRIOR_CANDIDATES = 5
DEFAULT_PRIOR_TIME = 10.0e-3
FISHER_GRID_STRIDE = 16

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class BecParams:
    n_atoms: int = 1200
    delta_x: float = 2.0e-6
    omega_x: float = 2.0 * math.pi * 1.44e3
    omega_y: float = 2.0 * math.pi * 1.84e3
    omega_z: float = 2.0 * math.pi * 13.2
    epsilon_over_hbar: float = 2.0 * math.pi * 2.19e3
    zeta: float = 4.0
    jz_var0: Optional[float] = None
    jy_var0: Optional[float] = None
    atom_mass: float = RUBIDIUM_MASS
    heat_survival_fraction: float = 0.9
    blur_width: float = 0.0

    def __post_init__(self):
        if self.n_atoms < 2 or self.n_atoms % 2:
            raise DataError(f"n_atoms must be an even number >= 2, got {self.n_atoms}")
        for name in ("delta_x", "omega_x", "omega_y", "omega_z", "atom_mass"):
            if not getattr(self, name) > 0:
                raise DataError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("epsilon_over_hbar", "zeta", "blur_width"):
            if getattr(self, name) < 0:
                raise DataError(f"{name} must be non-negative, got {getattr(self, name)}")
        if not 0 < self.heat_survival_fraction <= 1:
            raise DataError(f"heat_survival_fraction must lie in (0, 1], got {self.heat_survival_fraction}")
        if self.jz_var0 is None:
            object.__setattr__(self, "jz_var0", 0.41**2 * self.j0 / 2.0)
        if self.jy_var0 is None:
            object.__setattr__(self, "jy_var0", self.j0**2 / (4.0 * self.jz_var0))
        if self.jz_var0 * self.jy_var0 < self.j0**2 / 4.0 * (1.0 - 1.0e-9):
            raise DataError(
                f"<Jz^2>_0 <Jy^2>_0 = {self.jz_var0 * self.jy_var0:.6g} violates the uncertainty bound J0^2/4"
            )

    @property
    def j0(self) -> int:
        return self.n_atoms // 2

    @property
    def j_min(self) -> int:
        """Smallest collective spin compatible with the observed survival."""
        return int(math.ceil(self.heat_survival_fraction * self.j0 - 1.0e-9))


@dataclass(frozen=True)
class BecRates:
    """Modification rates in 1/s; fields may be arrays over tau_e."""

    gamma_p: ArrayLike = 0.0
    gamma_s: ArrayLike = 0.0
    gamma_l: ArrayLike = 0.0
    gamma_c: ArrayLike = 0.0


def harmonic_mode_widths(params: BecParams) -> Tuple[float, float]:
    return _width(params, params.omega_x), _width(params, params.omega_y)


def _width(params: BecParams, omega: float) -> float:
    return math.sqrt(HBAR / (2.0 * params.atom_mass * omega))


def _gaussian_expectation(function, sigma_q: float) -> float:
    """E[function(q)] for an even function and q ~ N(0, sigma_q^2), integrated in units of sigma_q."""
    norm = 1.0 / math.sqrt(2.0 * math.pi)

    def integrand(k):
        return norm * math.exp(-0.5 * k**2) * function(sigma_q * k)

    value, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=1.0e-10, limit=200)
    return 2.0 * value


def _double_well_coefficients(params: BecParams, sigma_q: float) -> Tuple[float, float]:
    """(Gamma_P, Gamma_L) times tau_e."""
    sigma_x, sigma_y = harmonic_mode_widths(params)
    prefactor = amplification(params.atom_mass)
    root = math.sqrt((1.0 + 2.0 * (sigma_q * sigma_x / HBAR) ** 2) * (1.0 + 2.0 * (sigma_q * sigma_y / HBAR) ** 2))
    exponent = params.delta_x**2 * sigma_q**2 / (4.0 * sigma_q**2 * sigma_x**2 + 2.0 * HBAR**2)
    gamma_p = 2.0 * prefactor * -math.expm1(-exponent) / root
    gamma_l = prefactor * (1.0 - 1.0 / root)
    return gamma_p, gamma_l


def coherence_rate(params: BecParams, sigma_q: float) -> float:
    """
    Gamma_C times tau_e from its defining integral over the momentum kernel.

    With Gaussian modes the kernel factorizes per axis; each factor is an adaptive
    oscillatory quadrature.
    """
    sigma_x, sigma_y = harmonic_mode_widths(params)
    overlap_x = _oscillatory_overlap(sigma_q, sigma_x, params.delta_x)
    overlap_y = _gaussian_expectation(lambda q: math.exp(-((q * sigma_y / HBAR) ** 2)), sigma_q)
    return amplification(params.atom_mass) * (1.0 - overlap_x * overlap_y)


def _oscillatory_overlap(sigma_q: float, width: float, separation: float) -> float:
    """E[exp(-q^2 width^2 / hbar^2) cos(q separation / hbar)] over the Gaussian kernel."""
    scale = sigma_q / HBAR
    norm = 2.0 / (math.sqrt(2.0 * math.pi))

    def envelope(k):
        return norm * math.exp(-0.5 * k**2 - (k * scale * width) ** 2)

    value, _ = integrate.quad(envelope, 0.0, np.inf, weight="cos", wvar=scale * separation, epsabs=1.0e-13, limit=200)
    return value


def rates_double_well(params: BecParams, mod: ModificationParams) -> BecRates:
    require_point_modification(mod)
    return rates_double_well_grid(params, np.array([mod.tau_e]), mod.sigma_q, with_coherence=True)


def rates_double_well_grid(
    params: BecParams, tau_values: np.ndarray, sigma_q: float, with_coherence: bool = False
) -> BecRates:
    gamma_p, gamma_l = _double_well_coefficients(params, sigma_q)
    gamma_c = coherence_rate(params, sigma_q) if with_coherence else 0.0
    inverse = 1.0 / np.asarray(tau_values, dtype=float)
    return BecRates(gamma_p=gamma_p * inverse, gamma_s=0.0 * inverse, gamma_l=gamma_l * inverse, gamma_c=gamma_c * inverse)


def spin_flip_rate(params: BecParams, sigma_q: float) -> float:
    """
    Gamma_S times tau_e for the two lowest harmonic eigenstates of a single well.

    The transition element <0|W(q)|1> is excited along x; the y and z factors are ground-state
    overlaps. Each axis is integrated separately against the Gaussian kernel.
    """
    sigma_x, sigma_y = harmonic_mode_widths(params)
    sigma_z = _width(params, params.omega_z)
    along_x = _gaussian_expectation(
        lambda q: (q * sigma_x / HBAR) ** 2 * math.exp(-((q * sigma_x / HBAR) ** 2)), sigma_q
    )
    along_y = _gaussian_expectation(lambda q: math.exp(-((q * sigma_y / HBAR) ** 2)), sigma_q)
    along_z = _gaussian_expectation(lambda q: math.exp(-((q * sigma_z / HBAR) ** 2)), sigma_q)
    return 4.0 * amplification(params.atom_mass) * along_x * along_y * along_z


def rates_single_well(params: BecParams, mod: ModificationParams) -> BecRates:
    require_point_modification(mod)
    return rates_single_well_grid(params, np.array([mod.tau_e]), mod.sigma_q)


def rates_single_well_grid(params: BecParams, tau_values: np.ndarray, sigma_q: float) -> BecRates:
    inverse = 1.0 / np.asarray(tau_values, dtype=float)
    zero = 0.0 * inverse
    return BecRates(gamma_p=zero, gamma_s=spin_flip_rate(params, sigma_q) * inverse, gamma_l=zero, gamma_c=zero)


def g_factor_double_well(params: BecParams, rates: BecRates, t: float) -> ArrayLike:
    if t < 0:
        raise DataError(f"t must be non-negative, got {t}")
    j0 = params.j0
    exponent = (
        -params.jy_var0 / (2.0 * j0**2)
        - np.asarray(rates.gamma_p) * t / 2.0
        - np.asarray(rates.gamma_l) * t / (4.0 * j0)
        - 2.0 * params.zeta**2 * t**2 * (params.jz_var0 + np.asarray(rates.gamma_l) * j0 * t / 6.0)
    )
    return np.exp(exponent)


def g_factor_single_well(params: BecParams, rates: BecRates, t: float) -> ArrayLike:
    if t < 0:
        raise DataError(f"t must be non-negative, got {t}")
    j = params.j0
    exponent = -params.jy_var0 / (2.0 * j**2) - 2.0 * params.zeta**2 * t**2 * (
        params.jz_var0 + np.asarray(rates.gamma_s) * j**2 * t / 6.0
    )
    return np.exp(exponent)


def jz_variance_single_well(params: BecParams, rates: BecRates, t: float) -> ArrayLike:
    """<Jz^2>_t under spin-flip diffusion, averaged over many rotation periods."""
    j = params.j0
    decay = np.exp(-1.5 * np.asarray(rates.gamma_s) * t)
    return (params.jz_var0 + j**2) / 3.0 + (2.0 * params.jz_var0 - j**2) / 3.0 * decay


def jy_spread_single_well(params: BecParams, rates: BecRates, t: float, jy_spread0: float) -> ArrayLike:
    """Short-time variance of j_y under shearing plus spin-flip diffusion."""
    j = params.j0
    return jy_spread0 + 4.0 * params.zeta**2 * j**2 * t**2 * (params.jz_var0 + np.asarray(rates.gamma_s) * j**2 * t / 6.0)


def rescaled_variance(variance_j0: float, j0: int, j: int) -> float:
    """Second moment of a spin component after losing 2 (j0 - j) atoms, from its value at j0."""
    return j**2 * (variance_j0 / j0**2 + (j0 - j) / (2.0 * j0 * j))


def p_j(m: ArrayLike, j: int, params: BecParams, g: ArrayLike, t: float) -> ArrayLike:
    """
    Theta-function density of the imbalance m for collective spin J.

    m and g broadcast against each other; the density vanishes outside |m| < J.
    """
    if j < 1:
        raise DataError(f"J must be >= 1, got {j}")
    m_arr = np.asarray(m, dtype=float)
    inside = np.abs(m_arr) < j
    ratio = np.clip(m_arr / j, -1.0, 1.0)
    phase = np.arcsin(ratio)
    rotation = params.epsilon_over_hbar * t
    with np.errstate(divide="ignore"):
        envelope = np.where(inside, 1.0 / (2.0 * math.pi * np.sqrt(np.maximum(j**2 - m_arr**2, 0.0))), 0.0)
    values = envelope * (theta3((phase - rotation) / 2.0, g) + theta3((math.pi - phase - rotation) / 2.0, g))
    return values if np.ndim(values) else float(values)


def cell_probability(lo: ArrayLike, hi: ArrayLike, j: ArrayLike, g: ArrayLike, rotation: float) -> np.ndarray:
    """Probability that the imbalance of spin J lies in [lo, hi], exact for the theta-function density; J may be an array."""
    j = np.asarray(j, dtype=float)
    lo = np.clip(np.asarray(lo, dtype=float), -j, j)
    hi = np.clip(np.asarray(hi, dtype=float), -j, j)
    alpha = np.arcsin(lo / j)
    beta = np.arcsin(hi / j)
    first = theta3_integral((beta - rotation) / 2.0, g) - theta3_integral((alpha - rotation) / 2.0, g)
    second = theta3_integral((math.pi - alpha - rotation) / 2.0, g) - theta3_integral((math.pi - beta - rotation) / 2.0, g)
    return np.maximum((first + second) / math.pi, 0.0)


def bin_probabilities(edges: np.ndarray, j: int, params: BecParams, g: float, t: float) -> np.ndarray:
    """Probabilities of consecutive bins [edges[i], edges[i+1]] for spin J."""
    edges = np.asarray(edges, dtype=float)
    return cell_probability(edges[:-1], edges[1:], j, g, params.epsilon_over_hbar * t)


def loss_log_weights(params: BecParams, gamma_l: np.ndarray, t: float, j_values: np.ndarray) -> np.ndarray:
    """
    Log binomial weights of J survivors out of J0, per-unit survival exp(-Gamma_L t).

    Shape (len(j_values), len(gamma_l)).
    """
    j0 = params.j0
    decay = np.asarray(gamma_l, dtype=float) * t
    j_col = np.asarray(j_values)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        lost = np.log(-np.expm1(-decay))[None, :]
        lost_term = np.where(j_col == j0, 0.0, (j0 - j_col) * lost)
    return log_binomial(j0, np.asarray(j_values))[:, None] - j_col * decay[None, :] + lost_term


def heating_marginal(params: BecParams, rates: BecRates, t: float) -> np.ndarray:
    """log P(D_heat): probability that at least j_min of J0 units survive."""
    j_values = np.arange(params.j_min, params.j0 + 1)
    return logsumexp(loss_log_weights(params, rates.gamma_l, t, j_values), axis=0)


def _cell_density(m: np.ndarray, j: ArrayLike, g: np.ndarray, rotation: float, blur_width: float) -> np.ndarray:
    """
    Unit-cell averaged density, optionally convolved with a Gaussian detector response.

    j broadcasts against m and g; J = 0 (all atoms lost) is a point mass at m = 0.
    """
    j = np.asarray(j, dtype=float)
    empty = j == 0
    safe_j = np.where(empty, 1.0, j)

    def cells(center: np.ndarray) -> np.ndarray:
        probability = cell_probability(center - 0.5, center + 0.5, safe_j, g, rotation)
        if np.any(empty):
            atom = np.where(np.abs(center) < 0.5, 1.0, np.where(np.abs(center) == 0.5, 0.5, 0.0))
            probability = np.where(empty, atom, probability)
        return probability

    if blur_width <= 0:
        return cells(m)
    nodes, weights = np.polynomial.hermite.hermgauss(BLUR_NODES)
    total = 0.0
    for node, weight in zip(nodes, weights):
        total = total + weight / math.sqrt(math.pi) * cells(m + math.sqrt(2.0) * blur_width * node)
    return total


class BecModel(ExperimentModel):
    """
    Imbalance likelihood; the context carries the free evolution time t in seconds.

    Integer imbalances are assigned the theta-function density averaged over the unit
    cell centred on them, which keeps the likelihood finite at m = +-J0.
    """

    fisher_grid_stride = FISHER_GRID_STRIDE

    def __init__(self, params: BecParams = BecParams()):
        self.params = params

    @abstractmethod
    def rates_grid(self, tau_values: np.ndarray, sigma_q: float) -> BecRates:
        ...

    @abstractmethod
    def g_factor(self, rates: BecRates, t: float) -> np.ndarray:
        """Nome of the theta-function density, one entry per rate."""

    def outcome_space(self, context: Mapping[str, Any]) -> OutcomeSpace:
        self._time(context)
        return OutcomeSpace.continuous(-self.params.j0, self.params.j0)

    def prior_candidates(self, data: Dataset) -> List[Dict[str, Any]]:
        """A few delay times spread over the dataset; t = 0 carries no information on tau_e."""
        times = sorted({self._time(context) for context in data.contexts()} - {0.0})
        if not times:
            return [{"t": DEFAULT_PRIOR_TIME}]
        picks = np.unique(np.linspace(0, len(times) - 1, min(MAX_PRIOR_CANDIDATES, len(times))).round().astype(int))
        return [{"t": times[i]} for i in picks]

    def integration_interval(self, context: Mapping[str, Any]) -> Tuple[float, float]:
        return -self.params.j0 - 0.5, self.params.j0 + 0.5

    def fisher_outcomes(self, context: Mapping[str, Any]) -> Sequence[float]:
        """Integer imbalances; their unit cells tile the integration interval."""
        self._time(context)
        return np.arange(-self.params.j0, self.params.j0 + 1, dtype=float)

    def quadrature_points(self, context: Mapping[str, Any], sigma_q: float) -> Sequence[float]:
        ridge = self.params.j0 * math.sin(self.params.epsilon_over_hbar * self._time(context))
        return sorted({ridge, -ridge}) if abs(ridge) < self.params.j0 - 1 else ()

    @staticmethod
    def _time(context: Mapping[str, Any]) -> float:
        t = float(context.get("t", float("nan")))
        if not t >= 0:
            raise DataError(f"BEC runs need a non-negative free evolution time, got {context.get('t')!r}")
        return t

    def sample(self, context: Mapping[str, Any], mod: ModificationParams, n_runs: int, rng: np.random.Generator):
        """
        Draw integer imbalances: survivors J from the conditioned loss mixture, then m = J sin(phi)
        rounded to the nearest atom-pair count, which is the event the cell-averaged likelihood scores.
        """
        require_point_modification(mod)
        t = self._time(context)
        rates = self.rates_grid(np.array([mod.tau_e]), mod.sigma_q)
        g = float(self.g_factor(rates, t)[0])
        j_values, probabilities = self.survivor_distribution(rates, t)
        survivors = rng.choice(j_values, size=n_runs, p=probabilities)
        spread = math.sqrt(-2.0 * math.log(g))
        phases = self.params.epsilon_over_hbar * t + spread * rng.standard_normal(n_runs)
        imbalances = survivors * np.sin(phases)
        if self.params.blur_width > 0:
            imbalances = imbalances + self.params.blur_width * rng.standard_normal(n_runs)
        imbalances = np.clip(np.rint(imbalances), -self.params.j0, self.params.j0)
        return [(float(m), 1) for m in imbalances]

    def survivor_distribution(self, rates: BecRates, t: float) -> Tuple[np.ndarray, np.ndarray]:
        return np.array([self.params.j0]), np.array([1.0])


class BecDoubleWellModel(BecModel):
    """Double well: phase flips plus particle loss, conditioned on at most 10% loss."""

    experiment_id = "bec_double_well"
    supports_heating_conditioning = True

    def rates_grid(self, tau_values: np.ndarray, sigma_q: float) -> BecRates:
        return rates_double_well_grid(self.params, tau_values, sigma_q)

    def g_factor(self, rates: BecRates, t: float) -> np.ndarray:
        return np.atleast_1d(g_factor_double_well(self.params, rates, t))

    def survivor_distribution(self, rates: BecRates, t: float) -> Tuple[np.ndarray, np.ndarray]:
        j_values = np.arange(self.params.j_min, self.params.j0 + 1)
        log_w = loss_log_weights(self.params, rates.gamma_l, t, j_values)[:, 0]
        weights = np.exp(log_w - logsumexp(log_w))
        return j_values, weights / weights.sum()

    def joint_log_table(
        self, outcomes: Sequence[float], t: float, tau_values: np.ndarray, sigma_q: float, j_lowest: Optional[int] = None
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        log P(m, D_heat) and log P(D_heat), shapes (len(outcomes), len(tau)) and (len(tau),).

        D_heat is the event that at least `j_lowest` units survive, by default the observed
        survival window; `j_lowest=0` gives the unconditioned mixture including the empty trap.
        """
        params = self.params
        rates = self.rates_grid(tau_values, sigma_q)
        g = self.g_factor(rates, t)
        j_values = np.arange(params.j_min if j_lowest is None else j_lowest, params.j0 + 1)
        log_w = loss_log_weights(params, rates.gamma_l, t, j_values)
        log_marginal = logsumexp(log_w, axis=0)
        with np.errstate(invalid="ignore"):
            relative = np.where(np.isfinite(log_marginal)[None, :], np.exp(log_w - log_marginal[None, :]), 0.0)
        # (tau, J) pairs that matter, ordered by tau column so each column is one contiguous run
        columns, rows = np.nonzero(relative.T > MIXTURE_CUTOFF)
        m = np.asarray(outcomes, dtype=float)[:, None]
        joint = np.zeros((m.shape[0], g.shape[0]))
        rotation = params.epsilon_over_hbar * t
        step = max(1, PAIR_CHUNK // max(m.shape[0], 1))
        for start in range(0, columns.size, step):
            c, r = columns[start : start + step], rows[start : start + step]
            density = _cell_density(m, j_values[r][None, :], g[None, c], rotation, params.blur_width)
            weighted = density * relative[r, c][None, :]
            heads = np.flatnonzero(np.r_[True, c[1:] != c[:-1]])
            joint[:, c[heads]] += np.add.reduceat(weighted, heads, axis=1)
        with np.errstate(divide="ignore"):
            return np.log(joint) + log_marginal[None, :], log_marginal

    def likelihood_table(
        self, outcomes: Sequence[float], context: Mapping[str, Any], tau_values: np.ndarray, sigma_q: float
    ) -> np.ndarray:
        log_joint, log_marginal = self.joint_log_table(outcomes, self._time(context), np.asarray(tau_values), sigma_q)
        return np.exp(condition_on_heating(log_joint, log_marginal))

    def unconditioned_table(
        self, outcomes: Sequence[float], context: Mapping[str, Any], tau_values: np.ndarray, sigma_q: float
    ) -> np.ndarray:
        """Imbalance likelihood ignoring the observed survival, summed over every J from 0 to J0."""
        log_joint, _ = self.joint_log_table(outcomes, self._time(context), np.asarray(tau_values), sigma_q, j_lowest=0)
        return np.exp(log_joint)


class BecSingleWellModel(BecModel):
    """Single well: spin flips enhance the interaction-induced dispersion; no loss channel."""

    experiment_id = "bec_single_well"

    def rates_grid(self, tau_values: np.ndarray, sigma_q: float) -> BecRates:
        return rates_single_well_grid(self.params, tau_values, sigma_q)

    def g_factor(self, rates: BecRates, t: float) -> np.ndarray:
        return np.atleast_1d(g_factor_single_well(self.params, rates, t))

    def likelihood_table(
        self, outcomes: Sequence[float], context: Mapping[str, Any], tau_values: np.ndarray, sigma_q: float
    ) -> np.ndarray:
        t = self._time(context)
        g = self.g_factor(self.rates_grid(np.asarray(tau_values), sigma_q), t)
        m = np.asarray(outcomes, dtype=float)[:, None]
        return _cell_density(m, self.params.j0, g[None, :], self.params.epsilon_over_hbar * t, self.params.blur_width)


def likelihood_bec(m: float, context: Mapping[str, Any], mod: ModificationParams, params: BecParams = BecParams()) -> float:
    """Heating-conditioned imbalance likelihood of the double-well experiment at a single point."""
    require_point_modification(mod)
    model = BecDoubleWellModel(params)
    return float(model.likelihood_table([m], context, np.array([mod.tau_e]), mod.sigma_q)[0, 0])
