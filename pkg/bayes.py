"""
Bayesian falsification of a classicalizing modification on a logarithmic tau_e grid.

Densities are stored with respect to d tau_e; every integral is a trapezoid rule in
log10 tau_e, with the Jacobian tau_e ln 10 applied to the integrand.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, interpolate, optimize

from core import (
    HBAR,
    MIN_HBAR_OVER_SIGMA_Q,
    Dataset,
    DomainError,
    ExperimentModel,
    GridBoundaryError,
    NormalizationError,
    NumericalError,
    dataset_log_likelihood_grid,
)

logger = logging.getLogger(__name__)

LN10 = math.log(10.0)
FISHER_STEP = 1.0e-4
FISHER_EPSABS = 1.0e-8
DEFAULT_QUANTILE = 0.05
BOUNDARY_BINS = 2
BOUNDARY_MASS = 0.2
SCAN_POINTS = 60
SIGMA_RTOL = 1.0e-3
PLATEAU_RTOL = 1.0e-4

ProgressCallback = Callable[[int, int, float, float], None]


@dataclass(frozen=True)
class LogTauGrid:
    log10_start: float = -12.0
    log10_stop: float = 14.0
    points: int = 2400

    def __post_init__(self):
        if self.points < 100:
            raise DomainError(f"a log-tau grid needs at least 100 points, got {self.points}")
        if not self.log10_start < self.log10_stop:
            raise DomainError(f"grid range must be increasing, got [{self.log10_start}, {self.log10_stop}]")

    @property
    def log10_tau_values(self) -> np.ndarray:
        return np.linspace(self.log10_start, self.log10_stop, self.points)

    @property
    def tau_values(self) -> np.ndarray:
        return 10.0**self.log10_tau_values

    @property
    def spacing(self) -> float:
        return (self.log10_stop - self.log10_start) / (self.points - 1)

    def integrate(self, values: np.ndarray) -> float:
        """Integral over tau_e of a density given on the grid."""
        return float(integrate.trapezoid(np.asarray(values) * self.tau_values * LN10, dx=self.spacing))

    def cumulative(self, values: np.ndarray) -> np.ndarray:
        return integrate.cumulative_trapezoid(np.asarray(values) * self.tau_values * LN10, dx=self.spacing, initial=0.0)


@dataclass(frozen=True)
class DensityOnGrid:
    grid: LogTauGrid
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.points,):
            raise NumericalError(f"density has shape {values.shape}, grid has {self.grid.points} points")
        if np.any(values < 0) or np.any(np.isnan(values)):
            raise NumericalError("density values must be non-negative numbers")
        object.__setattr__(self, "values", values)

    @property
    def total(self) -> float:
        return self.grid.integrate(self.values)

    def normalize(self) -> "DensityOnGrid":
        total = self.total
        if not (total > 0 and math.isfinite(total)):
            raise NumericalError(f"density cannot be normalized, integral {total}")
        return DensityOnGrid(self.grid, self.values / total, normalized=True)


@dataclass
class MacroscopicityReport:
    """tau_m over the sigma_q scan and the macroscopicity it implies."""

    sigma_q_samples: List[float]
    tau_m_values: List[float]
    sigma_q_star: float
    tau_m_star: float
    mu_m: float
    boundary_maximum: bool = False
    quantile_level: float = DEFAULT_QUANTILE
    prior_contexts: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def hbar_over_sigma_q_star(self) -> float:
        return HBAR / self.sigma_q_star


def _require_normalized(density: DensityOnGrid):
    if not density.normalized:
        raise NumericalError("operation needs a normalized density")


def cdf(density: DensityOnGrid) -> np.ndarray:
    """Cumulative distribution on the grid, pinned to end at exactly one."""
    _require_normalized(density)
    cumulative = density.grid.cumulative(density.values)
    return cumulative / cumulative[-1]


def quantile(density: DensityOnGrid, p: float = DEFAULT_QUANTILE) -> float:
    """Smallest tau_e whose cumulative mass reaches p, interpolated linearly in log10 tau_e."""
    if not 0 < p < 1:
        raise DomainError(f"quantile level must lie in (0, 1), got {p}")
    cumulative = cdf(density)
    index = int(np.searchsorted(cumulative, p, side="left"))
    log10_tau = density.grid.log10_tau_values
    if index == 0:
        return float(10.0 ** log10_tau[0])
    lo, hi = cumulative[index - 1], cumulative[index]
    fraction = (p - lo) / (hi - lo) if hi > lo else 0.0
    return float(10.0 ** (log10_tau[index - 1] + fraction * (log10_tau[index] - log10_tau[index - 1])))


def odds_ratio(density: DensityOnGrid, tau_star: float) -> float:
    """Posterior mass below tau_star over the mass above it."""
    grid = density.grid
    if not grid.tau_values[0] <= tau_star <= grid.tau_values[-1]:
        raise DomainError(f"tau_star={tau_star:.3e} s lies outside the grid")
    cumulative = cdf(density)
    below = float(np.interp(math.log10(tau_star), grid.log10_tau_values, cumulative))
    if below >= 1.0 - 1.0e-15:
        return math.inf
    return below / (1.0 - below)


def tail_slopes(density: DensityOnGrid, decades: float = 1.0) -> Tuple[float, float]:
    """
    Log-log slopes of the density over the first and the last `decades` of the grid.

    A tail that vanishes to zero within the fit window counts as decaying infinitely fast.
    """
    log10_tau = density.grid.log10_tau_values
    slopes = []
    for window, fast in (
        (log10_tau <= log10_tau[0] + decades, math.inf),
        (log10_tau >= log10_tau[-1] - decades, -math.inf),
    ):
        values = density.values[window]
        if not np.all(values > 0):
            slopes.append(fast)
            continue
        slope, _ = np.polyfit(log10_tau[window], np.log10(values), 1)
        slopes.append(float(slope))
    return slopes[0], slopes[1]


def _fisher_terms(center: np.ndarray, plus: np.ndarray, minus: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    """Sum over outcome rows of (P+ - P-)^2 / (denominator^2 P), skipping outcomes with P <= 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(center > 0, (plus - minus) ** 2 / (denominator**2 * center), 0.0)
    return np.sum(terms, axis=0)


def fisher_information(
    model: ExperimentModel,
    context: Mapping[str, Any],
    sigma_q: float,
    grid: LogTauGrid,
    parametrization: str = "tau",
    step: float = FISHER_STEP,
) -> np.ndarray:
    """
    Fisher information on the grid, in ln tau_e ("tau") or in the rate lambda = 1/tau_e ("rate").

    Derivatives are central differences: relative step `step` in tau_e for the log
    parametrization, absolute step `step * lambda` in lambda for the rate parametrization.
    Models with a `fisher_grid_stride` above one are evaluated on a sub-grid and interpolated.
    """
    if parametrization not in ("tau", "rate"):
        raise DomainError(f"unknown parametrization: {parametrization!r}")
    stride = max(1, int(model.fisher_grid_stride))
    log10_tau = grid.log10_tau_values
    index = np.unique(np.r_[np.arange(0, grid.points, stride), grid.points - 1])
    information = _fisher_on(model, context, sigma_q, grid.tau_values[index], parametrization, step)
    if index.size == grid.points:
        return information
    if np.all(information > 0):
        spline = interpolate.CubicSpline(log10_tau[index], np.log(information))
        return np.exp(spline(log10_tau))
    # log-linear where the information underflows somewhere on the sub-grid
    floor = np.finfo(float).tiny
    values = np.exp(np.interp(log10_tau, log10_tau[index], np.log(np.maximum(information, floor))))
    return np.where(values > floor, values, 0.0)


def _fisher_on(
    model: ExperimentModel, context: Mapping[str, Any], sigma_q: float, tau: np.ndarray, parametrization: str, step: float
) -> np.ndarray:
    if parametrization == "tau":
        tau_plus, tau_minus = tau * math.exp(step), tau * math.exp(-step)
        denominator = 2.0 * step * np.ones_like(tau)
    else:
        rate = 1.0 / tau
        tau_plus, tau_minus = 1.0 / (rate * (1.0 + step)), 1.0 / (rate * (1.0 - step))
        denominator = 2.0 * step * rate
    stacked = np.concatenate([tau, tau_plus, tau_minus])

    def terms(outcomes: Sequence[Any]) -> np.ndarray:
        center, plus, minus = np.split(model.likelihood_table(outcomes, context, stacked, sigma_q), 3, axis=1)
        return _fisher_terms(center, plus, minus, denominator)

    space = model.outcome_space(context)
    if space.is_discrete:
        return terms(list(space.labels))
    cells = model.fisher_outcomes(context)
    if cells is not None:
        return terms(list(cells))

    lo, hi = model.integration_interval(context)
    points = [p for p in model.quadrature_points(context, sigma_q) if lo < p < hi]
    value, error = integrate.quad_vec(
        lambda m: terms([m]), lo, hi, epsabs=FISHER_EPSABS, epsrel=1.0e-6, points=points or None
    )
    logger.debug(f"Fisher quadrature over [{lo}, {hi}] with breakpoints {points}: max error estimate {error:.3e}")
    return np.asarray(value)


def jeffreys_prior(
    model: ExperimentModel,
    context: Mapping[str, Any],
    sigma_q: float,
    grid: LogTauGrid = LogTauGrid(),
    parametrization: str = "tau",
) -> DensityOnGrid:
    """
    Square root of the Fisher information, as a normalized density in tau_e.

    In the rate parametrization the density in lambda is mapped back with |d lambda / d tau| = 1/tau^2,
    so both parametrizations must agree up to discretization error.
    """
    information = np.maximum(fisher_information(model, context, sigma_q, grid, parametrization), 0.0)
    tau = grid.tau_values
    if parametrization == "tau":
        values = np.sqrt(information) / tau
    else:
        values = np.sqrt(information) / tau**2
    raw = DensityOnGrid(grid, values)
    small_slope, large_slope = tail_slopes(raw)
    total = raw.total
    if not (total > 0 and math.isfinite(total)):
        raise NormalizationError(
            f"Jeffreys prior for {model.experiment_id} in context {dict(context)} vanishes", small_slope, large_slope
        )
    if large_slope > -1.0 or small_slope <= -1.0:
        raise NormalizationError(
            f"Jeffreys prior for {model.experiment_id} in context {dict(context)} is not normalizable",
            small_slope,
            large_slope,
        )
    return raw.normalize()


def _check_boundary(density: DensityOnGrid):
    weighted = density.values * density.grid.tau_values * LN10 * density.grid.spacing
    edge = weighted[:BOUNDARY_BINS].sum() + weighted[-BOUNDARY_BINS:].sum()
    share = edge / weighted.sum()
    if share > BOUNDARY_MASS:
        raise GridBoundaryError(
            f"{share:.0%} of the posterior mass sits in the outermost grid bins; extend the log-tau grid "
            f"beyond [{density.grid.log10_start}, {density.grid.log10_stop}]"
        )


def posterior_update(prior: DensityOnGrid, model: ExperimentModel, data: Dataset, sigma_q: float) -> DensityOnGrid:
    _require_normalized(prior)
    if not len(data):
        return prior
    log_likelihood = dataset_log_likelihood_grid(model, data, prior.grid.tau_values, sigma_q)
    with np.errstate(divide="ignore"):
        log_posterior = np.log(prior.values) + log_likelihood
    peak = np.max(log_posterior)
    if not math.isfinite(peak):
        raise NumericalError(
            f"every grid point is excluded by the {model.experiment_id} data at sigma_q={sigma_q:.6e} kg m/s"
        )
    posterior = DensityOnGrid(prior.grid, np.exp(log_posterior - peak)).normalize()
    _check_boundary(posterior)
    return posterior


def condition_on_heating(log_joint: np.ndarray, log_marginal: np.ndarray) -> np.ndarray:
    """
    log P(d | D_heat) = log P(d, D_heat) - log P(D_heat), broadcasting over outcome rows.

    A vanishing marginal means the modification cannot produce the observed survival; those
    columns get log-likelihood -inf, which excludes them as ordinary evidence.
    """
    log_joint = np.asarray(log_joint, dtype=float)
    log_marginal = np.asarray(log_marginal, dtype=float)
    if np.any(np.isnan(log_marginal)) or np.any(np.isnan(log_joint)):
        raise NumericalError("heating conditioning received NaN probabilities")
    if np.any(log_marginal == np.inf):
        raise NumericalError("heating marginal is infinite")
    impossible = log_marginal == -np.inf
    if np.any(impossible):
        logger.debug(f"{int(impossible.sum())} grid points cannot reproduce the observed survival")
    with np.errstate(invalid="ignore"):
        conditioned = log_joint - log_marginal
    return np.where(impossible, -np.inf, conditioned)


def select_prior_protocol(
    model: ExperimentModel,
    candidates: Sequence[Mapping[str, Any]],
    sigma_q: float,
    grid: LogTauGrid = LogTauGrid(),
    p: float = DEFAULT_QUANTILE,
) -> Tuple[Dict[str, Any], DensityOnGrid, float]:
    """
    Pick the least favorable measurement context: the one whose Jeffreys prior alone excludes the least.

    Returns the context, its prior and the prior-only tau_m. Contexts whose prior is not
    normalizable (no sensitivity to tau_e at all) are skipped.
    """
    best: Optional[Tuple[Dict[str, Any], DensityOnGrid, float]] = None
    failures = []
    for context in candidates:
        try:
            prior = jeffreys_prior(model, context, sigma_q, grid)
        except NormalizationError as e:
            failures.append(e)
            logger.warning(f"skipping prior context {dict(context)}: {e}")
            continue
        tau_m = quantile(prior, p)
        if best is None or tau_m < best[2]:
            best = (dict(context), prior, tau_m)
    if best is None:
        raise failures[0] if failures else NumericalError(f"no prior context available for {model.experiment_id}")
    return best


def tau_m_at(
    model: ExperimentModel,
    data: Dataset,
    sigma_q: float,
    grid: LogTauGrid = LogTauGrid(),
    p: float = DEFAULT_QUANTILE,
    prior_context: Optional[Mapping[str, Any]] = None,
) -> Tuple[float, Dict[str, Any]]:
    """tau_m(sigma_q) and the context that seeded the prior."""
    candidates = [dict(prior_context)] if prior_context is not None else model.prior_candidates(data)
    context, prior, _ = select_prior_protocol(model, candidates, sigma_q, grid, p)
    return quantile(posterior_update(prior, model, data, sigma_q), p), context


def _edge_maximum(tau_values: Sequence[float], best: int) -> bool:
    """
    True when the scan still rises into the edge holding its maximum. A plateau that stays level up to the
    edge is a saturated maximum, not a truncated one.
    """
    if best == 0:
        neighbour = tau_values[1]
    elif best == len(tau_values) - 1:
        neighbour = tau_values[-2]
    else:
        return False
    return tau_values[best] > neighbour * (1.0 + PLATEAU_RTOL)


def maximize_macroscopicity(
    model: ExperimentModel,
    data: Dataset,
    grid: LogTauGrid = LogTauGrid(),
    sigma_q_range: Tuple[float, float] = (HBAR / 1.0e-3, HBAR / MIN_HBAR_OVER_SIGMA_Q),
    n_scan: int = SCAN_POINTS,
    p: float = DEFAULT_QUANTILE,
    prior_context: Optional[Mapping[str, Any]] = None,
    workers: int = 1,
    progress: Optional[ProgressCallback] = None,
) -> MacroscopicityReport:
    """
    Maximize log10(tau_m / 1 s) over sigma_q: a log-spaced scan, then golden-section refinement in
    ln sigma_q around the best scan point.
    """
    lo, hi = sorted(sigma_q_range)
    if not lo > 0:
        raise DomainError(f"sigma_q range must be positive, got {sigma_q_range}")
    if HBAR / hi < MIN_HBAR_OVER_SIGMA_Q * (1 - 1e-12):
        raise DomainError(f"hbar/sigma_q = {HBAR / hi:.3e} m is below the 10 fm bound")
    if n_scan < 3:
        raise DomainError(f"a sigma_q scan needs at least 3 points, got {n_scan}")
    samples = np.geomspace(lo, hi, n_scan)

    def evaluate(index_sigma: Tuple[int, float]) -> Tuple[float, Dict[str, Any]]:
        index, sigma_q = index_sigma
        tau_m, context = tau_m_at(model, data, sigma_q, grid, p, prior_context)
        if progress is not None:
            progress(index + 1, n_scan, sigma_q, tau_m)
        return tau_m, context

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(evaluate, enumerate(samples)))
    else:
        results = [evaluate(item) for item in enumerate(samples)]
    scan = {float(sigma_q): result for sigma_q, result in zip(samples, results)}
    tau_values = [tau for tau, _ in results]
    best = int(np.argmax(tau_values))
    boundary = _edge_maximum(tau_values, best)

    if boundary:
        logger.info(f"tau_m is maximal at the edge of the sigma_q range (hbar/sigma_q={HBAR / samples[best]:.3e} m)")
    elif 0 < best < n_scan - 1 and tau_values[best] > max(tau_values[best - 1], tau_values[best + 1]):

        def negative_log_tau(log_sigma: float) -> float:
            sigma_q = math.exp(log_sigma)
            if sigma_q not in scan:
                scan[sigma_q] = tau_m_at(model, data, sigma_q, grid, p, prior_context)
            return -math.log(scan[sigma_q][0])

        bracket = tuple(math.log(samples[i]) for i in (best - 1, best, best + 1))
        # golden's tolerance is relative to |ln sigma_q|
        tolerance = SIGMA_RTOL / (2.0 * max(abs(bracket[1]), 1.0))
        negative_log_tau(optimize.golden(negative_log_tau, brack=bracket, tol=tolerance))

    sigma_list = sorted(scan)
    sigma_star = max(sigma_list, key=lambda s: scan[s][0])
    tau_star = scan[sigma_star][0]
    logger.info(f"mu_m={math.log10(tau_star):.3f} at hbar/sigma_q={HBAR / sigma_star:.3e} m")
    return MacroscopicityReport(
        sigma_q_samples=sigma_list,
        tau_m_values=[scan[s][0] for s in sigma_list],
        sigma_q_star=sigma_star,
        tau_m_star=tau_star,
        mu_m=math.log10(tau_star),
        boundary_maximum=boundary,
        quantile_level=p,
        prior_contexts=[scan[s][1] for s in sigma_list],
    )
