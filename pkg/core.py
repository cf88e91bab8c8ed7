"""
Domain types shared by the likelihood models and the inference engine.

All quantities are SI: tau_e in seconds, sigma_q in kg m/s, lengths in metres.
"""
from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import constants

logger = logging.getLogger(__name__)

HBAR = constants.hbar
ELECTRON_MASS = constants.m_e
ATOMIC_MASS_UNIT = constants.atomic_mass
BOLTZMANN = constants.k
ELECTRON_VOLT = constants.electron_volt

# smallest admissible hbar/sigma_q and largest admissible sigma_s
MIN_HBAR_OVER_SIGMA_Q = 1.0e-14
MAX_SIGMA_S = 2.0e-11

Outcome = Union[str, int, float]


class MacroscopicityError(Exception):
    """Base class for every error raised by this package"""

    exit_code = 1


class ConfigError(MacroscopicityError):
    """Raised when a configuration file or value is invalid"""

    exit_code = 2


class DataError(MacroscopicityError):
    """Raised when a dataset or one of its runs is invalid"""

    exit_code = 3


class NumericalError(MacroscopicityError):
    """Raised when a computation produces a non-finite or unusable result"""

    exit_code = 4


class NormalizationError(NumericalError):
    """Raised when a prior density is not normalizable on the tau_e axis"""

    def __init__(self, message: str, small_tau_slope: float = float("nan"), large_tau_slope: float = float("nan")):
        super().__init__(f"{message} (tail slopes: small tau {small_tau_slope:.3f}, large tau {large_tau_slope:.3f})")
        self.small_tau_slope = small_tau_slope
        self.large_tau_slope = large_tau_slope


class GridBoundaryError(NumericalError):
    """Raised when a density piles up at the edges of the log-tau grid"""


class DomainError(ValueError):
    """Raised when a special function is called outside its domain"""

    exit_code = 4


@dataclass(frozen=True)
class ModificationParams:
    """Classicalization timescale and the momentum/length scales of the modification."""

    tau_e: float
    sigma_q: float
    sigma_s: float = 0.0

    def __post_init__(self):
        if not self.tau_e > 0:
            raise DomainError(f"tau_e must be positive, got {self.tau_e}")
        if not (self.sigma_q > 0 and math.isfinite(self.sigma_q)):
            raise DomainError(f"sigma_q must be positive and finite, got {self.sigma_q}")
        if HBAR / self.sigma_q < MIN_HBAR_OVER_SIGMA_Q * (1 - 1e-12):
            raise DomainError(f"hbar/sigma_q = {HBAR / self.sigma_q:.3e} m is below the 10 fm bound")
        if self.sigma_s < 0 or self.sigma_s > MAX_SIGMA_S:
            raise DomainError(f"sigma_s must lie in [0, {MAX_SIGMA_S}] m, got {self.sigma_s}")

    @classmethod
    def from_length(cls, tau_e: float, hbar_over_sigma_q: float) -> "ModificationParams":
        return cls(tau_e=tau_e, sigma_q=HBAR / hbar_over_sigma_q)

    @property
    def hbar_over_sigma_q(self) -> float:
        return HBAR / self.sigma_q

    def with_tau(self, tau_e: float) -> "ModificationParams":
        return replace(self, tau_e=tau_e)


def require_point_modification(params: ModificationParams):
    """The shipped models only support sigma_s = 0."""
    if params.sigma_s != 0:
        raise DomainError(f"sigma_s must be 0 for this model, got {params.sigma_s}")


@dataclass(frozen=True)
class OutcomeSpace:
    kind: str
    labels: Tuple[Outcome, ...] = ()
    lo: float = 0.0
    hi: float = 0.0

    def __post_init__(self):
        if self.kind == "discrete":
            if len(set(self.labels)) != len(self.labels) or not self.labels:
                raise DomainError(f"discrete outcome labels must be unique and non-empty: {self.labels}")
        elif self.kind == "continuous":
            if not self.lo < self.hi:
                raise DomainError(f"continuous outcome interval needs lo < hi, got [{self.lo}, {self.hi}]")
        else:
            raise DomainError(f"unknown outcome space kind: {self.kind}")

    @classmethod
    def discrete(cls, labels: Iterable[Outcome]) -> "OutcomeSpace":
        return cls(kind="discrete", labels=tuple(labels))

    @classmethod
    def continuous(cls, lo: float, hi: float) -> "OutcomeSpace":
        return cls(kind="continuous", lo=float(lo), hi=float(hi))

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete"

    def contains(self, outcome: Outcome) -> bool:
        if self.is_discrete:
            return outcome in self.labels
        try:
            value = float(outcome)
        except (TypeError, ValueError):
            return False
        return self.lo <= value <= self.hi


@dataclass(frozen=True)
class Run:
    """A single outcome D_k with its experimental context and a repetition count."""

    outcome: Outcome
    context: Mapping[str, Any] = field(default_factory=dict)
    weight: int = 1

    def __post_init__(self):
        if int(self.weight) != self.weight or self.weight < 1:
            raise DataError(f"run weight must be a positive integer, got {self.weight}")
        for key, value in self.context.items():
            if isinstance(value, float) and not math.isfinite(value):
                raise DataError(f"context field {key!r} is not finite: {value}")

    @property
    def context_key(self) -> Tuple[Tuple[str, Any], ...]:
        return tuple(sorted(self.context.items()))


@dataclass(frozen=True)
class Dataset:
    runs: Tuple[Run, ...]
    experiment_id: str

    def __post_init__(self):
        object.__setattr__(self, "runs", tuple(self.runs))

    def __len__(self) -> int:
        return len(self.runs)

    @property
    def total_weight(self) -> int:
        return sum(run.weight for run in self.runs)

    def contexts(self) -> List[Dict[str, Any]]:
        """Distinct contexts in order of first appearance."""
        seen: "OrderedDict[Tuple, Dict[str, Any]]" = OrderedDict()
        for run in self.runs:
            seen.setdefault(run.context_key, dict(run.context))
        return list(seen.values())

    def grouped(self) -> List[Tuple[Dict[str, Any], List[Outcome], np.ndarray]]:
        """Runs grouped by context, with distinct outcomes and their summed weights."""
        groups: "OrderedDict[Tuple, Tuple[Dict[str, Any], OrderedDict]]" = OrderedDict()
        for run in self.runs:
            context, counts = groups.setdefault(run.context_key, (dict(run.context), OrderedDict()))
            counts[run.outcome] = counts.get(run.outcome, 0) + run.weight
        return [
            (context, list(counts.keys()), np.array(list(counts.values()), dtype=float))
            for context, counts in groups.values()
        ]

    def extended(self, runs: Iterable[Run]) -> "Dataset":
        return Dataset(runs=self.runs + tuple(runs), experiment_id=self.experiment_id)


class ExperimentModel(ABC):
    """
    Likelihood model of one experiment.

    Subclasses implement `likelihood_table`, which evaluates P(d | tau_e, sigma_q, context)
    for several outcomes and several tau_e values at once; the scalar interface is derived from it.
    """

    experiment_id = "experiment"
    supports_heating_conditioning = False
    # the Fisher information is evaluated on every n-th grid point and interpolated in between
    fisher_grid_stride = 1

    @abstractmethod
    def outcome_space(self, context: Mapping[str, Any]) -> OutcomeSpace:
        ...

    @abstractmethod
    def likelihood_table(
        self, outcomes: Sequence[Outcome], context: Mapping[str, Any], tau_values: np.ndarray, sigma_q: float
    ) -> np.ndarray:
        """Probabilities (discrete) or densities (continuous), shape (len(outcomes), len(tau_values))."""

    def integration_interval(self, context: Mapping[str, Any]) -> Tuple[float, float]:
        """Range over which a continuous outcome density is integrated."""
        space = self.outcome_space(context)
        return space.lo, space.hi

    def quadrature_points(self, context: Mapping[str, Any], sigma_q: float) -> Sequence[float]:
        """Interior outcome values where a continuous density has sharp features."""
        return ()

    def fisher_outcomes(self, context: Mapping[str, Any]) -> Optional[Sequence[Outcome]]:
        """
        Outcomes whose likelihoods partition a continuous outcome space, when the model scores data on cells.

        The Fisher information is then an exact sum over them instead of a quadrature over the density.
        """
        return None

    def prior_candidates(self, data: "Dataset") -> List[Dict[str, Any]]:
        """Measurement contexts among which the least favorable one seeds the prior."""
        return data.contexts() or [{}]

    def log_likelihood(self, outcome: Outcome, context: Mapping[str, Any], params: ModificationParams) -> float:
        require_point_modification(params)
        value = self.likelihood_table([outcome], context, np.array([params.tau_e]), params.sigma_q)[0, 0]
        with np.errstate(divide="ignore"):
            return float(np.log(value))


def validate_run(model: ExperimentModel, run: Run, index: int):
    if not model.outcome_space(run.context).contains(run.outcome):
        raise DataError(f"run {index}: outcome {run.outcome!r} lies outside the outcome space of {model.experiment_id}")


def dataset_log_likelihood(model: ExperimentModel, data: Dataset, params: ModificationParams) -> float:
    """Sum of weighted per-run log-likelihoods."""
    total = 0.0
    for index, run in enumerate(data.runs):
        validate_run(model, run, index)
        value = model.log_likelihood(run.outcome, run.context, params)
        if not math.isfinite(value):
            raise NumericalError(
                f"run {index}: non-finite log-likelihood {value} at tau_e={params.tau_e:.6e} s, "
                f"sigma_q={params.sigma_q:.6e} kg m/s"
            )
        total += run.weight * value
    return total


def dataset_log_likelihood_grid(
    model: ExperimentModel, data: Dataset, tau_values: np.ndarray, sigma_q: float
) -> np.ndarray:
    """
    Vectorized dataset log-likelihood over many tau_e values.

    Unlike `dataset_log_likelihood` this allows -inf entries: a grid point whose
    likelihood vanishes is excluded by the data, which is a legitimate result.
    """
    tau_values = np.asarray(tau_values, dtype=float)
    total = np.zeros_like(tau_values)
    index = 0
    for context, outcomes, weights in data.grouped():
        space = model.outcome_space(context)
        for outcome in outcomes:
            if not space.contains(outcome):
                raise DataError(f"run {index}: outcome {outcome!r} lies outside the outcome space of {model.experiment_id}")
        table = model.likelihood_table(outcomes, context, tau_values, sigma_q)
        if np.any(np.isnan(table)) or np.any(table < 0):
            raise NumericalError(f"likelihood table for context {context} contains invalid values at sigma_q={sigma_q:.6e}")
        with np.errstate(divide="ignore"):
            total += weights @ np.log(table)
        index += len(outcomes)
    return total


def amplification(particle_mass: float) -> float:
    """(m / m_e)^2, the factor by which the modification rate scales for a particle of mass m."""
    return (particle_mass / ELECTRON_MASS) ** 2


