"""
Brute-force reference computations for the analytic likelihoods.

Nothing in here shares formula code with the models it checks: the Dicke evolution works on
full density matrices, the walk is simulated site by site, the nanobeam probabilities come
from a phase-space integral, and the shear diffusion is sampled.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
from scipy import integrate, linalg, optimize
from scipy.special import erf

from core import ELECTRON_MASS, HBAR, DomainError, ModificationParams, NumericalError, amplification
from specfun import log_binomial

logger = logging.getLogger(__name__)

TRACE_TOLERANCE = 1.0e-10
PSD_TOLERANCE = 1.0e-8
MOMENTUM_CUTOFF = 8.0
MOMENTUM_NODES = 48
SPACE_NODES = 64
MAX_TENSOR_POINTS = 8_000_000


def spin_operators(j: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Jx, Jy, Jz) in the Dicke basis ordered m = -J, ..., J."""
    m = np.arange(-j, j + 1)
    raising = np.diag(np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1)), k=-1)
    jx = (raising + raising.T) / 2.0
    jy = (raising - raising.T) / 2.0j
    return jx, jy, np.diag(m).astype(complex)


@dataclass(frozen=True)
class DickeState:
    j: float
    rho: np.ndarray

    def __post_init__(self):
        if 2 * self.j != int(2 * self.j) or self.j < 0.5:
            raise DomainError(f"J must be a positive half-integer, got {self.j}")
        dim = int(round(2 * self.j)) + 1
        if self.rho.shape != (dim, dim):
            raise DomainError(f"density matrix for J={self.j} must be {dim}x{dim}, got {self.rho.shape}")
        if abs(np.trace(self.rho).real - 1.0) > TRACE_TOLERANCE:
            raise NumericalError(f"density matrix trace {np.trace(self.rho).real:.12f} differs from 1")
        if np.max(np.abs(self.rho - self.rho.conj().T)) > TRACE_TOLERANCE:
            raise NumericalError("density matrix is not Hermitian")
        if self.min_eigenvalue() < -PSD_TOLERANCE:
            raise NumericalError(f"density matrix has a negative eigenvalue {self.min_eigenvalue():.3e}")

    @property
    def m_values(self) -> np.ndarray:
        return np.arange(-self.j, self.j + 1)

    def expectation(self, operator: np.ndarray) -> complex:
        return complex(np.trace(operator @ self.rho))

    def min_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh((self.rho + self.rho.conj().T) / 2.0)))


def coherent_state_x(j: float) -> np.ndarray:
    """Amplitudes of the spin coherent state pointing along +x."""
    n = int(round(2 * j))
    k = np.arange(n + 1)
    return np.exp(0.5 * log_binomial(n, k) - 0.5 * n * math.log(2.0)).astype(complex)


def _squeezed_amplitudes(j: float, twist: float) -> Tuple[np.ndarray, float]:
    """Twist by exp(-i twist Jz^2 / 2), then rotate about x so the narrowest quadrature lies along z."""
    jx, jy, jz = spin_operators(j)
    m = np.arange(-j, j + 1)
    psi = coherent_state_x(j) * np.exp(-0.5j * twist * m**2)

    def moment(a, b):
        return float(np.real(psi.conj() @ ((a @ b + b @ a) / 2.0) @ psi))

    covariance = np.array([[moment(jy, jy), moment(jy, jz)], [moment(jy, jz), moment(jz, jz)]])
    _, vectors = np.linalg.eigh(covariance)
    angle = math.atan2(vectors[0, 0], vectors[1, 0])
    best = None
    for signed in (angle, -angle):
        rotated = linalg.expm(-1j * signed * jx) @ psi
        variance = float(np.real(rotated.conj() @ jz @ jz @ rotated))
        if best is None or variance < best[1]:
            best = (rotated, variance)
    return best


def one_axis_squeeze(j: float, target_jz_var: float) -> DickeState:
    """
    Number-squeezed state with <Jz^2> = target_jz_var, mean spin along +x.

    The twisting strength is found by root bracketing between the coherent state and the
    strongest squeezing reachable before the state over-twists.
    """
    if not 0 < target_jz_var <= j / 2.0 * (1 + 1e-12):
        raise DomainError(f"target <Jz^2> must lie in (0, J/2] = (0, {j / 2.0}], got {target_jz_var}")
    if abs(target_jz_var - j / 2.0) < 1e-12 * j:
        psi = coherent_state_x(j)
        return DickeState(j, np.outer(psi, psi.conj()))

    twists = np.geomspace(1.0e-6, 1.0, 400)
    variances = np.array([_squeezed_amplitudes(j, twist)[1] for twist in twists])
    turning = np.nonzero(np.diff(variances) > 0)[0]
    strongest = twists[turning[0]] if turning.size else twists[-1]
    if target_jz_var < _squeezed_amplitudes(j, strongest)[1]:
        raise DomainError(f"<Jz^2> = {target_jz_var} is below the strongest one-axis squeezing for J={j}")
    twist = optimize.brentq(lambda s: _squeezed_amplitudes(j, s)[1] - target_jz_var, 0.0, strongest, xtol=1.0e-14)
    psi, _ = _squeezed_amplitudes(j, twist)
    logger.debug(f"one-axis twist {twist:.6e} reaches <Jz^2>={target_jz_var} for J={j}")
    return DickeState(j, np.outer(psi, psi.conj()))


def evolve_dicke(state: DickeState, epsilon: float, zeta: float, gamma_p: float, t: float) -> DickeState:
    """
    Exact evolution under H/hbar = epsilon Jz + zeta Jz^2 with phase-flip dephasing at rate gamma_p.

    Every generator is diagonal in m, so each matrix element picks up its own exponential factor.
    """
    if gamma_p < 0:
        raise DomainError(f"gamma_p must be non-negative, got {gamma_p}")
    m = state.m_values
    delta = m[:, None] - m[None, :]
    squares = m[:, None] ** 2 - m[None, :] ** 2
    factor = np.exp((-1j * (epsilon * delta + zeta * squares) - 0.5 * gamma_p * delta**2) * t)
    return DickeState(state.j, state.rho * factor)


def measure_after_recombiner(state: DickeState) -> np.ndarray:
    """Imbalance distribution over m = -J..J after the pi/2 rotation about x."""
    jx, _, _ = spin_operators(state.j)
    rotation = linalg.expm(-0.5j * math.pi * jx)
    probabilities = np.real(np.diag(rotation @ state.rho @ rotation.conj().T))
    if abs(probabilities.sum() - 1.0) > TRACE_TOLERANCE:
        raise NumericalError(f"recombiner output sums to {probabilities.sum():.12f}")
    return np.maximum(probabilities, 0.0)


@dataclass(frozen=True)
class WalkDistributions:
    full: np.ndarray
    postselect_left: np.ndarray
    postselect_right: np.ndarray
    branch_weights: Tuple[float, float]


def _gaussian_overlap_deficit(start: np.ndarray, stop: np.ndarray, sigma_q: float) -> np.ndarray:
    """Time average of 1 - exp(-D^2 sigma_q^2 / 2 hbar^2) while the separation D moves linearly from start to stop."""
    scale = sigma_q / (math.sqrt(2.0) * HBAR)
    constant = np.isclose(start, stop, rtol=0.0, atol=1.0e-30)
    with np.errstate(divide="ignore", invalid="ignore"):
        moving = 1.0 - math.sqrt(math.pi) / 2.0 * (erf(stop * scale) - erf(start * scale)) / ((stop - start) * scale)
    return np.where(constant, 1.0 - np.exp(-((start * scale) ** 2)), moving)


def qrw_density_matrix_walk(params: Any, mod: ModificationParams) -> WalkDistributions:
    """
    Four-step walk on 9 half-site positions times 2 hyperfine states.

    Each step is a pi/2 pulse of duration t_rest followed by a state-dependent displacement of
    duration t_shift moving the upper state half a site to the left and the lower one to the right.
    Coherences between positions x and x' decay at rate (m/m_e)^2 / tau_e times the Gaussian
    overlap deficit of their separation, integrated along the motion. The walker starts in the
    upper state; final sites are the half-site positions divided by two.
    """
    positions = np.arange(-4, 5)
    n_pos = positions.size
    half_site = params.site_spacing / 2.0
    rate = 0.0 if math.isinf(mod.tau_e) else amplification(params.atom_mass) / mod.tau_e
    # basis index = 2 * position_index + spin, spin 0 = upper
    spins = np.array([0, 1])
    pos_of = np.repeat(positions, 2).astype(float)
    spin_of = np.tile(spins, n_pos)
    moves = np.where(spin_of == 0, -1.0, 1.0)

    coin = np.array([[1.0, -1.0], [1.0, 1.0]]) / math.sqrt(2.0)
    coin_full = np.kron(np.eye(n_pos), coin)
    shift = np.zeros((2 * n_pos, 2 * n_pos))
    for index in range(2 * n_pos):
        target = pos_of[index] + moves[index]
        if -4 <= target <= 4:
            shift[2 * int(target + 4) + spin_of[index], index] = 1.0

    separation_before = (pos_of[:, None] - pos_of[None, :]) * half_site
    separation_after = ((pos_of + moves)[:, None] - (pos_of + moves)[None, :]) * half_site
    resting = _gaussian_overlap_deficit(separation_before, separation_before, mod.sigma_q)
    moving = _gaussian_overlap_deficit(separation_before, separation_after, mod.sigma_q)
    rest_decay = np.exp(-rate * params.t_rest * resting)
    shift_decay = np.exp(-rate * params.t_shift * moving)

    def step(rho: np.ndarray) -> np.ndarray:
        rho = coin_full @ rho @ coin_full.T * rest_decay
        return shift @ (rho * shift_decay) @ shift.T

    def final_sites(rho: np.ndarray) -> np.ndarray:
        diagonal = np.real(np.diag(rho)).reshape(n_pos, 2).sum(axis=1)
        return diagonal[::2].copy()

    start = np.zeros((2 * n_pos, 2 * n_pos), dtype=complex)
    start[2 * 4, 2 * 4] = 1.0
    after_first = step(start)
    rho = after_first
    for _ in range(3):
        rho = step(rho)
    full = final_sites(rho)

    branches = {}
    for label, position in (("left", -1), ("right", 1)):
        projector = np.diag((pos_of == position).astype(float))
        branch = projector @ after_first @ projector
        weight = float(np.real(np.trace(branch)))
        rho = branch / weight
        for _ in range(3):
            rho = step(rho)
        branches[label] = (final_sites(rho), weight)

    return WalkDistributions(
        full=full,
        postselect_left=branches["left"][0],
        postselect_right=branches["right"][0],
        branch_weights=(branches["left"][1], branches["right"][1]),
    )


def _gauss_legendre(lo: float, hi: float, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def _box_transform(k: np.ndarray, extent: float, profile: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """int_{-1/2}^{1/2} exp(-i extent k s) profile(s) ds for every k, by Gauss-Legendre in s."""
    s, ws = _gauss_legendre(-0.5, 0.5, SPACE_NODES + math.ceil(2.0 * MOMENTUM_CUTOFF * extent))
    return np.exp(-1j * extent * np.outer(k, s)) @ (ws * profile(s))


def geometric_factor_quadrature(params: Any, sigma_q: float) -> float:
    """
    U(sigma) = (1/2 hbar^2) int d^3q f_sigma(q) |w_rho(q) . q|^2 for the longitudinal sine mode of a
    homogeneous silicon cuboid, w(r) = e_z sin(pi z / L_z) on the centered box.

    Momenta are scaled to k = q / sigma_q and integrated with a tensor Gauss-Legendre rule on the cube
    |k_i| <= MOMENTUM_CUTOFF; the Fourier transform of the mass-weighted mode is a Gauss-Legendre
    quadrature over the box at every momentum node. The box is the half wavelength of the mode along z
    with the square cross-section that holds twice the effective mass.
    """
    if not sigma_q > 0:
        raise DomainError(f"sigma_q must be positive, got {sigma_q}")
    lz = math.pi * params.sound_speed / params.omega
    s, ws = _gauss_legendre(-0.5, 0.5, SPACE_NODES)
    # effective mass = density * L_x L_y L_z * <sin^2> over the box
    mode_weight = float(np.dot(ws, np.sin(math.pi * s) ** 2))
    side = math.sqrt(params.eff_mass / (params.density * lz * mode_weight))
    extents = np.array([side, side, lz]) * sigma_q / HBAR

    counts = [MOMENTUM_NODES + math.ceil(2.0 * MOMENTUM_CUTOFF * extent) for extent in extents]
    if math.prod(counts) > MAX_TENSOR_POINTS:
        raise DomainError(
            f"hbar/sigma_q={HBAR / sigma_q:.3e} m resolves the cuboid too finely for a {counts} tensor rule"
        )

    axes = []
    for axis, (extent, count) in enumerate(zip(extents, counts)):
        k, wk = _gauss_legendre(-MOMENTUM_CUTOFF, MOMENTUM_CUTOFF, count)
        if axis < 2:
            transform = _box_transform(k, extent, np.ones_like)
        else:
            transform = _box_transform(k, extent, lambda z: np.sin(math.pi * z))
        axes.append((k, wk * np.exp(-0.5 * k * k) / math.sqrt(2.0 * math.pi), transform))

    (_, gx, tx), (_, gy, ty), (kz, gz, tz) = axes
    # |w_rho(q) . q|^2 on the full momentum mesh; only the z component of the mode survives the dot product
    overlap = np.abs(tx[:, None, None] * ty[None, :, None] * (kz * tz)[None, None, :]) ** 2
    expectation = float(np.sum(gx[:, None, None] * gy[None, :, None] * gz[None, None, :] * overlap))

    volume = side * side * lz
    return (params.density / ELECTRON_MASS * volume * sigma_q) ** 2 * expectation / (2.0 * HBAR**2)


def nanobeam_char_quadrature(
    params: Any, mod: ModificationParams, theta: float, t: float, nodes: int = 40, xi_value: Optional[float] = None
) -> Dict[str, float]:
    """
    Coincidence probabilities as a phase-space integral of the heralded two-oscillator characteristic
    function against the anti-Stokes readout, by tensor Gauss-Hermite quadrature.

    Coordinates are scaled to the ground-state width; the relative rotation of the two oscillators
    is delta_omega t + phi0. Raises NumericalError when doubling the nodes moves any probability by
    more than 1e-4.
    """
    if xi_value is None:
        xi_value = 2.0 * geometric_factor_quadrature(params, mod.sigma_q) * HBAR / (params.eff_mass * params.omega)
    x = 0.0 if math.isinf(mod.tau_e) else xi_value * t / mod.tau_e
    rotation = params.delta_omega * t + params.phi0

    coarse = _char_probabilities(x, theta, rotation, nodes)
    fine = _char_probabilities(x, theta, rotation, 2 * nodes)
    drift = max(abs(coarse[key] - fine[key]) for key in coarse)
    if drift > 1.0e-4:
        raise NumericalError(f"phase-space quadrature did not converge: node doubling moved a probability by {drift:.2e}")
    return fine


def _char_probabilities(x: float, theta: float, rotation: float, nodes: int) -> Dict[str, float]:
    width = 4.0 / (2.0 + x)
    k, w = np.polynomial.hermite.hermgauss(nodes)
    v = np.sqrt(width) * k
    weights = w * np.sqrt(width)
    cos_a, sin_a = math.cos(rotation), math.sin(rotation)
    cos_t, sin_t = math.cos(theta), math.sin(theta)

    q2, p1, p2 = np.meshgrid(v, v, v, indexing="ij")
    w3 = weights[:, None, None] * weights[None, :, None] * weights[None, None, :]
    raw = {}
    for s1 in (1, -1):
        for s2 in (1, -1):
            total = 0.0
            for q1, wq in zip(v, weights):
                q1r = cos_a * q1 + sin_a * p1
                p1r = -sin_a * q1 + cos_a * p1
                herald = 0.5 * (1.0 - 0.25 * (s1 * p1r + p2) ** 2 - 0.25 * (s1 * q1r + q2) ** 2)
                readout = 1.0 + s2 * (cos_t * (p1 * p2 + q1 * q2) + sin_t * (p1 * q2 - p2 * q1))
                total += wq * np.sum(w3 * herald * readout)
            raw[(s1, s2)] = 0.25 - total / (8.0 * math.pi**2)
    labels = {(1, 1): "pp", (1, -1): "pm", (-1, 1): "mp", (-1, -1): "mm"}
    return {labels[key]: value for key, value in raw.items()}


def shear_diffusion_mc(
    zeta: float,
    gamma_s: float,
    j: float,
    sigma_y0: float,
    sigma_z0: float,
    t: float,
    n_samples: int = 100_000,
    n_steps: int = 2000,
    seed: int = 0,
    workers: int = 1,
) -> float:
    """
    Sample variance of j_y after time t for d j_y = 2 zeta j_z dt, d j_z = sqrt(gamma_s / 2) J dW.

    Euler-Maruyama from Gaussian initial values with standard deviations sigma_y0, sigma_z0.
    Chunk i of the samples uses the generator seeded with seed + i.
    """
    if n_samples < 10_000:
        raise DomainError(f"shear diffusion needs at least 10^4 samples, got {n_samples}")
    chunks = max(1, workers)
    sizes = [n_samples // chunks + (1 if i < n_samples % chunks else 0) for i in range(chunks)]
    dt = t / n_steps
    kick = math.sqrt(0.5 * gamma_s * dt) * j

    def run(index_size: Tuple[int, int]) -> np.ndarray:
        index, size = index_size
        rng = np.random.default_rng(seed + index)
        jy = sigma_y0 * rng.standard_normal(size)
        jz = sigma_z0 * rng.standard_normal(size)
        for _ in range(n_steps):
            jy = jy + 2.0 * zeta * jz * dt
            if kick:
                jz = jz + kick * rng.standard_normal(size)
        return jy

    if chunks > 1:
        with ThreadPoolExecutor(max_workers=chunks) as pool:
            samples = np.concatenate(list(pool.map(run, enumerate(sizes))))
    else:
        samples = run((0, n_samples))
    return float(np.var(samples, ddof=1))
