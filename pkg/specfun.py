"""
Numerically stable special functions used by the closed-form likelihoods.
"""
import math
from typing import Union

import numpy as np
from scipy import special

from core import DomainError, NumericalError

ArrayLike = Union[float, np.ndarray]

THETA_TAIL = 1.0e-16
THETA_MIN_TERMS = 4
# above this nome the Jacobi-transformed series converges faster
THETA_DUAL_SWITCH = 0.2
THETA_DUAL_TERMS = 4
# images farther than this many widths from the reduced argument do not change the sum
THETA_DUAL_REACH = 6.5


def _scalar_or_array(values: np.ndarray, *inputs) -> ArrayLike:
    if all(np.ndim(x) == 0 for x in inputs):
        return values.item()
    return values


def theta3_terms(q: float) -> int:
    """Number of terms n >= 1 kept in the direct series for nome q."""
    if q <= 0:
        return THETA_MIN_TERMS
    n_max = math.ceil(math.sqrt(math.log(THETA_TAIL) / math.log(q)))
    return max(THETA_MIN_TERMS, n_max)


def _dual_images(root_s: float) -> np.ndarray:
    """Symmetric image indices k of the transformed series; saturated pairs cancel and are left out."""
    reach = min(THETA_DUAL_TERMS, math.ceil(0.5 + THETA_DUAL_REACH * root_s / math.pi))
    return np.arange(-reach, reach + 1, dtype=float)


def theta3(u: ArrayLike, q: ArrayLike) -> ArrayLike:
    """
    Jacobi theta function of the third kind, sum over n of q^(n^2) exp(2inu), for real u.

    Args:
        u: real argument, any shape
        q: nome in [0, 1), broadcastable against u

    Returns:
        Real value(s) of theta3(u, q)
    """
    u_arr = np.asarray(u, dtype=float)
    q_arr = np.asarray(q, dtype=float)
    if np.any(q_arr < 0) or np.any(q_arr >= 1) or np.any(np.isnan(q_arr)):
        raise DomainError("theta3 requires 0 <= q < 1")
    shape = np.broadcast(u_arr, q_arr).shape
    u_b, q_b = (x.ravel() for x in np.broadcast_arrays(np.atleast_1d(u_arr), np.atleast_1d(q_arr)))
    out = np.empty(u_b.shape, dtype=float)

    direct = q_b <= THETA_DUAL_SWITCH
    if np.any(direct):
        uu, qq = u_b[direct], q_b[direct]
        n = np.arange(1, theta3_terms(float(qq.max())) + 1, dtype=float)
        powers = np.power(qq[:, None], n**2)
        out[direct] = 1.0 + 2.0 * np.sum(powers * np.cos(2.0 * n * uu[:, None]), axis=1)
    if np.any(~direct):
        uu, qq = u_b[~direct], q_b[~direct]
        s = -np.log(qq)
        reduced = uu - np.pi * np.round(uu / np.pi)
        k = _dual_images(float(np.sqrt(s.max())))
        shifted = reduced[:, None] - np.pi * k
        out[~direct] = np.sqrt(np.pi / s) * np.sum(np.exp(-(shifted**2) / s[:, None]), axis=1)
    return _scalar_or_array(out.reshape(shape), u, q)


def theta3_integral(u: ArrayLike, q: ArrayLike) -> ArrayLike:
    """
    Antiderivative of theta3 in u, normalized to vanish at u = 0.

    It grows by pi per period: theta3_integral(u + pi, q) = theta3_integral(u, q) + pi.
    """
    u_arr = np.asarray(u, dtype=float)
    q_arr = np.asarray(q, dtype=float)
    if np.any(q_arr < 0) or np.any(q_arr >= 1) or np.any(np.isnan(q_arr)):
        raise DomainError("theta3_integral requires 0 <= q < 1")
    shape = np.broadcast(u_arr, q_arr).shape
    u_b, q_b = (x.ravel() for x in np.broadcast_arrays(np.atleast_1d(u_arr), np.atleast_1d(q_arr)))
    out = np.empty(u_b.shape, dtype=float)

    direct = q_b <= THETA_DUAL_SWITCH
    if np.any(direct):
        uu, qq = u_b[direct], q_b[direct]
        n = np.arange(1, theta3_terms(float(qq.max())) + 1, dtype=float)
        powers = np.power(qq[:, None], n**2)
        out[direct] = uu + np.sum(powers * np.sin(2.0 * n * uu[:, None]) / n, axis=1)
    if np.any(~direct):
        uu, qq = u_b[~direct], q_b[~direct]
        root_s = np.sqrt(-np.log(qq))
        periods = np.round(uu / np.pi)
        reduced = uu - np.pi * periods
        k = _dual_images(float(root_s.max()))
        shifted = (reduced[:, None] - np.pi * k) / root_s[:, None]
        out[~direct] = np.pi * periods + 0.5 * np.pi * np.sum(special.erf(shifted), axis=1)
    return _scalar_or_array(out.reshape(shape), u, q)


def erf_real(x: ArrayLike) -> ArrayLike:
    """Error function of a real argument, exactly odd."""
    x_arr = np.asarray(x, dtype=float)
    values = np.sign(x_arr) * special.erf(np.abs(x_arr))
    return _scalar_or_array(values, x)


def faddeeva_argument(a: float, b: float) -> complex:
    """Faddeeva argument (pi/a - i b)/sqrt(2) shared by h_aux and sine_mode_kernel."""
    return (math.pi / a - 1j * b) / math.sqrt(2.0)


def h_aux(a: float, b: float) -> complex:
    """
    h(a, b) = sqrt(pi/2) (3i a^2 + pi b^2 - i pi^2) exp((pi/a - i b)^2 / 2) erf((i pi/a + b)/sqrt(2)).

    With zeta = (pi/a - i b)/sqrt(2) the erf argument is i zeta, and erf(i zeta) = 1 - exp(zeta^2) w(-zeta)
    with w the Faddeeva function, so exp(zeta^2) erf(i zeta) is evaluated as the single scaled form
    exp(2 zeta^2) w(zeta) - exp(zeta^2) in the upper half plane and exp(zeta^2) - exp(2 zeta^2) w(-zeta)
    in the lower one. w stays bounded on the side it is called with.

    The modulus grows like exp(pi^2/a^2 - b^2); beyond double range a NumericalError is raised.

    Args:
        a: L sigma_q / hbar, must be positive
        b: real shift

    Returns:
        Complex value, real for b = 0
    """
    if not a > 0:
        raise DomainError(f"h_aux requires a > 0, got {a}")
    zeta = faddeeva_argument(a, b)
    polynomial = 3j * a * a + math.pi * b * b - 1j * math.pi**2
    with np.errstate(over="ignore", invalid="ignore"):
        single = np.exp(zeta * zeta)
        double = np.exp(2.0 * zeta * zeta)
        if b <= 0:
            scaled = double * special.wofz(zeta) - single
        else:
            scaled = single - double * special.wofz(-zeta)
        value = complex(math.sqrt(math.pi / 2.0) * polynomial * scaled)
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise NumericalError(f"h_aux({a}, {b}) exceeds double precision range")
    return value


def sine_mode_kernel(a: float, b: float) -> complex:
    """
    exp(-b^2/2) w((pi/a - i b)/sqrt(2)), the bounded kernel the longitudinal overlap is assembled from.

    It equals exp(-b^2/2 - zeta^2) (1 + erf(i zeta)): the same error function as h_aux with the Gaussian
    exponent of the opposite sign. For b >= 0 the argument sits in the lower half plane where w
    grows like exp(b^2/2); there the reflection w(-z) = 2 exp(-z^2) - w(z) is used so that the
    Gaussian prefactor and the exponential growth cancel analytically and nothing overflows.

    Args:
        a: L sigma_q / hbar, must be positive
        b: real shift

    Returns:
        Complex value, bounded by 2 in modulus
    """
    if not a > 0:
        raise DomainError(f"sine_mode_kernel requires a > 0, got {a}")
    zeta = faddeeva_argument(a, b)
    if b < 0:
        return complex(math.exp(-0.5 * b * b) * special.wofz(zeta))
    phase = np.exp(-0.5 * (math.pi / a) ** 2 + 1j * math.pi * b / a)
    return complex(2.0 * phase - math.exp(-0.5 * b * b) * special.wofz(-zeta))


def log_binomial(n: int, k: Union[int, np.ndarray]) -> ArrayLike:
    """log C(n, k) via log-gamma."""
    k_arr = np.asarray(k)
    if n < 0 or np.any(k_arr < 0) or np.any(k_arr > n):
        raise DomainError(f"log_binomial requires 0 <= k <= n, got n={n}, k={k}")
    k_float = k_arr.astype(float)
    values = special.gammaln(n + 1.0) - special.gammaln(k_float + 1.0) - special.gammaln(n - k_float + 1.0)
    return _scalar_or_array(np.asarray(values), k)
