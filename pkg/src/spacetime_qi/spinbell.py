"""Two-spin correlations, the CHSH functional and the hidden-variable model.

The singlet correlation is computed from explicit Pauli matrices on
C^2 (x) C^2.  For coplanar settings at angles ``alpha`` and ``beta`` the sign
convention ``-a.b = cos(alpha - beta)`` is used, so the attenuated quantum
correlation reads ``g cos(alpha - beta)``.

For ``0 <= g <= 1/2`` the bounded hidden variables
``xi(lam) = sqrt(2g) cos(alpha - lam)``, ``eta(lam) = sqrt(2g) cos(beta - lam)``
with ``lam`` uniform on the circle reproduce ``g cos(alpha - beta)`` exactly.
Above ``1/sqrt(2)`` the CHSH bound excludes any such model.  The band in
between is left open and reported as ``"undetermined"``.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np
from scipy import optimize

from . import rng as _rng
from .exceptions import BoundViolation, DomainError, PreconditionError

__all__ = [
    "LHV_BOUND",
    "NO_LHV_BOUND",
    "PAULI",
    "CHSHOptimum",
    "MonteCarloEstimate",
    "attenuated_matrix",
    "chsh",
    "chsh_from_angles",
    "chsh_max_quantum",
    "correlation_matrix",
    "g_regime",
    "lhv_correlation_exact",
    "lhv_monte_carlo",
    "local_realism_necessary_test",
    "optimal_angles",
    "singlet_correlation",
    "singlet_state",
    "spin_operator",
    "threshold_crossing",
    "unit_vector",
]

LHV_BOUND = 0.5
NO_LHV_BOUND = 1.0 / math.sqrt(2.0)
CHSH_SLACK = 1e-9

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


class MonteCarloEstimate(NamedTuple):
    estimate: float
    stderr: float


class CHSHOptimum(NamedTuple):
    value: float
    angles: tuple


def unit_vector(a) -> np.ndarray:
    v = np.asarray(a, dtype=float).reshape(-1)
    if v.shape != (3,):
        raise DomainError("expected a 3-vector")
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise DomainError(f"vector {v} is not of unit length")
    return v


def singlet_state() -> np.ndarray:
    """Amplitudes of ``(|01> - |10>)/sqrt(2)`` in the product basis."""
    s = 1.0 / math.sqrt(2.0)
    return np.array([0.0, s, -s, 0.0], dtype=complex)


def spin_operator(a) -> np.ndarray:
    """``sigma . a`` as a 2x2 matrix."""
    return np.tensordot(unit_vector(a), PAULI, axes=1)


def singlet_correlation(a, b, state=None) -> float:
    """``<psi| sigma.a (x) sigma.b |psi>`` by 4x4 matrix algebra."""
    psi = singlet_state() if state is None else np.asarray(state, dtype=complex)
    op = np.kron(spin_operator(a), spin_operator(b))
    return float(np.real(np.vdot(psi, op @ psi)))


def correlation_matrix(corr, alphas, betas) -> np.ndarray:
    """``P[i, j] = corr(alphas[i], betas[j])`` for the two settings per side."""
    return np.array([[corr(a, b) for b in betas] for a in alphas], dtype=float)


def chsh(P) -> float:
    """``|P11 - P12| + |P21 + P22|``."""
    P = np.asarray(P, dtype=float)
    if P.shape != (2, 2):
        raise DomainError("CHSH needs a 2x2 correlation matrix")
    if np.any(np.abs(P) > 1.0 + 1e-12):
        raise DomainError("correlation entries must lie in [-1, 1]")
    return float(abs(P[0, 0] - P[0, 1]) + abs(P[1, 0] + P[1, 1]))


def chsh_from_angles(g, a, a2, b, b2):
    """CHSH value of ``g cos(alpha - beta)`` at angles; broadcasts over arrays."""
    return g * (np.abs(np.cos(a - b) - np.cos(a - b2)) + np.abs(np.cos(a2 - b) + np.cos(a2 - b2)))


def _check_g(g: float) -> float:
    g = float(g)
    if not 0.0 <= g <= 1.0:
        raise DomainError(f"g must lie in [0, 1], got {g}")
    return g


def chsh_max_quantum(g: float, grid: int = 64, tol: float = 1e-12) -> CHSHOptimum:
    """Largest CHSH value of the correlation ``g cos(alpha - beta)``.

    A grid sweep over the angle quadruple (``grid`` points per angle) is
    followed by coordinate descent with bounded scalar searches until the gain drops below ``tol``.
    """
    g = _check_g(g)
    theta = np.arange(grid) * (2.0 * np.pi / grid)
    # Only angle differences matter, so the first setting is pinned at 0.
    a2, b, b2 = np.meshgrid(theta, theta, theta, indexing="ij")
    vals = chsh_from_angles(1.0, 0.0, a2, b, b2)
    k = np.unravel_index(int(np.argmax(vals)), vals.shape)
    x = np.array([0.0, theta[k[0]], theta[k[1]], theta[k[2]]])

    def objective(xs):
        return chsh_from_angles(1.0, *xs)

    current = objective(x)
    step = 2.0 * np.pi / grid
    for _ in range(200):
        before = current
        for k in range(4):
            def neg(t, k=k):
                y = x.copy()
                y[k] = t
                return -objective(y)

            res = optimize.minimize_scalar(
                neg, bounds=(x[k] - step, x[k] + step), method="bounded",
                options={"xatol": 1e-12},
            )
            if -res.fun > current:
                x[k] = res.x
                current = -res.fun
        if current - before < tol:
            break
    angles = tuple(float(t % (2.0 * np.pi)) for t in x)
    return CHSHOptimum(g * float(current), angles)


def threshold_crossing(level: float = 2.0, xtol: float = 1e-12) -> float:
    """Smallest ``g`` at which the optimal quantum CHSH value reaches ``level``."""
    return optimize.brentq(lambda g: chsh_max_quantum(g).value - level, 0.0, 1.0, xtol=xtol)


def g_regime(g: float) -> str:
    """Which side of the hidden-variable thresholds ``g`` lies on.

    Returns ``"lhv_exists"`` for ``g <= 1/2``, ``"no_lhv"`` for
    ``g > 1/sqrt(2)`` and ``"undetermined"`` in between.
    """
    g = _check_g(g)
    if g <= LHV_BOUND:
        return "lhv_exists"
    if g > NO_LHV_BOUND:
        return "no_lhv"
    return "undetermined"


def _lhv_amplitude(g: float) -> float:
    return math.sqrt(2.0 * g)


def lhv_correlation_exact(g: float, alpha: float, beta: float, nodes: int = 64) -> float:
    """Average of ``xi_alpha(lam) eta_beta(lam)`` over the circle.

    The integrand is a trigonometric polynomial of degree two, so the
    periodic trapezoid rule with ``nodes >= 3`` is exact up to rounding.
    A warning is issued when ``g > 1/2``: the integral still equals
    ``g cos(alpha - beta)`` but the variables exceed 1 in magnitude.
    """
    g = _check_g(g)
    if g > LHV_BOUND:
        warnings.warn(
            f"g={g} > 1/2: hidden variables of amplitude {_lhv_amplitude(g):.4f} exceed 1",
            RuntimeWarning,
            stacklevel=2,
        )
    lam = np.arange(nodes) * (2.0 * np.pi / nodes)
    amp = _lhv_amplitude(g)
    xi = amp * np.cos(alpha - lam)
    eta = amp * np.cos(beta - lam)
    return float(np.mean(xi * eta))


def _lhv_chunk(seed, index, count, amp, alpha, beta):
    lam = _rng.stream(seed, index).uniform(0.0, 2.0 * np.pi, count)
    xi = amp * np.cos(alpha - lam)
    eta = amp * np.cos(beta - lam)
    peak = max(float(np.max(np.abs(xi))), float(np.max(np.abs(eta))))
    prod = xi * eta
    return float(prod.sum()), float(np.dot(prod, prod)), peak


def lhv_monte_carlo(
    g: float, alpha: float, beta: float, n: int, seed: int, jobs: int = 1
) -> MonteCarloEstimate:
    """Sample ``E xi_alpha eta_beta`` with ``lam`` uniform on ``[0, 2 pi)``.

    Samples are drawn in fixed blocks, each from its own counter-based
    stream, so the result depends only on ``(seed, n)``.

    Raises
    ------
    PreconditionError
        If ``g > 1/2`` or ``n < 1000``.
    BoundViolation
        If any sampled variable leaves [-1, 1].
    """
    g = _check_g(g)
    if g > LHV_BOUND:
        raise PreconditionError("the cosine hidden-variable model needs g <= 1/2")
    if n < 1000:
        raise PreconditionError("at least 1000 samples are required")
    if seed is None:
        raise PreconditionError("an explicit seed is required")
    amp = _lhv_amplitude(g)
    tasks = list(_rng.chunks(n))
    run = lambda t: _lhv_chunk(seed, t[0], t[1], amp, alpha, beta)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(run, tasks))
    else:
        parts = [run(t) for t in tasks]
    s1 = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    peak = max(p[2] for p in parts)
    if peak > 1.0:
        raise BoundViolation(f"sampled |xi| or |eta| = {peak} exceeds 1")
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0)
    return MonteCarloEstimate(mean, math.sqrt(var / (n - 1)))


def local_realism_necessary_test(P) -> str:
    """``"fail"`` when the correlations break the CHSH bound, else ``"pass"``.

    Passing is necessary for a classical representation but proves nothing.
    """
    return "fail" if chsh(P) > 2.0 + CHSH_SLACK else "pass"


def optimal_angles():
    """Standard CHSH-optimal coplanar settings ``(a, a', b, b')``."""
    return 0.0, 0.5 * math.pi, 0.25 * math.pi, 0.75 * math.pi


def attenuated_matrix(g: float, angles=None) -> np.ndarray:
    """Correlation matrix of ``g cos(alpha - beta)`` at the given angle quadruple."""
    a, a2, b, b2 = optimal_angles() if angles is None else angles
    return correlation_matrix(lambda x, y: g * math.cos(x - y), (a, a2), (b, b2))

