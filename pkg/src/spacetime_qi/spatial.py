"""Detector regions, two-particle position densities and the g-factor.

For a two-particle wave function ``psi_spin * phi(r1, r2)`` the localized
spin correlation is ``g(O_A, O_B) * D_spin(a, b)`` where

    g(O_A, O_B) = integral over O_A x O_B of |phi(r1, r2)|^2,

the probability of finding particle 1 in ``O_A`` and particle 2 in ``O_B``.
Product Gaussian densities and box regions have a closed form (a product of
one-dimensional interval probabilities); every other combination goes
through Monte Carlo.

``theorem8_model`` builds the factorized classical model that reproduces
``g cos(alpha - beta)`` with variables bounded by one, once region A sits
outside the ball of radius ``L`` that holds all but ``eps < 1/2`` of
particle 1's probability.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence, Union

import numpy as np
from scipy import special, stats

from . import rng as _rng
from .exceptions import BoundViolation, ConvergenceError, DomainError, PreconditionError
from .spinbell import MonteCarloEstimate, singlet_correlation

__all__ = [
    "Ball",
    "Box",
    "GaussianPacket3",
    "GeneralDensity",
    "ProductDensity",
    "Theorem8Result",
    "g_decay_scan",
    "g_factor",
    "g_factor_mc",
    "interval_probability",
    "local_correlation",
    "outer_tail_mass",
    "theorem8_model",
]

MIN_EPSILON = 1e-4


def _vec3(x) -> np.ndarray:
    v = np.asarray(x, dtype=float).reshape(-1)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise DomainError(f"expected a finite 3-vector, got {x!r}")
    return v


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``lower < r < upper`` (componentwise)."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo, hi = _vec3(self.lower), _vec3(self.upper)
        if not np.all(lo < hi):
            raise DomainError("box needs lower < upper in every component")
        object.__setattr__(self, "lower", tuple(lo.tolist()))
        object.__setattr__(self, "upper", tuple(hi.tolist()))

    @classmethod
    def cube(cls, center, side: float) -> "Box":
        c = _vec3(center)
        h = 0.5 * float(side)
        return cls(tuple(c - h), tuple(c + h))

    def translated(self, shift) -> "Box":
        s = _vec3(shift)
        return Box(tuple(np.add(self.lower, s)), tuple(np.add(self.upper, s)))

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return np.all((p > self.lower) & (p < self.upper), axis=-1)

    def distance_from_origin(self) -> float:
        """Distance from the origin to the closest point of the box."""
        nearest = np.clip(0.0, self.lower, self.upper)
        return float(np.linalg.norm(nearest))

    def volume(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))


@dataclass(frozen=True)
class Ball:
    """Open ball; only the Monte Carlo path handles it."""

    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(_vec3(self.center).tolist()))
        if not self.radius > 0.0:
            raise DomainError("ball radius must be positive")

    def translated(self, shift) -> "Ball":
        return Ball(tuple(np.add(self.center, _vec3(shift))), self.radius)

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return np.sum((p - self.center) ** 2, axis=-1) < self.radius**2

    def distance_from_origin(self) -> float:
        return max(float(np.linalg.norm(self.center)) - self.radius, 0.0)


Region = Union[Box, Ball]


@dataclass(frozen=True)
class GaussianPacket3:
    """Isotropic Gaussian position density ``|psi|^2`` with mean ``mean`` and spread ``s``."""

    mean: tuple = (0.0, 0.0, 0.0)
    s: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mean", tuple(_vec3(self.mean).tolist()))
        if not self.s > 0.0:
            raise DomainError("packet spread must be positive")

    def density(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        r2 = np.sum((p - self.mean) ** 2, axis=-1)
        return np.exp(-0.5 * r2 / self.s**2) / (2.0 * math.pi * self.s**2) ** 1.5

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        return np.asarray(self.mean) + self.s * gen.standard_normal((n, 3))

    def translated(self, shift) -> "GaussianPacket3":
        return GaussianPacket3(tuple(np.add(self.mean, _vec3(shift))), self.s)

    def box_probability(self, box: Box) -> float:
        return math.prod(
            interval_probability(lo, hi, mu, self.s)
            for lo, hi, mu in zip(box.lower, box.upper, self.mean)
        )


@dataclass(frozen=True)
class ProductDensity:
    """``|psi_1(r1)|^2 |psi_2(r2)|^2`` for independent packets."""

    first: GaussianPacket3
    second: GaussianPacket3

    def sample(self, gen: np.random.Generator, n: int):
        return self.first.sample(gen, n), self.second.sample(gen, n)

    def translated(self, shift) -> "ProductDensity":
        return ProductDensity(self.first.translated(shift), self.second.translated(shift))


@dataclass(frozen=True)
class GeneralDensity:
    """Arbitrary two-particle density given through a sampler.

    ``sampler(gen, n)`` returns two ``(n, 3)`` arrays of positions for
    particles 1 and 2.
    """

    sampler: Callable[[np.random.Generator, int], tuple]

    def sample(self, gen: np.random.Generator, n: int):
        r1, r2 = self.sampler(gen, n)
        return np.asarray(r1, dtype=float), np.asarray(r2, dtype=float)


def interval_probability(lo: float, hi: float, mu: float, s: float) -> float:
    """``P(lo < X < hi)`` for ``X ~ N(mu, s^2)``.

    Both limits are mapped to the same tail before subtracting, so tail
    intervals keep full relative precision.
    """
    za = (lo - mu) / s
    zb = (hi - mu) / s
    if za >= 0.0:
        return float(special.ndtr(-za) - special.ndtr(-zb))
    if zb <= 0.0:
        return float(special.ndtr(zb) - special.ndtr(za))
    return float(1.0 - special.ndtr(za) - special.ndtr(-zb))


def _closed_form_ok(rho, A, B) -> bool:
    return isinstance(rho, ProductDensity) and isinstance(A, Box) and isinstance(B, Box)


def g_factor_mc(rho, A: Region, B: Region, n: int = 10**6, seed: int = 0) -> MonteCarloEstimate:
    """Monte Carlo estimate of ``P(r1 in A, r2 in B)`` with its standard error."""
    if n < 2:
        raise PreconditionError("need at least two samples")
    hits = 0
    for index, count in _rng.chunks(n):
        r1, r2 = rho.sample(_rng.stream(seed, index), count)
        hits += int(np.count_nonzero(A.contains(r1) & B.contains(r2)))
    p = hits / n
    return MonteCarloEstimate(p, math.sqrt(p * (1.0 - p) / (n - 1)))


def g_factor(
    rho, A: Region, B: Region, n: int = 10**6, seed: int = 0, max_stderr: float = 1e-2
) -> float:
    """Probability of finding particle 1 in ``A`` and particle 2 in ``B``.

    Exact for product Gaussians and boxes; otherwise estimated by Monte
    Carlo with ``n`` samples.

    Raises
    ------
    ConvergenceError
        If the Monte Carlo standard error exceeds ``max_stderr``.
    """
    if _closed_form_ok(rho, A, B):
        return rho.first.box_probability(A) * rho.second.box_probability(B)
    est = g_factor_mc(rho, A, B, n, seed)
    if est.stderr > max_stderr:
        raise ConvergenceError(
            f"g-factor standard error {est.stderr:.3g} exceeds {max_stderr:.3g}; raise n"
        )
    return est.estimate


def g_decay_scan(rho, A: Region, B: Region, direction, distances: Sequence[float], **kw) -> list:
    """``g(A(l), B)`` for ``A`` translated by ``l * direction`` over increasing ``l``."""
    u = _vec3(direction)
    norm = np.linalg.norm(u)
    if norm == 0.0:
        raise DomainError("direction must be non-zero")
    u = u / norm
    d = np.asarray(distances, dtype=float)
    if np.any(np.diff(d) <= 0.0):
        raise DomainError("distances must be strictly increasing")
    return [g_factor(rho, A.translated(l * u), B, **kw) for l in d]


def local_correlation(rho, A: Region, B: Region, a, b, **kw) -> float:
    """Localized spin correlation ``g(A, B) * <sigma.a (x) sigma.b>`` in the singlet."""
    return g_factor(rho, A, B, **kw) * singlet_correlation(a, b)


def outer_tail_mass(packet: GaussianPacket3, L: float) -> float:
    """``P(|r| >= L)`` for a position drawn from ``packet``.

    ``|r|^2 / s^2`` is non-central chi-square with three degrees of freedom.
    """
    if not L >= 0.0:
        raise DomainError("L must be non-negative")
    x = (L / packet.s) ** 2
    nc = float(np.sum(np.square(packet.mean))) / packet.s**2
    if nc == 0.0:
        return float(stats.chi2.sf(x, 3))
    return float(stats.ncx2.sf(x, 3, nc))


class Theorem8Result(NamedTuple):
    estimate: float
    stderr: float
    bounds_ok: bool
    epsilon: float
    exact: float
    terms: dict
    joint: MonteCarloEstimate


def _sample_outside(packet: GaussianPacket3, L: float, gen, count: int, accept: float) -> np.ndarray:
    """Rejection sampling of ``packet`` restricted to ``|r| >= L``; ``accept`` is the expected rate."""
    out = []
    have = 0
    L2 = L * L
    while have < count:
        draw = packet.sample(gen, int(math.ceil(1.1 * (count - have) / accept)) + 64)
        keep = draw[np.sum(draw * draw, axis=1) >= L2]
        out.append(keep)
        have += len(keep)
    return np.concatenate(out)[:count]


def _theorem8_chunk(seed, index, count, psi1, psi2, A, B, L, eps, alpha, beta):
    gen = _rng.stream(seed, index)
    amp = math.sqrt(2.0 * eps)
    r1 = _sample_outside(psi1, L, gen, count, eps)
    r2 = psi2.sample(gen, count)
    phi = gen.uniform(0.0, 2.0 * np.pi, count)
    xa = A.contains(r1).astype(float)
    yb = B.contains(r2).astype(float)
    sa = amp * np.cos(alpha - phi)
    sb = amp * np.cos(beta - phi)
    xi = xa * sa
    eta = yb * sb
    peak = max(float(np.max(np.abs(xi))), float(np.max(np.abs(eta))))
    spin = sa * sb
    joint = xi * eta
    sums = np.array([xa.sum(), yb.sum(), spin.sum(), joint.sum(),
                     xa.sum(), yb.sum(), np.dot(spin, spin), np.dot(joint, joint)])
    return sums, peak


def theorem8_model(
    psi1: GaussianPacket3,
    psi2: GaussianPacket3,
    A: Region,
    B: Region,
    L: float,
    alpha: float,
    beta: float,
    n: int,
    seed: int,
    jobs: int = 1,
) -> Theorem8Result:
    r"""Monte Carlo realisation of the factorized bounded classical model.

    On the space ``{|r1| >= L} x R^3 x circle`` with density
    :math:`\epsilon^{-1}|\psi_1(r_1)|^2 |\psi_2(r_2)|^2 \, d\varphi/2\pi` the model uses

    * ``xi_space = 1[r1 in A]``, whose mean is ``P(A) / eps``,
    * ``eta_space = 1[r2 in B]``, whose mean is ``P(B)``,
    * ``xi_spin(t) = sqrt(2 eps) cos(t - phi)``, with
      ``E xi_spin(alpha) xi_spin(beta) = eps cos(alpha - beta)``.

    The three sample means are multiplied to form ``estimate``; its error
    comes from the delta method.  ``joint`` is the direct mean of
    ``xi * eta`` on the same samples.

    Raises
    ------
    PreconditionError
        If ``eps >= 1/2``, ``eps < 1e-4`` or ``A`` reaches inside the ball of radius ``L``.
    BoundViolation
        If any sampled ``|xi|`` or ``|eta|`` exceeds one.
    """
    if not L > 0.0:
        raise PreconditionError("L must be positive")
    eps = outer_tail_mass(psi1, L)
    if eps >= 0.5:
        raise PreconditionError(f"outer tail mass eps = {eps:.4g} must be below 1/2; increase L")
    if eps < MIN_EPSILON:
        raise PreconditionError(
            f"outer tail mass eps = {eps:.3g} is below {MIN_EPSILON}; rejection sampling "
            "would stall. Decrease L or widen psi1."
        )
    if A.distance_from_origin() < L:
        raise PreconditionError(f"region A must lie in |r| >= L = {L}")
    if n < 2:
        raise PreconditionError("need at least two samples")

    tasks = list(_rng.chunks(n))
    run = lambda t: _theorem8_chunk(seed, t[0], t[1], psi1, psi2, A, B, L, eps, alpha, beta)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(run, tasks))
    else:
        parts = [run(t) for t in tasks]
    sums = np.sum([p[0] for p in parts], axis=0)
    peak = max(p[1] for p in parts)
    if peak > 1.0:
        raise BoundViolation(f"sampled |xi| or |eta| = {peak} exceeds 1")

    means = sums[:4] / n
    second = sums[4:] / n
    var = np.maximum(second - means**2, 0.0) / (n - 1)
    se = np.sqrt(var)
    ma, mb, ms, mj = means
    estimate = float(ma * mb * ms)
    stderr = float(math.sqrt((mb * ms * se[0]) ** 2 + (ma * ms * se[1]) ** 2 + (ma * mb * se[2]) ** 2))
    exact = psi1.box_probability(A) * psi2.box_probability(B) * math.cos(alpha - beta) \
        if isinstance(A, Box) and isinstance(B, Box) else float("nan")
    terms = {
        "space_A": MonteCarloEstimate(float(ma), float(se[0])),
        "space_B": MonteCarloEstimate(float(mb), float(se[1])),
        "spin": MonteCarloEstimate(float(ms), float(se[2])),
    }
    return Theorem8Result(
        estimate, stderr, True, eps, exact, terms, MonteCarloEstimate(float(mj), float(se[3]))
    )
