r"""Classical complex Gaussian field with the equal-time vacuum covariance.

The field on a periodic ``n^3`` lattice with spacing ``a`` is synthesised as

.. math::

    \xi(\mathbf{x}) = \sum_{|\mathbf{k}| \le \Lambda} c_{\mathbf{k}}
        \sqrt{\frac{\Delta^3 k}{(2\pi)^3\, 2\omega_k}}\, e^{i\mathbf{k}\cdot\mathbf{x}},
    \qquad \Lambda = \pi / a,

with independent standard complex Gaussian weights :math:`c_{\mathbf{k}}`.
Its covariance :math:`E\,\xi(x)\xi^*(y)` is the lattice kernel
:math:`V^{-1}\sum_{|\mathbf{k}|\le\Lambda} e^{i\mathbf{k}\cdot(x-y)}/(2\omega_k)`,
a Riemann sum for the cutoff kernel

.. math::

    K_\Lambda(r) = \frac{1}{4\pi^2}\int_0^\Lambda \frac{k^2}{\omega_k}\,
                   \mathrm{sinc}(kr)\,dk .

Being a circular complex Gaussian, every mixed moment
:math:`E\,\xi(x_1)\cdots\xi(x_n)\xi^*(y_1)\cdots\xi^*(y_n)` equals the
permanent of the covariance matrix ``K(x_i, y_j)``.  For ``m = 0`` the zero
mode is dropped.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import integrate

from . import rng as _rng
from .exceptions import DomainError, SizeLimitError
from .fieldkernel import check_mass

__all__ = [
    "MAX_PERMANENT",
    "EnsembleMoment",
    "LatticeField",
    "LatticeSpec",
    "cutoff_kernel",
    "empirical_moment",
    "ensemble_values",
    "lattice_kernel",
    "lattice_kernel_matrix",
    "permanent",
    "permanent_naive",
    "sample_field",
]

MAX_PERMANENT = 8


@dataclass(frozen=True)
class LatticeSpec:
    """Periodic cubic lattice: ``n`` points per axis, ``spacing`` apart."""

    n: int = 32
    spacing: float = 1.0
    m: float = 1.0

    def __post_init__(self):
        n = int(self.n)
        if n < 8 or n & (n - 1):
            raise DomainError("points per axis must be a power of two, at least 8")
        if not self.spacing > 0.0:
            raise DomainError("lattice spacing must be positive")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", check_mass(self.m))

    @property
    def cutoff(self) -> float:
        return math.pi / self.spacing

    @property
    def volume(self) -> float:
        return (self.n * self.spacing) ** 3

    @property
    def max_lag(self) -> float:
        """Largest lag kept clear of wrap-around effects."""
        return self.n * self.spacing / 4.0

    def momenta(self) -> np.ndarray:
        """Lattice momenta along one axis in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.spacing)

    def mode_weights(self) -> np.ndarray:
        """Variance ``Delta^3 k / ((2 pi)^3 2 omega_k)`` of each mode; zero beyond the cutoff."""
        k = self.momenta()
        kx, ky, kz = np.meshgrid(k, k, k, indexing="ij")
        k2 = kx * kx + ky * ky + kz * kz
        omega = np.sqrt(k2 + self.m * self.m)
        inside = k2 <= self.cutoff**2
        if self.m == 0.0:
            inside &= k2 > 0.0
        w = np.zeros_like(k2)
        w[inside] = 1.0 / (self.volume * 2.0 * omega[inside])
        return w


@dataclass
class LatticeField:
    values: np.ndarray
    spec: LatticeSpec
    seed: int
    index: int = 0


def _weights(gen: np.random.Generator, amp_inside: np.ndarray, inside: np.ndarray):
    """Complex Gaussian mode weights; only modes inside the cutoff consume random numbers."""
    c = np.zeros(inside.shape, dtype=complex)
    z = gen.standard_normal(2 * amp_inside.size).view(complex) * math.sqrt(0.5)
    c[inside] = z * amp_inside
    return c


def _mode_layout(spec: LatticeSpec):
    w = spec.mode_weights()
    inside = w > 0.0
    return inside, np.sqrt(w[inside])


def sample_field(spec: LatticeSpec, seed: int, index: int = 0) -> LatticeField:
    """Draw one field; ``(seed, index)`` selects an independent stream."""
    inside, amp = _mode_layout(spec)
    c = _weights(_rng.stream(seed, index), amp, inside)
    # ifftn carries a 1/N factor that the plain mode sum does not.
    values = np.fft.ifftn(c) * c.size
    return LatticeField(values, spec, seed, index)


def lattice_kernel(spec: LatticeSpec, lag) -> complex:
    """Exact covariance ``E xi(x + lag) xi*(x)`` of the sampler, by direct mode sum."""
    lag = np.asarray(lag, dtype=float).reshape(3)
    k = spec.momenta()
    w = spec.mode_weights()
    px = np.exp(1j * k * lag[0])
    py = np.exp(1j * k * lag[1])
    pz = np.exp(1j * k * lag[2])
    return complex(np.einsum("ijk,i,j,k->", w, px, py, pz))


def lattice_kernel_matrix(spec: LatticeSpec, xs: Sequence, ys: Sequence) -> np.ndarray:
    """``K[i, j] = E xi(x_i) xi*(y_j)`` for integer lattice points ``xs`` and ``ys``."""
    xs = np.asarray(xs, dtype=float).reshape(-1, 3)
    ys = np.asarray(ys, dtype=float).reshape(-1, 3)
    out = np.empty((len(xs), len(ys)), dtype=complex)
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            out[i, j] = lattice_kernel(spec, (x - y) * spec.spacing)
    return out


def cutoff_kernel(r: float, m: float, cutoff: float) -> float:
    r"""Continuum kernel :math:`K_\Lambda(r)` by adaptive quadrature; finite at ``r = 0``.

    For ``r > 0`` the oscillation is handled by a sine-weighted rule.  As a
    function of the cutoff the value oscillates with amplitude ``~1/r**2``;
    only its average over a period tends to the untruncated two-point function.
    """
    m = check_mass(m)
    if not cutoff > 0.0:
        raise DomainError("cutoff must be positive")
    if r < 0.0:
        raise DomainError("distance must be non-negative")
    if r == 0.0:
        val, _ = integrate.quad(lambda k: k * k / math.hypot(k, m), 0.0, cutoff,
                                epsabs=1e-14, epsrel=1e-12)
    else:
        # k/omega = 1 - h(k); the constant part integrates in closed form.
        h = lambda k: m * m / (math.hypot(k, m) * (math.hypot(k, m) + k))
        rest = 0.0
        if m > 0.0:
            rest, _ = integrate.quad(h, 0.0, cutoff, weight="sin", wvar=r,
                                     limit=max(200, int(cutoff * r)), epsabs=1e-15, epsrel=1e-12)
        val = (2.0 * math.sin(0.5 * cutoff * r) ** 2 / r - rest) / r
    return val / (4.0 * math.pi**2)


class EnsembleMoment(NamedTuple):
    value: complex
    stderr: float
    count: int


def ensemble_values(
    spec: LatticeSpec, points: Sequence, size: int, seed: int, batch: int = 64
) -> np.ndarray:
    """Field values at ``points`` for ``size`` independent members, shape ``(size, len(points))``.

    Member ``i`` comes from stream ``(seed, i)`` and is the same field that
    ``sample_field(spec, seed, i)`` returns.  For a handful of points the
    mode sum is evaluated directly at those points instead of transforming
    the whole lattice.
    """
    pts = np.asarray(points, dtype=int).reshape(-1, 3) % spec.n
    inside, amp = _mode_layout(spec)
    out = np.empty((size, len(pts)), dtype=complex)
    direct = len(pts) <= 64
    if direct:
        k = spec.momenta()
        kx, ky, kz = np.meshgrid(k, k, k, indexing="ij")
        kvec = np.stack([kx[inside], ky[inside], kz[inside]], axis=1)
        phases = np.exp(1j * (kvec @ (pts.T * spec.spacing))) * amp[:, None]
    idx = (slice(None), pts[:, 0], pts[:, 1], pts[:, 2])
    z = np.empty((min(batch, size), amp.size), dtype=complex)
    for start in range(0, size, batch):
        stop = min(size, start + batch)
        rows = z[: stop - start]
        for j, member in enumerate(range(start, stop)):
            rows[j] = _rng.stream(seed, member).standard_normal(2 * amp.size).view(complex)
        rows *= math.sqrt(0.5)
        if direct:
            out[start:stop] = rows @ phases
        else:
            block = np.zeros((stop - start,) + inside.shape, dtype=complex)
            block[:, inside] = rows * amp
            out[start:stop] = (np.fft.ifftn(block, axes=(1, 2, 3)) * inside.size)[idx]
    return out


def empirical_moment(values: np.ndarray, xs: Sequence[int], ys: Sequence[int]) -> EnsembleMoment:
    """Ensemble mean of ``xi(x_1)...xi(x_n) xi*(y_1)...xi*(y_n)``.

    ``values`` is an ensemble array as returned by :func:`ensemble_values`;
    ``xs`` and ``ys`` are column indices into it.
    """
    xs = list(xs)
    ys = list(ys)
    if len(xs) != len(ys):
        raise DomainError("need as many conjugated as unconjugated points")
    if len(xs) > 4:
        raise SizeLimitError("moments are supported up to n = 4")
    if sorted(ys) < sorted(xs):
        # Evaluate in one canonical order so swapping the sides conjugates exactly.
        mom = empirical_moment(values, ys, xs)
        return EnsembleMoment(mom.value.conjugate(), mom.stderr, mom.count)
    v = np.asarray(values)
    prod = np.ones(v.shape[0], dtype=complex)
    for i in xs:
        prod = prod * v[:, i]
    for j in ys:
        prod = prod * np.conj(v[:, j])
    n = v.shape[0]
    mean = prod.mean()
    spread = np.sqrt(np.mean(np.abs(prod - mean) ** 2))
    return EnsembleMoment(complex(mean), float(spread / math.sqrt(n - 1)), n)


def permanent(M) -> complex:
    """Permanent by Ryser's inclusion-exclusion formula with Gray-code updates."""
    A = np.asarray(M, dtype=complex)
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise DomainError("permanent needs a square matrix")
    if n > MAX_PERMANENT:
        raise SizeLimitError(f"permanent limited to n <= {MAX_PERMANENT}")
    if n == 0:
        return 1.0 + 0.0j
    rowsum = np.zeros(n, dtype=complex)
    total = 0.0 + 0.0j
    gray = 0
    for step in range(1, 1 << n):
        # Column flipped between consecutive Gray codes.
        col = (step & -step).bit_length() - 1
        gray ^= 1 << col
        if gray >> col & 1:
            rowsum += A[:, col]
        else:
            rowsum -= A[:, col]
        sign = -1.0 if bin(gray).count("1") % 2 else 1.0
        total += sign * np.prod(rowsum)
    return complex((-1) ** n * total)


def permanent_naive(M) -> complex:
    """Sum over all ``n!`` permutations; reference for small matrices."""
    A = np.asarray(M, dtype=complex)
    n = A.shape[0]
    rows = np.arange(n)
    return complex(sum(np.prod(A[rows, list(p)]) for p in itertools.permutations(range(n))))
