r"""Vacuum and polynomial-state expectations of smeared free scalar fields.

A smeared field is :math:`\varphi[u] = \int \frac{d^3k}{\sqrt{2\omega_k}}
(u(\mathbf{k}) a^*(\mathbf{k}) + \bar u(\mathbf{k}) a(\mathbf{k}))` with a
Gaussian on-shell amplitude

.. math::

    u(\mathbf{k}) = N \exp(-|\mathbf{k}-\mathbf{k}_0|^2/(4\sigma^2))
                      \exp(-i\mathbf{k}\cdot\mathbf{x}_0).

Each factor is self-adjoint.  The elementary pairing is
:math:`C(u, v) = \langle 0|\varphi[u]\varphi[v]|0\rangle = \int \frac{d^3k}{2\omega}\bar u v`
and the vacuum expectation of a monomial is the sum over perfect matchings of
products of pairings (Wick's theorem).  A polynomial state
:math:`|\psi\rangle = C|0\rangle` has expectations
:math:`\omega(A) = \langle 0|C^\dagger A C|0\rangle / \langle 0|C^\dagger C|0\rangle`,
with :math:`C^\dagger` the reversed monomial.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

from .exceptions import ConvergenceError, DomainError, SizeLimitError
from .fieldkernel import check_mass

__all__ = [
    "MAX_FACTORS",
    "FieldMonomial",
    "OnShellAmplitude",
    "PolynomialState",
    "cluster_scan",
    "contraction",
    "contraction_matrix",
    "correlation_gap",
    "count_pairings",
    "double_factorial",
    "iter_pairings",
    "state_expectation",
    "translate",
    "vacuum_deviation",
    "vacuum_expectation",
]

MAX_FACTORS = 12

# Gaussian envelope is cut where it falls below 1e-16.
_ENVELOPE_RADIUS = math.sqrt(2.0 * math.log(1e16))
_AZIMUTH_NODES = 96
_AGREEMENT = 1e-9
_OFFSET_DIGITS = 12


def _vec3(x) -> tuple:
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise DomainError(f"expected a finite 3-vector, got {x!r}")
    return tuple(float(c) for c in arr)


@dataclass(frozen=True)
class OnShellAmplitude:
    """Gaussian wave packet on the mass shell.

    ``center`` is the position-space centre, ``momentum`` the momentum-space
    centre and ``width`` the momentum spread (position spread ``1/(2 width)``).
    The normalisation constant is never stored: pairings are divided by the
    self-pairings, which is the same as choosing ``N`` with ``C(u, u) = 1``.
    """

    center: tuple = (0.0, 0.0, 0.0)
    momentum: tuple = (0.0, 0.0, 0.0)
    width: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center))
        object.__setattr__(self, "momentum", _vec3(self.momentum))
        width = float(self.width)
        if not width > 0.0 or not math.isfinite(width):
            raise DomainError("packet width must be positive")
        object.__setattr__(self, "width", width)

    @property
    def position_width(self) -> float:
        return 1.0 / (2.0 * self.width)

    def translated(self, shift) -> "OnShellAmplitude":
        s = _vec3(shift)
        return OnShellAmplitude(
            tuple(c + d for c, d in zip(self.center, s)), self.momentum, self.width
        )


class FieldMonomial:
    """Ordered product of smeared field factors, read left to right."""

    __slots__ = ("factors",)

    def __init__(self, factors: Iterable[OnShellAmplitude] = ()):
        factors = tuple(factors)
        for f in factors:
            if not isinstance(f, OnShellAmplitude):
                raise TypeError(f"monomial factors must be OnShellAmplitude, got {type(f)!r}")
        self.factors = factors

    def __len__(self):
        return len(self.factors)

    def __iter__(self):
        return iter(self.factors)

    def __add__(self, other: "FieldMonomial") -> "FieldMonomial":
        return FieldMonomial(self.factors + other.factors)

    def __eq__(self, other):
        return isinstance(other, FieldMonomial) and self.factors == other.factors

    def __hash__(self):
        return hash(self.factors)

    def __repr__(self):
        return f"FieldMonomial({list(self.factors)!r})"

    def adjoint(self) -> "FieldMonomial":
        return FieldMonomial(reversed(self.factors))


class PolynomialState:
    """Vector state ``C|0>`` built from a creator monomial ``C``."""

    def __init__(self, creator: FieldMonomial, m: float, max_factors: int = MAX_FACTORS):
        self.creator = creator
        self.m = check_mass(m)
        self.max_factors = max_factors
        norm2 = vacuum_expectation(creator.adjoint() + creator, self.m, max_factors)
        if not norm2.real > 0.0:
            raise DomainError("creator annihilates the vacuum; the state has zero norm")
        self.norm2 = float(norm2.real)

    @classmethod
    def vacuum(cls, m: float) -> "PolynomialState":
        return cls(FieldMonomial(), m)

    def __repr__(self):
        return f"PolynomialState(creator={self.creator!r}, m={self.m}, norm2={self.norm2:.6g})"


def translate(obj, shift):
    """Shift every packet centre by ``shift``.

    Works on a single amplitude or on a monomial.
    """
    if isinstance(obj, OnShellAmplitude):
        return obj.translated(shift)
    if isinstance(obj, FieldMonomial):
        return FieldMonomial(f.translated(shift) for f in obj)
    raise TypeError(f"cannot translate {type(obj)!r}")


# --------------------------------------------------------------------------
# Pairing integral
# --------------------------------------------------------------------------


def _gauss_legendre(n: int, a: float, b: float):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def _orthonormal_frame(axis: np.ndarray):
    norm = np.linalg.norm(axis)
    e3 = axis / norm if norm > 0.0 else np.array([0.0, 0.0, 1.0])
    helper = np.array([1.0, 0.0, 0.0]) if abs(e3[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(e3, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    return e1, e2, e3


def _cubature(c, tau, d, m, n_radial, n_polar, n_azimuth):
    """Integral of ``exp(-|q|^2/(2 tau^2) + i (c+q).d) / (2 omega(c+q))`` over q.

    Spherical coordinates centred on the Gaussian centre ``c`` with the polar
    axis along ``d``; Gauss-Legendre in radius and cos(theta), trapezoid in
    the periodic azimuth.
    """
    e1, e2, e3 = _orthonormal_frame(d)
    dn = float(np.linalg.norm(d))
    q, wq = _gauss_legendre(n_radial, 0.0, tau * _ENVELOPE_RADIUS)
    t, wt = _gauss_legendre(n_polar, -1.0, 1.0)
    phi = np.arange(n_azimuth) * (2.0 * np.pi / n_azimuth)
    s = np.sqrt(1.0 - t * t)

    # Component of c in each frame direction.
    c1, c2, c3 = float(c @ e1), float(c @ e2), float(c @ e3)
    qs = q[:, None] * s[None, :]
    qt = q[:, None] * t[None, :]
    x = c1 + qs[:, :, None] * np.cos(phi)[None, None, :]
    y = c2 + qs[:, :, None] * np.sin(phi)[None, None, :]
    z = (c3 + qt)[:, :, None]
    omega = np.sqrt(x * x + y * y + z * z + m * m)
    azimuthal = (1.0 / (2.0 * omega)).sum(axis=2) * (2.0 * np.pi / n_azimuth)

    radial = wq * q * q * np.exp(-0.5 * (q / tau) ** 2)
    phase = np.exp(1j * dn * qt)
    total = np.einsum("i,j,ij,ij->", radial, wt, azimuthal, phase)
    return total * np.exp(1j * float(c @ d))


def _node_count(phase_span: float) -> int:
    return max(64, int(math.ceil(0.6 * phase_span)) + 32)


def _raw_pairing(k0u, su, k0v, sv, d, m):
    """Unnormalised pairing of two unit-amplitude packets."""
    k0u = np.asarray(k0u)
    k0v = np.asarray(k0v)
    d = np.asarray(d)
    au = 1.0 / (4.0 * su * su)
    av = 1.0 / (4.0 * sv * sv)
    a = au + av
    c = (au * k0u + av * k0v) / a
    envelope = math.exp(-(au * av / a) * float(np.sum((k0u - k0v) ** 2)))
    tau = 1.0 / math.sqrt(2.0 * a)
    span = tau * _ENVELOPE_RADIUS * float(np.linalg.norm(d))
    n = _node_count(span)
    fine = _cubature(c, tau, d, m, n, n, _AZIMUTH_NODES)
    coarse = _cubature(c, tau, d, m, n - 16, n - 16, 64)
    scale = _cubature(c, tau, np.zeros(3), m, 48, 48, _AZIMUTH_NODES).real
    if abs(fine - coarse) > _AGREEMENT * scale:
        raise ConvergenceError(
            f"pairing cubature did not settle: |fine - coarse| = {abs(fine - coarse):.3g}"
        )
    return envelope * fine


_cache_lock = threading.Lock()
_pair_cache: dict = {}
_self_cache: dict = {}


def _self_pairing(u: OnShellAmplitude, m: float) -> float:
    key = (u.momentum, u.width, m)
    with _cache_lock:
        hit = _self_cache.get(key)
    if hit is None:
        hit = float(_raw_pairing(u.momentum, u.width, u.momentum, u.width, (0.0, 0.0, 0.0), m).real)
        with _cache_lock:
            _self_cache[key] = hit
    return hit


def contraction(u: OnShellAmplitude, v: OnShellAmplitude, m: float) -> complex:
    r"""Two-point pairing :math:`\langle 0|\varphi[u]\varphi[v]|0\rangle` of normalised packets.

    The integrand only sees the centre difference ``u.center - v.center``,
    so translating both packets together leaves the value bit-identical.
    Swapping the arguments returns the exact complex conjugate.
    """
    m = check_mass(m)
    # Rounding absorbs the last-bit noise of translating both centres.
    d = tuple(round(a - b, _OFFSET_DIGITS) + 0.0 for a, b in zip(u.center, v.center))
    key = (u.momentum, u.width, v.momentum, v.width, d, m)
    neg = (v.momentum, v.width, u.momentum, u.width, tuple(-x for x in d), m)
    flip = neg < key
    if flip:
        key = neg
    with _cache_lock:
        value = _pair_cache.get(key)
    if value is None:
        k0u, su, k0v, sv, dd, _ = key
        raw = _raw_pairing(k0u, su, k0v, sv, dd, m)
        nu = _self_pairing(OnShellAmplitude(momentum=k0u, width=su), m)
        nv = _self_pairing(OnShellAmplitude(momentum=k0v, width=sv), m)
        value = complex(raw / math.sqrt(nu * nv))
        if key[0] == key[2] and key[1] == key[3] and not any(dd):
            value = 1.0 + 0.0j
        with _cache_lock:
            _pair_cache[key] = value
    return value.conjugate() if flip else value


def contraction_matrix(mono: FieldMonomial, m: float) -> np.ndarray:
    """Matrix of pairings ``C[i, j] = contraction(f_i, f_j)`` over the monomial's factors."""
    n = len(mono)
    out = np.empty((n, n), dtype=complex)
    for i, fi in enumerate(mono):
        for j, fj in enumerate(mono):
            out[i, j] = contraction(fi, fj, m) if j >= i else out[j, i].conjugate()
    return out


# --------------------------------------------------------------------------
# Wick enumeration
# --------------------------------------------------------------------------


def double_factorial(k: int) -> int:
    return math.prod(range(k, 0, -2)) if k > 0 else 1


def iter_pairings(n: int) -> Iterator[tuple]:
    """Yield every perfect matching of ``range(n)`` as a tuple of ``(i, j)``, ``i < j``.

    The first unpaired index is paired with each later index in turn.
    """
    if n % 2:
        return

    def rec(rest):
        if not rest:
            yield ()
            return
        first = rest[0]
        for pos in range(1, len(rest)):
            remaining = rest[1:pos] + rest[pos + 1:]
            for tail in rec(remaining):
                yield ((first, rest[pos]),) + tail

    yield from rec(tuple(range(n)))


def count_pairings(n: int) -> int:
    """Number of matchings visited by :func:`iter_pairings`; equals ``(n-1)!!``."""
    return sum(1 for _ in iter_pairings(n))


def _wick_sum(cmat: np.ndarray) -> complex:
    n = cmat.shape[0]
    if n % 2:
        return 0.0 + 0.0j

    @lru_cache(maxsize=None)
    def rec(mask: int) -> complex:
        if mask == 0:
            return 1.0 + 0.0j
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        total = 0.0 + 0.0j
        bits = rest
        while bits:
            low = bits & -bits
            j = low.bit_length() - 1
            total += cmat[i, j] * rec(rest & ~low)
            bits &= ~low
        return total

    return complex(rec((1 << n) - 1))


def _check_size(n: int, max_factors: int):
    if n > max_factors:
        raise SizeLimitError(
            f"monomial has {n} factors, above the limit {max_factors} "
            f"({double_factorial(n - 1)} pairings)"
        )


def vacuum_expectation(mono: FieldMonomial, m: float, max_factors: int = MAX_FACTORS) -> complex:
    """Wick sum of ``<0|f_1 ... f_n|0>`` over all perfect matchings; zero for odd ``n``."""
    n = len(mono)
    _check_size(n, max_factors)
    if n % 2:
        return 0.0 + 0.0j
    return _wick_sum(contraction_matrix(mono, m))


def state_expectation(
    state: PolynomialState, A: FieldMonomial, m: float | None = None, max_factors: int | None = None
) -> complex:
    """Expectation ``<psi|A|psi> / <psi|psi>`` in the polynomial state."""
    m = state.m if m is None else check_mass(m)
    if m != state.m:
        raise DomainError("state and observable use different masses")
    limit = state.max_factors if max_factors is None else max_factors
    C = state.creator
    return vacuum_expectation(C.adjoint() + A + C, m, limit) / state.norm2


def correlation_gap(
    state: PolynomialState, A: FieldMonomial, B: FieldMonomial, shift, m: float | None = None
) -> float:
    """``|omega(A(l) B) - omega(A(l)) omega(B)|`` with ``A`` translated by ``shift``."""
    Al = translate(A, shift)
    joint = state_expectation(state, Al + B, m)
    return abs(joint - state_expectation(state, Al, m) * state_expectation(state, B, m))


def vacuum_deviation(state: PolynomialState, A: FieldMonomial, shift, m: float | None = None) -> float:
    """``|omega(A(l)) - <0|A(l)|0>|``; vanishes as the shift grows."""
    Al = translate(A, shift)
    return abs(state_expectation(state, Al, m) - vacuum_expectation(Al, state.m, state.max_factors))


def cluster_scan(
    state: PolynomialState,
    A: FieldMonomial,
    B: FieldMonomial,
    distances: Sequence[float],
    direction=(1.0, 0.0, 0.0),
) -> list[dict]:
    """Tabulate the clustering quantities along a ray of translations.

    Each row holds the distance, the correlation gap, ``omega(A(l))`` and
    ``<0|A(l)|0>``.
    """
    u = np.asarray(_vec3(direction))
    norm = np.linalg.norm(u)
    if norm == 0.0:
        raise DomainError("direction must be non-zero")
    u = u / norm
    rows = []
    for dist in distances:
        shift = dist * u
        Al = translate(A, shift)
        omega_a = state_expectation(state, Al)
        rows.append(
            {
                "l": float(dist),
                "gap": correlation_gap(state, A, B, shift),
                "omega_A": omega_a,
                "vacuum_A": vacuum_expectation(Al, state.m, state.max_factors),
            }
        )
    return rows
