r"""Vacuum two-point function of the free scalar field at spacelike separation.

For an equal-time separation of length ``r`` the Wightman function is

.. math::

    W_0(r, m) = \frac{1}{(2\pi)^3}\int \frac{d^3k}{2\omega_k} e^{i\mathbf{k}\cdot\mathbf{r}}
              = \frac{1}{4\pi^2 r}\int_0^\infty \frac{k \sin(kr)}{\sqrt{k^2+m^2}}\,dk,

which evaluates to :math:`m K_1(mr) / (4\pi^2 r)` for ``m > 0`` and to
:math:`1/(4\pi^2 r^2)` for ``m = 0``.  Three independent routes are exposed:
the closed form, a direct quadrature of the radial integral (the oracle for
the closed form) and the large-distance asymptotic expression.

A general spacelike separation ``(t, r)`` with ``|t| < r`` is reduced to the
equal-time chart through ``spacelike_distance``.  Natural units throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import mpmath
import numpy as np
from scipy import special

from .exceptions import ConvergenceError, DomainError

__all__ = [
    "LIGHTCONE_GUARD",
    "WightmanValue",
    "asymptotic_ratio",
    "bessel_k1",
    "check_mass",
    "check_distance",
    "spacelike_distance",
    "wightman_asymptotic",
    "wightman_closed",
    "wightman_quadrature",
]

# W0 is singular at coincident points; closer separations are refused.
LIGHTCONE_GUARD = 1e-6

_PREFACTOR = 1.0 / (4.0 * math.pi**2)
_TINY_LAMBDA = 1e-100


@dataclass(frozen=True)
class WightmanValue:
    """Value of the two-point function together with how it was obtained.

    ``residual`` is only set by the quadrature route, where it holds the
    final extrapolation residual in units of the returned value.
    """

    value: float
    method: str
    residual: Optional[float] = None

    def __float__(self) -> float:
        return float(self.value)


def check_mass(m: float) -> float:
    m = float(m)
    if not math.isfinite(m) or m < 0.0:
        raise DomainError(f"mass must be finite and non-negative, got {m!r}")
    return m


def check_distance(r: float) -> float:
    r = float(r)
    if not math.isfinite(r) or r <= 0.0:
        raise DomainError(f"spacelike distance must be positive, got {r!r}")
    if r < LIGHTCONE_GUARD:
        raise DomainError(
            f"distance {r!r} is inside the light-cone guard {LIGHTCONE_GUARD}; "
            "the two-point function is singular at coincident points"
        )
    return r


def spacelike_distance(t: float, r: float) -> float:
    """Invariant distance ``sqrt(r**2 - t**2)`` of a spacelike separation.

    Raises
    ------
    DomainError
        If the separation is timelike or lightlike.
    """
    t = float(t)
    r = float(r)
    if not abs(t) < abs(r):
        raise DomainError(f"separation (t={t}, r={r}) is not spacelike")
    return math.sqrt((r - t) * (r + t))


def bessel_k1(x):
    """Modified Bessel function of the second kind, order one.

    Thin wrapper over :func:`scipy.special.k1` that enforces ``x > 0``.
    Accepts scalars or arrays.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError("bessel_k1 requires x > 0")
    out = special.k1(arr)
    return float(out) if out.ndim == 0 else out


def wightman_closed(r: float, m: float) -> WightmanValue:
    r"""Closed form :math:`m K_1(mr)/(4\pi^2 r)`, or :math:`1/(4\pi^2 r^2)` when massless."""
    r = check_distance(r)
    m = check_mass(m)
    if m == 0.0:
        value = _PREFACTOR / (r * r)
    else:
        lam = m * r
        if lam < _TINY_LAMBDA:
            # lam K1(lam) = 1 + O(lam^2 log lam); 1/lam would overflow for subnormal lam.
            value = _PREFACTOR / (r * r)
        else:
            # K1 underflows near lam ~ 700; the scaled form keeps the exponent explicit.
            value = _PREFACTOR * m * float(special.k1e(lam)) * math.exp(-lam) / r
    return WightmanValue(value, "closed_form")


def wightman_asymptotic(r: float, m: float) -> WightmanValue:
    r"""Large-distance expression :math:`\frac{m^2}{4\pi\lambda}\sqrt{\pi/(2\lambda)}\,e^{-\lambda}`, ``lambda = m r``.

    The prefactor is reproduced exactly as published.  Its ratio to the
    closed form tends to ``1/pi`` rather than 1; see :func:`asymptotic_ratio`.
    """
    r = check_distance(r)
    m = check_mass(m)
    if m == 0.0:
        raise DomainError("the exponential asymptotic requires m > 0")
    lam = m * r
    # Same expression with m**2 / lam**1.5 folded into sqrt(m) / r**1.5, so tiny masses stay finite.
    value = math.sqrt(m) / (4.0 * math.pi * r) * math.sqrt(math.pi / (2.0 * r)) * math.exp(-lam)
    return WightmanValue(value, "asymptotic")


def asymptotic_ratio(r: float, m: float) -> float:
    """Ratio ``wightman_closed / wightman_asymptotic`` at the given point."""
    return wightman_closed(r, m).value / wightman_asymptotic(r, m).value


def _remainder_series(r: float, m: float, nterms: int, dps: int):
    """Integral of ``(1 - k/omega) sin(kr)`` over ``[0, inf)``.

    The integrand decays like ``m**2 / (2 k**2)``.  It is integrated one half
    period at a time and the partial sums are accelerated with the Shanks
    (epsilon) transformation.  Returns the estimate and the difference
    between the last two diagonal estimates.
    """
    with mpmath.workdps(dps):
        rr = mpmath.mpf(r)
        m2 = mpmath.mpf(m) ** 2

        def integrand(k):
            w = mpmath.sqrt(k * k + m2)
            return m2 / (w * (w + k)) * mpmath.sin(k * rr)

        half = mpmath.pi / rr
        total = mpmath.mpf(0)
        partial = []
        for n in range(nterms):
            total += mpmath.quad(integrand, [n * half, (n + 1) * half])
            partial.append(total)
        table = mpmath.shanks(partial)
        last, prev = table[-1], table[-2]
        # Odd columns of the epsilon table hold the estimates.
        col = len(last) - 1 if (len(last) - 1) % 2 else len(last) - 2
        prev_col = col if col < len(prev) else col - 2
        estimate = last[col]
        residual = abs(last[col] - prev[prev_col])
        return estimate, residual, 1 / rr


def wightman_quadrature(
    r: float,
    m: float,
    cutoff: Optional[float] = None,
    tol: float = 1e-8,
) -> WightmanValue:
    r"""Evaluate the defining radial integral numerically.

    The integrand :math:`k\sin(kr)/\omega_k` does not decay, so the integral
    only exists with a convergence factor :math:`e^{-\epsilon k}`, ``eps -> 0``.
    Writing :math:`k/\omega = 1 - h(k)`, the undamped piece gives
    :math:`r/(r^2+\epsilon^2) \to 1/r` exactly, and the remainder
    :math:`\int h(k)\sin(kr)\,dk` converges absolutely, so its damping limit is
    taken by direct summation over half periods with sequence acceleration.
    Working precision grows with ``m*r`` because the result is exponentially
    smaller than the two pieces it is the difference of.

    Parameters
    ----------
    r, m : float
        Equal-time distance and mass.
    cutoff : float, optional
        Momentum up to which the remainder is summed term by term before the
        extrapolated tail takes over.  Defaults to 24 half periods.
    tol : float
        Maximum accepted extrapolation residual, relative to the result.

    Raises
    ------
    ConvergenceError
        If the extrapolation residual exceeds ``tol``.
    """
    r = check_distance(r)
    m = check_mass(m)
    if cutoff is not None and not cutoff > 0:
        raise DomainError("cutoff must be positive")
    if m == 0.0:
        return WightmanValue(_PREFACTOR / (r * r), "quadrature", 0.0)

    nterms = 24 if cutoff is None else max(8, int(math.ceil(cutoff * r / math.pi)))
    dps = 17 + int(math.ceil(m * r / math.log(10.0)))
    remainder, residual, head = _remainder_series(r, m, nterms, dps)
    with mpmath.workdps(dps):
        radial = head - remainder
        rel = abs(residual / radial) if radial != 0 else mpmath.inf
    value = _PREFACTOR * float(radial) / r
    rel = float(rel)
    if not value > 0.0 or rel > tol:
        raise ConvergenceError(
            f"radial integral at r={r}, m={m} did not converge: "
            f"relative residual {rel:.3g} > tol {tol:.3g}"
        )
    return WightmanValue(value, "quadrature", rel)
