import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from spacetime_qi import spatial as sp
from spacetime_qi import rng as _rng
from spacetime_qi.exceptions import ConvergenceError, DomainError, PreconditionError

BIG = 1e3
ORIGIN = sp.GaussianPacket3((0, 0, 0), 1.0)


def everywhere():
    return sp.Box((-BIG,) * 3, (BIG,) * 3)


def half_space():
    return sp.Box((0, -BIG, -BIG), (BIG, BIG, BIG))


def chi3_tail(x):
    """P(|r| >= x) for a standard 3-D Gaussian by radial quadrature of the chi density."""
    f = lambda r: math.sqrt(2 / math.pi) * r * r * math.exp(-r * r / 2)
    val, _ = integrate.quad(f, x, math.inf, epsabs=0, epsrel=1e-12)
    return val


vec = st.lists(st.floats(-5, 5), min_size=3, max_size=3)


class TestRegions:
    def test_box_validation(self):
        with pytest.raises(DomainError):
            sp.Box((0, 0, 0), (1, 1, 0))

    def test_cube_and_volume(self):
        c = sp.Box.cube((1, 2, 3), 2.0)
        assert c.lower == (0.0, 1.0, 2.0) and c.volume() == 8.0

    def test_distance(self):
        assert sp.Box((3, -1, -1), (5, 1, 1)).distance_from_origin() == 3.0
        assert sp.Box((-1, -1, -1), (1, 1, 1)).distance_from_origin() == 0.0
        assert sp.Ball((5, 0, 0), 2.0).distance_from_origin() == 3.0

    def test_ball_validation(self):
        with pytest.raises(DomainError):
            sp.Ball((0, 0, 0), 0.0)

    def test_packet_normalised(self):
        p = sp.GaussianPacket3((0.5, -0.2, 1.0), 0.7)
        f = lambda r: 4 * math.pi * r * r * p.density(np.array([0.5 + r, -0.2, 1.0]))
        val, _ = integrate.quad(f, 0, 20)
        assert val == pytest.approx(1.0, rel=1e-10)


class TestIntervalProbability:
    @pytest.mark.parametrize("lo,hi", [(-1, 1), (2, 3), (8, 9), (-12, -10), (-30, 30), (20, 21)])
    def test_against_mpmath(self, lo, hi):
        with mpmath.workdps(40):
            exact = (mpmath.erfc(lo / mpmath.sqrt(2)) - mpmath.erfc(hi / mpmath.sqrt(2))) / 2
        got = sp.interval_probability(lo, hi, 0.0, 1.0)
        assert got == pytest.approx(float(exact), rel=1e-12)


class TestGFactor:
    def test_full_space(self):
        rho = sp.ProductDensity(ORIGIN, sp.GaussianPacket3((4, 0, 0), 2.0))
        assert sp.g_factor(rho, everywhere(), everywhere()) == pytest.approx(1.0, abs=1e-15)

    def test_half_spaces(self):
        rho = sp.ProductDensity(ORIGIN, ORIGIN)
        assert sp.g_factor(rho, half_space(), half_space()) == pytest.approx(0.25, abs=1e-15)

    @pytest.mark.parametrize("seed", [1, 2])
    def test_closed_form_vs_monte_carlo(self, seed):
        rho = sp.ProductDensity(sp.GaussianPacket3((0.5, 0, 0), 0.8), sp.GaussianPacket3((5, 1, 0), 1.3))
        A = sp.Box((0, -1, -1), (1.5, 1, 0.5))
        B = sp.Box((3, 0, -2), (6, 3, 2))
        est = sp.g_factor_mc(rho, A, B, n=10**6, seed=seed)
        assert abs(est.estimate - sp.g_factor(rho, A, B)) <= 4 * est.stderr

    @given(vec, vec, st.floats(0.05, 5), st.floats(0.05, 5), vec, vec, vec, vec)
    def test_unit_interval(self, m1, m2, s1, s2, lo_a, w_a, lo_b, w_b):
        rho = sp.ProductDensity(sp.GaussianPacket3(m1, s1), sp.GaussianPacket3(m2, s2))
        A = sp.Box(lo_a, np.add(lo_a, np.abs(w_a) + 0.01))
        B = sp.Box(lo_b, np.add(lo_b, np.abs(w_b) + 0.01))
        assert 0.0 <= sp.g_factor(rho, A, B) <= 1.0

    @given(vec, st.floats(0.0, 3.0))
    def test_enlarging_never_decreases(self, lo, grow):
        rho = sp.ProductDensity(ORIGIN, ORIGIN)
        A = sp.Box(lo, np.add(lo, 1.0))
        bigger = sp.Box(np.subtract(lo, grow), np.add(lo, 1.0 + grow))
        B = sp.Box.cube((0, 0, 0), 1.0)
        assert sp.g_factor(rho, bigger, B) >= sp.g_factor(rho, A, B)

    def test_additivity(self):
        rho = sp.ProductDensity(sp.GaussianPacket3((0.3, 0, 0), 1.1), ORIGIN)
        A1 = sp.Box((-1, -1, -1), (0.4, 1, 1))
        A2 = sp.Box((0.4, -1, -1), (2, 1, 1))
        A = sp.Box((-1, -1, -1), (2, 1, 1))
        B = sp.Box.cube((0, 0, 0), 1.5)
        assert sp.g_factor(rho, A1, B) + sp.g_factor(rho, A2, B) == pytest.approx(sp.g_factor(rho, A, B), abs=1e-9)

    def test_ball_uses_monte_carlo(self):
        rho = sp.ProductDensity(ORIGIN, ORIGIN)
        # P(|r| < 2) for a standard 3-D Gaussian.
        exact = 1.0 - chi3_tail(2.0)
        g = sp.g_factor(rho, sp.Ball((0, 0, 0), 2.0), everywhere(), n=200_000, seed=4)
        assert abs(g - exact) < 4 * math.sqrt(exact * (1 - exact) / 200_000)

    def test_general_density(self):
        def sampler(gen, n):
            r1 = gen.standard_normal((n, 3))
            return r1, -r1
        rho = sp.GeneralDensity(sampler)
        # Perfectly anticorrelated positions: both half-space events together never happen.
        assert sp.g_factor(rho, half_space(), half_space(), n=10**5, seed=1) == 0.0

    def test_monte_carlo_variance_guard(self):
        rho = sp.GeneralDensity(lambda gen, n: (gen.standard_normal((n, 3)), gen.standard_normal((n, 3))))
        with pytest.raises(ConvergenceError):
            sp.g_factor(rho, half_space(), half_space(), n=100, seed=0, max_stderr=1e-3)


class TestDecay:
    def test_drop_and_limit(self):
        rho = sp.ProductDensity(ORIGIN, ORIGIN)
        cube = sp.Box.cube((0, 0, 0), 1.0)
        gs = sp.g_decay_scan(rho, cube, cube, (1, 0, 0), list(range(13)))
        assert gs[0] / gs[10] > 1e3
        assert gs[-1] < 1e-8
        assert all(b < a for a, b in zip(gs, gs[1:]))

    def test_translation_covariance(self):
        rho = sp.ProductDensity(ORIGIN, sp.GaussianPacket3((3, 0, 0), 1.5))
        A, B = sp.Box.cube((1, 0, 0), 2.0), sp.Box.cube((3, 1, 0), 1.0)
        l = (2.5, -1.0, 4.0)
        moved = sp.g_factor(rho.translated(l), A.translated(l), B.translated(l))
        assert moved == pytest.approx(sp.g_factor(rho, A, B), rel=1e-12)

    def test_distances_must_increase(self):
        rho = sp.ProductDensity(ORIGIN, ORIGIN)
        cube = sp.Box.cube((0, 0, 0), 1.0)
        with pytest.raises(DomainError):
            sp.g_decay_scan(rho, cube, cube, (1, 0, 0), [0, 2, 1])
        with pytest.raises(DomainError):
            sp.g_decay_scan(rho, cube, cube, (0, 0, 0), [0, 1])


class TestLocalCorrelation:
    def test_full_space_reduces_to_singlet(self):
        rho = sp.ProductDensity(ORIGIN, ORIGIN)
        a, b = np.array([0, 0, 1.0]), np.array([0, 1.0, 0])
        c = np.array([math.sin(0.3), 0, math.cos(0.3)])
        assert sp.local_correlation(rho, everywhere(), everywhere(), a, c) == pytest.approx(-math.cos(0.3), abs=1e-12)
        assert sp.local_correlation(rho, everywhere(), everywhere(), a, b) == pytest.approx(0.0, abs=1e-12)

    def test_quarter_setup(self):
        rho = sp.ProductDensity(ORIGIN, ORIGIN)
        z = (0, 0, 1.0)
        assert sp.local_correlation(rho, half_space(), half_space(), z, z) == pytest.approx(-0.25, abs=1e-12)

    def test_far_translated_vanishes(self):
        rho = sp.ProductDensity(ORIGIN, ORIGIN)
        cube = sp.Box.cube((0, 0, 0), 2.0)
        z = (0, 0, 1.0)
        vals = [abs(sp.local_correlation(rho, cube.translated((l, 0, 0)), cube, z, z)) for l in (0, 5, 10, 20)]
        assert vals[-1] < 1e-40 and all(b < a for a, b in zip(vals, vals[1:]))


class TestClassicalModel:
    def test_epsilon_oracle(self):
        eps = sp.outer_tail_mass(ORIGIN, 3.0)
        assert eps == pytest.approx(chi3_tail(3.0), rel=1e-10)
        assert eps == pytest.approx(0.0293, abs=5e-5)

    def test_epsilon_off_centre_against_sampling(self):
        p = sp.GaussianPacket3((1.0, 0.5, 0), 1.2)
        r = p.sample(_rng.stream(3, 0), 400_000)
        frac = np.mean(np.sum(r * r, axis=1) >= 9.0)
        eps = sp.outer_tail_mass(p, 3.0)
        assert abs(frac - eps) < 4 * math.sqrt(eps * (1 - eps) / 400_000)

    def _setup(self):
        psi2 = sp.GaussianPacket3((8, 0, 0), 1.0)
        A = sp.Box((3, -1, -1), (5, 1, 1))
        B = sp.Box((6.5, -1.5, -1.5), (9.5, 1.5, 1.5))
        return ORIGIN, psi2, A, B

    def test_equal_angles_gives_g(self):
        psi1, psi2, A, B = self._setup()
        res = sp.theorem8_model(psi1, psi2, A, B, 3.0, 0.4, 0.4, n=400_000, seed=5)
        g = sp.g_factor(sp.ProductDensity(psi1, psi2), A, B)
        assert res.exact == pytest.approx(g, rel=1e-12)
        assert abs(res.estimate - g) <= 4 * res.stderr
        assert res.bounds_ok
        assert abs(res.joint.estimate - g) <= 4 * res.joint.stderr

    def test_term_means(self):
        psi1, psi2, A, B = self._setup()
        res = sp.theorem8_model(psi1, psi2, A, B, 3.0, 0.0, 1.0, n=400_000, seed=6)
        eps = res.epsilon
        checks = [
            (res.terms["space_A"], psi1.box_probability(A) / eps),
            (res.terms["space_B"], psi2.box_probability(B)),
            (res.terms["spin"], eps * math.cos(1.0)),
        ]
        for est, target in checks:
            assert abs(est.estimate - target) <= 4 * est.stderr

    def test_tiny_g(self):
        psi1, psi2, A, B = self._setup()
        far_B = B.translated((4, 0, 0))
        res = sp.theorem8_model(psi1, psi2, A, far_B, 3.0, 0.0, 0.5, n=300_000, seed=7)
        assert res.exact < 1e-4
        assert res.stderr > 0.0
        assert abs(res.estimate - res.exact) <= 4 * res.stderr

    def test_reproducible_across_jobs(self):
        psi1, psi2, A, B = self._setup()
        a = sp.theorem8_model(psi1, psi2, A, B, 3.0, 0.0, 0.5, n=600_000, seed=8)
        b = sp.theorem8_model(psi1, psi2, A, B, 3.0, 0.0, 0.5, n=600_000, seed=8, jobs=3)
        assert a.estimate == b.estimate and a.stderr == b.stderr

    def test_preconditions(self):
        psi1, psi2, A, B = self._setup()
        with pytest.raises(PreconditionError, match="below 1/2"):
            sp.theorem8_model(psi1, psi2, sp.Box((1, -1, -1), (5, 1, 1)), B, 1.0, 0, 0, n=1000, seed=0)
        with pytest.raises(PreconditionError, match="must lie"):
            sp.theorem8_model(psi1, psi2, sp.Box((2, -1, -1), (5, 1, 1)), B, 3.0, 0, 0, n=1000, seed=0)
        with pytest.raises(PreconditionError, match="stall"):
            sp.theorem8_model(psi1, psi2, sp.Box((6, -1, -1), (8, 1, 1)), B, 6.0, 0, 0, n=1000, seed=0)
        with pytest.raises(PreconditionError):
            sp.theorem8_model(psi1, psi2, A, B, 0.0, 0, 0, n=1000, seed=0)
