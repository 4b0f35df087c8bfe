import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from spacetime_qi import spinbell as sb
from spacetime_qi.exceptions import DomainError, PreconditionError

SQRT2 = math.sqrt(2.0)


def coplanar(angle):
    return np.array([math.cos(angle), math.sin(angle), 0.0])


unit = st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(
    lambda v: np.linalg.norm(v) > 1e-3).map(lambda v: np.array(v) / np.linalg.norm(v))


class TestSinglet:
    def test_state(self):
        np.testing.assert_allclose(sb.singlet_state(), [0, 1 / SQRT2, -1 / SQRT2, 0])
        assert np.linalg.norm(sb.singlet_state()) == pytest.approx(1.0)

    def test_parallel(self):
        z = (0.0, 0.0, 1.0)
        assert sb.singlet_correlation(z, z) == pytest.approx(-1.0, abs=1e-15)

    def test_orthogonal(self):
        assert sb.singlet_correlation((1, 0, 0), (0, 1, 0)) == pytest.approx(0.0, abs=1e-15)

    def test_coplanar_angle_convention(self):
        for a, b in [(0.0, 0.3), (1.2, -0.4), (2.0, 5.0)]:
            c = sb.singlet_correlation(coplanar(a), coplanar(b))
            assert -c == pytest.approx(math.cos(a - b), abs=1e-12)

    @given(unit, unit)
    def test_dot_product_identity(self, a, b):
        assert sb.singlet_correlation(a, b) == pytest.approx(-float(a @ b), abs=1e-12)

    @given(unit, unit, st.integers(0, 2**31))
    def test_rotation_invariance(self, a, b, seed):
        R = Rotation.random(random_state=seed).as_matrix()
        assert sb.singlet_correlation(R @ a, R @ b) == pytest.approx(sb.singlet_correlation(a, b), abs=1e-12)

    def test_non_unit_rejected(self):
        with pytest.raises(DomainError):
            sb.singlet_correlation((1, 1, 0), (0, 0, 1))

    def test_spin_operator_is_involution(self):
        s = sb.spin_operator(coplanar(0.7))
        np.testing.assert_allclose(s @ s, np.eye(2), atol=1e-15)


class TestCHSH:
    def test_tsirelson_point(self):
        P = sb.attenuated_matrix(1.0)
        assert sb.chsh(P) == pytest.approx(2 * SQRT2, abs=1e-12)

    def test_deterministic(self):
        assert sb.chsh(np.ones((2, 2))) == 2.0

    def test_boundary(self):
        assert sb.chsh(sb.attenuated_matrix(1 / SQRT2)) == pytest.approx(2.0, abs=1e-12)

    def test_validation(self):
        with pytest.raises(DomainError):
            sb.chsh(np.ones((3, 2)))
        with pytest.raises(DomainError):
            sb.chsh([[1.5, 0], [0, 0]])

    @given(st.lists(st.floats(-1, 1), min_size=4, max_size=4))
    def test_at_most_four(self, vals):
        assert 0.0 <= sb.chsh(np.reshape(vals, (2, 2))) <= 4.0

    @pytest.mark.parametrize("g", [0.0, 0.25, 0.5, 1 / SQRT2, 0.9, 1.0])
    def test_quantum_maximum(self, g):
        assert sb.chsh_max_quantum(g).value == pytest.approx(2 * SQRT2 * g, abs=1e-6)

    def test_optimum_is_global_on_fine_grid(self):
        th = np.linspace(0, 2 * np.pi, 97)
        a2, b, b2 = np.meshgrid(th, th, th, indexing="ij")
        grid_best = sb.chsh_from_angles(1.0, 0.0, a2, b, b2).max()
        opt = sb.chsh_max_quantum(1.0)
        assert opt.value >= grid_best - 1e-12
        assert sb.chsh_from_angles(1.0, *opt.angles) == pytest.approx(opt.value, abs=1e-12)

    def test_linear_in_g(self):
        top = sb.chsh_max_quantum(1.0).value
        for g in (0.1, 0.37, 0.8):
            assert sb.chsh_max_quantum(g).value == pytest.approx(g * top, abs=1e-6)

    def test_threshold(self):
        assert sb.threshold_crossing() == pytest.approx(1 / SQRT2, abs=1e-6)

    def test_g_out_of_range(self):
        with pytest.raises(DomainError):
            sb.chsh_max_quantum(1.2)


class TestRegimes:
    @pytest.mark.parametrize("g,expected", [
        (0.0, "lhv_exists"), (0.5, "lhv_exists"), (0.6, "undetermined"),
        (1 / SQRT2, "undetermined"), (0.72, "no_lhv"), (1.0, "no_lhv"),
    ])
    def test_regime(self, g, expected):
        assert sb.g_regime(g) == expected

    def test_necessary_condition(self):
        assert sb.local_realism_necessary_test(sb.attenuated_matrix(1.0)) == "fail"
        assert sb.local_realism_necessary_test(sb.attenuated_matrix(0.72)) == "fail"
        rng = np.random.default_rng(3)
        for _ in range(50):
            angles = rng.uniform(0, 2 * np.pi, 4)
            assert sb.local_realism_necessary_test(sb.attenuated_matrix(0.5, angles)) == "pass"


class TestHiddenVariables:
    def test_examples(self):
        assert sb.lhv_correlation_exact(0.3, 1.0, 1.0) == pytest.approx(0.3, abs=1e-12)
        assert sb.lhv_correlation_exact(0.5, math.pi / 2, 0.0) == pytest.approx(0.0, abs=1e-12)
        assert sb.lhv_correlation_exact(0.4, 0.7, 0.1) == pytest.approx(0.4 * math.cos(0.6), abs=1e-12)
        assert 0.4 * math.cos(0.6) == pytest.approx(0.3301, abs=1e-4)

    def test_identity_on_grid(self):
        grid = np.linspace(0, 2 * np.pi, 20, endpoint=False)
        for g in np.linspace(0, 0.5, 5):
            for a in grid:
                for b in grid:
                    assert abs(sb.lhv_correlation_exact(g, a, b) - g * math.cos(a - b)) <= 1e-10

    def test_warns_above_half(self):
        with pytest.warns(RuntimeWarning):
            val = sb.lhv_correlation_exact(0.8, 0.2, 0.1)
        assert val == pytest.approx(0.8 * math.cos(0.1))

    def test_no_warning_at_half(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            sb.lhv_correlation_exact(0.5, 0.0, 0.0)

    def test_monte_carlo(self):
        est = sb.lhv_monte_carlo(0.5, 0.0, 0.0, 10**6, seed=1)
        assert abs(est.estimate - 0.5) <= 4 * est.stderr
        assert abs(est.estimate - 0.5) < 0.002

    def test_monte_carlo_zero_g(self):
        est = sb.lhv_monte_carlo(0.0, 0.3, 1.1, 5000, seed=2)
        assert est.estimate == 0.0 and est.stderr == 0.0

    def test_monte_carlo_reproducible_and_job_independent(self):
        a = sb.lhv_monte_carlo(0.3, 0.2, 1.0, 700_000, seed=9)
        b = sb.lhv_monte_carlo(0.3, 0.2, 1.0, 700_000, seed=9, jobs=3)
        assert a == b
        assert a != sb.lhv_monte_carlo(0.3, 0.2, 1.0, 700_000, seed=10)

    def test_preconditions(self):
        with pytest.raises(PreconditionError):
            sb.lhv_monte_carlo(0.6, 0, 0, 10**4, seed=0)
        with pytest.raises(PreconditionError):
            sb.lhv_monte_carlo(0.3, 0, 0, 999, seed=0)
        with pytest.raises(PreconditionError):
            sb.lhv_monte_carlo(0.3, 0, 0, 10**4, seed=None)

    def test_sampled_chsh_respects_bound(self):
        g = 0.5
        a, a2, b, b2 = sb.optimal_angles()
        ests = [[sb.lhv_monte_carlo(g, x, y, 200_000, seed=11 + 2 * i + j) for j, y in enumerate((b, b2))]
                for i, x in enumerate((a, a2))]
        P = np.array([[e.estimate for e in row] for row in ests])
        se = math.sqrt(sum(e.stderr**2 for row in ests for e in row))
        assert sb.chsh(P) <= 2 + 4 * se
