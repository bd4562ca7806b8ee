"""The change of variable: construction, derivatives, inverse, asymptotics."""

import numpy as np
import pytest
from scipy.integrate import quad

from schrodual.dual_transform import build_transform, upsilon
from schrodual.errors import TransformRangeError
from schrodual.theta import catalog, theta1

# closed form for theta1: int_0^t sqrt(1+r^2) dr = (t sqrt(1+t^2) + asinh t)/2
UPSILON1_AT_1 = 1.147793574696319


class TestUpsilon:
    def test_identity_coefficient(self, unit_spec):
        assert upsilon(unit_spec, 3.0) == pytest.approx(3.0, rel=1e-12)

    def test_theta1_closed_form(self, t1_spec):
        assert upsilon(t1_spec, 1.0) == pytest.approx(UPSILON1_AT_1, rel=1e-10)
        # quadrature oracle recomputed here, independent of the package path
        val, _ = quad(lambda r: np.sqrt(1.0 + r * r), 0.0, 1.0, epsrel=1e-12)
        assert upsilon(t1_spec, 1.0) == pytest.approx(val, rel=1e-10)

    def test_odd(self, t1_spec):
        assert upsilon(t1_spec, -1.0) == pytest.approx(-UPSILON1_AT_1, rel=1e-10)

    def test_rejects_nonfinite(self, t1_spec):
        with pytest.raises(ValueError):
            upsilon(t1_spec, np.inf)


class TestConstruction:
    def test_identity_transform_is_exact(self, unit_transform):
        s = np.linspace(-10.0, 10.0, 41)
        np.testing.assert_allclose(unit_transform.f(s), s, atol=1e-8)
        assert unit_transform.achieved_residual <= 1e-8

    def test_inverse_of_closed_form(self, t1_transform):
        assert t1_transform.f(UPSILON1_AT_1) == pytest.approx(1.0, abs=1e-7)

    def test_tail_square_root_growth(self, t1_transform):
        """f(S)/sqrt(S) -> (8/alpha^2)^(1/4) = sqrt(2) for theta1."""
        S = 1e6
        assert t1_transform.f(S) / np.sqrt(S) == pytest.approx(np.sqrt(2.0), rel=1e-2)
        assert t1_transform.f(S) / S == pytest.approx(0.0, abs=1e-2)

    def test_input_validation(self, t1_spec):
        with pytest.raises(ValueError):
            build_transform(t1_spec, s_max=-1.0)
        with pytest.raises(ValueError):
            build_transform(t1_spec, s_max=10.0, tol=1e-3)  # tol must be <= 1e-4


class TestDerivatives:
    def test_prime_at_zero(self, t1_transform):
        # f(s)/s -> 1/sqrt(theta(0)) = 1 for theta1
        assert t1_transform.f_prime(0.0) == pytest.approx(1.0, rel=1e-12)

    def test_second_vanishes_for_identity(self, unit_transform):
        s = np.linspace(-5.0, 5.0, 11)
        np.testing.assert_allclose(unit_transform.f_second(s), 0.0, atol=1e-15)

    def test_prime_times_f_tail(self, t1_transform):
        """f'(s) f(s) -> sqrt(2)/alpha = 1 for theta1."""
        s = 1e6
        assert t1_transform.f_prime(s) * t1_transform.f(s) == pytest.approx(1.0, rel=1e-2)

    def test_second_matches_differences(self, t1_transform):
        s = np.array([0.3, 1.1, 4.7])
        h = 1e-5
        fd = (t1_transform.f(s + h) - 2 * t1_transform.f(s) + t1_transform.f(s - h)) / h**2
        np.testing.assert_allclose(t1_transform.f_second(s), fd, rtol=1e-4, atol=1e-10)


class TestInverse:
    def test_identity(self, unit_transform):
        assert unit_transform.f_inverse(2.5) == pytest.approx(2.5, rel=1e-10)

    def test_theta1_value(self, t1_transform):
        # f^{-1}(1) = Upsilon(1)
        assert t1_transform.f_inverse(1.0) == pytest.approx(UPSILON1_AT_1, rel=1e-8)

    def test_zero(self, t1_transform):
        assert t1_transform.f_inverse(0.0) == 0.0

    def test_round_trip(self, t1_transform):
        s = np.geomspace(1e-6, 1e5, 50)
        s = np.concatenate([-s[::-1], [0.0], s])
        rt = t1_transform.f_inverse(t1_transform.f(s))
        np.testing.assert_allclose(rt, s, rtol=1e-7, atol=1e-7)

    def test_out_of_range(self, t1_transform):
        with pytest.raises(TransformRangeError):
            t1_transform.f_inverse(2.0 * t1_transform.table_f_max)


class TestStructuralProperties:
    """The qualitative shape of f, sampled over the whole table."""

    @pytest.mark.parametrize("spec", catalog(), ids=lambda s: s.name)
    def test_full_suite(self, spec):
        t = build_transform(spec, s_max=1e4, tol=1e-8)
        s = np.geomspace(1e-8, 1e4, 500)
        f = t.f(s)
        fp = t.f_prime(s)

        # defining equation on a fresh grid
        assert np.max(t.ode_residual(s)) <= 1e-8

        # 0 < f' <= 1
        assert np.all(fp > 0.0) and np.all(fp <= 1.0 + 1e-12)

        # |f(s)| <= |s|
        assert np.all(np.abs(f) <= s * (1.0 + 1e-10))

        # |f|/2 <= f' s <= |f|
        assert np.all(0.5 * np.abs(f) <= fp * s * (1.0 + 1e-9))
        assert np.all(fp * s <= np.abs(f) * (1.0 + 1e-9))

        # f(s)/sqrt(s) nondecreasing
        ratio = f / np.sqrt(s)
        assert np.all(np.diff(ratio) >= -1e-9 * ratio[:-1])

        # oddness is exact by construction
        np.testing.assert_array_equal(t.f(-s), -f)

    def test_strictly_increasing_table(self, t1_transform):
        assert np.all(np.diff(t1_transform.s_nodes) > 0)
        assert np.all(np.diff(t1_transform.f_nodes) > 0)


class TestBeyondTable:
    def test_hard_error_by_default(self, t1_transform):
        with pytest.raises(TransformRangeError):
            t1_transform.f(2.0 * t1_transform.table_s_max)

    def test_asymptotic_mode(self, t1_spec, caplog):
        t = build_transform(t1_spec, s_max=100.0, tol=1e-8, extrapolate="asymptotic")
        s = 400.0
        approx = (8.0 / t1_spec.alpha**2) ** 0.25 * np.sqrt(s)
        with caplog.at_level("WARNING"):
            val = t.f(s)
        assert val == pytest.approx(approx, rel=1e-12)
        assert any("asymptotic" in r.message for r in caplog.records)

    def test_asymptotic_mode_needs_alpha(self, unit_spec):
        t = build_transform(unit_spec, s_max=10.0, extrapolate="asymptotic")
        with pytest.raises(TransformRangeError):
            t.f(20.0)  # no alpha: still a hard error
