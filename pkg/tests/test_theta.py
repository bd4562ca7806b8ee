"""Coefficient catalog values and hypothesis checking."""

import numpy as np
import pytest

from schrodual.theta import (
    ThetaSpec,
    catalog,
    get_spec,
    theta2,
    unit,
    validate_hypotheses,
)


class TestCatalogValues:
    def test_theta1_at_zero(self, t1_spec):
        assert t1_spec(0.0) == 1.0

    def test_theta1_at_two(self, t1_spec):
        assert t1_spec(2.0) == 5.0

    def test_theta1_alpha(self, t1_spec):
        # theta1(s)/s^2 -> 1 = alpha^2/2
        assert t1_spec.alpha == pytest.approx(np.sqrt(2.0), rel=1e-15)

    def test_catalog_membership(self):
        names = [s.name for s in catalog()]
        assert names == ["theta1", "theta2[p=2]", "theta3", "theta4", "theta5", "unit"]

    def test_unit_has_no_alpha(self, unit_spec):
        assert unit_spec.alpha is None

    def test_theta2_rejects_bad_exponent(self):
        with pytest.raises(ValueError):
            theta2(1.0)
        with pytest.raises(ValueError):
            theta2(2.5)

    def test_get_spec_parses_theta2_exponent(self):
        s = get_spec("theta2:p=1.5")
        assert s.name == "theta2[p=1.5]"
        assert s(1.0) == pytest.approx(2.0 ** (1 / 1.5) + 1.0)

    def test_get_spec_unknown(self):
        with pytest.raises(ValueError):
            get_spec("theta9")


class TestCatalogInvariants:
    """theta >= 1 and evenness at every sample, for every member."""

    @pytest.mark.parametrize("spec", catalog(), ids=lambda s: s.name)
    def test_lower_bound_and_evenness(self, spec):
        s = np.geomspace(1e-10, 1e6, 300)
        th = spec.value(s)
        assert np.all(th >= 1.0)
        np.testing.assert_allclose(spec.value(-s), th, rtol=1e-12, atol=0.0)

    @pytest.mark.parametrize("spec", catalog(), ids=lambda s: s.name)
    def test_derivative_order(self, spec):
        """Central differences reproduce the closed-form derivative with
        measured order >= 1.9 (smooth members; s away from 0)."""
        s = np.array([0.7, 1.3, 2.9, 7.7])
        errs = []
        for h in (1e-3, 5e-4):
            fd = (spec.value(s + h) - spec.value(s - h)) / (2 * h)
            errs.append(np.max(np.abs(fd - spec.deriv(s)) / (1.0 + np.abs(spec.deriv(s)))))
        if errs[0] < 1e-13:  # exactly reproduced (unit, theta1 is quadratic)
            return
        order = np.log2(errs[0] / errs[1])
        assert order >= 1.9

    def test_theta1_tail_rate(self, t1_spec):
        """2 theta1(S)/S^2 - alpha^2 = 2/S^2 exactly."""
        S = np.array([10.0, 100.0, 1000.0])
        gap = 2.0 * t1_spec.value(S) / S**2 - 2.0
        np.testing.assert_allclose(gap, 2.0 / S**2, rtol=1e-12)


class TestValidateHypotheses:
    def test_theta1_passes(self, t1_spec):
        rep = validate_hypotheses(t1_spec, s_max=1e4)
        assert rep.passed
        assert rep.alpha_estimate == pytest.approx(np.sqrt(2.0), rel=1e-6)

    def test_unit_fails_only_the_limit(self, unit_spec):
        rep = validate_hypotheses(unit_spec, s_max=1e4)
        assert rep.h1_ok and rep.h2_ok
        assert not rep.h3_ok

    def test_quartic_fails_ratio_monotonicity(self):
        spec = ThetaSpec(
            name="quartic",
            value=lambda s: 1.0 + s**4,
            deriv=lambda s: 4.0 * s**3,
            alpha=None,
        )
        rep = validate_hypotheses(spec, s_max=1e4)
        assert not rep.h2_ok

    def test_all_catalog_members_pass(self):
        for spec in catalog():
            rep = validate_hypotheses(spec, s_max=1e4)
            assert rep.base_ok and rep.h1_ok and rep.h2_ok, spec.name
            if spec.alpha is not None:
                assert rep.h3_ok, spec.name

    def test_nonfinite_evaluation_raises(self):
        bad = ThetaSpec(
            name="bad",
            value=lambda s: np.where(np.abs(s) > 10.0, np.nan, 1.0 + s * s),
            deriv=lambda s: 2.0 * s,
        )
        with pytest.raises(ValueError, match="not finite"):
            validate_hypotheses(bad, s_max=100.0)

    def test_input_validation(self, t1_spec):
        with pytest.raises(ValueError):
            validate_hypotheses(t1_spec, s_max=-1.0)
        with pytest.raises(ValueError):
            validate_hypotheses(t1_spec, s_max=10.0, samples=4)
