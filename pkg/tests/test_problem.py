"""Test cases for problem data, hypothesis checks and the carrying-capacity profiles"""

from dataclasses import replace

import numpy as np
import pytest

from src.logistic_steady.coefficients import ProfileContext, build_profile
from src.logistic_steady.errors import HypothesisError
from src.logistic_steady.grid import DomainKind, build_grid
from src.logistic_steady.oracles import bounded_exact_example
from src.logistic_steady.problem import (
    BumpShape,
    BumpSpec,
    InstantonKind,
    Nonlinearity,
    ProblemSpec,
    ProblemVariant,
    RadialProfile,
    ZeroSet,
    ZeroSetKind,
    aubin_talenti,
    build_d_bounded,
    build_instanton,
    bump_values,
    check_comparison_bound,
    check_growth_equivalence,
    check_supersolution,
    derive_constants,
    truncation_exponent,
    validate_hypotheses,
)


def whole_grid(intervals=400):
    return build_grid(DomainKind.WHOLE, intervals, stretch=1.01, radius=200.0)


def main_spec(lam=10.0, mu=0.0):
    ctx = ProfileContext(dimension=3)
    a = build_profile("algebraic", {"power": 4.0}, ctx)
    b = build_profile(
        "plateau", {"C1": 1.0, "beta": 3.0, "radius": 1.0, "width": 1.0}, ProfileContext(dimension=3, a=a)
    )
    h = build_profile("gaussian", {"width": 1.0}, ctx)
    return ProblemSpec(
        dimension=3,
        lam=lam,
        mu=mu,
        a=a,
        b=b,
        h=h,
        g=Nonlinearity.power(4.0),
        beta=3.0,
        C1=1.0,
        zero_set=ZeroSet(ZeroSetKind.BALL, 1.0),
    )


class TestNonlinearity:
    """Test suite for power-sum nonlinearities"""

    def test_values_and_derivatives(self):
        """Test g, g' and G on both signs"""
        g = Nonlinearity(((1.0, 2.0), (0.5, 4.0)))
        s = np.array([-1.0, 0.0, 2.0])
        assert np.allclose(g(s), [0.0, 0.0, 4.0 + 8.0])
        assert np.allclose(g.derivative(s), [0.0, 0.0, 4.0 + 16.0])
        assert np.allclose(g.primitive(s), [0.0, 0.0, 8.0 / 3 + 3.2])
        assert g.min_power == 2.0 and g.max_power == 4.0

    def test_invalid_terms(self):
        """Test that negative coefficients and sublinear powers are rejected"""
        with pytest.raises(ValueError):
            Nonlinearity(((-1.0, 2.0),))
        with pytest.raises(ValueError):
            Nonlinearity(((1.0, 0.5),))
        with pytest.raises(ValueError):
            Nonlinearity(())

    def test_plus_concatenates(self):
        """Test the sum of two nonlinearities"""
        g = Nonlinearity.power(2.0).plus(Nonlinearity.power(3.0))
        assert g(2.0) == pytest.approx(12.0)
        assert "s^3" in g.label()


class TestProblemSpec:
    """Test suite for the problem definition"""

    def test_requires_growth_coefficient(self):
        """Test that either b or upsilon must be given"""
        one = RadialProfile("constant", lambda r: np.ones_like(r))
        with pytest.raises(ValueError, match="upsilon"):
            ProblemSpec(dimension=3, lam=1.0, mu=0.0, a=one, b=None, h=one, g=Nonlinearity.power(2.0), beta=1.0)

    def test_upsilon_defines_b(self):
        """Test b = lam a upsilon"""
        one = RadialProfile("constant", lambda r: np.ones_like(r))
        ups = RadialProfile("upsilon", lambda r: 1 + r**2)
        spec = ProblemSpec(
            dimension=3, lam=2.0, mu=0.0, a=one, b=None, h=one, g=Nonlinearity.power(2.0), beta=1.0, upsilon=ups
        )
        assert np.allclose(spec.b_values(np.array([0.0, 1.0])), [2.0, 4.0])

    def test_sample_rejects_dimension_mismatch(self):
        """Test that grid and problem dimensions must agree"""
        grid = build_grid(DomainKind.WHOLE, 32, radius=10.0, dimension=4)
        with pytest.raises(ValueError, match="dimension"):
            main_spec().sample(grid)

    def test_aubin_talenti_profile(self):
        """Test d(0) = 1 and the r^{2-N} tail"""
        assert aubin_talenti(0.0, 3) == pytest.approx(1.0)
        assert aubin_talenti(1e4, 3) * 1e4 == pytest.approx(1.0, rel=1e-6)


class TestValidateHypotheses:
    """Test suite for the hypothesis checks"""

    def test_main_example_passes(self):
        """Test that the plateau example satisfies every standing hypothesis"""
        report = validate_hypotheses(main_spec(), whole_grid())
        assert report.passed, [c.detail for c in report.failures()]
        assert report.get("H b zero set").passed

    def test_constant_a_fails_on_whole_space(self):
        """Test that a = 1 is not in L^{N/2} on R^N"""
        spec = main_spec()
        one = RadialProfile("constant", lambda r: np.ones_like(r))
        spec = replace(spec, a=one, C1=None)
        report = validate_hypotheses(spec, whole_grid())
        assert not report.get("H a").passed
        with pytest.raises(HypothesisError) as exc:
            report.require()
        assert exc.value.exit_code == 3

    def test_window_check(self):
        """Test the lambda window entry"""
        report = validate_hypotheses(main_spec(lam=10.0), whole_grid(), window=(5.0, 20.0))
        assert report.get("H lambda").passed
        report = validate_hypotheses(main_spec(lam=10.0), whole_grid(), window=(10.0, 20.0))
        assert not report.get("H lambda").passed

    def test_zero_set_mismatch(self):
        """Test that b vanishing off the declared ball is reported"""
        spec = main_spec()
        spec = replace(spec, zero_set=ZeroSet(ZeroSetKind.BALL, 2.0))
        report = validate_hypotheses(spec, whole_grid())
        assert not report.get("H b zero set").passed

    def test_fast_growth_nonlinearity(self):
        """Test g(s)/s -> 0 for the fast-growth variant"""
        one = RadialProfile("algebraic", lambda r: (1 + r**2) ** -2.0)
        bump = RadialProfile("bump", lambda r: np.where(r <= 1.0, 1.0, 0.0), support_radius=1.0)
        ups = RadialProfile("upsilon", lambda r: 1 + r**4)
        base = dict(dimension=3, lam=5.0, mu=0.0, a=one, b=None, h=bump, beta=1.0, upsilon=ups)
        good = validate_hypotheses(ProblemSpec(g=Nonlinearity.power(2.0), **base), whole_grid(), ProblemVariant.FAST_GROWTH)
        assert good.get("H g'").passed
        assert good.get("H h'").passed
        linear = validate_hypotheses(ProblemSpec(g=Nonlinearity.power(1.0), **base), whole_grid(), ProblemVariant.FAST_GROWTH)
        assert not linear.get("H g'").passed


class TestDerivedConstants:
    """Test suite for the comparison constants"""

    def test_comparison_bound_holds(self):
        """Test lam a s k(s/(l d)) >= b g(s) on the sample"""
        grid = whole_grid()
        spec = main_spec()
        consts = derive_constants(spec, grid)
        assert consts.l == pytest.approx(consts.C4 ** (-1 / 3.0))
        assert consts.ell == consts.l
        assert consts.comparison_margin >= -1e-9
        assert check_comparison_bound(spec.sample(grid), consts) == pytest.approx(consts.comparison_margin)
        assert consts.p == truncation_exponent(3) == 2.0

    def test_supersolution(self):
        """Test that ell d is a supersolution without harvesting"""
        grid = whole_grid()
        spec = main_spec()
        consts = derive_constants(spec, grid)
        assert check_supersolution(spec, consts, grid).passed

    def test_unbounded_ratio_at_zero(self):
        """Test that g(s)/s^(1+beta) blowing up at zero is a hypothesis failure"""
        spec = main_spec()
        spec = replace(spec, g=Nonlinearity.power(2.0))
        with pytest.raises(HypothesisError):
            derive_constants(spec, whole_grid())


class TestInstantons:
    """Test suite for the carrying-capacity profiles"""

    def test_aubin_talenti_identity(self):
        """Test -Delta d = N(N-2) d^{2*-1} up to discretization error"""
        inst = build_instanton(whole_grid(800))
        assert inst.kind == InstantonKind.AUBIN_TALENTI
        assert inst.identity_error < 1e-2
        assert inst.superharmonic_min > 0

    def test_instanton_needs_whole_space(self):
        """Test the grid-kind guard"""
        with pytest.raises(ValueError):
            build_instanton(build_grid(DomainKind.BALL, 32))

    def test_bump_mass_is_exact(self):
        """Test that bumps carry exactly their discrete mass"""
        grid = build_grid(DomainKind.BALL, 200, radius=2.0)
        for shape in BumpShape:
            values = bump_values(grid, BumpSpec(mass=2.5, shape=shape), 0.25)
            assert np.dot(grid.weights, values) == pytest.approx(2.5, rel=1e-12)
            assert np.all(values[grid.nodes > 0.25] == 0)

    def test_green_profile(self):
        """Test the Green profile bounds c dist <= d <= C dist"""
        grid = build_grid(DomainKind.BALL, 400, radius=2.0)
        inst = build_d_bounded(grid)
        assert inst.kind == InstantonKind.GREEN
        assert 0 < inst.c <= inst.C
        assert inst.hopf_margin > 0
        assert inst.harmonic_residual < 1e-8
        assert inst.superharmonic_min >= -1e-9
        assert inst.inner_radius == 0.5 and inst.bump_radius == 0.25

    def test_green_profile_guards(self):
        """Test the geometric requirements on the bump"""
        grid = build_grid(DomainKind.BALL, 100, radius=2.0)
        with pytest.raises(ValueError, match="centered"):
            build_d_bounded(grid, center=0.1)
        with pytest.raises(ValueError, match="3r"):
            build_d_bounded(grid, inner_radius=0.9)
        with pytest.raises(ValueError, match="exceeds"):
            build_d_bounded(grid, inner_radius=0.5, bump=BumpSpec(radius=0.6))
        with pytest.raises(ValueError):
            build_d_bounded(whole_grid())

    def test_growth_equivalence(self):
        """Test that dist-based and d-based growth constants are consistent"""
        example = bounded_exact_example(0.1)
        grid = build_grid(DomainKind.BALL, 400, radius=2.0)
        inst = build_d_bounded(grid)
        report = check_growth_equivalence(example.spec(), inst, C1_bar=1e6)
        assert report.consistent
        assert report.dist_bound_ok
        assert report.constants_ratio > 0
