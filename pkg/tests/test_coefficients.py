"""Test cases for the built-in coefficient families"""

import numpy as np
import pytest

from src.logistic_steady.coefficients import FAMILIES, ProfileContext, build_profile, smoothstep
from src.logistic_steady.grid import DomainKind, build_grid, unit_ball_volume
from src.logistic_steady.problem import aubin_talenti


@pytest.fixture
def ctx():
    return ProfileContext(dimension=3)


class TestFamilies:
    """Test suite for coefficient family construction"""

    def test_registry(self):
        """Test that every documented family is registered"""
        for name in ["constant", "algebraic", "exact", "exact-bounded", "plateau", "step",
                     "gaussian", "bump", "smooth-bump", "upsilon", "tabulated"]:
            assert name in FAMILIES

    def test_unknown_family(self, ctx):
        """Test the error for an unregistered family"""
        with pytest.raises(ValueError, match="Unknown coefficient family"):
            build_profile("nope", {}, ctx)

    def test_algebraic(self, ctx):
        """Test A (1 + r^2)^{-p/2}"""
        profile = build_profile("algebraic", {"amplitude": 2.0, "power": 4.0}, ctx)
        assert profile(0.0) == pytest.approx(2.0)
        assert profile(1.0) == pytest.approx(0.5)
        assert profile.describe() == {"family": "algebraic", "amplitude": 2.0, "power": 4.0}

    def test_bump_has_unit_mass(self, ctx):
        """Test that the uniform bump integrates to its mass"""
        profile = build_profile("bump", {"radius": 0.5, "mass": 3.0}, ctx)
        height = 3.0 / (unit_ball_volume(3) * 0.125)
        assert profile(0.25) == pytest.approx(height)
        assert profile(0.6) == 0.0
        assert profile.support_radius == 0.5

    def test_smooth_bump(self, ctx):
        """Test the compactly supported smooth bump"""
        profile = build_profile("smooth-bump", {"radius": 1.0, "amplitude": 2.0}, ctx)
        assert profile(0.0) == pytest.approx(2.0)
        assert profile(1.0) == 0.0
        assert 0 < profile(0.9) < 2.0

    def test_step(self, ctx):
        """Test the step family and its zero set"""
        profile = build_profile("step", {"radius": 1.0, "inside": 0.0, "outside": 2.0}, ctx)
        assert profile.zero_radius == 1.0
        assert np.allclose(profile(np.array([0.5, 1.5])), [0.0, 2.0])

    def test_plateau_needs_a(self, ctx):
        """Test that the plateau family is scaled by a"""
        with pytest.raises(ValueError, match="coefficient a"):
            build_profile("plateau", {"beta": 3.0, "radius": 1.0}, ctx)

    def test_plateau_on_whole_space(self, ctx):
        """Test b = C1 a d^{-beta} beyond the ramp and zero inside r0"""
        a = build_profile("algebraic", {"power": 4.0}, ctx)
        with_a = ProfileContext(dimension=3, a=a)
        b = build_profile("plateau", {"C1": 2.0, "beta": 3.0, "radius": 1.0, "width": 1.0}, with_a)
        r = np.array([0.5, 1.0, 3.0])
        values = b(r)
        assert values[0] == 0.0 and values[1] == 0.0
        assert values[2] == pytest.approx(2.0 * a(3.0) * aubin_talenti(3.0, 3) ** -3.0)
        assert b.zero_radius == 1.0

    def test_plateau_distance_envelope(self):
        """Test the distance envelope on a ball"""
        ctx = ProfileContext(dimension=3, outer_radius=2.0)
        a = build_profile("constant", {"value": 1.0}, ctx)
        b = build_profile(
            "plateau",
            {"beta": 2.0, "radius": 0.5, "width": 0.5, "envelope": "distance"},
            ProfileContext(dimension=3, a=a, outer_radius=2.0),
        )
        assert b(1.5) == pytest.approx(1.0 / 0.25)
        with pytest.raises(ValueError, match="bounded domain"):
            build_profile("plateau", {"beta": 2.0, "radius": 0.5, "envelope": "distance"}, ProfileContext(3, a=a))

    def test_exact_fields(self, ctx):
        """Test that the exact family exposes the oracle's coefficients"""
        b = build_profile("exact", {"beta": 3.0, "mu": 0.1, "field": "b"}, ctx)
        assert b(0.5) == 0.0
        assert b(2.0) > 0
        assert b.zero_radius == 1.0
        h = build_profile("exact", {"field": "h"}, ctx)
        assert h.support_radius == 1.0
        with pytest.raises(ValueError, match="field"):
            build_profile("exact", {"field": "q"}, ctx)

    def test_tabulated(self, ctx):
        """Test interpolation of tabulated values and its guards"""
        profile = build_profile("tabulated", {"radii": [0.0, 1.0, 2.0], "values": [1.0, 3.0, 5.0]}, ctx)
        assert profile(1.5) == pytest.approx(4.0)
        with pytest.raises(ValueError, match="increasing"):
            build_profile("tabulated", {"radii": [0.0, 0.0], "values": [1.0, 2.0]}, ctx)

    def test_upsilon(self, ctx):
        """Test 1 + c r^k"""
        profile = build_profile("upsilon", {"coefficient": 2.0, "power": 4.0}, ctx)
        assert profile(1.0) == pytest.approx(3.0)

    def test_sample_on_grid(self, ctx):
        """Test sampling a profile on a grid"""
        grid = build_grid(DomainKind.BALL, 20)
        field = build_profile("gaussian", {"width": 0.5}, ctx).sample(grid)
        assert field.values[0] == pytest.approx(1.0)

    def test_smoothstep(self):
        """Test the C^1 ramp"""
        assert np.allclose(smoothstep(np.array([-1.0, 0.0, 0.5, 1.0, 2.0])), [0.0, 0.0, 0.5, 1.0, 1.0])
