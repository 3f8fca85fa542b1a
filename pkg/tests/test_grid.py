"""Test cases for the radial grid and its linear algebra"""

import math

import numpy as np
import pytest

from src.logistic_steady.grid import (
    MIN_INTERVALS,
    BoundaryCondition,
    DomainKind,
    Field,
    FieldRole,
    apply_laplacian,
    build_grid,
    gradient_form,
    integrate,
    solve_poisson,
    unit_ball_volume,
)


class TestBuildGrid:
    """Test suite for grid construction"""

    def test_ball_weights_sum_to_volume(self):
        """Test that the control volumes tile the ball exactly"""
        grid = build_grid(DomainKind.BALL, 64, radius=2.0, dimension=3)
        assert grid.weights.sum() == pytest.approx(unit_ball_volume(3) * 8.0, rel=1e-12)
        assert np.all(grid.weights > 0)

    def test_annulus_weights_sum_to_volume(self):
        """Test the annulus volume between the two radii"""
        grid = build_grid(DomainKind.ANNULUS, 40, radius=3.0, inner_radius=1.0, dimension=4)
        expected = unit_ball_volume(4) * (3.0**4 - 1.0**4)
        assert grid.weights.sum() == pytest.approx(expected, rel=1e-12)

    def test_stretched_nodes_are_geometric(self):
        """Test that consecutive spacings grow by the stretch ratio"""
        grid = build_grid(DomainKind.WHOLE, 100, stretch=1.02, radius=50.0)
        ratios = grid.spacing[1:] / grid.spacing[:-1]
        assert np.allclose(ratios, 1.02, rtol=1e-9)
        assert grid.nodes[0] == 0.0
        assert grid.radius == 50.0

    def test_invalid_arguments(self):
        """Test that malformed grid requests are rejected"""
        with pytest.raises(ValueError, match="Dimension"):
            build_grid(DomainKind.BALL, 32, dimension=2)
        with pytest.raises(ValueError, match="at least"):
            build_grid(DomainKind.BALL, MIN_INTERVALS - 1)
        with pytest.raises(ValueError, match="Stretch"):
            build_grid(DomainKind.BALL, 32, stretch=0.9)
        with pytest.raises(ValueError, match="Annulus"):
            build_grid(DomainKind.ANNULUS, 32, radius=1.0, inner_radius=2.0)

    def test_refined_keeps_every_node(self):
        """Test that refinement nests the coarse grid"""
        grid = build_grid(DomainKind.WHOLE, 50, stretch=1.04, radius=20.0)
        fine = grid.refined()
        assert fine.intervals == 100
        assert np.allclose(fine.nodes[::2], grid.nodes, rtol=1e-12, atol=1e-12)

    def test_anchor_is_a_node(self):
        """Test that the anchor radius is a node of the grid and of its refinement"""
        grid = build_grid(DomainKind.WHOLE, 800, stretch=1.005, radius=200.0, anchor=1.0)
        assert 1.0 in grid.nodes
        assert grid.stretch == pytest.approx(1.005, rel=1e-2)
        assert grid.nodes[-1] == 200.0
        assert np.all(np.diff(grid.nodes) > 0)
        fine = grid.refined()
        assert 1.0 in fine.nodes
        assert np.allclose(fine.nodes[::2], grid.nodes, rtol=1e-10, atol=1e-12)
        plain = build_grid(DomainKind.WHOLE, 800, stretch=1.005, radius=200.0)
        assert not np.any(np.isclose(plain.nodes, 1.0, rtol=0.0, atol=1e-6))

    def test_anchor_on_uniform_grid(self):
        """Test that a uniform grid accepts only anchors that are already nodes"""
        grid = build_grid(DomainKind.BALL, 32, radius=2.0, anchor=1.0)
        assert grid.nodes[16] == 1.0
        with pytest.raises(ValueError, match="no node"):
            build_grid(DomainKind.BALL, 30, radius=2.0, anchor=0.7)
        with pytest.raises(ValueError, match="inside"):
            build_grid(DomainKind.WHOLE, 64, stretch=1.02, radius=10.0, anchor=12.0)

    def test_extended_continues_the_mesh(self):
        """Test that extension keeps the spacing law and reaches the new radius"""
        grid = build_grid(DomainKind.WHOLE, 50, stretch=1.04, radius=20.0)
        longer = grid.extended(80.0)
        assert longer.radius >= 80.0
        assert np.allclose(longer.nodes[: grid.size], grid.nodes, rtol=1e-9)
        assert grid.extended(10.0) is grid

    def test_extended_rejects_balls(self):
        """Test that only whole-space grids can be extended"""
        grid = build_grid(DomainKind.BALL, 32)
        with pytest.raises(ValueError):
            grid.extended(2.0)

    def test_subgrid_ends_on_radius(self):
        """Test the sub-ball construction"""
        grid = build_grid(DomainKind.WHOLE, 800, stretch=1.005, radius=100.0)
        ball = grid.subgrid(1.0)
        assert ball.kind == DomainKind.BALL
        assert ball.radius == 1.0
        assert np.all(np.diff(ball.nodes) > 0)
        with pytest.raises(ValueError):
            grid.subgrid(200.0)

    def test_free_mask(self):
        """Test which nodes carry the equation for each boundary condition"""
        ball = build_grid(DomainKind.BALL, 32)
        assert not ball.free_mask()[-1]
        assert ball.free_mask()[:-1].all()
        whole = build_grid(DomainKind.WHOLE, 32, radius=10.0)
        assert whole.default_bc == BoundaryCondition.DECAY
        assert whole.free_mask().all()
        annulus = build_grid(DomainKind.ANNULUS, 32, radius=2.0, inner_radius=1.0)
        mask = annulus.free_mask()
        assert not mask[0] and not mask[-1]
        with pytest.raises(ValueError, match="Decay"):
            ball.free_mask(BoundaryCondition.DECAY)

    def test_summary_and_json(self):
        """Test the grid summary export"""
        grid = build_grid(DomainKind.BALL, 20, radius=1.0)
        summary = grid.summary()
        assert summary.intervals == 20
        assert '"nodes"' in grid.to_json()


class TestLaplacian:
    """Test suite for the discrete operator"""

    def test_exact_on_r_squared(self):
        """Test -Delta r^2 = -2N at every free node, origin included"""
        grid = build_grid(DomainKind.BALL, 64, stretch=1.01, radius=1.0, dimension=5)
        u = Field.from_function(grid, lambda r: r**2)
        lap = apply_laplacian(grid, u).values
        free = grid.free_mask()
        assert np.allclose(lap[free], -10.0, rtol=1e-9)

    def test_exact_on_harmonic_profile(self):
        """Test that r^{2-N} is discretely harmonic on an annulus"""
        grid = build_grid(DomainKind.ANNULUS, 64, stretch=1.03, radius=5.0, inner_radius=1.0)
        u = Field.from_function(grid, lambda r: r ** (-1.0))
        lap = apply_laplacian(grid, u).values
        assert np.max(np.abs(lap[grid.free_mask()])) < 1e-9

    def test_gradient_form_is_symmetric(self):
        """Test the Dirichlet form symmetry"""
        grid = build_grid(DomainKind.WHOLE, 80, stretch=1.02, radius=30.0)
        u = Field.from_function(grid, lambda r: np.exp(-r))
        v = Field.from_function(grid, lambda r: 1.0 / (1.0 + r**2))
        assert gradient_form(grid, u, v) == pytest.approx(gradient_form(grid, v, u), rel=1e-12)

    def test_field_shape_mismatch(self):
        """Test that fields must match their grid"""
        grid = build_grid(DomainKind.BALL, 32)
        with pytest.raises(ValueError, match="shape"):
            Field(grid, np.zeros(5))


class TestSolvePoisson:
    """Test suite for the Poisson solves"""

    def test_ball_quadratic_solution(self):
        """Test -Delta w = 2N on a ball reproduces R^2 - r^2"""
        grid = build_grid(DomainKind.BALL, 100, stretch=1.01, radius=2.0, dimension=3)
        w = solve_poisson(grid, Field(grid, np.full(grid.size, 6.0)))
        assert np.allclose(w.values, 4.0 - grid.nodes**2, atol=1e-10)
        assert w.role == FieldRole.POTENTIAL

    def test_decay_tail_is_newtonian(self):
        """Test that outside the support the potential is M / (N(N-2) omega r^{N-2})"""
        grid = build_grid(DomainKind.WHOLE, 400, stretch=1.01, radius=100.0, dimension=3)
        f = Field(grid, np.where(grid.nodes <= 1.0, 1.0, 0.0))
        mass = integrate(grid, f)
        w = solve_poisson(grid, f)
        outside = grid.nodes >= 2.0
        expected = mass / (3 * unit_ball_volume(3) * grid.nodes[outside])
        assert np.allclose(w.values[outside], expected, rtol=1e-8)

    def test_energy_identity(self):
        """Test |w|_A^2 = int f w for the Poisson solution"""
        grid = build_grid(DomainKind.BALL, 60, radius=1.0)
        f = Field.from_function(grid, lambda r: 1.0 + r)
        w = solve_poisson(grid, f)
        assert w.energy_norm() ** 2 == pytest.approx(integrate(grid, f.with_values(f.values * w.values)), rel=1e-10)
        assert math.isfinite(w.weighted_norm())
