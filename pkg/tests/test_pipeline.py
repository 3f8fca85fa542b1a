"""Test cases for the existence pipelines and the threshold search"""

import math
from pathlib import Path

import numpy as np
import pytest

from src.logistic_steady.cli import grid_for, problem_for
from src.logistic_steady.config import LambdaConfig, LambdaMode, SolverConfig, apply_overrides, load_config
from src.logistic_steady.errors import CertificateError, ConfigError, HypothesisError
from src.logistic_steady.grid import DomainKind, Field, build_grid
from src.logistic_steady.oracles import bounded_exact_example, build_exact_example
from src.logistic_steady.pipeline import (
    LadderStep,
    PipelineReport,
    PipelineResult,
    audit_solution,
    bisect_threshold,
    find_mu_threshold,
    json_float,
    negative_energy_start,
    positivity_point,
    resolve_lambda,
    run_related,
    solve_bounded,
    solve_fast_growth,
    solve_main,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def scripted_runner(threshold):
    """Runner whose certificates hold exactly for mu < threshold"""
    grid = build_grid(DomainKind.BALL, 16)
    calls = []

    def runner(mu):
        calls.append(mu)
        report = PipelineReport(variant="main", lam=1.0, mu=mu)
        report.certify("scripted", mu < threshold, mu)
        report.finish()
        return PipelineResult(report, Field(grid, np.zeros(grid.size)))

    return runner, calls


class TestReport:
    """Test suite for the pipeline report"""

    def test_finish_requires_certificates(self):
        """Test that a report with no certificates is not a success"""
        report = PipelineReport(variant="main", lam=1.0, mu=0.0).finish()
        assert report.status == "failed"
        assert not report.success

    def test_failed_certificate(self):
        """Test that one failed certificate fails the run and raises"""
        report = PipelineReport(variant="main", lam=1.0, mu=0.0)
        report.certify("good", True, 1.0)
        report.certify("bad", False, -1.0, "detail")
        report.finish("stopped")
        assert report.status == "failed"
        assert [c.name for c in report.failures()] == ["bad"]
        with pytest.raises(CertificateError, match="bad") as exc:
            report.raise_on_failure()
        assert exc.value.exit_code == 1

    def test_json_float(self):
        """Test the infinity sentinel"""
        assert json_float(math.inf) == "inf"
        assert json_float(2.5) == 2.5


class TestResolveLambda:
    """Test suite for lambda resolution against the window"""

    def test_modes(self):
        """Test number, midway and scaled modes"""
        assert resolve_lambda(LambdaConfig(value=3.0), 1.0, 5.0) == 3.0
        assert resolve_lambda(LambdaConfig(mode=LambdaMode.MIDWAY), 1.0, 5.0) == 3.0
        assert resolve_lambda(LambdaConfig(mode=LambdaMode.SCALED, factor=1.5), 2.0, math.inf) == 3.0

    def test_midway_needs_finite_lambda_star(self):
        """Test that midway is undefined for an empty zero set"""
        with pytest.raises(ConfigError, match="finite"):
            resolve_lambda(LambdaConfig(mode=LambdaMode.MIDWAY), 1.0, math.inf)


class TestPositivityPoint:
    """Test suite for the positive core around the maximum"""

    def test_core_radius(self):
        """Test the maximizer and the half-width capped by the radius"""
        grid = build_grid(DomainKind.WHOLE, 100, radius=10.0)
        u = Field(grid, np.where(grid.nodes < 3.0, 3.0 - grid.nodes, -1.0))
        x0, value, rho = positivity_point(u, 1.0)
        assert x0 == 0.0 and value == 3.0
        assert rho == 1.0
        _, _, rho = positivity_point(u, 10.0)
        assert rho == pytest.approx(2.9, abs=0.11)


class TestThreshold:
    """Test suite for the harvesting threshold bisection"""

    def test_bisect_threshold(self):
        """Test the bracket around a known switch point"""
        lo, hi, evaluations = bisect_threshold(lambda mu: mu < 0.37, 0.0, 1.0, 1e-3)
        assert lo <= 0.37 <= hi
        assert hi - lo <= 1e-3
        assert len(evaluations) == 10

    def test_find_threshold_with_scripted_runner(self):
        """Test the width target relative to mu_hi"""
        runner, calls = scripted_runner(0.3)
        grid = build_grid(DomainKind.BALL, 16)
        result = find_mu_threshold(None, grid, 1.0, SolverConfig(threshold_width=1e-3), runner=runner)
        assert result.mu0 <= 0.3 <= result.mu0 + result.width
        assert result.width <= 1e-3
        assert calls[:2] == [0.0, 1.0]
        assert result.evaluations[0] == (0.0, True)

    def test_failure_at_zero(self):
        """Test that failing without harvesting is a certificate error"""
        runner, _ = scripted_runner(-1.0)
        with pytest.raises(CertificateError, match="mu = 0"):
            find_mu_threshold(None, build_grid(DomainKind.BALL, 16), 1.0, runner=runner)

    def test_success_at_upper_end(self):
        """Test that an unbracketed threshold returns mu_hi with zero width"""
        runner, _ = scripted_runner(10.0)
        result = find_mu_threshold(None, build_grid(DomainKind.BALL, 16), 1.0, runner=runner)
        assert result.mu0 == 1.0
        assert result.width == 0.0

    def test_nonpositive_upper_end(self):
        """Test the mu_hi guard"""
        with pytest.raises(ValueError):
            find_mu_threshold(None, build_grid(DomainKind.BALL, 16), 0.0)


class TestGates:
    """Test suite for the hypothesis and window gates"""

    def test_exact_example_is_rejected(self):
        """Test that lambda above lambda_* stops the main pipeline"""
        example = build_exact_example()
        grid = build_grid(DomainKind.WHOLE, 400, stretch=1.01, radius=100.0)
        with pytest.raises(HypothesisError):
            solve_main(example.spec(), grid, 0.1)

    def test_related_below_lambda_one(self):
        """Test that lambda <= lambda_1 is refused by the related pipeline"""
        example = build_exact_example()
        grid = build_grid(DomainKind.WHOLE, 400, stretch=1.01, radius=100.0)
        spec = example.spec().with_lambda(1e-3)
        with pytest.raises(HypothesisError, match="lambda_1"):
            run_related(spec, grid, 0.0)

    def test_main_needs_whole_space(self):
        """Test the grid-kind guard"""
        with pytest.raises(ValueError, match="whole-space"):
            solve_main(build_exact_example().spec(), build_grid(DomainKind.BALL, 32), 0.0)


def load_spec(name, **overrides):
    config = apply_overrides(load_config(CONFIG_DIR / name), **overrides)
    grid = grid_for(config)
    return config, grid, problem_for(config, grid)


def laddered_result(grid, values):
    """A successful-looking report with one closed ladder level"""
    report = PipelineReport(variant="bounded", lam=1.0, mu=0.1)
    report.ladder.append(
        LadderStep(m=2.0, sup=1.0, norm=1.0, C6=1.0, C7=1.0, energy=-1.0, iterations=1, closed=True)
    )
    report.certify("residual", True, 0.0)
    report.finish()
    return PipelineResult(report, Field(grid, values))


class TestAudit:
    """Test suite for the post-run gradient check and verification"""

    def test_skips_runs_without_ladder(self):
        """Test that related-only runs are left untouched"""
        runner, _ = scripted_runner(1.0)
        result = runner(0.0)
        grid = result.solution.grid
        report = audit_solution(None, grid, result)
        assert report.gradient_check is None
        assert report.verification is None
        assert report.success

    def test_rejects_a_field_that_is_not_a_solution(self):
        """Test that verification fails a closed-looking run whose field does not solve the equation"""
        grid = build_grid(DomainKind.BALL, 64, radius=2.0)
        spec = bounded_exact_example(0.1).spec()
        result = laddered_result(grid, 1.0 - (grid.nodes / 2.0) ** 2)
        report = audit_solution(spec, grid, result, SolverConfig(), seed=3)
        assert report.verification is not None
        assert report.verification.strong_residual > 1e-7
        assert not report.success
        assert "independent verification" in [c.name for c in report.failures()]
        assert report.gradient_check.pairs == 8
        assert report.gradient_check.max_relative_error < 1e-5

    def test_gradient_check_follows_the_seed(self):
        """Test that the seed fixes the random directions of the gradient check"""
        grid = build_grid(DomainKind.BALL, 64, radius=2.0)
        spec = bounded_exact_example(0.1).spec()
        values = 1.0 - (grid.nodes / 2.0) ** 2
        first = audit_solution(spec, grid, laddered_result(grid, values), seed=5).gradient_check
        again = audit_solution(spec, grid, laddered_result(grid, values), seed=5).gradient_check
        other = audit_solution(spec, grid, laddered_result(grid, values), seed=6).gradient_check
        assert first.errors == again.errors
        assert first.errors != other.errors


class TestFastGrowthStart:
    """Test suite for the start of the boosted minimization"""

    def test_start_has_negative_energy(self):
        """Test that the scaled eigenfunction start sits strictly below I~(0) = 0"""
        config, grid, spec = load_spec("fast_growth.json", grid_nodes=200)
        boosted = spec.with_mu(0.0).sample(grid)
        start, energy = negative_energy_start(boosted)
        assert energy < 0
        assert 0 < start.sup() <= 1.0
        assert np.all(start.values[boosted.free] > 0)


@pytest.mark.slow
class TestEndToEnd:
    """Test suite for full pipeline runs on the shipped configurations"""

    def test_main_without_harvesting(self):
        """Test a certified positive solution at mu = 0 with negative energy"""
        config, grid, spec = load_spec("main_n3.json")
        result = solve_main(spec, grid, 0.0, config.solver)
        report = result.report
        assert report.success, [c.name for c in report.failures()]
        assert report.residual <= 1e-7
        assert report.C3 > 0
        assert report.energies["comparison"] < 0
        assert report.window.inside
        far = grid.nodes >= 5.0
        assert np.min(grid.nodes[far] * result.solution.values[far]) > 0
        assert len(report.ladder) <= 13
        assert report.ladder[-1].closed
        assert result.lower is not None and np.all(result.solution.values >= result.lower.values - 1e-9)
        below = {c.name: c for c in report.certificates}["below ell d"]
        assert below.passed
        assert result.upper is not None and np.all(result.solution.values <= result.upper.values + 1e-9)

    def test_threshold_bracket(self):
        """Test the harvesting threshold bracket on the main example"""
        config, grid, spec = load_spec("main_n3.json")
        mu_hi = config.solver.mu_hi
        result = find_mu_threshold(spec, grid, mu_hi, config.solver)
        assert result.width <= 1e-3 * mu_hi
        assert 0.0 < result.mu0 <= mu_hi
        successes = [mu for mu, ok in result.evaluations if ok]
        failures = [mu for mu, ok in result.evaluations if not ok]
        if failures:
            assert max(successes) < min(failures)

    def test_fast_growth(self):
        """Test the boosted subsolution and the run at mu_3 / 2"""
        config, grid, spec = load_spec("fast_growth.json")
        result = solve_fast_growth(spec, grid, None, config.solver)
        record = result.report.fast_growth
        assert record.c > 0
        assert record.mu3 > 0
        assert result.report.mu == pytest.approx(0.5 * record.mu3)
        assert result.report.energies["boosted start"] < 0
        assert result.report.energies["fast-growth"] < 0
        assert record.sup > 0
        assert result.report.success, [c.name for c in result.report.failures()]

    def test_bounded_ball(self):
        """Test the Dirichlet run on the ball of radius two and its boundary collar"""
        config, grid, spec = load_spec("bounded_b2.json")
        result = solve_bounded(
            spec,
            grid,
            0.0,
            config.solver,
            bump=config.bump.spec(),
            inner_radius=config.bump.inner_radius,
            C1_bar=config.require_problem().C1_bar,
        )
        record = result.report.bounded
        assert record.hopf_margin > 0
        assert record.c <= record.C
        collar = {c.name: c for c in result.report.certificates}["boundary collar"]
        assert collar.passed
        assert result.report.success, [c.name for c in result.report.failures()]
        assert np.all(result.solution.values[:-1] > 0)
        assert result.solution.values[-1] == 0.0

    def test_threshold_agrees_across_grids(self):
        """Test that mu_0 moves by less than five percent when the grid is refined"""
        thresholds = []
        for intervals in (800, 1200):
            config, grid, spec = load_spec("main_n3.json", grid_nodes=intervals)
            result = find_mu_threshold(spec, grid, config.solver.mu_hi, config.solver)
            thresholds.append(result.mu0)
        coarse, fine = thresholds
        assert coarse > 0 and fine > 0
        assert abs(coarse - fine) <= 0.05 * max(coarse, fine)
