import csv
import math

import numpy as np
import pytest
from scipy.special import j0

from exceptions import CriticalValue, DomainError
from familygen import Generator
from fungrid import TWO_PI, SampledFunction, UniformGrid
from smoothcurve import (
    DEFAULT_LAMBDAS,
    BoundaryBranch,
    boundary_check,
    closure_defect,
    closure_profile,
    composed_moment,
    curve_from_angle,
    f_of_lambda,
    family_scan,
    level_set_condition,
    level_set_scan,
    moment,
    moment_profile,
    series_coefficient,
    taylor_partial_sum,
    taylor_remainder_bound,
    total_turning,
    turning_angle,
)


def sampled(fn, grid):
    return SampledFunction.from_callable(fn, grid)


class TestReconstruction:
    def test_turning_angle_of_constant_curvature(self, grid):
        np.testing.assert_allclose(turning_angle(SampledFunction.constant(grid, 1.0)).values, grid.nodes, atol=1e-12)

    def test_turning_angle_of_zero(self, grid):
        assert np.all(turning_angle(SampledFunction.constant(grid, 0.0)).values == 0.0)

    def test_turning_angle_of_cos(self, grid):
        np.testing.assert_allclose(turning_angle(sampled(np.cos, grid)).values, np.sin(grid.nodes), atol=1e-10)

    def test_circle(self, grid, circle_theta):
        points = curve_from_angle(circle_theta).points
        np.testing.assert_allclose(points[:, 0], np.sin(grid.nodes), atol=1e-10)
        np.testing.assert_allclose(points[:, 1], 1 - np.cos(grid.nodes), atol=1e-10)

    def test_segment(self, grid):
        points = curve_from_angle(SampledFunction.constant(grid, 0.0)).points
        np.testing.assert_allclose(points[:, 0], grid.nodes, atol=1e-12)
        np.testing.assert_allclose(points[:, 1], 0.0, atol=1e-12)

    def test_perturbed_circle_closes(self, grid):
        theta = sampled(lambda t: t + 0.3 * np.sin(2 * t), grid)
        np.testing.assert_allclose(curve_from_angle(theta).endpoint, [0.0, 0.0], atol=1e-9)


class TestClosureDefect:
    def test_circle(self, circle_theta):
        assert closure_defect(circle_theta) == pytest.approx(0.0, abs=1e-12)

    def test_segment(self, grid):
        assert closure_defect(SampledFunction.constant(grid, 0.0)) == pytest.approx(TWO_PI, abs=1e-12)

    def test_half_turn(self, grid):
        assert closure_defect(sampled(lambda t: t / 2, grid)) == pytest.approx(4.0, abs=1e-10)
        np.testing.assert_allclose(closure_profile(sampled(lambda t: t / 2, grid)), [0.0, 4.0], atol=1e-10)


class TestFOfLambda:
    def test_circle_family(self, circle_theta, circle_phi):
        assert abs(f_of_lambda(circle_theta, circle_phi, 1.7)) <= 1e-9

    def test_zero_phi_is_lambda_independent(self, grid):
        theta = sampled(lambda t: t / 3, grid)
        zero = SampledFunction.constant(grid, 0.0)
        assert f_of_lambda(theta, zero, 4.2) == pytest.approx(f_of_lambda(theta, zero, 0.0), abs=1e-14)

    def test_linear_phi(self, grid):
        value = f_of_lambda(SampledFunction.constant(grid, 0.0), sampled(lambda t: t, grid), 1.0)
        assert abs(value) <= 1e-10

    def test_bessel_oracle(self, grid):
        zero = SampledFunction.constant(grid, 0.0)
        value = f_of_lambda(zero, sampled(np.sin, grid), 2.5)
        assert value == pytest.approx(TWO_PI * j0(2.5), abs=1e-10)


class TestMoments:
    def test_circle_family_moments_vanish(self, circle_theta, circle_phi):
        assert max(abs(m) for m in moment_profile(circle_theta, circle_phi, 12)) <= 1e-9

    def test_no_vector_space(self, grid):
        value = moment(SampledFunction.constant(grid, 0.0), sampled(np.sin, grid), 2)
        assert value.real == pytest.approx(math.pi, abs=1e-10)
        assert abs(value.imag) <= 1e-10

    def test_order_zero_is_closure_integral(self, grid):
        theta = sampled(lambda t: t / 2, grid)
        assert moment(theta, sampled(np.cos, grid), 0) == pytest.approx(4j, abs=1e-10)

    def test_large_scale(self, grid):
        phi = sampled(lambda t: 1e12 * np.sin(t), grid)
        value = moment(SampledFunction.constant(grid, 0.0), phi, 24)
        exact = TWO_PI * math.comb(24, 12) / 2 ** 24 * 1e288
        assert value.real == pytest.approx(exact, rel=1e-10)

    @pytest.mark.parametrize("n", [-1, 25, 2.5])
    def test_bad_order(self, circle_theta, circle_phi, n):
        with pytest.raises(ValueError):
            moment(circle_theta, circle_phi, n)

    def test_rigid_motion(self, grid):
        theta = sampled(lambda t: t / 3 + 0.2 * np.sin(t), grid)
        phi = sampled(lambda t: np.cos(t) + t / 7, grid)
        shifted = theta.with_values(theta.values + 0.9)
        rotation = np.exp(0.9j)
        for n in range(5):
            assert moment(shifted, phi, n) == pytest.approx(rotation * moment(theta, phi, n), abs=1e-12)
        assert abs(f_of_lambda(shifted, phi, 1.3)) == pytest.approx(abs(f_of_lambda(theta, phi, 1.3)), abs=1e-12)


class TestSeries:
    def test_zeroth_coefficient(self, grid):
        theta = sampled(lambda t: t / 2, grid)
        phi = sampled(np.cos, grid)
        assert series_coefficient(theta, phi, 0) == pytest.approx(f_of_lambda(theta, phi, 0.0), abs=1e-12)

    def test_circle_third_coefficient(self, circle_theta, circle_phi):
        assert abs(series_coefficient(circle_theta, circle_phi, 3)) <= 1e-9

    def test_second_coefficient(self, grid):
        value = series_coefficient(SampledFunction.constant(grid, 0.0), sampled(np.sin, grid), 2)
        assert value == pytest.approx(-math.pi / 2, abs=1e-9)

    @pytest.mark.parametrize("family", ["circle", "bessel"])
    def test_taylor_consistency(self, grid, circle_theta, circle_phi, family):
        if family == "circle":
            theta, phi = circle_theta, circle_phi
        else:
            theta, phi = SampledFunction.constant(grid, 0.0), sampled(np.sin, grid)
        for lam in np.linspace(-1.0, 1.0, 21):
            for order in (4, 10):
                gap = abs(f_of_lambda(theta, phi, lam) - taylor_partial_sum(theta, phi, lam, order))
                assert gap <= taylor_remainder_bound(phi, lam, order) + 1e-12


class TestComposedMoment:
    def test_identity(self, grid):
        theta, phi = sampled(lambda t: t / 2, grid), sampled(np.cos, grid)
        for n in range(4):
            assert composed_moment(theta, phi, Generator.identity(), n) == pytest.approx(moment(theta, phi, n), abs=1e-12)

    def test_exp_plus_two_x(self, circle_theta, circle_phi):
        assert abs(composed_moment(circle_theta, circle_phi, Generator.parse("exp+2x"), 1)) <= 1e-8

    def test_constant_generator(self, grid):
        theta = sampled(lambda t: t / 2, grid)
        value = composed_moment(theta, sampled(np.cos, grid), Generator.polynomial([2.5]), 1)
        assert value == pytest.approx(2.5 * 4j, abs=1e-10)

    def test_generator_outside_domain(self, grid, circle_theta):
        xs = np.linspace(-1.5, 1.5, 31)
        g = Generator.table(xs, xs ** 2)
        with pytest.raises(DomainError):
            composed_moment(circle_theta, sampled(lambda t: 2 * np.sin(2 * t), grid), g, 1)

    @pytest.mark.parametrize("g", [
        Generator.polynomial([0.3, -1.0, 0.5, 2.0, -0.7, 1.1]),
        Generator.parse("exp+2x"),
        np.cos,
    ])
    def test_composition_stability(self, circle_theta, circle_phi, g):
        tolerance = 1e-9
        assert max(abs(m) for m in moment_profile(circle_theta, circle_phi, 12)) <= tolerance
        for n in range(0, 6):
            assert abs(composed_moment(circle_theta, circle_phi, g, n)) <= 10 * tolerance


class TestLevelSets:
    def test_closed_form_four_roots(self, circle_theta, circle_phi):
        report = level_set_condition(circle_theta, circle_phi, 0.5)
        expected = np.array([1, 5, 13, 17]) * math.pi / 12
        np.testing.assert_allclose([r.t for r in report.roots], expected, atol=1e-9)
        np.testing.assert_allclose([r.abs_phi_prime for r in report.roots], math.sqrt(3), atol=1e-9)
        assert abs(report.weighted_sum) <= 1e-9
        assert report.boundary_excluded

    @pytest.mark.parametrize("a", [-0.9, -0.5, -0.1, 0.1, 0.5, 0.9])
    def test_circle_family_levels(self, circle_theta, circle_phi, a):
        assert abs(level_set_condition(circle_theta, circle_phi, a).weighted_sum) < 1e-6

    def test_single_root(self, grid):
        report = level_set_condition(SampledFunction.constant(grid, 0.0), sampled(lambda t: t, grid), 3.0)
        assert len(report.roots) == 1
        assert abs(report.weighted_sum) == pytest.approx(1.0, abs=1e-9)

    def test_level_above_range(self, circle_theta, circle_phi):
        report = level_set_condition(circle_theta, circle_phi, 2.0)
        assert report.roots == ()
        assert report.weighted_sum == 0

    def test_scan_skips_boundary_levels(self, circle_theta, circle_phi):
        entries = level_set_scan(circle_theta, circle_phi, [0.0, 0.5])
        assert entries[0].report is None and "boundary" in entries[0].skipped
        assert entries[1].report is not None

    def test_csv_partial_sums(self, tmp_path, circle_theta, circle_phi):
        path = tmp_path / "level.csv"
        level_set_condition(circle_theta, circle_phi, 0.5).to_csv(str(path))
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["root", "theta_at_root", "abs_phi_prime", "partial_sum_re", "partial_sum_im"]
        assert len(rows) == 5
        assert abs(complex(float(rows[-1][3]), float(rows[-1][4]))) <= 1e-9


class TestFamilyScan:
    def test_circle_family(self, grid):
        report = family_scan(SampledFunction.constant(grid, 1.0), sampled(lambda t: 2 * np.cos(2 * t), grid),
                             DEFAULT_LAMBDAS, 1e-9)
        assert report.passed
        assert report.max_defect < 1e-9
        assert len(report.defects) == 21

    def test_circle_family_in_arc_length_form(self, grid):
        """k ≡ 1, f = -2 sin 2s: defects and moments below 1e-9 on the default grid."""
        k = SampledFunction.constant(grid, 1.0)
        f = sampled(lambda s: -2 * np.sin(2 * s), grid)
        assert family_scan(k, f, DEFAULT_LAMBDAS, 1e-9).passed
        theta, phi = turning_angle(k), turning_angle(f)
        assert max(abs(m) for m in moment_profile(theta, phi, 12)) < 1e-9

    def test_open_family(self, grid):
        one = SampledFunction.constant(grid, 1.0)
        report = family_scan(one, one, [0.5], 1e-7)
        assert report.defects[0] == pytest.approx(4 / 3, abs=1e-9)
        assert report.verdict == "fail"

    def test_zero_direction(self, grid):
        k = sampled(lambda t: 0.5 + 0.1 * np.cos(t), grid)
        report = family_scan(k, SampledFunction.constant(grid, 0.0), [-1.0, 0.0, 2.0])
        np.testing.assert_allclose(report.defects, closure_defect(turning_angle(k)), atol=1e-14)

    def test_parallel_matches_serial(self, grid):
        k, f = SampledFunction.constant(grid, 1.0), sampled(lambda t: np.cos(t), grid)
        serial = family_scan(k, f, DEFAULT_LAMBDAS, 1e-7)
        parallel = family_scan(k, f, DEFAULT_LAMBDAS, 1e-7, workers=4)
        assert serial.defects == parallel.defects

    def test_empty_lambdas(self, grid):
        with pytest.raises(ValueError):
            family_scan(SampledFunction.constant(grid, 1.0), SampledFunction.constant(grid, 0.0), [])

    def test_scan_and_moments_agree(self, grid, circle_theta, circle_phi):
        one = SampledFunction.constant(grid, 1.0)
        for k, f in ((one, sampled(lambda t: 2 * np.cos(2 * t), grid)), (one, one)):
            scan_ok = family_scan(k, f, DEFAULT_LAMBDAS, 1e-8).passed
            moments = moment_profile(turning_angle(k), turning_angle(f), 12, normalized=True)
            assert scan_ok == (max(abs(m) for m in moments) <= 1e-8)

    def test_csv(self, tmp_path, grid):
        one = SampledFunction.constant(grid, 1.0)
        path = tmp_path / "scan.csv"
        family_scan(one, one, [0.0, 0.5], 1e-7).to_csv(str(path))
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["lambda", "defect"]
        assert float(rows[2][1]) == pytest.approx(4 / 3, abs=1e-9)


class TestBoundary:
    def test_circle_family_is_even(self, circle_theta, circle_phi):
        report = boundary_check(circle_theta, circle_phi, h=3)
        assert report.branch is BoundaryBranch.EVEN
        assert report.phi_endpoint_match
        assert max(report.derivative_residuals) < 1e-6

    def test_half_turn_input_is_odd(self, grid):
        theta = sampled(lambda t: math.pi * (10 * (t / TWO_PI) ** 3 - 15 * (t / TWO_PI) ** 4 + 6 * (t / TWO_PI) ** 5), grid)
        phi = sampled(lambda t: np.sin(t / 2), grid)
        assert total_turning(theta) == pytest.approx(math.pi, abs=1e-12)
        report = boundary_check(theta, phi, h=3)
        assert report.branch is BoundaryBranch.ODD
        assert max(r / t for r, t in zip(report.odd_residuals, report.tolerances)) <= 1.0

    def test_half_turn_with_even_phi_is_violation(self, grid):
        report = boundary_check(sampled(lambda t: t / 2, grid), sampled(lambda t: np.sin(2 * t), grid), h=3)
        assert report.branch is BoundaryBranch.VIOLATION
        # sin 2t has matching derivatives 2, 0, -8 at both ends, so only odd orders break the odd branch
        assert report.odd_residuals[1] == pytest.approx(4.0, abs=1e-6)

    def test_third_turn_is_violation(self, grid):
        report = boundary_check(sampled(lambda t: t / 6, grid), sampled(lambda t: np.sin(2 * t), grid))
        assert report.branch is BoundaryBranch.VIOLATION

    def test_third_derivative_mismatch_is_violation(self, circle_theta, grid):
        # the bump is flat to second order at both ends but moves φ''' by ±0.1488
        phi = sampled(lambda t: np.sin(2 * t) + 1e-4 * t ** 3 * (t - TWO_PI) ** 3, grid)
        report = boundary_check(circle_theta, phi, h=3, tolerance=1e-6)
        assert report.branch is BoundaryBranch.VIOLATION
        assert report.even_residuals[3] == pytest.approx(0.2977, abs=1e-3)
        assert report.tolerances[3] < 1e-3

    def test_tolerances_do_not_grow_with_order(self, circle_theta, circle_phi):
        report = boundary_check(circle_theta, circle_phi, h=3, tolerance=1e-6)
        assert all(t < 1e-3 for t in report.tolerances)

    def test_critical_start(self, circle_theta, grid):
        with pytest.raises(CriticalValue):
            boundary_check(circle_theta, sampled(lambda t: np.cos(2 * t), grid))

    def test_zero_phi_is_critical(self, circle_theta, grid):
        with pytest.raises(CriticalValue):
            boundary_check(circle_theta, SampledFunction.constant(grid, 0.0))
