"""Continuum reference: the filling constant, coverage curve, and brackets."""

from __future__ import annotations

import math

import numpy as np
import pytest

from latticepark import (
    ConvergenceError,
    QuadratureConfig,
    asymptote_check,
    dr_bracket,
    inner_integral,
    renyi_constant,
    renyi_constant_with_error,
    solve_coverage,
)

# 40-digit evaluation of the double integral, rounded to float64
M_REFERENCE = 0.7475979202534114
# 40-digit evaluation of the inner integral at x = 1
INNER_AT_1 = 0.7965995992970531


def _gauss_legendre(f, a, b, panels=8, order=40):
    """Composite fixed-order Gauss-Legendre, the second quadrature rule."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    total = 0.0
    edges = np.linspace(a, b, panels + 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        total += half * sum(w * f(mid + half * x) for x, w in zip(nodes, weights))
    return total


class TestRenyiConstant:
    def test_reference_value(self):
        m = renyi_constant()
        assert m == pytest.approx(M_REFERENCE, abs=1e-10)

    def test_error_estimate_honest(self):
        m, err = renyi_constant_with_error(QuadratureConfig(abs_tol=1e-10))
        assert abs(m - M_REFERENCE) <= err + 1e-12
        assert err <= 1e-10

    def test_stable_under_cutoff_and_tolerance_changes(self):
        base = renyi_constant(QuadratureConfig(abs_tol=1e-10))
        far = renyi_constant(
            QuadratureConfig(abs_tol=5e-11, rel_tol=5e-13, outer_cutoff=80.0)
        )
        assert abs(base - far) <= 1e-9

    def test_tolerance_contract_between_levels(self):
        rough = renyi_constant(QuadratureConfig(abs_tol=1e-3))
        fine = renyi_constant(QuadratureConfig(abs_tol=1e-9))
        assert abs(rough - fine) <= 1e-3

    def test_config_validation(self):
        with pytest.raises(ValueError):
            QuadratureConfig(abs_tol=0.0)
        with pytest.raises(ValueError):
            QuadratureConfig(rel_tol=-1e-9)
        with pytest.raises(ValueError):
            QuadratureConfig(outer_cutoff=5.0)
        with pytest.raises(ValueError):
            QuadratureConfig(max_refinements=0)

    def test_starved_refinements_fail_loudly(self):
        with pytest.raises(ConvergenceError):
            renyi_constant(QuadratureConfig(abs_tol=1e-12, max_refinements=1))


class TestInnerIntegral:
    def test_empty_range(self):
        assert inner_integral(0.0) == 0.0

    def test_two_rules_agree_at_1(self):
        kronrod = inner_integral(1.0)
        from latticepark.continuum import _regularized_decay

        gauss = _gauss_legendre(_regularized_decay, 0.0, 1.0)
        assert abs(kronrod - gauss) <= 1e-12
        assert kronrod == pytest.approx(INNER_AT_1, abs=1e-13)

    def test_series_branch_is_smooth(self):
        from latticepark.continuum import _SERIES_CUT, _regularized_decay

        below = _regularized_decay(_SERIES_CUT * (1 - 1e-9))
        above = _regularized_decay(_SERIES_CUT * (1 + 1e-9))
        assert abs(below - above) < 1e-12
        assert _regularized_decay(0.0) == 1.0

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            inner_integral(-1.0)


class TestCoverage:
    def test_flat_segments(self):
        grid = solve_coverage(20.0, 1.0 / 256)
        assert grid.value_at(0.5) == 0.0
        assert grid.value_at(1.0) == 1.0
        assert grid.value_at(1.5) == 1.0
        assert grid.value_at(2.0) == 1.0

    def test_analytic_segment_up_to_3(self):
        # on [2, 3]: M(x) = 1 + 2 (x-2)/(x-1), so M(2.5) = 5/3 and M(3) = 2
        grid = solve_coverage(20.0, 1.0 / 256)
        assert grid.value_at(2.5) == pytest.approx(5.0 / 3.0, abs=1e-12)
        assert grid.value_at(3.0) == pytest.approx(2.0, abs=1e-12)

    def test_grid_refinement_second_order(self):
        coarse = solve_coverage(20.0, 1.0 / 64)
        mid = solve_coverage(20.0, 1.0 / 128)
        fine = solve_coverage(20.0, 1.0 / 256)
        d1 = abs(coarse.value_at(5.0) - mid.value_at(5.0))
        d2 = abs(mid.value_at(5.0) - fine.value_at(5.0))
        assert 2.5 <= d1 / d2 <= 6.0

    def test_invariants(self):
        grid = solve_coverage(12.0, 1.0 / 128)
        assert np.all(np.diff(grid.values) >= -1e-14)
        xs = grid.xs
        assert np.all(grid.values <= xs + 1e-12)
        ratios = grid.values[1:] / xs[1:]
        assert np.all(ratios >= 0.0) and np.all(ratios <= 1.0 + 1e-12)

    def test_h_validation(self):
        with pytest.raises(ValueError):
            solve_coverage(20.0, 1.0 / 32)  # too coarse
        with pytest.raises(ValueError):
            solve_coverage(20.0, 0.013)  # does not divide 1
        with pytest.raises(ValueError):
            solve_coverage(1.5, 1.0 / 128)  # range too short
        with pytest.raises(ValueError):
            solve_coverage(20.0001, 1.0 / 128)  # off-grid x_max
        grid = solve_coverage(20.0, 1.0 / 100)  # non-binary but divides 1
        assert grid.value_at(1.0) == 1.0

    def test_value_at_off_grid_rejected(self):
        grid = solve_coverage(4.0, 1.0 / 64)
        with pytest.raises(ValueError):
            grid.value_at(0.01)


class TestAsymptote:
    def test_deviation_discretization_limited(self, renyi_m):
        grid = solve_coverage(20.0, 1.0 / 256)
        dev = asymptote_check(grid, renyi_m)
        assert dev < 1e-4
        finer = solve_coverage(20.0, 1.0 / 512)
        dev2 = asymptote_check(finer, renyi_m)
        assert dev2 <= dev / 3.0

    def test_theoretical_tail_is_below_observation(self):
        # printed envelope at x = 15 is ~1.1e-6, below the 1e-4 assertion
        assert (2.0 * math.e / 15.0) ** 13.5 == pytest.approx(1.12e-6, rel=0.01)

    def test_precondition(self, renyi_m):
        grid = solve_coverage(8.0, 1.0 / 128)
        with pytest.raises(ValueError):
            asymptote_check(grid, renyi_m)


class TestBracket:
    def test_x1_forced_values(self):
        grid = solve_coverage(20.0, 1.0 / 256)
        lo, hi = dr_bracket(grid, 1.0)
        pad = grid.h * grid.h
        assert lo == pytest.approx(2.0 / 3.0, abs=pad + 1e-12)
        assert hi == pytest.approx(1.0, abs=pad + 1e-12)

    def test_contains_m_at_sampled_x(self, renyi_m):
        grid = solve_coverage(20.0, 1.0 / 256)
        for x in (2.0, 5.0, 10.0, 15.0):
            lo, hi = dr_bracket(grid, x)
            assert lo <= renyi_m <= hi, x

    def test_width_regression_at_10(self, renyi_m):
        grid = solve_coverage(20.0, 1.0 / 256)
        lo, hi = dr_bracket(grid, 10.0)
        assert hi - lo < 0.02
        assert lo <= renyi_m <= hi

    def test_precondition(self):
        grid = solve_coverage(4.0, 1.0 / 128)
        with pytest.raises(ValueError):
            dr_bracket(grid, 3.5)
        with pytest.raises(ValueError):
            dr_bracket(grid, -1.0)


@pytest.fixture(scope="module")
def renyi_m():
    return renyi_constant(QuadratureConfig(abs_tol=1e-10))
