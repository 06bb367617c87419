#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Tests for solver/oracle.py — exhaustive enumeration, projected coordinate
ascent and their agreement with the free-boundary solver.
"""

import numpy as np
import pytest

from solver.constants import ORACLE_AGREEMENT_TOL
from solver.errors import GridMismatch, SizeError
from solver.fbp import solve_fbp
from solver.model import LossModel, ProblemSpec, UtilitySpec, WeightingSpec
from solver.oracle import (
    coarse_indices, coarsen, compare, lagrangian_value, oracle_exhaustive, oracle_projected,
)

pytestmark = pytest.mark.oracle

BOUNDED_WEIGHTINGS = [
    WeightingSpec.identity(),
    WeightingSpec.power(0.5),
    WeightingSpec.prelec(0.65, 1.0),
]


def _crra_spec(weighting):
    return ProblemSpec(
        beta=2.0,
        utility=UtilitySpec.crra(2.0),
        weighting=weighting,
        loss=LossModel.uniform(1.0),
        budget=1.6,
    )


class TestCoarsening:
    def test_indices(self):
        np.testing.assert_array_equal(coarse_indices(9, 3), [0, 4, 8])
        np.testing.assert_array_equal(coarse_indices(251, 6), [0, 50, 100, 150, 200, 250])

    @pytest.mark.parametrize("n, m", [(10, 5), (9, 1), (9, 10)])
    def test_mismatch(self, n, m):
        with pytest.raises(GridMismatch):
            coarse_indices(n, m)

    def test_coarse_problem(self, make_transformed):
        cp = coarsen(make_transformed(n=9), 3)
        assert cp.spacing == 0.5
        np.testing.assert_allclose(cp.weights, [0.25, 0.5, 0.25])
        np.testing.assert_allclose(cp.boxes, [0.5, 0.5])


class TestOracleExhaustive:
    """Enumeration over increments c_i in {0, ..., hbar_i * H}."""

    def test_single_increment(self, make_transformed):
        # c in {0, 1/2, 1}: objective -e^{c-2} - (2 - c) is largest at c = 1
        q = oracle_exhaustive(make_transformed(n=9), 1.0, m=2, levels=3)
        np.testing.assert_allclose(q, [1.0, 2.0])

    def test_obstacle_config(self, make_transformed):
        q = oracle_exhaustive(make_transformed(n=251), 0.2, m=6, levels=5)
        np.testing.assert_allclose(q, [1.6, 1.6, 1.6, 1.6, 1.8, 2.0], atol=1e-12)

    def test_matches_fbp_within_resolution(self, make_transformed):
        tp = make_transformed(n=251)
        q = oracle_exhaustive(tp, 0.2, m=6, levels=5)
        fbp = solve_fbp(tp, 0.2).quantile[coarse_indices(251, 6)]
        assert compare(q, fbp).sup_norm <= 0.05 + 5e-3

    def test_zero_boxes(self, make_transformed):
        q = oracle_exhaustive(make_transformed(n=9, varpi=2.0, hbar=np.zeros(9)), 1.0, m=5, levels=4)
        np.testing.assert_array_equal(q, 2.0)

    def test_terminal_value_exact(self, crra_power_spec, transform_spec):
        q = oracle_exhaustive(transform_spec(crra_power_spec(), n=129), 3.0, m=5, levels=6)
        assert q[-1] == 2.0
        assert np.all(np.diff(q) >= 0)

    @pytest.mark.parametrize("m, levels", [(17, 3), (5, 9), (5, 1)])
    def test_size_limits(self, make_transformed, m, levels):
        with pytest.raises(SizeError):
            oracle_exhaustive(make_transformed(n=129), 1.0, m=m, levels=levels)


class TestOracleProjected:
    """Coordinate ascent on the increments reaches the global maximum."""

    def test_analytic(self, make_transformed):
        tp = make_transformed(n=257)
        np.testing.assert_allclose(oracle_projected(tp, 1.0), 1.0 + tp.p, atol=1e-5)

    def test_zero_boxes(self, make_transformed):
        tp = make_transformed(n=65, varpi=2.0, hbar=np.zeros(65))
        np.testing.assert_array_equal(oracle_projected(tp, 1.0), 2.0)

    def test_feasible_output(self, make_transformed):
        tp = make_transformed(n=129)
        q = oracle_projected(tp, 0.2)
        steps = np.diff(q)
        assert q[-1] == 2.0
        assert np.all(steps >= -1e-15)
        assert np.all(steps <= tp.hbar[:-1] * tp.h + 1e-15)

    def test_dominates_exhaustive(self, make_transformed):
        tp = make_transformed(n=9)
        coarse = oracle_exhaustive(tp, 0.2, m=9, levels=3)
        fine = oracle_projected(tp, 0.2)
        assert lagrangian_value(fine, tp, 0.2) >= lagrangian_value(coarse, tp, 0.2) - 1e-12

    @pytest.mark.slow
    @pytest.mark.parametrize("weighting", BOUNDED_WEIGHTINGS, ids=lambda w: w.describe())
    def test_agrees_with_fbp(self, transform_spec, weighting):
        tp = transform_spec(_crra_spec(weighting), n=257)
        fbp = solve_fbp(tp, 0.5).quantile
        assert compare(fbp, oracle_projected(tp, 0.5)).sup_norm <= 5e-3

    def test_fbp_value_not_beaten(self, make_transformed):
        tp = make_transformed(n=257)
        fbp = solve_fbp(tp, 0.2).quantile
        oracle = oracle_projected(tp, 0.2)
        gap = lagrangian_value(oracle, tp, 0.2) - lagrangian_value(fbp, tp, 0.2)
        assert gap <= 1e-4


class TestMatrixAgreement:
    """Both oracles against the free-boundary solver on every configuration."""

    @pytest.mark.slow
    def test_exhaustive_never_beats_fbp(self, matrix_spec, transform_spec, matrix_lambda):
        tp = transform_spec(matrix_spec, n=9)
        fbp = solve_fbp(tp, matrix_lambda, check_feasibility=False).quantile
        lattice = oracle_exhaustive(tp, matrix_lambda, m=9, levels=7)
        assert lagrangian_value(fbp, tp, matrix_lambda) >= (
            lagrangian_value(lattice, tp, matrix_lambda) - 1e-12
        )

    def test_projected_agrees(self, matrix_solution, matrix_lambda):
        tp, sol = matrix_solution(matrix_lambda)
        gap = compare(sol.quantile, oracle_projected(tp, matrix_lambda))
        assert gap.sup_norm <= ORACLE_AGREEMENT_TOL

    @pytest.mark.parametrize("lam", [1.0, 3.0])
    def test_cara_power_mass_at_zero(self, transform_spec, lam):
        spec = ProblemSpec(beta=2.0, utility=UtilitySpec.cara(1.0),
                           weighting=WeightingSpec.power(0.5),
                           loss=LossModel.mass_at_zero(0.3, 1.0), budget=1.9)
        tp = transform_spec(spec, n=257)
        fbp = solve_fbp(tp, lam, check_feasibility=False).quantile
        assert compare(fbp, oracle_projected(tp, lam)).sup_norm <= ORACLE_AGREEMENT_TOL


class TestExhaustiveAnalytic:
    def test_all_ode_lattice_is_exact(self, make_transformed):
        """На ODE-гілці верхня межа решітки збігається з розв'язком."""
        tp = make_transformed(n=9)
        lattice = oracle_exhaustive(tp, 1.0, m=9, levels=7)
        np.testing.assert_allclose(lattice, solve_fbp(tp, 1.0).quantile, atol=1e-12)


class TestLagrangianValue:
    def test_constant_quantile(self, make_transformed):
        tp = make_transformed(n=65)
        # u(x) = 1 - e^{-x}
        expected = 1.0 - np.exp(-2.0) - 2.0 * 0.5
        assert lagrangian_value(np.full(65, 2.0), tp, 0.5) == pytest.approx(expected)

    def test_shape_mismatch(self, make_transformed):
        with pytest.raises(GridMismatch):
            lagrangian_value(np.ones(10), make_transformed(n=65), 1.0)


class TestCompare:
    def test_identical(self):
        q = np.linspace(1.0, 2.0, 101)
        assert compare(q, q.copy()).sup_norm == 0.0
        assert compare(q, q.copy()).mean_abs == 0.0

    def test_single_node(self):
        a = np.linspace(1.0, 2.0, 101)
        b = a.copy()
        b[40] += 1e-3
        result = compare(a, b)
        assert result.sup_norm == pytest.approx(1e-3, rel=1e-9)
        assert result.mean_abs == pytest.approx(1e-3 / 101, rel=1e-9)

    def test_mismatch(self):
        with pytest.raises(GridMismatch):
            compare(np.ones(5), np.ones(6))
