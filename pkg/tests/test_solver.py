"""Closed-form solvers, the iterative oracle, and the KKT self-check."""
import numpy as np
import numpy.testing as npt
import pytest

from hieralloc.model import AllocationProblem, InputError, SolverError
from hieralloc.solver import (
    ConvergenceError,
    DistrictProblem,
    lagrangian_residual,
    oracle_solve,
    solve_center_allocation,
    solve_district_allocation,
)

from conftest import STAGE2_ROWS, REMAINING_SUPPLY


def random_problem(rng, n=12):
    D = rng.uniform(1, 1000, n)
    A = rng.uniform(1, 1000, n)
    sev = rng.uniform(0.5, 3.0, n)
    return AllocationProblem(tuple(D), tuple(A), tuple(sev), float(D.sum() / 2))


class TestCenterClosedForm:
    def test_single_region(self):
        r = solve_center_allocation(AllocationProblem((7.0,), (3.0,), (2.0,), 42.0))
        assert r.fractions == (1.0,)
        assert r.amounts == (42.0,)

    def test_demand_equals_ideal_feasible(self):
        # demands already sum to the supply and match the ideals: everyone
        # gets exactly demand and the constraint is inactive
        D = (60.0, 25.0, 15.0)
        r = solve_center_allocation(AllocationProblem(D, D, (1.0, 3.0, 0.5), 100.0))
        npt.assert_allclose(r.amounts, D, atol=1e-9)
        assert r.multiplier == pytest.approx(0.0, abs=1e-12)

    def test_two_region_reference_values(self):
        p = AllocationProblem((60.0, 40.0), (50.0, 50.0), (1.0, 1.0), 100.0)
        r = solve_center_allocation(p)
        npt.assert_allclose(r.amounts, (55.30179445350733, 44.69820554649267), atol=1e-9)
        assert r.multiplier == pytest.approx(-100.0 / 613.0, abs=1e-12)
        # two printed decimals for the record
        assert round(r.amounts[0], 2) == 55.30 and round(r.amounts[1], 2) == 44.70

    def test_stage2_instance(self):
        demands = tuple(float(d) for d in
                        (1500, 1000, 445, 700, 180, 360, 440, 103, 20))
        ideals = tuple(row[1] for row in STAGE2_ROWS)
        p = AllocationProblem(demands, ideals, (1.0,) * 9, REMAINING_SUPPLY)
        r = solve_center_allocation(p)
        expected = [row[2] for row in STAGE2_ROWS]
        npt.assert_allclose(r.amounts, expected, atol=1.0)
        assert sum(r.amounts) == pytest.approx(REMAINING_SUPPLY, abs=1e-6)
        assert not r.active_set

    def test_constraint_always_met(self):
        rng = np.random.RandomState(11)
        for _ in range(50):
            r = solve_center_allocation(random_problem(rng, rng.randint(1, 25)))
            assert abs(sum(r.fractions) - 1.0) <= 1e-9

    def test_severity_scaling_invariance(self):
        rng = np.random.RandomState(5)
        p = random_problem(rng)
        scaled = AllocationProblem(p.demands, p.ideals,
                                   tuple(7.5 * s for s in p.severities), p.total)
        a = solve_center_allocation(p)
        b = solve_center_allocation(scaled)
        npt.assert_allclose(a.fractions, b.fractions, atol=1e-9)
        assert b.multiplier == pytest.approx(7.5 * a.multiplier, rel=1e-9)

    def test_unit_scaling_invariance(self):
        rng = np.random.RandomState(6)
        p = random_problem(rng)
        c = 1000.0
        scaled = AllocationProblem(tuple(c * d for d in p.demands),
                                   tuple(c * a for a in p.ideals),
                                   p.severities, c * p.total)
        npt.assert_allclose(solve_center_allocation(p).fractions,
                            solve_center_allocation(scaled).fractions, atol=1e-9)

    @pytest.mark.parametrize("seed", [1100793058, 1239758513, 1105263961])
    def test_clamping_keeps_constraint_and_kkt_sign(self, seed):
        # seeded instances known to drive the plain closed form negative,
        # including two needing more than one clamp sweep
        rng = np.random.RandomState(seed)
        p = random_problem(rng)
        r = solve_center_allocation(p)
        assert r.active_set
        for i in r.active_set:
            assert r.fractions[i] == 0.0
        assert abs(sum(r.fractions) - 1.0) <= 1e-9
        # sign condition: pushing a clamped coordinate up must not improve
        # the objective (gradient + multiplier >= 0 there)
        from hieralloc.solver import quad_coefficients
        a, b = quad_coefficients(p)
        for i in r.active_set:
            assert 2 * a[i] * r.fractions[i] - 2 * b[i] + r.multiplier >= -1e-9

    def test_fractions_never_negative(self):
        rng = np.random.RandomState(13)
        for _ in range(50):
            n = rng.randint(2, 15)
            D = rng.uniform(0.1, 100, n)
            A = rng.uniform(0.1, 100, n)
            # large supply exercises the clamp path
            p = AllocationProblem(tuple(D), tuple(A), (1.0,) * n, float(D.sum() * 5))
            r = solve_center_allocation(p)
            assert min(r.fractions) >= 0.0


class TestDistrictClosedForm:
    def test_feasible_demand_returns_demand(self):
        r = solve_district_allocation([30.0, 20.0, 10.0], [1.0, 2.0, 3.0], 60.0)
        npt.assert_allclose(r.amounts, [30.0, 20.0, 10.0], atol=1e-9)
        assert r.multiplier == pytest.approx(0.0, abs=1e-12)

    def test_single_hospital(self):
        r = solve_district_allocation([15.0], None, 9.0)
        assert r.fractions == (1.0,)
        assert r.amounts == (9.0,)

    def test_reference_instance(self):
        r = solve_district_allocation([30.0, 20.0, 10.0], None, 50.0)
        assert r.multiplier == pytest.approx(5.0 / 7.0, abs=1e-12)
        npt.assert_allclose(r.amounts, [23.571428571, 17.142857143, 9.285714286],
                            atol=1e-3)
        npt.assert_allclose(r.amounts, [165.0 / 7, 120.0 / 7, 65.0 / 7], atol=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(InputError, match="empty problem"):
            solve_district_allocation([], None, 10.0)

    def test_severity_shifts_shortfall(self):
        # higher severity shields a hospital from the shortage
        base = solve_district_allocation([30.0, 30.0], None, 40.0)
        tilted = solve_district_allocation([30.0, 30.0], [5.0, 1.0], 40.0)
        assert base.amounts[0] == pytest.approx(base.amounts[1])
        assert tilted.amounts[0] > tilted.amounts[1]


class TestOracle:
    def test_matches_two_region_example(self):
        p = AllocationProblem((60.0, 40.0), (50.0, 50.0), (1.0, 1.0), 100.0)
        closed = solve_center_allocation(p)
        orac = oracle_solve(p)
        npt.assert_allclose(orac.fractions, closed.fractions, atol=1e-6)
        assert orac.multiplier == pytest.approx(closed.multiplier, abs=1e-6)

    def test_matches_district_example(self):
        closed = solve_district_allocation([30.0, 20.0, 10.0], None, 50.0)
        orac = oracle_solve(DistrictProblem((30.0, 20.0, 10.0), (1.0, 1.0, 1.0), 50.0))
        npt.assert_allclose(orac.fractions, closed.fractions, atol=1e-6)

    def test_matches_stage2_instance(self):
        demands = tuple(float(d) for d in (1500, 1000, 445, 700, 180, 360, 440, 103, 20))
        ideals = tuple(row[1] for row in STAGE2_ROWS)
        p = AllocationProblem(demands, ideals, (1.0,) * 9, REMAINING_SUPPLY)
        npt.assert_allclose(oracle_solve(p).fractions,
                            solve_center_allocation(p).fractions, atol=1e-6)

    def test_symmetric_instance(self):
        p = AllocationProblem((10.0,) * 4, (12.0,) * 4, (1.0,) * 4, 30.0)
        npt.assert_allclose(oracle_solve(p).fractions, [0.25] * 4, atol=1e-9)

    def test_randomised_agreement(self):
        rng = np.random.RandomState(99)
        for _ in range(20):
            p = random_problem(rng)
            closed = solve_center_allocation(p)
            orac = oracle_solve(p)
            npt.assert_allclose(orac.fractions, closed.fractions, atol=1e-6)

    @pytest.mark.parametrize("seed", [1100793058, 1239758513])
    def test_agreement_with_clamping(self, seed):
        p = random_problem(np.random.RandomState(seed))
        closed = solve_center_allocation(p)
        assert closed.active_set
        npt.assert_allclose(oracle_solve(p).fractions, closed.fractions, atol=1e-6)

    def test_step_budget_exhaustion(self):
        p = AllocationProblem((60.0, 40.0), (50.0, 50.0), (1.0, 1.0), 100.0)
        with pytest.raises(ConvergenceError) as info:
            oracle_solve(p, max_steps=1, tolerance=1e-16)
        err = info.value
        assert err.iterate.shape == (2,)
        assert err.residual > 0.0


class TestLagrangianResidual:
    def test_closed_form_is_stationary(self):
        p = AllocationProblem((60.0, 40.0), (50.0, 50.0), (1.0, 1.0), 100.0)
        assert lagrangian_residual(p, solve_center_allocation(p)) < 1e-8

    def test_stage2_instance_stationary(self):
        demands = tuple(float(d) for d in (1500, 1000, 445, 700, 180, 360, 440, 103, 20))
        ideals = tuple(row[1] for row in STAGE2_ROWS)
        p = AllocationProblem(demands, ideals, (1.0,) * 9, REMAINING_SUPPLY)
        assert lagrangian_residual(p, solve_center_allocation(p)) < 1e-8

    def test_perturbed_result_flagged(self):
        from hieralloc.model import SolverResult
        p = AllocationProblem((60.0, 40.0), (50.0, 50.0), (1.0, 1.0), 100.0)
        r = solve_center_allocation(p)
        fractions = (r.fractions[0] + 0.01, r.fractions[1] - 0.01)
        tampered = SolverResult(fractions=fractions, multiplier=r.multiplier,
                                amounts=tuple(100.0 * f for f in fractions))
        assert lagrangian_residual(p, tampered) > 1e-3

    def test_district_result(self):
        r = solve_district_allocation([30.0, 20.0, 10.0], None, 50.0)
        p = DistrictProblem((30.0, 20.0, 10.0), (1.0, 1.0, 1.0), 50.0)
        assert lagrangian_residual(p, r) < 1e-8
