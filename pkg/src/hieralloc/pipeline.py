"""Stage composition: forecast -> ideal shares -> pre-pass -> re-optimise ->
cap and redistribute.

The centre-level pipeline mirrors how the allocation is actually operated:

1. predicted peaks (forecast or supplied) become ideal shares of the supply;
2. regions whose demand already fits inside their ideal share receive their
   full demand and leave the table (pre-pass);
3. the remaining supply is re-optimised over the remaining regions;
4. anything allocated above demand is capped and the excess redistributed
   until nobody sits above demand (or everyone is capped, leaving surplus).

District and proportional runs are thin wrappers producing the same plan
shape with the stages they skip set to None.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forecast import forecast_scenario, horizon_maxima, ideal_allocation, ideal_weights
from .model import (
    AllocationPlan,
    AllocationProblem,
    InputError,
    OptimizedStage,
    PrepassStage,
    Scenario,
    SolverError,
    SolverResult,
    validate_scenario,
)
from .solver import lagrangian_residual, solve_center_allocation, solve_district_allocation


class PipelineError(SolverError):
    """A stage failed; carries which one and chains the original error."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


def _staged(stage: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except (InputError, SolverError, ZeroDivisionError) as exc:
        raise PipelineError(stage, exc) from exc


@dataclass(frozen=True)
class PrepassSplit:
    """Index-level outcome of the full-demand pre-pass."""

    satisfied: tuple[int, ...]
    remaining: tuple[int, ...]
    remaining_supply: float
    balance_demand: float


def prepass_full_allocation(demands: np.ndarray,
                            ideals: np.ndarray,
                            total: float,
                            recheck: bool = False) -> PrepassSplit:
    """Give full demand to every region whose demand fits its ideal share.

    One membership pass by default.  With ``recheck`` the freed supply is
    re-spread over the remaining regions (same proportions) and membership
    re-evaluated until it stabilises.

    Raises SolverError if the satisfied demands alone exceed the supply,
    which can only happen with externally supplied (inconsistent) ideals.
    """
    demands = np.asarray(demands, dtype=float)
    ideals = np.asarray(ideals, dtype=float)
    n = demands.size
    satisfied = demands <= ideals
    if recheck:
        while True:
            remaining = ~satisfied
            t_prime = total - float(demands[satisfied].sum())
            if not remaining.any():
                break
            pool = float(ideals[remaining].sum())
            if pool <= 0.0:
                break
            scaled = ideals * (t_prime / pool)
            newly = remaining & (demands <= scaled)
            if not newly.any():
                break
            satisfied |= newly
    spent = float(demands[satisfied].sum())
    t_prime = total - spent
    if t_prime < 0.0:
        raise SolverError(
            f"supply exhausted by pre-pass: satisfied demand {spent:g} exceeds supply {total:g}"
        )
    remaining_idx = tuple(int(i) for i in np.flatnonzero(~satisfied))
    balance = float(demands[list(remaining_idx)].sum()) if remaining_idx else 0.0
    return PrepassSplit(
        satisfied=tuple(int(i) for i in np.flatnonzero(satisfied)),
        remaining=remaining_idx,
        remaining_supply=t_prime,
        balance_demand=balance,
    )


@dataclass(frozen=True)
class ReoptimizeOutcome:
    """Amounts for the remaining regions plus the solve diagnostics.

    ``solved`` holds the positions (within the remaining set) that entered
    the solver; regions with a zero ideal are excluded and sit at 0.0 in
    ``amounts`` until the redistribution stage tops them up from surplus.
    """

    amounts: np.ndarray
    ideals: np.ndarray
    solved: tuple[int, ...]
    result: SolverResult | None


def reoptimize_remaining(demands: np.ndarray,
                         predicted: np.ndarray,
                         severities: np.ndarray,
                         remaining_supply: float,
                         ideals: np.ndarray | None = None) -> ReoptimizeOutcome:
    """Re-run the centre solve over the regions left after the pre-pass.

    Ideal amounts default to the remaining supply split by predicted peaks;
    a caller holding an externally fixed share table (for instance a
    published one) can pass ``ideals`` to bypass the recomputation.
    """
    demands = np.asarray(demands, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    severities = np.asarray(severities, dtype=float)
    n = demands.size
    if n == 0:
        return ReoptimizeOutcome(np.zeros(0), np.zeros(0), (), None)
    if remaining_supply <= 0.0:
        return ReoptimizeOutcome(np.zeros(n), np.zeros(n), (), None)

    if ideals is None:
        if (predicted < 0).any():
            raise InputError("predicted demand must be >= 0")
        if float(predicted.sum()) <= 0.0:
            ideals = np.zeros(n)  # nothing to anchor a solve; all fall back
        else:
            ideals = ideal_allocation(ideal_weights(predicted), remaining_supply)
    else:
        ideals = np.asarray(ideals, dtype=float)
        if ideals.size != n:
            raise InputError(
                f"length mismatch: {n} remaining regions but {ideals.size} supplied ideals"
            )
        if (ideals < 0).any():
            raise InputError("supplied ideals must be >= 0")

    solvable = ideals > 0.0
    amounts = np.zeros(n)
    if not solvable.any():
        return ReoptimizeOutcome(amounts, ideals, (), None)

    problem = AllocationProblem(
        demands=tuple(demands[solvable]),
        ideals=tuple(ideals[solvable]),
        severities=tuple(severities[solvable]),
        total=float(remaining_supply),
    )
    result = solve_center_allocation(problem)
    amounts[solvable] = result.amounts
    return ReoptimizeOutcome(
        amounts=amounts,
        ideals=ideals,
        solved=tuple(int(i) for i in np.flatnonzero(solvable)),
        result=result,
    )


def cap_and_redistribute(amounts: np.ndarray,
                         demands: np.ndarray,
                         policy: str = "proportional") -> tuple[np.ndarray, float]:
    """Cap every amount at demand and re-spread the excess over the rest.

    Water-filling: repeatedly cap the overshooters, pool the excess and hand
    it to the not-yet-capped regions (equally, or proportionally to their
    current amounts).  Terminates within n rounds.  If everyone ends up
    capped, the leftover pool is returned as surplus.
    """
    if policy not in ("proportional", "equal"):
        raise InputError(f"unknown redistribution policy {policy!r}")
    x = np.asarray(amounts, dtype=float).copy()
    demands = np.asarray(demands, dtype=float)
    if x.size != demands.size:
        raise InputError("length mismatch between amounts and demands")
    capped = np.zeros(x.size, dtype=bool)
    for _ in range(x.size):
        over = (x > demands) & ~capped
        if not over.any():
            return x, 0.0
        pool = float((x[over] - demands[over]).sum())
        x[over] = demands[over]
        capped |= over
        open_ = ~capped
        if not open_.any():
            return x, pool
        if policy == "equal":
            x[open_] += pool / int(open_.sum())
        else:
            base = float(x[open_].sum())
            if base > 0.0:
                x[open_] += pool * x[open_] / base
            else:
                x[open_] += pool / int(open_.sum())
    return x, 0.0


def proportional_allocation(predicted: np.ndarray, total: float) -> np.ndarray:
    """The baseline rule: split ``total`` in proportion to predicted peaks."""
    return ideal_allocation(ideal_weights(predicted), float(total))


def _validated(scenario: Scenario) -> None:
    violations = validate_scenario(scenario)
    if violations:
        raise InputError("invalid scenario: " + "; ".join(str(v) for v in violations))


def _predicted_vector(scenario: Scenario,
                      predicted: dict[str, float] | None,
                      names: list[str]) -> np.ndarray:
    """Predicted peaks for ``names``, from the override mapping or by
    forecasting the regions' histories."""
    if predicted is not None:
        missing = [n for n in names if n not in predicted]
        if missing:
            raise InputError("missing predicted values for: " + ", ".join(missing))
        vec = np.asarray([float(predicted[n]) for n in names], dtype=float)
        if (vec < 0).any():
            raise InputError("predicted values must be >= 0")
        return vec
    wanted = set(names)
    results = forecast_scenario(
        Scenario(
            name=scenario.name,
            resource_name=scenario.resource_name,
            supply=scenario.supply,
            regions=tuple(r for r in scenario.regions if r.name in wanted),
            config=scenario.config,
        )
    )
    return horizon_maxima(results)


def run_center_pipeline(scenario: Scenario,
                        predicted: dict[str, float] | None = None,
                        stage2_ideals: dict[str, float] | None = None,
                        redistribution: str | None = None) -> AllocationPlan:
    """Run the full centre-level waterfall and return the plan.

    ``predicted`` bypasses the forecaster (region name -> predicted peak).
    ``stage2_ideals`` feeds externally fixed ideal amounts into the
    re-optimisation; regions of the remaining set absent from the mapping
    get a zero ideal.  ``redistribution`` overrides the scenario config.
    """
    _staged("validate", _validated, scenario)
    policy = redistribution or scenario.config.redistribution
    if policy not in ("proportional", "equal"):
        raise PipelineError("redistribute", InputError(f"unknown redistribution policy {policy!r}"))

    names = [r.name for r in scenario.regions]
    total = float(scenario.supply)
    demand_by_name = {r.name: float(r.demand) for r in scenario.regions}
    severity_by_name = {r.name: float(r.severity) for r in scenario.regions}

    # zero-demand regions take no part and end at zero
    live = [n for n in names if demand_by_name[n] > 0.0]
    final = {n: 0.0 for n in names}
    if not live:
        return AllocationPlan(
            resource=scenario.resource_name, level="center", redistribution=policy,
            conservation_total=total, region_names=tuple(names), demands=demand_by_name,
            stage_ideal=None, stage_prepass=None, stage_optimized=None,
            stage_final=final, surplus=total,
        )

    demands = np.asarray([demand_by_name[n] for n in live], dtype=float)
    severities = np.asarray([severity_by_name[n] for n in live], dtype=float)
    predicted_vec = _staged("forecast", _predicted_vector, scenario, predicted, live)

    weights = _staged("ideal", ideal_weights, predicted_vec)
    ideals = ideal_allocation(weights, total)
    stage_ideal = {n: float(v) for n, v in zip(live, ideals)}

    split = _staged("prepass", prepass_full_allocation, demands, ideals, total,
                    scenario.config.prepass_recheck)
    for i in split.satisfied:
        final[live[i]] = float(demands[i])
    prepass_stage = PrepassStage(
        satisfied={live[i]: float(demands[i]) for i in split.satisfied},
        remaining_supply=split.remaining_supply,
        balance_demand=split.balance_demand,
    )

    optimized_stage = None
    surplus = split.remaining_supply
    if split.remaining:
        rem = list(split.remaining)
        rem_names = [live[i] for i in rem]
        rem_demands = demands[rem]
        override = None
        if stage2_ideals is not None:
            override = np.asarray([float(stage2_ideals.get(n, 0.0)) for n in rem_names])
        outcome = _staged("optimize", reoptimize_remaining,
                          rem_demands, predicted_vec[rem], severities[rem],
                          split.remaining_supply, override)
        capped, surplus = _staged("redistribute", cap_and_redistribute,
                                  outcome.amounts, rem_demands, policy)

        # regions excluded from the solve (zero ideal) pick from the surplus,
        # each receiving min(demand, demand-proportional share of the pool)
        left_out = [j for j in range(len(rem)) if j not in outcome.solved]
        if left_out and surplus > 0.0:
            want = np.asarray([rem_demands[j] for j in left_out])
            give = np.minimum(want, surplus * want / float(want.sum()))
            surplus -= float(give.sum())
            for j, amt in zip(left_out, give):
                capped[j] = float(amt)

        for j, name in enumerate(rem_names):
            final[name] = float(capped[j])
        if outcome.result is not None:
            solved_names = tuple(rem_names[j] for j in outcome.solved)
            problem = AllocationProblem(
                demands=tuple(rem_demands[list(outcome.solved)]),
                ideals=tuple(outcome.ideals[list(outcome.solved)]),
                severities=tuple(severities[rem][list(outcome.solved)]),
                total=float(split.remaining_supply),
            )
            optimized_stage = OptimizedStage(
                regions=solved_names,
                ideals={n: float(outcome.ideals[j]) for j, n in zip(outcome.solved, solved_names)},
                result=outcome.result,
                kkt_residual=lagrangian_residual(problem, outcome.result),
            )

    plan = AllocationPlan(
        resource=scenario.resource_name,
        level="center",
        redistribution=policy,
        conservation_total=total,
        region_names=tuple(names),
        demands=demand_by_name,
        stage_ideal=stage_ideal,
        stage_prepass=prepass_stage,
        stage_optimized=optimized_stage,
        stage_final=final,
        surplus=float(surplus),
    )
    _check_plan(plan, scenario.config.conservation_tol)
    return plan


def run_district_pipeline(scenario: Scenario,
                          redistribution: str | None = None) -> AllocationPlan:
    """Demand-only allocation (hospital level): one solve, no pre-pass and
    no capping; amounts above demand are a deliberate buffer."""
    _staged("validate", _validated, scenario)
    names = [r.name for r in scenario.regions]
    total = float(scenario.supply)
    demand_by_name = {r.name: float(r.demand) for r in scenario.regions}
    live = [r for r in scenario.regions if r.demand > 0.0]
    final = {n: 0.0 for n in names}
    optimized_stage = None
    surplus = total
    if live:
        result = _staged("optimize", solve_district_allocation,
                         [r.demand for r in live], [r.severity for r in live], total)
        for rec, amount in zip(live, result.amounts):
            final[rec.name] = float(amount)
        from .solver import DistrictProblem  # local to keep module deps one-way
        problem = DistrictProblem(tuple(float(r.demand) for r in live),
                                  tuple(float(r.severity) for r in live), total)
        optimized_stage = OptimizedStage(
            regions=tuple(r.name for r in live),
            ideals={r.name: float(r.demand) for r in live},
            result=result,
            kkt_residual=lagrangian_residual(problem, result),
        )
        surplus = 0.0
    plan = AllocationPlan(
        resource=scenario.resource_name,
        level="district",
        redistribution=redistribution or scenario.config.redistribution,
        conservation_total=total,
        region_names=tuple(names),
        demands=demand_by_name,
        stage_ideal=None,
        stage_prepass=None,
        stage_optimized=optimized_stage,
        stage_final=final,
        surplus=surplus,
    )
    _check_plan(plan, scenario.config.conservation_tol)
    return plan


def run_proportional_pipeline(scenario: Scenario,
                              predicted: dict[str, float] | None = None) -> AllocationPlan:
    """Baseline split of the supply by predicted peaks, nothing else."""
    _staged("validate", _validated, scenario)
    names = [r.name for r in scenario.regions]
    total = float(scenario.supply)
    demand_by_name = {r.name: float(r.demand) for r in scenario.regions}
    live = [n for n in names if demand_by_name[n] > 0.0]
    final = {n: 0.0 for n in names}
    stage_ideal = None
    surplus = total
    if live:
        predicted_vec = _staged("forecast", _predicted_vector, scenario, predicted, live)
        amounts = _staged("ideal", proportional_allocation, predicted_vec, total)
        for n, amount in zip(live, amounts):
            final[n] = float(amount)
        stage_ideal = dict((n, final[n]) for n in live)
        surplus = 0.0
    plan = AllocationPlan(
        resource=scenario.resource_name,
        level="proportional",
        redistribution=scenario.config.redistribution,
        conservation_total=total,
        region_names=tuple(names),
        demands=demand_by_name,
        stage_ideal=stage_ideal,
        stage_prepass=None,
        stage_optimized=None,
        stage_final=final,
        surplus=surplus,
    )
    _check_plan(plan, scenario.config.conservation_tol)
    return plan


def run_pipeline(scenario: Scenario,
                 level: str = "center",
                 predicted: dict[str, float] | None = None,
                 stage2_ideals: dict[str, float] | None = None,
                 redistribution: str | None = None) -> AllocationPlan:
    """Dispatch to the requested allocation level."""
    if level == "center":
        return run_center_pipeline(scenario, predicted, stage2_ideals, redistribution)
    if level == "district":
        return run_district_pipeline(scenario, redistribution)
    if level == "proportional":
        return run_proportional_pipeline(scenario, predicted)
    raise PipelineError("dispatch", InputError(f"unknown level {level!r}"))


def _check_plan(plan: AllocationPlan, tol: float) -> None:
    gap = abs(sum(plan.stage_final.values()) + plan.surplus - plan.conservation_total)
    if gap > tol:
        raise PipelineError("conservation", SolverError(
            f"allocated + surplus differs from supply by {gap:.3e}"))
