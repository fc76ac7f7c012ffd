"""Closed-form solvers for the per-level allocation problems.

Both levels minimise a severity-weighted sum of squared relative deviations
subject to the shares summing to one:

    minimise    J(alpha) = sum_i a_i * alpha_i**2 - 2 * b_i * alpha_i
    subject to  sum_i alpha_i = 1,  alpha_i >= 0

At the centre level the deviation is measured against both demand and the
forecast-driven ideal amount, so with supply T, demand D_i, ideal A0_i and
severity d_i:

    k_i = d_i * (1 / D_i**2 + 1 / A0_i**2)
    g_i = d_i * (1 / D_i   + 1 / A0_i)
    a_i = k_i * T**2
    b_i = g_i * T

At the district level only demand enters:

    a_i = d_i * T**2 / D_i**2
    b_i = d_i * T / D_i

Stationarity of the Lagrangian L = J + lambda * (sum alpha - 1) gives the
closed form

    alpha_i = (b_i - lambda / 2) / a_i,
    lambda  = 2 * (sum_i b_i / a_i - 1) / sum_i (1 / a_i).

Negative shares are handled by an active-set sweep: clamp them to zero,
re-solve on the free set, repeat.  Each sweep can only raise lambda, which
keeps already-clamped coordinates clamped, so at most n sweeps run and the
result satisfies the KKT conditions of the sign-constrained problem.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .model import AllocationProblem, InputError, SolverError, SolverResult

# |sum(fractions) - 1| guaranteed on any returned result
CONSTRAINT_TOL = 1e-9
# agreement expected between the closed form and the iterative oracle
ORACLE_AGREEMENT_TOL = 1e-6

_ORACLE_MAX_STEPS = 2_000_000
_ORACLE_TOL = 1e-12


class ConvergenceError(SolverError):
    """Oracle ran out of steps.  Carries the last iterate and its residual
    so callers can inspect how close it got."""

    def __init__(self, message: str, iterate: np.ndarray, residual: float):
        super().__init__(message)
        self.iterate = iterate
        self.residual = residual


@dataclass(frozen=True)
class DistrictProblem:
    """Demand-only allocation inputs for one district's hospitals."""

    demands: tuple[float, ...]
    severities: tuple[float, ...]
    total: float

    def __post_init__(self) -> None:
        n = len(self.demands)
        if n == 0:
            raise InputError("empty problem: at least one hospital required")
        if len(self.severities) != n:
            raise InputError(
                f"length mismatch: demands and severities must align (got {n}, {len(self.severities)})"
            )
        for label, vec in (("demand", self.demands), ("severity", self.severities)):
            for i, v in enumerate(vec):
                if not math.isfinite(v) or v <= 0.0:
                    raise InputError(f"{label} must be > 0 (index {i}, got {v!r})")
        if not math.isfinite(self.total) or self.total <= 0.0:
            raise InputError(f"total supply must be > 0 (got {self.total!r})")


def quad_coefficients(problem: AllocationProblem | DistrictProblem) -> tuple[np.ndarray, np.ndarray]:
    """Return the (a, b) vectors of the quadratic objective for ``problem``."""
    if isinstance(problem, AllocationProblem):
        D = np.asarray(problem.demands, dtype=float)
        A0 = np.asarray(problem.ideals, dtype=float)
        sev = np.asarray(problem.severities, dtype=float)
        T = float(problem.total)
        k = sev * (1.0 / D**2 + 1.0 / A0**2)
        g = sev * (1.0 / D + 1.0 / A0)
        return k * T * T, g * T
    if isinstance(problem, DistrictProblem):
        D = np.asarray(problem.demands, dtype=float)
        sev = np.asarray(problem.severities, dtype=float)
        T = float(problem.total)
        return sev * T * T / D**2, sev * T / D
    raise TypeError(f"unsupported problem type: {type(problem).__name__}")


def _closed_form(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    inv_a = 1.0 / a
    lam = 2.0 * (float(b @ inv_a) - 1.0) / float(inv_a.sum())
    return (b - lam / 2.0) * inv_a, lam


def _solve_nonnegative(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float, frozenset[int]]:
    """Closed form plus the clamp-and-resolve sweep for alpha >= 0."""
    n = a.size
    if n == 1:
        # constraint fully determines the share; keep it exact
        return np.ones(1), float(2.0 * (b[0] - a[0])), frozenset()
    free = np.ones(n, dtype=bool)
    alpha = np.zeros(n)
    lam = 0.0
    for _ in range(n):
        alpha_free, lam = _closed_form(a[free], b[free])
        alpha = np.zeros(n)
        alpha[free] = alpha_free
        negative = alpha < 0.0
        if not negative.any():
            break
        free &= ~negative
        if not free.any():
            raise SolverError("no feasible share vector: every coordinate clamped")
    clamped = frozenset(int(i) for i in np.flatnonzero(~free))
    return alpha, lam, clamped


def _finish(problem, alpha: np.ndarray, lam: float, clamped: frozenset[int]) -> SolverResult:
    total = float(problem.total)
    gap = abs(float(alpha.sum()) - 1.0)
    if gap > CONSTRAINT_TOL:
        raise SolverError(f"share vector drifted off the constraint by {gap:.3e}")
    return SolverResult(
        fractions=tuple(float(x) for x in alpha),
        multiplier=lam,
        amounts=tuple(float(x * total) for x in alpha),
        active_set=clamped,
    )


def solve_center_allocation(problem: AllocationProblem) -> SolverResult:
    """Solve the centre-level share problem (demand and ideal deviations)."""
    a, b = quad_coefficients(problem)
    alpha, lam, clamped = _solve_nonnegative(a, b)
    return _finish(problem, alpha, lam, clamped)


def solve_district_allocation(
    demands: tuple[float, ...] | list[float],
    severities: tuple[float, ...] | list[float] | None,
    total: float,
) -> SolverResult:
    """Solve the demand-only district share problem.

    ``severities`` may be None for uniform weighting.  When the demands sum
    exactly to the supply the shares come out proportional to demand, i.e.
    every hospital receives exactly what it asked for.
    """
    if severities is None:
        severities = [1.0] * len(demands)
    problem = DistrictProblem(tuple(float(d) for d in demands),
                              tuple(float(s) for s in severities),
                              float(total))
    a, b = quad_coefficients(problem)
    alpha, lam, clamped = _solve_nonnegative(a, b)
    return _finish(problem, alpha, lam, clamped)


def lagrangian_residual(problem: AllocationProblem | DistrictProblem,
                        result: SolverResult) -> float:
    """Stationarity self-check for a solved problem.

    Returns max over free coordinates of |dL/dalpha_i| plus the constraint
    gap |sum(alpha) - 1|.  Near zero for a correct solve; clearly positive
    for a perturbed one.
    """
    a, b = quad_coefficients(problem)
    alpha = np.asarray(result.fractions, dtype=float)
    grad = 2.0 * a * alpha - 2.0 * b + result.multiplier
    free = np.ones(a.size, dtype=bool)
    for i in result.active_set:
        free[i] = False
    stationarity = float(np.abs(grad[free]).max()) if free.any() else 0.0
    return stationarity + abs(float(alpha.sum()) - 1.0)


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x : sum x = 1, x >= 0} (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u * idx > css)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def oracle_solve(problem: AllocationProblem | DistrictProblem,
                 max_steps: int = _ORACLE_MAX_STEPS,
                 tolerance: float = _ORACLE_TOL) -> SolverResult:
    """Independent iterative solve of the same problem.

    Projected gradient descent on the quadratic over the simplex, with
    Nesterov momentum for strongly convex objectives and an adaptive
    restart.  The starting point is the projection of the per-coordinate
    unconstrained minimiser b/a.  ``tolerance`` bounds the infinity norm of
    the projected-gradient step, measured in share units.

    Exists purely as a cross-check for the closed form; raises
    ConvergenceError (carrying the last iterate) if ``max_steps`` is hit.
    """
    a, b = quad_coefficients(problem)
    n = a.size
    total = float(problem.total)
    if n == 1:
        return SolverResult(fractions=(1.0,), multiplier=float(2 * b[0] - 2 * a[0]),
                            amounts=(total,), active_set=frozenset())

    a_max = float(a.max())
    step = 1.0 / (2.0 * a_max)
    q = float(a.min()) / a_max                     # inverse condition number
    beta = (1.0 - math.sqrt(q)) / (1.0 + math.sqrt(q))

    x = _project_simplex(b / a)
    y = x.copy()
    residual = math.inf
    for _ in range(max_steps):
        grad_y = 2.0 * (a * y - b)
        x_new = _project_simplex(y - step * grad_y)
        diff = x_new - x
        residual = float(np.abs(diff).max())
        if residual <= tolerance:
            # momentum can make iterate change tiny mid-flight; accept only
            # if a plain projected-gradient step from x_new also stalls
            grad_x = 2.0 * (a * x_new - b)
            settled = _project_simplex(x_new - step * grad_x)
            if float(np.abs(settled - x_new).max()) <= tolerance:
                x = x_new
                break
        # restart momentum when it points against the direction of progress
        if float(grad_y @ diff) > 0.0:
            y = x_new.copy()
        else:
            y = x_new + beta * diff
        x = x_new
    else:
        raise ConvergenceError(
            f"oracle did not converge within {max_steps} steps (residual {residual:.3e})",
            iterate=x, residual=residual,
        )

    support = x > 0.0
    if support.any():
        grad = 2.0 * (a[support] * x[support] - b[support])
        lam = -float(grad.mean())
    else:  # pragma: no cover - projection always leaves support
        lam = 0.0
    clamped = frozenset(int(i) for i in np.flatnonzero(~support))
    x = x / x.sum()  # polish the constraint to machine precision
    return SolverResult(
        fractions=tuple(float(v) for v in x),
        multiplier=lam,
        amounts=tuple(float(v * total) for v in x),
        active_set=clamped,
    )
