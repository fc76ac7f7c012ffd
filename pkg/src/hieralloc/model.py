"""Core value types for the allocation engine.

Everything in here is a frozen dataclass plus a handful of validation and
serialisation helpers.  The types deliberately carry no behaviour beyond
construction-time invariants; the solver and pipeline modules own the math.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from datetime import date
from typing import Any, Iterable, Mapping

PLAN_SCHEMA = "alloc-plan/1"

REDISTRIBUTION_POLICIES = ("proportional", "equal")
DISTRICT_STRATEGIES = ("proportional", "center")
ALLOCATION_LEVELS = ("center", "district", "proportional")


class InputError(ValueError):
    """Raised for malformed or out-of-range user input."""


class SolverError(RuntimeError):
    """Raised when an allocation problem cannot be solved as posed."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Tunable knobs for a scenario run; defaults match the case study."""

    horizon: int = 7
    smoothing_level: float = 0.8
    smoothing_trend: float = 0.2
    redistribution: str = "proportional"
    district_strategy: str = "proportional"
    prepass_recheck: bool = False
    conservation_tol: float = 1e-6


@dataclass(frozen=True)
class RegionRecord:
    """One allocation unit (state, district or hospital).

    ``history`` is a tuple of ``(date, active_count)`` pairs, ascending by
    date.  Severity is the priority factor applied to the unit's deviation
    terms; 1.0 means no preferential weighting.
    """

    name: str
    demand: float
    severity: float = 1.0
    history: tuple[tuple[date, int], ...] = ()


@dataclass(frozen=True)
class Scenario:
    """A complete allocation question: regions, supply and configuration."""

    name: str
    resource_name: str
    supply: float
    regions: tuple[RegionRecord, ...]
    config: ScenarioConfig = field(default_factory=ScenarioConfig)
    id: str | None = None

    def region(self, name: str) -> RegionRecord:
        for rec in self.regions:
            if rec.name == name:
                return rec
        raise KeyError(name)


@dataclass(frozen=True)
class Violation:
    """One validation finding: which region (or '' for scenario-level),
    which field, and what is wrong."""

    region: str
    field: str
    message: str

    def __str__(self) -> str:
        where = f"{self.region}.{self.field}" if self.region else self.field
        return f"{where}: {self.message}"


@dataclass(frozen=True)
class AllocationProblem:
    """Inputs for one centre-level constrained allocation.

    All vectors are index-aligned.  Construction rejects anything the solver
    cannot handle: length mismatches, non-positive demands/ideals/severities,
    or a non-positive total supply.
    """

    demands: tuple[float, ...]
    ideals: tuple[float, ...]
    severities: tuple[float, ...]
    total: float

    def __post_init__(self) -> None:
        n = len(self.demands)
        if n == 0:
            raise InputError("empty problem: at least one region required")
        if len(self.ideals) != n or len(self.severities) != n:
            raise InputError(
                "length mismatch: demands, ideals and severities must align "
                f"(got {n}, {len(self.ideals)}, {len(self.severities)})"
            )
        for label, vec in (("demand", self.demands), ("ideal", self.ideals),
                           ("severity", self.severities)):
            for i, v in enumerate(vec):
                if not math.isfinite(v) or v <= 0.0:
                    raise InputError(f"{label} must be > 0 (index {i}, got {v!r})")
        if not math.isfinite(self.total) or self.total <= 0.0:
            raise InputError(f"total supply must be > 0 (got {self.total!r})")

    @property
    def size(self) -> int:
        return len(self.demands)


@dataclass(frozen=True)
class SolverResult:
    """Solution of one allocation problem.

    ``fractions`` are the shares of the total (sum to 1), ``amounts`` the
    corresponding quantities, ``multiplier`` the equality-constraint
    multiplier, and ``active_set`` the indices clamped at zero by the
    nonnegativity pass.
    """

    fractions: tuple[float, ...]
    multiplier: float
    amounts: tuple[float, ...]
    active_set: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        if len(self.fractions) != len(self.amounts):
            raise InputError("length mismatch between fractions and amounts")
        total = sum(self.fractions)
        if abs(total - 1.0) > 1e-9:
            raise InputError(f"fractions must sum to 1 (got {total!r})")
        for i in self.active_set:
            if not 0 <= i < len(self.fractions):
                raise InputError(f"active_set index {i} out of range")


@dataclass(frozen=True)
class PrepassStage:
    """Outcome of the full-demand pre-pass: who got demand outright,
    what supply remains, and the demand still on the table."""

    satisfied: dict[str, float]
    remaining_supply: float
    balance_demand: float


@dataclass(frozen=True)
class OptimizedStage:
    """Solver output for the post-pre-pass regions, with the ideals the
    solve used and its KKT residual for diagnostics."""

    regions: tuple[str, ...]
    ideals: dict[str, float]
    result: SolverResult
    kkt_residual: float


@dataclass(frozen=True)
class AllocationPlan:
    """Full waterfall output of one allocation run.

    Stages that a given level does not perform are ``None`` (district and
    proportional runs have no pre-pass).  ``stage_final`` always holds every
    region of the scenario; regions excluded from the optimisation (zero
    demand) appear with 0.0.  Conservation: sum(stage_final) + surplus equals
    ``conservation_total`` within the scenario tolerance.
    """

    resource: str
    level: str
    redistribution: str
    conservation_total: float
    region_names: tuple[str, ...]
    demands: dict[str, float]
    stage_ideal: dict[str, float] | None
    stage_prepass: PrepassStage | None
    stage_optimized: OptimizedStage | None
    stage_final: dict[str, float]
    surplus: float = 0.0


def validate_scenario(scenario: Scenario) -> list[Violation]:
    """Check every invariant a scenario must satisfy before a run.

    Returns an empty list when the scenario is well-formed; otherwise one
    Violation per finding, naming the offending region and field.
    """
    out: list[Violation] = []
    if not scenario.name.strip():
        out.append(Violation("", "name", "must not be empty"))
    if not math.isfinite(scenario.supply) or scenario.supply <= 0:
        out.append(Violation("", "supply", f"must be > 0 (got {scenario.supply!r})"))
    if not scenario.regions:
        out.append(Violation("", "regions", "at least one region required"))

    cfg = scenario.config
    if cfg.horizon < 1:
        out.append(Violation("", "config.horizon", f"must be >= 1 (got {cfg.horizon})"))
    for fname, value in (("smoothing_level", cfg.smoothing_level),
                         ("smoothing_trend", cfg.smoothing_trend)):
        if not 0.0 < value <= 1.0:
            out.append(Violation("", f"config.{fname}", f"must be in (0, 1] (got {value!r})"))
    if cfg.redistribution not in REDISTRIBUTION_POLICIES:
        out.append(Violation("", "config.redistribution",
                             f"must be one of {REDISTRIBUTION_POLICIES} (got {cfg.redistribution!r})"))
    if cfg.district_strategy not in DISTRICT_STRATEGIES:
        out.append(Violation("", "config.district_strategy",
                             f"must be one of {DISTRICT_STRATEGIES} (got {cfg.district_strategy!r})"))
    if cfg.conservation_tol <= 0:
        out.append(Violation("", "config.conservation_tol", "must be > 0"))

    seen: set[str] = set()
    for rec in scenario.regions:
        if not rec.name.strip():
            out.append(Violation(rec.name, "name", "must not be empty"))
        if rec.name in seen:
            out.append(Violation(rec.name, "name", "duplicate region name"))
        seen.add(rec.name)
        if not math.isfinite(rec.demand) or rec.demand < 0:
            out.append(Violation(rec.name, "demand", f"must be >= 0 (got {rec.demand!r})"))
        if not math.isfinite(rec.severity) or rec.severity <= 0:
            out.append(Violation(rec.name, "severity", f"must be > 0 (got {rec.severity!r})"))
        prev: date | None = None
        for d, count in rec.history:
            if prev is not None and d <= prev:
                out.append(Violation(rec.name, "history",
                                     f"dates must be strictly increasing (at {d.isoformat()})"))
                break
            prev = d
        for d, count in rec.history:
            if count < 0:
                out.append(Violation(rec.name, "history",
                                     f"active count must be >= 0 (at {d.isoformat()}, got {count})"))
                break
    return out


# ---------------------------------------------------------------------------
# serialisation


def scenario_to_dict(scenario: Scenario) -> dict[str, Any]:
    return {
        "name": scenario.name,
        "resource_name": scenario.resource_name,
        "supply": scenario.supply,
        "regions": [
            {
                "name": r.name,
                "demand": r.demand,
                "severity": r.severity,
                "history": [{"date": d.isoformat(), "active": c} for d, c in r.history],
            }
            for r in scenario.regions
        ],
        "config": asdict(scenario.config),
        "id": scenario.id,
    }


def scenario_from_dict(payload: Mapping[str, Any]) -> Scenario:
    """Rebuild a Scenario from its dict form; raises InputError on shape
    problems (unknown config keys, bad dates, wrong types)."""
    if not isinstance(payload, Mapping):
        raise InputError("scenario payload must be an object")
    try:
        regions = []
        for raw in payload.get("regions", []):
            history = tuple(
                (date.fromisoformat(h["date"]), int(h["active"]))
                for h in raw.get("history", [])
            )
            regions.append(RegionRecord(
                name=str(raw["name"]),
                demand=float(raw["demand"]),
                severity=float(raw.get("severity", 1.0)),
                history=history,
            ))
        cfg_raw = dict(payload.get("config") or {})
        known = set(ScenarioConfig.__dataclass_fields__)
        unknown = set(cfg_raw) - known
        if unknown:
            raise InputError(f"unknown config fields: {sorted(unknown)}")
        config = ScenarioConfig(**cfg_raw)
        return Scenario(
            name=str(payload.get("name", "")),
            resource_name=str(payload.get("resource_name", "resource")),
            supply=float(payload["supply"]),
            regions=tuple(regions),
            config=config,
            id=payload.get("id"),
        )
    except InputError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed scenario payload: {exc}") from exc


def plan_to_dict(plan: AllocationPlan) -> dict[str, Any]:
    """Serialise a plan to the stable ``alloc-plan/1`` JSON shape.

    Key order is fixed by construction so identical plans serialise to
    identical bytes.
    """
    optimized = None
    if plan.stage_optimized is not None:
        st = plan.stage_optimized
        res = st.result
        optimized = {
            "regions": list(st.regions),
            "ideals": {r: st.ideals[r] for r in st.regions},
            "fractions": {r: res.fractions[i] for i, r in enumerate(st.regions)},
            "amounts": {r: res.amounts[i] for i, r in enumerate(st.regions)},
            "multiplier": res.multiplier,
            "active_set": sorted(st.regions[i] for i in res.active_set),
            "kkt_residual": st.kkt_residual,
        }
    prepass = None
    if plan.stage_prepass is not None:
        prepass = {
            "satisfied": dict(plan.stage_prepass.satisfied),
            "remaining_supply": plan.stage_prepass.remaining_supply,
            "balance_demand": plan.stage_prepass.balance_demand,
        }
    return {
        "schema": PLAN_SCHEMA,
        "resource": plan.resource,
        "level": plan.level,
        "redistribution": plan.redistribution,
        "conservation_total": plan.conservation_total,
        "regions": list(plan.region_names),
        "demands": {r: plan.demands[r] for r in plan.region_names},
        "stage_ideal": dict(plan.stage_ideal) if plan.stage_ideal is not None else None,
        "stage_prepass": prepass,
        "stage_optimized": optimized,
        "stage_final": {r: plan.stage_final[r] for r in plan.region_names},
        "surplus": plan.surplus,
    }


def plan_from_dict(payload: Mapping[str, Any]) -> AllocationPlan:
    """Parse a plan dict back into an AllocationPlan, validating the schema
    tag and required keys."""
    if not isinstance(payload, Mapping):
        raise InputError("plan payload must be an object")
    schema = payload.get("schema")
    if schema != PLAN_SCHEMA:
        raise InputError(f"plan schema mismatch: expected {PLAN_SCHEMA!r}, got {schema!r}")
    for key in ("regions", "demands", "stage_final", "conservation_total", "surplus",
                "level", "redistribution", "resource"):
        if key not in payload:
            raise InputError(f"plan schema mismatch: missing {key!r}")
    try:
        prepass = None
        if payload.get("stage_prepass") is not None:
            pp = payload["stage_prepass"]
            prepass = PrepassStage(
                satisfied={str(k): float(v) for k, v in pp["satisfied"].items()},
                remaining_supply=float(pp["remaining_supply"]),
                balance_demand=float(pp["balance_demand"]),
            )
        optimized = None
        if payload.get("stage_optimized") is not None:
            st = payload["stage_optimized"]
            regions = tuple(str(r) for r in st["regions"])
            index = {r: i for i, r in enumerate(regions)}
            result = SolverResult(
                fractions=tuple(float(st["fractions"][r]) for r in regions),
                multiplier=float(st["multiplier"]),
                amounts=tuple(float(st["amounts"][r]) for r in regions),
                active_set=frozenset(index[r] for r in st["active_set"]),
            )
            optimized = OptimizedStage(
                regions=regions,
                ideals={r: float(st["ideals"][r]) for r in regions},
                result=result,
                kkt_residual=float(st["kkt_residual"]),
            )
        return AllocationPlan(
            resource=str(payload["resource"]),
            level=str(payload["level"]),
            redistribution=str(payload["redistribution"]),
            conservation_total=float(payload["conservation_total"]),
            region_names=tuple(str(r) for r in payload["regions"]),
            demands={str(k): float(v) for k, v in payload["demands"].items()},
            stage_ideal=({str(k): float(v) for k, v in payload["stage_ideal"].items()}
                         if payload.get("stage_ideal") is not None else None),
            stage_prepass=prepass,
            stage_optimized=optimized,
            stage_final={str(k): float(v) for k, v in payload["stage_final"].items()},
            surplus=float(payload["surplus"]),
        )
    except InputError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed plan payload: {exc}") from exc


def check_conservation(plan: AllocationPlan, tol: float = 1e-6) -> float:
    """Return the conservation gap |sum(final) + surplus - total|; raises
    SolverError if it exceeds ``tol``."""
    gap = abs(sum(plan.stage_final.values()) + plan.surplus - plan.conservation_total)
    if gap > tol:
        raise SolverError(
            f"conservation violated: allocated + surplus differs from supply by {gap:.3e}"
        )
    return gap


def ordered_regions(records: Iterable[RegionRecord]) -> tuple[str, ...]:
    return tuple(r.name for r in records)
