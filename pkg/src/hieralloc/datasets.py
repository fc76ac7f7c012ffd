"""Accessors for the bundled 2021-04-20 oxygen case study.

Four CSVs ship with the package: the state demand table, a 60-day active
case history per state, the predicted peaks used in the published run, and
the fixed stage-2 share table that run re-optimised against.
"""
from __future__ import annotations

from importlib.resources import as_file, files

from .ingest import HistorySeries, load_case_history, load_demands, load_ideals, load_predicted
from .model import RegionRecord, Scenario, ScenarioConfig

CASE_STUDY_DATE = "2021-04-20"
CASE_STUDY_SUPPLY = 5000.0

_DATA = files("hieralloc") / "data"


def _path(name: str):
    return _DATA / f"{name}_{CASE_STUDY_DATE}.csv"


def case_study_demands() -> list[tuple[str, float, float]]:
    with as_file(_path("oxygen_demand")) as p:
        return load_demands(p)


def case_study_history() -> dict[str, HistorySeries]:
    with as_file(_path("case_history")) as p:
        return load_case_history(p)


def case_study_predicted() -> dict[str, float]:
    with as_file(_path("predicted")) as p:
        return load_predicted(p)


def case_study_stage2_ideals() -> dict[str, float]:
    with as_file(_path("stage2_shares")) as p:
        return load_ideals(p)


def case_study_scenario(config: ScenarioConfig | None = None,
                        with_history: bool = True) -> Scenario:
    """The full bundled scenario: 18 states, supply 5000 MT."""
    history = case_study_history() if with_history else {}
    regions = tuple(
        RegionRecord(name=region, demand=demand, severity=severity,
                     history=history.get(region, ()))
        for region, demand, severity in case_study_demands()
    )
    return Scenario(
        name=f"oxygen {CASE_STUDY_DATE}",
        resource_name="oxygen",
        supply=CASE_STUDY_SUPPLY,
        regions=regions,
        config=config or ScenarioConfig(),
    )
