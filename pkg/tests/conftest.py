"""Shared fixtures: the bundled case-study figures used across the suite.

The tuples below mirror the bundled CSV fixtures (demand table, predicted
peaks, stage-2 share table) plus the published reference outputs the
acceptance tests compare against.
"""
from __future__ import annotations

import pytest

from hieralloc.datasets import (
    CASE_STUDY_SUPPLY,
    case_study_predicted,
    case_study_scenario,
    case_study_stage2_ideals,
)

# region, demand_mt, active on 2021-04-20, predicted peak,
# reference weight %, reference ideal allocation MT
CASE_ROWS = [
    ("Maharashtra", 1500.0, 683856, 709082.0, 24.15, 1207.5),
    ("Gujarat", 1000.0, 76500, 148436.0, 5.06, 253.0),
    ("Karnataka", 300.0, 159158, 285307.0, 9.71, 485.5),
    ("Madhya Pradesh", 445.0, 78271, 136516.0, 4.65, 232.5),
    ("Delhi", 700.0, 85571, 157031.0, 5.35, 267.5),
    ("Haryana", 180.0, 49772, 92531.0, 3.15, 157.5),
    ("Uttar Pradesh", 800.0, 223544, 479879.0, 16.34, 817.0),
    ("Tamil Nadu", 200.0, 79804, 127336.0, 4.34, 217.0),
    ("Kerala", 89.0, 118669, 221811.0, 7.55, 377.5),
    ("Chhattisgarh", 215.0, 125688, 147839.0, 5.03, 251.5),
    ("Rajasthan", 205.0, 85571, 158795.0, 5.41, 270.5),
    ("Telangana", 360.0, 42853, 75187.0, 2.56, 128.0),
    ("Andhra Pradesh", 440.0, 53889, 99834.0, 3.40, 170.0),
    ("Uttarakhand", 103.0, 21014, 44727.0, 1.52, 76.0),
    ("Jammu and Kashmir", 12.0, 13470, 18414.0, 0.63, 31.5),
    ("Goa", 11.0, 8241, 13428.0, 0.48, 24.0),
    ("Chandigarh", 20.0, 3959, 4259.0, 0.14, 7.0),
    ("Himachal Pradesh", 15.0, 10029, 15676.0, 0.53, 26.5),
]

REGIONS = [row[0] for row in CASE_ROWS]
DEMANDS = {row[0]: row[1] for row in CASE_ROWS}
ACTIVES = {row[0]: row[2] for row in CASE_ROWS}
PREDICTED = {row[0]: row[3] for row in CASE_ROWS}
REF_WEIGHTS = {row[0]: row[4] for row in CASE_ROWS}
REF_IDEALS = {row[0]: row[5] for row in CASE_ROWS}

TOTAL_SUPPLY = CASE_STUDY_SUPPLY  # 5000.0
TOTAL_DEMAND = 6595.0

# the nine regions whose demand exceeded the ideal share, with the fixed
# stage-2 shares and the reference re-optimised amounts
STAGE2_ROWS = [
    ("Maharashtra", 1511.55, 1326.0),
    ("Gujarat", 316.56, 364.38),
    ("Madhya Pradesh", 291.02, 327.74),
    ("Delhi", 334.85, 388.39),
    ("Haryana", 197.38, 185.09),
    ("Telangana", 160.17, 189.8),
    ("Andhra Pradesh", 212.82, 250.08),
    ("Uttarakhand", 95.22, 98.03),
    ("Chandigarh", 33.42, 23.49),
]
STAGE2_IDEALS = {row[0]: row[1] for row in STAGE2_ROWS}
STAGE2_AMOUNTS = {row[0]: row[2] for row in STAGE2_ROWS}
REMAINING_SUPPLY = 3153.0
BALANCE_DEMAND = 4748.0
SATISFIED_REGIONS = sorted(set(REGIONS) - set(STAGE2_IDEALS))

# reference final allocation after capping and redistribution
FINAL_ALLOCATION = {
    "Maharashtra": 1330.44,
    "Gujarat": 365.23,
    "Karnataka": 300.0,
    "Madhya Pradesh": 328.59,
    "Delhi": 389.37,
    "Haryana": 180.0,
    "Uttar Pradesh": 800.0,
    "Tamil Nadu": 200.0,
    "Kerala": 89.0,
    "Chhattisgarh": 215.0,
    "Rajasthan": 205.0,
    "Telangana": 190.27,
    "Andhra Pradesh": 250.70,
    "Uttarakhand": 98.30,
    "Jammu and Kashmir": 12.0,
    "Goa": 11.0,
    "Chandigarh": 20.0,
    "Himachal Pradesh": 15.0,
}


@pytest.fixture(scope="session")
def case_scenario():
    return case_study_scenario()

@pytest.fixture(scope="session")
def case_scenario_bare():
    """Same scenario without histories (pipeline runs that bypass the forecaster)."""
    return case_study_scenario(with_history=False)


@pytest.fixture(scope="session")
def fixture_predicted():
    return case_study_predicted()


@pytest.fixture(scope="session")
def fixture_stage2():
    return case_study_stage2_ideals()


@pytest.fixture()
def data_dir(tmp_path):
    return tmp_path
