"""HTTP service around the pipeline: scenario CRUD plus solve/forecast.

Scenarios live in a single JSON file written atomically; concurrent edits
are fenced with a per-scenario revision number surfaced as an ETag and
checked against If-Match on writes.  Solving never mutates stored state.
"""
from __future__ import annotations

import json
import os
import tempfile
import threading
import uuid
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .datasets import case_study_predicted, case_study_scenario, case_study_stage2_ideals
from .forecast import forecast_scenario
from .model import (
    InputError,
    Scenario,
    SolverError,
    plan_to_dict,
    scenario_from_dict,
    scenario_to_dict,
    validate_scenario,
)
from .pipeline import PipelineError, run_pipeline

API = "/api/v1"
STORE_SCHEMA = "alloc-store/1"


class StaleRevision(Exception):
    def __init__(self, expected: int, actual: int):
        super().__init__(f"revision mismatch: expected {expected}, stored {actual}")
        self.actual = actual


class ScenarioStore:
    """Single-file scenario storage with optimistic concurrency.

    Layout: {"schema": ..., "scenarios": {id: {"revision": n, "scenario": {...}}}}.
    Writes go to a temp file in the same directory, then os.replace.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as f:
                self._data = json.load(f)
            if self._data.get("schema") != STORE_SCHEMA:
                raise InputError(
                    f"store schema mismatch in {self.path}: "
                    f"expected {STORE_SCHEMA!r}, got {self._data.get('schema')!r}"
                )
        else:
            self._data = {"schema": STORE_SCHEMA, "scenarios": {}}

    def _flush(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.path.parent, prefix=self.path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                json.dump(self._data, f, indent=2)
                f.write("\n")
            os.replace(tmp, self.path)
        except BaseException:
            try:
                os.unlink(tmp)
            except FileNotFoundError:
                pass
            raise

    def create(self, scenario: dict[str, Any]) -> tuple[str, int]:
        with self._lock:
            sid = uuid.uuid4().hex[:12]
            scenario = dict(scenario, id=sid)
            self._data["scenarios"][sid] = {"revision": 1, "scenario": scenario}
            self._flush()
            return sid, 1

    def get(self, sid: str) -> tuple[dict[str, Any], int]:
        with self._lock:
            entry = self._data["scenarios"].get(sid)
            if entry is None:
                raise KeyError(sid)
            return json.loads(json.dumps(entry["scenario"])), entry["revision"]

    def list(self) -> list[tuple[dict[str, Any], int]]:
        with self._lock:
            return [
                (json.loads(json.dumps(e["scenario"])), e["revision"])
                for e in self._data["scenarios"].values()
            ]

    def update(self, sid: str, scenario: dict[str, Any],
               expected_revision: int | None = None) -> int:
        with self._lock:
            entry = self._data["scenarios"].get(sid)
            if entry is None:
                raise KeyError(sid)
            if expected_revision is not None and entry["revision"] != expected_revision:
                raise StaleRevision(expected_revision, entry["revision"])
            entry["revision"] += 1
            entry["scenario"] = dict(scenario, id=sid)
            self._flush()
            return entry["revision"]

    def delete(self, sid: str) -> None:
        with self._lock:
            if sid not in self._data["scenarios"]:
                raise KeyError(sid)
            del self._data["scenarios"][sid]
            self._flush()


def _error(status: int, message: str, **extra: Any) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message, **extra})


def _parse_if_match(request: Request) -> int | None:
    raw = request.headers.get("if-match")
    if raw is None:
        return None
    token = raw.strip().strip('"')
    if token.startswith("W/"):
        token = token[2:].strip().strip('"')
    try:
        return int(token)
    except ValueError:
        raise InputError(f"malformed If-Match header: {raw!r}")


def _scenario_body(payload: dict[str, Any]) -> tuple[Scenario, dict[str, Any]]:
    scenario = scenario_from_dict(payload)
    violations = validate_scenario(scenario)
    if violations:
        raise _ValidationFailed(violations)
    return scenario, scenario_to_dict(scenario)


class _ValidationFailed(Exception):
    def __init__(self, violations):
        super().__init__("scenario validation failed")
        self.violations = violations


def _violations_payload(violations) -> list[dict[str, str]]:
    return [{"region": v.region, "field": v.field, "message": v.message}
            for v in violations]


def create_app(store_path: str | Path | None = None,
               frontend_dir: str | Path | None = None) -> FastAPI:
    """Build the service; ``store_path`` defaults to ./scenarios.json.

    ``frontend_dir`` (or the HIERALLOC_FRONTEND env var) mounts a built
    static UI at the web root.
    """
    store = ScenarioStore(store_path or "scenarios.json")
    app = FastAPI(title="hieralloc", version="1")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
        expose_headers=["ETag"],
    )
    app.state.store = store

    def scenario_response(body: dict[str, Any], revision: int,
                          status: int = 200) -> JSONResponse:
        return JSONResponse(
            status_code=status,
            content=dict(body, revision=revision),
            headers={"ETag": f'"{revision}"'},
        )

    @app.exception_handler(InputError)
    async def _input_error(request: Request, exc: InputError):
        return _error(400, str(exc))

    @app.exception_handler(_ValidationFailed)
    async def _validation_failed(request: Request, exc: _ValidationFailed):
        return _error(400, "scenario validation failed",
                      violations=_violations_payload(exc.violations))

    @app.post(API + "/scenarios")
    async def create_scenario(request: Request):
        payload = await _json_body(request)
        _, body = _scenario_body(payload)
        sid, revision = store.create(body)
        body["id"] = sid
        return scenario_response(body, revision, status=201)

    @app.get(API + "/scenarios")
    async def list_scenarios():
        items = [
            {
                "id": body["id"],
                "name": body["name"],
                "resource_name": body["resource_name"],
                "supply": body["supply"],
                "region_count": len(body["regions"]),
                "revision": revision,
            }
            for body, revision in store.list()
        ]
        return {"scenarios": items}

    @app.get(API + "/scenarios/{sid}")
    async def get_scenario(sid: str):
        try:
            body, revision = store.get(sid)
        except KeyError:
            return _error(404, f"no scenario {sid!r}")
        return scenario_response(body, revision)

    @app.patch(API + "/scenarios/{sid}")
    async def patch_scenario(sid: str, request: Request):
        payload = await _json_body(request)
        expected = _parse_if_match(request)
        try:
            body, revision = store.get(sid)
        except KeyError:
            return _error(404, f"no scenario {sid!r}")
        if expected is not None and expected != revision:
            return _error(409, f"stale revision: you have {expected}, stored is {revision}",
                          revision=revision)

        unknown = set(payload) - {"supply", "regions", "name", "config"}
        if unknown:
            return _error(400, f"unknown fields in patch: {sorted(unknown)}")
        if "supply" in payload:
            body["supply"] = payload["supply"]
        if "name" in payload:
            body["name"] = payload["name"]
        if "config" in payload:
            cfg = dict(body.get("config") or {})
            if not isinstance(payload["config"], dict):
                return _error(400, "config patch must be an object")
            cfg.update(payload["config"])
            body["config"] = cfg
        if "regions" in payload:
            by_name = {r["name"]: r for r in body["regions"]}
            if not isinstance(payload["regions"], list):
                return _error(400, "regions patch must be an array")
            for patch in payload["regions"]:
                name = patch.get("name") if isinstance(patch, dict) else None
                if name not in by_name:
                    return _error(400, f"unknown region {name!r}")
                bad = set(patch) - {"name", "demand", "severity"}
                if bad:
                    return _error(400, f"unknown region fields for {name!r}: {sorted(bad)}")
                if "demand" in patch:
                    by_name[name]["demand"] = patch["demand"]
                if "severity" in patch:
                    by_name[name]["severity"] = patch["severity"]

        _, validated = _scenario_body(dict(body, id=sid))
        try:
            new_revision = store.update(sid, validated, expected_revision=revision)
        except StaleRevision as exc:
            return _error(409, str(exc), revision=exc.actual)
        except KeyError:
            return _error(404, f"no scenario {sid!r}")
        return scenario_response(validated, new_revision)

    @app.delete(API + "/scenarios/{sid}", status_code=204)
    async def delete_scenario(sid: str):
        try:
            store.delete(sid)
        except KeyError:
            return _error(404, f"no scenario {sid!r}")
        return Response(status_code=204)

    @app.post(API + "/scenarios/{sid}/solve")
    async def solve_scenario(sid: str, request: Request):
        payload = await _json_body(request, default={})
        try:
            body, revision = store.get(sid)
        except KeyError:
            return _error(404, f"no scenario {sid!r}")
        level = payload.get("level", "center")
        if level not in ("center", "district", "proportional"):
            return _error(400, f"unknown level {level!r}")
        redistribution = payload.get("redistribution")
        if redistribution not in (None, "proportional", "equal"):
            return _error(400, f"unknown redistribution policy {redistribution!r}")
        use_fixture = bool(payload.get("use_fixture_predicted", False))
        scenario = scenario_from_dict(body)
        predicted = case_study_predicted() if use_fixture else None
        stage2 = case_study_stage2_ideals() if use_fixture else None
        try:
            plan = run_pipeline(scenario, level=level, predicted=predicted,
                                stage2_ideals=stage2, redistribution=redistribution)
        except PipelineError as exc:
            return _error(422, str(exc.cause), stage=exc.stage)
        except (InputError, SolverError) as exc:
            return _error(422, str(exc), stage="solve")
        return {"scenario_id": sid, "revision": revision, "plan": plan_to_dict(plan)}

    @app.get(API + "/scenarios/{sid}/forecast")
    async def forecast_endpoint(sid: str, horizon: int | None = None):
        try:
            body, revision = store.get(sid)
        except KeyError:
            return _error(404, f"no scenario {sid!r}")
        scenario = scenario_from_dict(body)
        try:
            results = forecast_scenario(scenario, horizon=horizon)
        except InputError as exc:
            short = [r.name for r in scenario.regions if len(r.history) < 2]
            return _error(422, str(exc), regions=short)
        return {
            "scenario_id": sid,
            "revision": revision,
            "horizon": horizon or scenario.config.horizon,
            "forecasts": [
                {
                    "region": r.region,
                    "fitted_level": r.fitted_level,
                    "fitted_trend": r.fitted_trend,
                    "predicted": list(r.predicted),
                    "horizon_max": r.horizon_max,
                }
                for r in results
            ],
        }

    @app.get(API + "/fixtures/case-study")
    async def fixture_case_study():
        scenario = case_study_scenario()
        return scenario_to_dict(scenario)

    front = frontend_dir or os.environ.get("HIERALLOC_FRONTEND")
    if front and Path(front).is_dir():
        app.mount("/", StaticFiles(directory=str(front), html=True), name="ui")
    return app


async def _json_body(request: Request, default: Any = None) -> dict[str, Any]:
    raw = await request.body()
    if not raw:
        if default is not None:
            return default
        raise InputError("request body must be JSON")
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InputError(f"request body is not valid JSON: {exc}")
    if not isinstance(payload, dict):
        raise InputError("request body must be a JSON object")
    return payload


app = create_app()
