"""Command line front door: forecast, allocate, report, serve.

Exit codes: 0 success, 2 malformed input, 3 a well-formed problem the
solver cannot honour.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .forecast import SmoothingParams, forecast_region
from .ingest import (
    LoadError,
    TransportError,
    fetch_remote_history,
    load_case_history,
    load_demands,
    load_ideals,
    load_predicted,
)
from .model import (
    InputError,
    RegionRecord,
    Scenario,
    ScenarioConfig,
    SolverError,
    plan_from_dict,
    plan_to_dict,
)
from .pipeline import PipelineError, run_pipeline
from .render import (
    render_forecast_csv,
    render_forecast_text,
    render_plan_csv,
    render_plan_markdown,
    render_plan_text,
)

ENDPOINT_ENV = "ALLOC_CASE_ENDPOINT"

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hieralloc",
        description="allocate a scarce resource across regions under shortage",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    fc = sub.add_parser("forecast", help="fit level/trend forecasts to case histories")
    src = fc.add_mutually_exclusive_group(required=False)
    src.add_argument("--history", help="CSV or JSON case history file")
    src.add_argument("--endpoint", help=f"HTTP case feed (default ${ENDPOINT_ENV})")
    fc.add_argument("--region", action="append", dest="regions",
                    help="restrict to named region(s); repeatable")
    fc.add_argument("--horizon", type=int, default=7)
    fc.add_argument("--alpha", type=float, default=0.8, help="level smoothing factor")
    fc.add_argument("--beta", type=float, default=0.2, help="trend smoothing factor")
    fc.add_argument("--output", choices=("table", "csv", "json"), default="table")
    fc.set_defaults(func=cmd_forecast)

    al = sub.add_parser("allocate", help="run the allocation waterfall")
    al.add_argument("--demands", required=True, help="CSV region,demand_mt[,severity]")
    al.add_argument("--supply", type=float, required=True, help="total supply to split")
    al.add_argument("--level", choices=("center", "district", "proportional"),
                    default="center")
    al.add_argument("--history", help="case history file (drives the forecaster)")
    al.add_argument("--predicted", help="CSV region,predicted: bypass the forecaster")
    al.add_argument("--endpoint", help=f"HTTP case feed (default ${ENDPOINT_ENV})")
    al.add_argument("--stage2-ideals", dest="stage2_ideals",
                    help="CSV region,ideal_mt: externally fixed shares for the re-optimisation")
    al.add_argument("--redistribution", choices=("proportional", "equal"),
                    default="proportional")
    al.add_argument("--resource", default="resource", help="resource name for the plan")
    al.add_argument("--horizon", type=int, default=7)
    al.add_argument("--alpha", type=float, default=0.8)
    al.add_argument("--beta", type=float, default=0.2)
    al.add_argument("--output", choices=("table", "csv", "json"), default="table")
    al.set_defaults(func=cmd_allocate)

    rp = sub.add_parser("report", help="render a saved plan JSON")
    rp.add_argument("--plan", required=True, help="plan file from allocate --output json")
    rp.add_argument("--format", choices=("md", "csv"), default="md")
    rp.set_defaults(func=cmd_report)

    sv = sub.add_parser("serve", help="start the HTTP service")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8000)
    sv.add_argument("--store", default="scenarios.json", help="scenario store file")
    sv.set_defaults(func=cmd_serve)
    return parser


def _histories(args) -> dict:
    endpoint = args.endpoint or os.environ.get(ENDPOINT_ENV)
    if args.history:
        return load_case_history(args.history)
    if endpoint:
        return fetch_remote_history(endpoint, regions=getattr(args, "regions", None))
    raise InputError(f"no case source: pass --history or --endpoint (or set ${ENDPOINT_ENV})")


def cmd_forecast(args) -> int:
    series = _histories(args)
    if args.regions:
        missing = [r for r in args.regions if r not in series]
        if missing:
            raise InputError("unknown region(s): " + ", ".join(missing))
        series = {r: series[r] for r in args.regions}
    smoothing = SmoothingParams(args.alpha, args.beta)
    results = []
    for region, points in series.items():
        record = RegionRecord(name=region, demand=1.0, history=points)
        results.append(forecast_region(record, args.horizon, smoothing))
    if args.output == "json":
        payload = [
            {
                "region": r.region,
                "fitted_level": r.fitted_level,
                "fitted_trend": r.fitted_trend,
                "predicted": list(r.predicted),
                "horizon_max": r.horizon_max,
            }
            for r in results
        ]
        print(json.dumps(payload, indent=2))
    elif args.output == "csv":
        sys.stdout.write(render_forecast_csv(results))
    else:
        sys.stdout.write(render_forecast_text(results))
    return EXIT_OK


def cmd_allocate(args) -> int:
    demand_rows = load_demands(args.demands)
    predicted = None
    if args.predicted:
        predicted = load_predicted(args.predicted)

    history: dict = {}
    if args.level in ("center", "proportional") and predicted is None:
        history = _histories(args)

    regions = tuple(
        RegionRecord(name=region, demand=demand, severity=severity,
                     history=history.get(region, ()))
        for region, demand, severity in demand_rows
    )
    scenario = Scenario(
        name=os.path.basename(args.demands),
        resource_name=args.resource,
        supply=args.supply,
        regions=regions,
        config=ScenarioConfig(
            horizon=args.horizon,
            smoothing_level=args.alpha,
            smoothing_trend=args.beta,
            redistribution=args.redistribution,
        ),
    )
    stage2 = load_ideals(args.stage2_ideals) if args.stage2_ideals else None
    plan = run_pipeline(scenario, level=args.level, predicted=predicted,
                        stage2_ideals=stage2, redistribution=args.redistribution)
    if args.output == "json":
        print(json.dumps(plan_to_dict(plan), indent=2))
    elif args.output == "csv":
        sys.stdout.write(render_plan_csv(plan))
    else:
        sys.stdout.write(render_plan_text(plan))
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        with open(args.plan, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except OSError as exc:
        raise InputError(f"cannot read plan file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"plan file is not valid JSON: {exc}") from exc
    plan = plan_from_dict(payload)
    if args.format == "csv":
        sys.stdout.write(render_plan_csv(plan))
    else:
        sys.stdout.write(render_plan_markdown(plan))
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(store_path=args.store)
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as exc:
        if isinstance(exc.cause, InputError):
            print(f"error: {exc.cause}", file=sys.stderr)
            return EXIT_INPUT
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (LoadError, TransportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
