"""Text rendering for plans and forecasts: fixed 2-decimal, half-up.

Used by the CLI and the report command.  All quantity formatting funnels
through round2/fmt2 so every surface shows the same digits.
"""
from __future__ import annotations

import csv
import io
from decimal import ROUND_HALF_UP, Decimal

from .forecast import ForecastResult
from .model import AllocationPlan


def round2(x: float) -> float:
    """Round to 2 decimals with ties going up, like the published tables."""
    return float(Decimal(repr(float(x))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def fmt2(x: float) -> str:
    return f"{round2(x):.2f}"


def _text_table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    def line(cells, pad=" "):
        return "  ".join(c.rjust(w) if i else c.ljust(w)
                         for i, (c, w) in enumerate(zip(cells, widths)))
    out = [line(headers), "  ".join("-" * w for w in widths)]
    out.extend(line(r) for r in rows)
    return "\n".join(out)


def _md_table(headers: list[str], rows: list[list[str]]) -> str:
    out = ["| " + " | ".join(headers) + " |",
           "| " + " | ".join("---" for _ in headers) + " |"]
    out.extend("| " + " | ".join(r) + " |" for r in rows)
    return "\n".join(out)


def _plan_rows(plan: AllocationPlan) -> tuple[list[str], list[list[str]]]:
    headers = ["region", "demand"]
    if plan.stage_ideal is not None:
        headers.append("ideal")
    if plan.stage_prepass is not None:
        headers.append("prepass")
    if plan.stage_optimized is not None:
        headers.append("optimized")
    headers.append("final")
    rows = []
    opt = plan.stage_optimized
    opt_amounts = {}
    if opt is not None:
        opt_amounts = {r: opt.result.amounts[i] for i, r in enumerate(opt.regions)}
    for name in plan.region_names:
        row = [name, fmt2(plan.demands[name])]
        if plan.stage_ideal is not None:
            row.append(fmt2(plan.stage_ideal[name]) if name in plan.stage_ideal else "-")
        if plan.stage_prepass is not None:
            row.append(fmt2(plan.stage_prepass.satisfied[name])
                       if name in plan.stage_prepass.satisfied else "-")
        if opt is not None:
            row.append(fmt2(opt_amounts[name]) if name in opt_amounts else "-")
        row.append(fmt2(plan.stage_final[name]))
        rows.append(row)
    return headers, rows


def render_plan_text(plan: AllocationPlan) -> str:
    """Human-readable plan: one combined stage table plus footers."""
    headers, rows = _plan_rows(plan)
    out = [f"{plan.resource} allocation ({plan.level} level, "
           f"{plan.redistribution} redistribution)",
           "",
           _text_table(headers, rows),
           ""]
    if plan.stage_prepass is not None:
        pp = plan.stage_prepass
        out.append(f"pre-pass: {len(pp.satisfied)} region(s) fully satisfied, "
                   f"remaining supply {fmt2(pp.remaining_supply)}, "
                   f"balance demand {fmt2(pp.balance_demand)}")
    if plan.stage_optimized is not None:
        st = plan.stage_optimized
        capped = [r for r in st.regions
                  if plan.stage_final[r] < opt_amount(plan, r) - 1e-9]
        out.append(f"optimizer: multiplier {st.result.multiplier:.6f}, "
                   f"kkt residual {st.kkt_residual:.2e}"
                   + (f", capped at demand: {', '.join(capped)}" if capped else ""))
    total = sum(plan.stage_final.values())
    out.append(f"allocated {fmt2(total)} of {fmt2(plan.conservation_total)}"
               + (f", surplus {fmt2(plan.surplus)}" if plan.surplus > 0 else ""))
    return "\n".join(out) + "\n"


def opt_amount(plan: AllocationPlan, region: str) -> float:
    st = plan.stage_optimized
    if st is None or region not in st.regions:
        return plan.stage_final[region]
    return st.result.amounts[st.regions.index(region)]


def render_plan_csv(plan: AllocationPlan) -> str:
    headers, rows = _plan_rows(plan)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(headers)
    writer.writerows(rows)
    return buf.getvalue()


def render_plan_markdown(plan: AllocationPlan) -> str:
    """Report document: one markdown table per stage present in the plan."""
    out = [f"# {plan.resource} allocation ({plan.level} level)", ""]
    if plan.stage_ideal is not None:
        rows = [[r, fmt2(v)] for r, v in plan.stage_ideal.items()]
        out += ["## Ideal allocation", "", _md_table(["region", "ideal"], rows), ""]
    if plan.stage_prepass is not None:
        pp = plan.stage_prepass
        rows = [[r, fmt2(v)] for r, v in pp.satisfied.items()]
        out += ["## Pre-pass (full demand met)", "",
                _md_table(["region", "allocated"], rows), "",
                f"Remaining supply {fmt2(pp.remaining_supply)}, "
                f"balance demand {fmt2(pp.balance_demand)}.", ""]
    if plan.stage_optimized is not None:
        st = plan.stage_optimized
        rows = [[r, fmt2(st.ideals[r]), fmt2(st.result.amounts[i])]
                for i, r in enumerate(st.regions)]
        out += ["## Re-optimised allocation", "",
                _md_table(["region", "ideal", "amount"], rows), ""]
    rows = [[r, fmt2(plan.demands[r]), fmt2(plan.stage_final[r])]
            for r in plan.region_names]
    out += ["## Final allocation", "", _md_table(["region", "demand", "final"], rows), "",
            f"Total {fmt2(sum(plan.stage_final.values()))} of "
            f"{fmt2(plan.conservation_total)}"
            + (f"; surplus {fmt2(plan.surplus)}." if plan.surplus > 0 else "."), ""]
    return "\n".join(out)


def forecast_headers(horizon: int) -> list[str]:
    return ["region", "fitted_level", "fitted_trend", "horizon_max"] + [
        f"day+{k+1}" for k in range(horizon)]


def forecast_rows(results: list[ForecastResult]) -> list[list[str]]:
    return [
        [r.region, fmt2(r.fitted_level), fmt2(r.fitted_trend), fmt2(r.horizon_max)]
        + [fmt2(v) for v in r.predicted]
        for r in results
    ]


def render_forecast_text(results: list[ForecastResult]) -> str:
    if not results:
        return "no regions\n"
    horizon = len(results[0].predicted)
    return _text_table(forecast_headers(horizon), forecast_rows(results)) + "\n"


def render_forecast_csv(results: list[ForecastResult]) -> str:
    horizon = len(results[0].predicted) if results else 0
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(forecast_headers(horizon))
    writer.writerows(forecast_rows(results))
    return buf.getvalue()
