"""Short-horizon demand forecasting and the ideal-share rule built on it.

Double exponential smoothing (level + trend) on active case counts.  The
h-day-ahead forecasts are level + k * trend; the horizon maximum feeds the
allocation pipeline as each region's predicted peak burden.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import InputError, RegionRecord, Scenario

log = logging.getLogger(__name__)

DEFAULT_HORIZON = 7


@dataclass(frozen=True)
class SmoothingParams:
    """Smoothing factors for level and trend, each in (0, 1]."""

    level: float = 0.8
    trend: float = 0.2

    def __post_init__(self) -> None:
        for name, v in (("level", self.level), ("trend", self.trend)):
            if not 0.0 < v <= 1.0:
                raise InputError(f"smoothing {name} must be in (0, 1] (got {v!r})")


DEFAULT_SMOOTHING = SmoothingParams()


@dataclass(frozen=True)
class ForecastResult:
    region: str
    fitted_level: float
    fitted_trend: float
    predicted: tuple[float, ...]
    horizon_max: float


def fit_forecast(values: Sequence[float],
                 horizon: int = DEFAULT_HORIZON,
                 smoothing: SmoothingParams = DEFAULT_SMOOTHING,
                 region: str = "") -> ForecastResult:
    """Fit level/trend smoothing to ``values`` and extrapolate ``horizon`` days.

    Initialisation: level = first value, trend = second - first.  The
    recursion then runs over the series from the second value on:

        level_t = a * y_t + (1 - a) * (level + trend)
        trend_t = b * (level_t - level_prev) + (1 - b) * trend

    predicted[k] = level + (k + 1) * trend for k in 0..horizon-1.  The
    horizon maximum is floored at zero so a collapsing series cannot turn
    into a negative burden.
    """
    y = [float(v) for v in values]
    if len(y) < 2:
        raise InputError(f"insufficient history: need at least 2 points, got {len(y)}")
    if horizon < 1:
        raise InputError(f"horizon must be >= 1 (got {horizon})")

    level = y[0]
    trend = y[1] - y[0]
    a, b = smoothing.level, smoothing.trend
    for value in y[1:]:
        prev = level
        level = a * value + (1.0 - a) * (level + trend)
        trend = b * (level - prev) + (1.0 - b) * trend

    predicted = tuple(level + (k + 1) * trend for k in range(horizon))
    return ForecastResult(
        region=region,
        fitted_level=level,
        fitted_trend=trend,
        predicted=predicted,
        horizon_max=max(max(predicted), 0.0),
    )


def _daily_counts(record: RegionRecord) -> list[float]:
    """Expand a (date, count) history onto a daily grid, forward-filling gaps."""
    if len(record.history) < 2:
        raise InputError(
            f"insufficient history: need at least 2 points, got {len(record.history)}"
            + (f" (region {record.name})" if record.name else "")
        )
    out: list[float] = []
    prev_date, prev_count = record.history[0]
    out.append(float(prev_count))
    filled = 0
    for d, count in record.history[1:]:
        gap = (d - prev_date).days
        if gap < 1:
            raise InputError(f"history dates must be strictly increasing (region {record.name})")
        for _ in range(gap - 1):
            out.append(float(prev_count))
            filled += 1
        out.append(float(count))
        prev_date, prev_count = d, count
    if filled:
        log.warning("region %s: forward-filled %d missing day(s) in history",
                    record.name, filled)
    return out


def forecast_region(record: RegionRecord,
                    horizon: int = DEFAULT_HORIZON,
                    smoothing: SmoothingParams = DEFAULT_SMOOTHING) -> ForecastResult:
    """Forecast one region from its recorded history (daily grid, gaps
    forward-filled with a warning)."""
    return fit_forecast(_daily_counts(record), horizon, smoothing, region=record.name)


def forecast_scenario(scenario: Scenario,
                      horizon: int | None = None) -> list[ForecastResult]:
    """Forecast every region of a scenario with its configured smoothing.

    Regions with insufficient history make this fail as a whole; the error
    message lists all offending regions so the caller can fix the input in
    one go.
    """
    cfg = scenario.config
    h = cfg.horizon if horizon is None else horizon
    smoothing = SmoothingParams(cfg.smoothing_level, cfg.smoothing_trend)
    short = [r.name for r in scenario.regions if len(r.history) < 2]
    if short:
        raise InputError("insufficient history: " + ", ".join(short))
    return [forecast_region(r, h, smoothing) for r in scenario.regions]


def ideal_weights(predicted: Sequence[float] | np.ndarray) -> np.ndarray:
    """Normalise predicted peaks into shares summing to one.

    Zero entries stay zero; all entries zero (or an empty vector) is an
    error because no share rule can be derived from it.
    """
    p = np.asarray(list(predicted), dtype=float)
    if p.size == 0:
        raise InputError("no predicted demand: empty vector")
    if (p < 0).any():
        i = int(np.flatnonzero(p < 0)[0])
        raise InputError(f"predicted demand must be >= 0 (index {i}, got {p[i]!r})")
    total = float(p.sum())
    if total <= 0.0:
        raise InputError("no predicted demand: all predicted values are zero")
    return p / total


def ideal_allocation(weights: Sequence[float] | np.ndarray, total: float) -> np.ndarray:
    """Scale normalised weights to amounts of ``total``."""
    w = np.asarray(list(weights), dtype=float)
    if w.size == 0:
        raise InputError("no weights given")
    if total <= 0.0:
        raise InputError(f"total must be > 0 (got {total!r})")
    gap = abs(float(w.sum()) - 1.0)
    if gap > 1e-6:
        raise InputError(f"weights must sum to 1 (off by {gap:.3e})")
    return w * float(total)


def horizon_maxima(results: Iterable[ForecastResult]) -> np.ndarray:
    return np.asarray([r.horizon_max for r in results], dtype=float)
