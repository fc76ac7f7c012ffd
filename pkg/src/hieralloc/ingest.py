"""Loaders for demand tables, case histories and remote case feeds.

File loaders accept a path or an open text stream.  They never drop rows
silently: every malformed row is collected, and the raised LoadError names
the first offender while carrying the full list in ``.all_errors``.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from datetime import date, datetime, timezone
from pathlib import Path
from typing import IO, Any, Iterable, Sequence

import httpx

from .model import InputError

HistorySeries = tuple[tuple[date, int], ...]


class LoadError(InputError):
    """Malformed input file or payload."""

    def __init__(self, errors: Sequence[str]):
        self.all_errors = list(errors)
        super().__init__(self.all_errors[0] if self.all_errors else "load failed")


class TransportError(RuntimeError):
    """Remote endpoint unreachable or answering badly.

    ``retryable`` is True for network faults and 5xx answers, False for
    4xx ones (the request itself is wrong, retrying will not help).
    """

    def __init__(self, message: str, status: int | None = None, retryable: bool = True):
        super().__init__(message)
        self.status = status
        self.retryable = retryable


class SchemaError(LoadError):
    """Remote payload parsed but does not have the agreed shape."""

    retryable = False


def _open_text(source: str | Path | IO) -> tuple[IO, bool]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline=""), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8")), True
    return source, False


def _read_csv(source, expected: Sequence[str], optional: Sequence[str] = ()) -> list[dict]:
    stream, owned = _open_text(source)
    try:
        reader = csv.DictReader(stream)
        header = reader.fieldnames
        required = list(expected)
        allowed = set(required) | set(optional)
        if header is None:
            raise LoadError(["empty file: no header row"])
        got = [h.strip() for h in header]
        if [h for h in required if h not in got] or any(h not in allowed for h in got):
            raise LoadError(
                [f"unexpected header {got!r}: expected columns {required}"
                 + (f" (optional: {list(optional)})" if optional else "")]
            )
        return [dict(row, __row__=i) for i, row in enumerate(reader, start=2)]
    finally:
        if owned:
            stream.close()


def load_demands(source: str | Path | IO) -> list[tuple[str, float, float]]:
    """Read a demand table: header ``region,demand_mt[,severity]``.

    Returns (region, demand, severity) tuples in file order; severity
    defaults to 1.0 when the column is absent or a cell is empty.
    """
    rows = _read_csv(source, ["region", "demand_mt"], optional=["severity"])
    out: list[tuple[str, float, float]] = []
    errors: list[str] = []
    seen: set[str] = set()
    for row in rows:
        n = row["__row__"]
        region = (row.get("region") or "").strip()
        if not region:
            errors.append(f"region must not be empty (row {n})")
            continue
        if region in seen:
            errors.append(f"duplicate region {region!r} (row {n})")
            continue
        try:
            demand = float(row.get("demand_mt") or "")
        except ValueError:
            errors.append(f"unparseable demand {row.get('demand_mt')!r} (row {n})")
            continue
        if demand < 0:
            errors.append(f"demand must be >= 0 (row {n})")
            continue
        raw_sev = (row.get("severity") or "").strip()
        try:
            severity = float(raw_sev) if raw_sev else 1.0
        except ValueError:
            errors.append(f"unparseable severity {raw_sev!r} (row {n})")
            continue
        if severity <= 0:
            errors.append(f"severity must be > 0 (row {n})")
            continue
        seen.add(region)
        out.append((region, demand, severity))
    if errors:
        raise LoadError(errors)
    return out


def _parse_history_records(records: Iterable[dict], *, where: str) -> dict[str, HistorySeries]:
    """Shared record validation for the CSV, JSON and remote paths.

    ``where`` labels positions in messages ("row" for files, "record" for
    remote payloads).
    """
    errors: list[str] = []
    series: dict[str, list[tuple[date, int]]] = {}
    seen: set[tuple[str, date]] = set()
    for pos, rec in enumerate(records, start=1):
        label = rec.get("__row__", pos)
        region = str(rec.get("region") or "").strip()
        if not region:
            errors.append(f"region must not be empty ({where} {label})")
            continue
        raw_date = rec.get("date")
        try:
            d = raw_date if isinstance(raw_date, date) else date.fromisoformat(str(raw_date).strip())
        except (TypeError, ValueError):
            errors.append(f"unparseable date {raw_date!r} ({where} {label})")
            continue
        raw_active = rec.get("active")
        try:
            active = int(str(raw_active).strip())
        except (TypeError, ValueError):
            errors.append(f"unparseable active count {raw_active!r} ({where} {label})")
            continue
        if active < 0:
            errors.append(f"active must be >= 0 ({where} {label})")
            continue
        if (region, d) in seen:
            errors.append(f"duplicate entry for {region!r} on {d.isoformat()} ({where} {label})")
            continue
        seen.add((region, d))
        series.setdefault(region, []).append((d, active))
    if errors:
        raise LoadError(errors)
    return {region: tuple(sorted(points)) for region, points in series.items()}


def load_case_history(source: str | Path | IO, format: str | None = None) -> dict[str, HistorySeries]:
    """Read case histories from CSV (``region,date,active``) or a JSON array
    of objects with those keys.  Points come back sorted by date per region.

    ``format`` may be "csv" or "json"; by default it is inferred from the
    file extension, falling back to content sniffing.
    """
    if format is None:
        name = getattr(source, "name", source if isinstance(source, (str, Path)) else "")
        suffix = Path(str(name)).suffix.lower()
        if suffix in (".csv", ".json"):
            format = suffix[1:]
    if format == "json" or format is None:
        stream, owned = _open_text(source)
        try:
            text = stream.read()
        finally:
            if owned:
                stream.close()
        stripped = text.lstrip()
        if format == "json" or (stripped[:1] in ("[", "{")):
            try:
                payload = json.loads(text)
            except json.JSONDecodeError as exc:
                raise LoadError([f"invalid JSON: {exc}"]) from exc
            if not isinstance(payload, list):
                raise LoadError(["history JSON must be an array of records"])
            records = [rec if isinstance(rec, dict) else {} for rec in payload]
            return _parse_history_records(records, where="record")
        source = io.StringIO(text)  # sniffed as CSV after all
    rows = _read_csv(source, ["region", "date", "active"])
    return _parse_history_records(rows, where="row")


def load_predicted(source: str | Path | IO) -> dict[str, float]:
    """Read externally supplied predicted peaks: header ``region,predicted``."""
    return _load_named_values(source, "predicted")


def load_ideals(source: str | Path | IO) -> dict[str, float]:
    """Read externally fixed ideal amounts: header ``region,ideal_mt``."""
    return _load_named_values(source, "ideal_mt")


def _load_named_values(source, column: str) -> dict[str, float]:
    rows = _read_csv(source, ["region", column])
    out: dict[str, float] = {}
    errors: list[str] = []
    for row in rows:
        n = row["__row__"]
        region = (row.get("region") or "").strip()
        if not region:
            errors.append(f"region must not be empty (row {n})")
            continue
        if region in out:
            errors.append(f"duplicate region {region!r} (row {n})")
            continue
        try:
            value = float(row.get(column) or "")
        except ValueError:
            errors.append(f"unparseable {column} {row.get(column)!r} (row {n})")
            continue
        if value < 0:
            errors.append(f"{column} must be >= 0 (row {n})")
            continue
        out[region] = value
    if errors:
        raise LoadError(errors)
    return out


def fetch_remote_history(endpoint: str,
                         regions: Sequence[str] | None = None,
                         cache_path: str | Path | None = None,
                         token: str | None = None,
                         timeout: float = 10.0,
                         transport: httpx.BaseTransport | None = None) -> dict[str, HistorySeries]:
    """Pull case histories from an HTTP endpoint returning the JSON array
    shape of load_case_history.

    Optional bearer ``token``, client-side ``regions`` filter, and an atomic
    JSON cache (written to a temp file, then renamed) stamped with the fetch
    time.  ``transport`` is for tests.
    """
    headers = {"Authorization": f"Bearer {token}"} if token else {}
    try:
        with httpx.Client(transport=transport, timeout=timeout) as client:
            response = client.get(endpoint, headers=headers)
    except httpx.HTTPError as exc:
        raise TransportError(f"endpoint unreachable: {exc}", retryable=True) from exc
    if not 200 <= response.status_code < 300:
        raise TransportError(
            f"endpoint returned status {response.status_code}",
            status=response.status_code,
            retryable=response.status_code >= 500,
        )
    try:
        payload = response.json()
    except ValueError as exc:
        raise SchemaError([f"response is not JSON: {exc}"]) from exc
    if not isinstance(payload, list):
        raise SchemaError(["history payload must be an array of records"])
    records = [rec if isinstance(rec, dict) else {} for rec in payload]
    try:
        series = _parse_history_records(records, where="record")
    except SchemaError:
        raise
    except LoadError as exc:
        raise SchemaError(exc.all_errors) from exc

    if regions is not None:
        wanted = set(regions)
        series = {r: pts for r, pts in series.items() if r in wanted}

    if cache_path is not None:
        cache_path = Path(cache_path)
        body = {
            "fetched_at": datetime.now(timezone.utc).isoformat(),
            "endpoint": endpoint,
            "records": [
                {"region": r, "date": d.isoformat(), "active": c}
                for r, pts in series.items()
                for d, c in pts
            ],
        }
        _atomic_write_json(cache_path, body)
    return series


def _atomic_write_json(path: Path, payload: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def read_history_cache(path: str | Path) -> tuple[str, dict[str, HistorySeries]]:
    """Read a cache written by fetch_remote_history; returns (fetched_at, series)."""
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    records = payload.get("records", [])
    return str(payload.get("fetched_at", "")), _parse_history_records(records, where="record")
