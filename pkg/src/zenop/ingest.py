"""Hourly timeseries loading, calendar alignment and scenario bundles."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from .domain import (
    HOURS_PER_DAY,
    HOURS_PER_YEAR,
    LOAD_ROLES,
    WEATHER_ROLES,
    Block,
    Building,
    HourlyProfile,
)

logger = logging.getLogger(__name__)

MAX_GAP_HOURS = 6
MIN_COVERAGE = 0.99

_SANITY = {
    "spot": (-0.5, 5.0),
    "co2_el": (0.0, 1500.0),
    "temperature": (-60.0, 50.0),
    "irradiance": (0.0, 1500.0),
}


class IngestError(ValueError):
    """Malformed, incomplete or inconsistent input data."""


class MissingSeriesError(IngestError):
    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__("missing series: " + ", ".join(self.missing))


@dataclass
class RawSeries:
    kind: str
    timestamps: np.ndarray  # datetime64[h], sorted
    values: np.ndarray
    source_year: int
    gaps: list[tuple[np.datetime64, int]] = field(default_factory=list)
    path: str | None = None

    def __len__(self):
        return len(self.values)


def _parse_time(text: str) -> np.datetime64:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is not None:
        ts = ts.astimezone(timezone.utc).replace(tzinfo=None)
    return np.datetime64(ts, "h")


def _find_gaps(stamps: np.ndarray) -> list[tuple[np.datetime64, int]]:
    if len(stamps) < 2:
        return []
    step = np.diff(stamps).astype(int)
    return [(stamps[i] + np.timedelta64(1, "h"), int(step[i] - 1)) for i in np.nonzero(step > 1)[0]]


def load_series_csv(path, kind: str) -> RawSeries:
    """Read a two-column ``timestamp,value`` CSV (optional header)."""
    stamps, values = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise IngestError(f"{path}:{lineno}: expected 'timestamp,value'")
            try:
                ts = _parse_time(row[0])
                val = float(row[1])
            except ValueError as exc:
                if lineno == 1:
                    continue  # header
                raise IngestError(f"{path}:{lineno}: cannot parse {row!r}: {exc}") from None
            stamps.append(ts)
            values.append(val)
    if not stamps:
        raise IngestError(f"{path}: no data rows")
    stamps = np.array(stamps, dtype="datetime64[h]")
    values = np.array(values, dtype=float)
    order = np.argsort(stamps, kind="stable")
    stamps, values = stamps[order], values[order]
    dup = np.nonzero(np.diff(stamps).astype(int) == 0)[0]
    if len(dup):
        raise IngestError(f"{path}: duplicate timestamp {stamps[dup[0]]}")
    if np.any(np.isnan(values)):
        raise IngestError(f"{path}: NaN values")
    lo, hi = _SANITY.get(kind, (-np.inf, np.inf))
    n_out = int(np.sum((values < lo) | (values > hi)))
    if n_out:
        logger.warning("%s: %d %s values outside plausible range [%g, %g]", path, n_out, kind, lo, hi)
    years = stamps.astype("datetime64[Y]").astype(int) + 1970
    source_year = int(np.bincount(years - years.min()).argmax() + years.min())
    return RawSeries(kind, stamps, values, source_year, _find_gaps(stamps), str(path))


def year_hours(year: int) -> np.ndarray:
    """The model's hourly calendar for ``year``: 8760 stamps, Feb 29 removed."""
    start = np.datetime64(f"{year}-01-01T00", "h")
    stop = np.datetime64(f"{year + 1}-01-01T00", "h")
    hours = np.arange(start, stop, np.timedelta64(1, "h"))
    return hours[~_is_feb29(hours)]


def _is_feb29(hours: np.ndarray) -> np.ndarray:
    days = hours.astype("datetime64[D]")
    months = days.astype("datetime64[M]")
    return ((months.astype(int) % 12) == 1) & ((days - months).astype(int) == 28)


def align_year(raw: RawSeries, year: int) -> np.ndarray:
    """Map a raw series onto the 8760-hour calendar of ``year``.

    Leap days are dropped, gaps up to 6 h are filled linearly, longer gaps
    and coverage below 99 % are rejected.
    """
    target = year_hours(year)
    pos = np.searchsorted(target, raw.timestamps)
    pos_ok = pos < len(target)
    hit = np.zeros(len(raw.timestamps), dtype=bool)
    hit[pos_ok] = target[pos[pos_ok]] == raw.timestamps[pos_ok]
    out = np.full(len(target), np.nan)
    out[pos[hit]] = raw.values[hit]
    coverage = np.count_nonzero(~np.isnan(out)) / len(target)
    if coverage < MIN_COVERAGE:
        raise IngestError(f"{raw.kind} {year}: coverage {coverage:.1%} below {MIN_COVERAGE:.0%}")
    missing = np.isnan(out)
    if missing.any():
        edges = np.diff(np.concatenate([[0], missing.astype(int), [0]]))
        starts, stops = np.nonzero(edges == 1)[0], np.nonzero(edges == -1)[0]
        longest = int((stops - starts).max())
        if longest > MAX_GAP_HOURS:
            at = target[starts[np.argmax(stops - starts)]]
            raise IngestError(f"{raw.kind} {year}: gap of {longest} h at {at} exceeds {MAX_GAP_HOURS} h")
        idx = np.arange(len(out))
        out[missing] = np.interp(idx[missing], idx[~missing], out[~missing])
    return out


@dataclass
class ScenarioYear:
    """Aligned hourly inputs of one calendar year.

    Real years have 8760 hours; synthetic fixtures may be any whole number of days.
    """

    year: int
    spot: np.ndarray
    co2_el: np.ndarray
    temperature: np.ndarray
    irradiance: np.ndarray
    loads: dict[str, dict[str, np.ndarray]]
    reference: bool = False

    def __post_init__(self):
        n = len(self.spot)
        if n == 0 or n % HOURS_PER_DAY:
            raise IngestError(f"series length {n} is not a whole number of days")
        for role in WEATHER_ROLES:
            arr = np.asarray(getattr(self, role), dtype=float)
            if arr.shape != (n,):
                raise IngestError(f"{role}: length {arr.shape} differs from {n}")
            if np.isnan(arr).any():
                raise IngestError(f"{role}: missing values")
            setattr(self, role, arr)
        if np.any(self.irradiance < 0):
            raise IngestError("irradiance must be non-negative")
        if np.any(self.co2_el < 0):
            raise IngestError("co2_el must be non-negative")
        for b, roles in self.loads.items():
            for r in LOAD_ROLES:
                arr = np.asarray(roles.get(r, np.zeros(n)), dtype=float)
                if arr.shape != (n,):
                    raise IngestError(f"load {b}/{r}: length {arr.shape} differs from {n}")
                if np.any(arr < 0):
                    raise IngestError(f"load {b}/{r}: negative values")
                roles[r] = arr

    @property
    def n_hours(self) -> int:
        return len(self.spot)

    @property
    def n_days(self) -> int:
        return self.n_hours // HOURS_PER_DAY

    def series(self, role: str) -> np.ndarray:
        if role in WEATHER_ROLES:
            return getattr(self, role)
        b, r = role.split(":")
        return self.loads[b][r]

    def roles(self) -> list[str]:
        return list(WEATHER_ROLES) + [f"{b}:{r}" for b in sorted(self.loads) for r in LOAD_ROLES]

    def window(self, start: int, stop: int, cyclic: bool = False) -> HourlyProfile:
        sl = slice(start, stop)
        n = max(0, min(stop, self.n_hours) - start)
        return HourlyProfile(
            spot=self.spot[sl].copy(),
            co2_el=self.co2_el[sl].copy(),
            temperature=self.temperature[sl].copy(),
            irradiance=self.irradiance[sl].copy(),
            loads={b: {r: v[sl].copy() for r, v in roles.items()} for b, roles in self.loads.items()},
            weight=np.ones(n),
            blocks=[Block(0, n, cyclic)] if n else [],
            hour=np.arange(start, start + n),
            cluster=np.full(n, -1),
        )

    def to_frame(self) -> pd.DataFrame:
        data = {role: self.series(role) for role in self.roles()}
        return pd.DataFrame(data)

    @classmethod
    def from_frame(cls, year: int, frame: pd.DataFrame, reference: bool = False) -> "ScenarioYear":
        loads: dict[str, dict[str, np.ndarray]] = {}
        for col in frame.columns:
            if ":" in col:
                b, r = col.split(":")
                loads.setdefault(b, {})[r] = frame[col].to_numpy(dtype=float)
        return cls(
            year,
            *(frame[r].to_numpy(dtype=float) for r in WEATHER_ROLES),
            loads=loads,
            reference=reference,
        )

    def save_csv(self, path) -> None:
        self.to_frame().to_csv(path, index_label="hour", float_format="%.17g")

    @classmethod
    def load_csv(cls, path, year: int, reference: bool = False) -> "ScenarioYear":
        return cls.from_frame(year, pd.read_csv(path, index_col="hour", float_precision="round_trip"), reference)


def build_scenario(
    year: int,
    series: dict,
    buildings: list[Building],
    loads: dict[str, dict] | None = None,
    reference: bool = False,
) -> ScenarioYear:
    """Assemble a validated 8760-hour scenario from raw or aligned series.

    ``series`` maps weather roles to ``RawSeries`` or arrays; ``loads`` maps
    building id -> role -> ``RawSeries`` or array.
    """
    loads = loads or {}
    missing = [r for r in WEATHER_ROLES if r not in series]
    for b in buildings:
        for r in LOAD_ROLES:
            if r not in loads.get(b.id, {}):
                missing.append(f"{b.id}:{r}")
    if missing:
        raise MissingSeriesError(missing)
    extra = set(loads) - {b.id for b in buildings}
    if extra:
        raise IngestError(f"loads given for unknown buildings {sorted(extra)}")

    def aligned(s):
        arr = align_year(s, year) if isinstance(s, RawSeries) else np.asarray(s, dtype=float)
        if len(arr) != HOURS_PER_YEAR:
            raise IngestError(f"{year}: expected {HOURS_PER_YEAR} hours, got {len(arr)}")
        return arr

    weather = {r: aligned(series[r]) for r in WEATHER_ROLES}
    bl = {b.id: {r: aligned(loads[b.id][r]) for r in LOAD_ROLES} for b in buildings}
    return ScenarioYear(year, loads=bl, reference=reference, **weather)


def write_series_csv(path, year: int, values) -> None:
    """Write an aligned series with its calendar stamps (inverse of load + align)."""
    stamps = year_hours(year)
    values = np.asarray(values, dtype=float)
    if len(values) != len(stamps):
        raise IngestError(f"expected {len(stamps)} values, got {len(values)}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "value"])
        for ts, v in zip(stamps, values):
            w.writerow([str(ts) + ":00", repr(float(v))])
