"""Hourly load ingestion, period slicing and sliding-window sample building.

Input CSVs use the wide GEFCom2012 layout, one row per (zone, day)::

    zone_id,year,month,day,h1,...,h24
    1,2004,1,1,"16,853","16,450",...

Samples pair the 168 hourly loads of the seven days before a target day with
the natural log of that day's mean load. One sample is built per day.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import zipfile
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .errors import GapError, InsufficientDataError, ParseError, RangeError, ValidationError

logger = logging.getLogger(__name__)

HOURS_PER_DAY = 24
WINDOW_DAYS = 7
WINDOW_LENGTH = WINDOW_DAYS * HOURS_PER_DAY

HEADER = ["zone_id", "year", "month", "day"] + [f"h{i}" for i in range(1, 25)]
DATA_FILE_NAME = "Load_history.csv"


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LoadSeries:
    """Gap-free hourly loads for one zone, starting at hour 1 of ``start``."""

    zone_id: int
    start: date
    loads: np.ndarray

    def __post_init__(self):
        loads = _frozen(self.loads)
        if loads.ndim != 1 or loads.size == 0 or loads.size % HOURS_PER_DAY:
            raise ValidationError("loads must be a non-empty whole number of days")
        if not np.all(np.isfinite(loads)) or np.any(loads <= 0):
            raise ValidationError("every load must be finite and positive")
        object.__setattr__(self, "loads", loads)

    @property
    def n_days(self) -> int:
        return self.loads.size // HOURS_PER_DAY

    @property
    def end(self) -> date:
        return self.start + timedelta(days=self.n_days - 1)

    def daily(self) -> np.ndarray:
        """Loads reshaped to ``(n_days, 24)``."""
        return self.loads.reshape(-1, HOURS_PER_DAY)

    def hours(self):
        """Yield ``(date, hour_of_day, load)`` in chronological order (hours 1..24)."""
        for k, load in enumerate(self.loads):
            d, h = divmod(k, HOURS_PER_DAY)
            yield self.start + timedelta(days=d), h + 1, float(load)


@dataclass(frozen=True)
class SamplePair:
    x_raw: np.ndarray
    x_log: np.ndarray
    z: float
    target_day: date


@dataclass(frozen=True)
class WindowedDataset:
    """Samples stored column-wise: ``x_raw`` is ``(N, window_length)``.

    ``x_log`` is derived from ``x_raw`` on construction, so attacked copies
    are built by passing new raw windows and never by editing ``x_log``.
    """

    x_raw: np.ndarray
    z: np.ndarray
    target_days: tuple
    role: str = "train"
    x_log: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x_raw = _frozen(self.x_raw)
        z = _frozen(self.z)
        if x_raw.ndim != 2 or z.ndim != 1 or x_raw.shape[0] != z.shape[0]:
            raise ValidationError("x_raw must be (N, L) and z must be (N,)")
        if len(self.target_days) != z.shape[0]:
            raise ValidationError("one target day per sample is required")
        if np.any(x_raw <= 0) or not np.all(np.isfinite(x_raw)):
            raise ValidationError("window loads must be finite and positive")
        days = tuple(self.target_days)
        if any(b < a for a, b in zip(days, days[1:])):
            raise ValidationError("target days must be non-decreasing")
        object.__setattr__(self, "x_raw", x_raw)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "target_days", days)
        object.__setattr__(self, "x_log", _frozen(np.log(x_raw)))

    def __len__(self):
        return self.z.shape[0]

    def __getitem__(self, i) -> SamplePair:
        return SamplePair(self.x_raw[i], self.x_log[i], float(self.z[i]), self.target_days[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def window_length(self) -> int:
        return self.x_raw.shape[1]

    @property
    def y(self) -> np.ndarray:
        """Observed next-day mean loads in raw units."""
        return np.exp(self.z)

    def with_inputs(self, x_raw) -> "WindowedDataset":
        """Same targets and days, different raw windows."""
        return WindowedDataset(x_raw, self.z, self.target_days, self.role)

    def take(self, idx) -> "WindowedDataset":
        idx = np.asarray(idx, dtype=np.intp)
        return WindowedDataset(
            self.x_raw[idx], self.z[idx], tuple(self.target_days[i] for i in idx), self.role
        )


# -- CSV ingestion ----------------------------------------------------------


def _number(cell, line):
    text = cell.strip().replace(",", "")
    if not text:
        return None
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"not a number: {cell!r}", line) from None


def _integer(cell, name, line):
    try:
        return int(cell.strip())
    except ValueError:
        raise ParseError(f"bad {name}: {cell!r}", line) from None


def parse_load_csv(raw_text: str, zone: int = 1, start: date | None = None, end: date | None = None) -> LoadSeries:
    """Parse wide-format load text into a gap-free :class:`LoadSeries` for ``zone``.

    Rows of other zones and, when ``start``/``end`` are given, rows outside
    that period are skipped unchecked. A selected row with any empty hourly
    cell is dropped as a whole day; if that leaves a hole the call fails with
    :class:`GapError`.
    """
    reader = csv.reader(io.StringIO(raw_text, newline=""))
    header = None
    days = {}
    rejected = 0
    for row in reader:
        if not row or not any(c.strip() for c in row):
            continue
        line = reader.line_num
        if header is None:
            header = [c.strip().lower() for c in row]
            if header != HEADER:
                raise ParseError("expected header zone_id,year,month,day,h1..h24", line)
            continue
        if len(row) != len(HEADER):
            raise ParseError(f"expected {len(HEADER)} cells, found {len(row)}", line)
        if _integer(row[0], "zone_id", line) != zone:
            continue
        y, m, d = (_integer(row[i], name, line) for i, name in ((1, "year"), (2, "month"), (3, "day")))
        try:
            day = date(y, m, d)
        except ValueError:
            raise ParseError(f"invalid date {y}-{m}-{d}", line) from None
        if (start is not None and day < start) or (end is not None and day > end):
            continue
        values = [_number(c, line) for c in row[4:]]
        if any(v is None for v in values):
            rejected += 1
            logger.warning("line %d: dropping %s with missing hourly cells", line, day)
            continue
        if any(not np.isfinite(v) or v <= 0 for v in values):
            raise ValidationError(f"line {line}: non-positive load on {day}")
        if day in days:
            raise ParseError(f"duplicate row for {day}", line)
        days[day] = values
    if header is None:
        raise ParseError("no data rows")
    if not days:
        raise ParseError(f"no data rows for zone {zone}")

    ordered = sorted(days)
    first = start if start is not None else ordered[0]
    last = end if end is not None else ordered[-1]
    missing = []
    d = first
    while d <= last:
        if d not in days:
            missing.extend((d, h) for h in range(1, 25))
        d += timedelta(days=1)
    if missing:
        raise GapError(missing)
    if rejected:
        logger.info("dropped %d incomplete rows outside the kept range", rejected)
    loads = np.array([days[k] for k in ordered], dtype=np.float64).ravel()
    return LoadSeries(zone, first, loads)


def read_load_csv(path, zone: int = 1, start: date | None = None, end: date | None = None) -> LoadSeries:
    text = Path(path).read_text(encoding="utf-8-sig")
    return parse_load_csv(text, zone=zone, start=start, end=end)


def _cell(v):
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 2**53 else repr(v)


def format_load_csv(series: LoadSeries) -> str:
    """Serialize back to the wide layout accepted by :func:`parse_load_csv`."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(HEADER)
    for k, row in enumerate(series.daily()):
        d = series.start + timedelta(days=k)
        w.writerow([series.zone_id, d.year, d.month, d.day] + [_cell(v) for v in row])
    return out.getvalue()


def default_data_path() -> Path:
    return Path(os.environ.get("RF_DATA_DIR", "data")) / DATA_FILE_NAME


# -- slicing and windows ----------------------------------------------------


def slice_period(series: LoadSeries, start: date, end: date) -> LoadSeries:
    """Contiguous sub-series covering ``[start, end]`` inclusive."""
    if start > end:
        raise ValidationError(f"start {start} is after end {end}")
    if start < series.start or end > series.end:
        raise RangeError(f"period {start}..{end} not covered by {series.start}..{series.end}")
    i = (start - series.start).days * HOURS_PER_DAY
    j = ((end - series.start).days + 1) * HOURS_PER_DAY
    return LoadSeries(series.zone_id, start, series.loads[i:j])


def build_windows(series: LoadSeries, role: str = "train") -> WindowedDataset:
    n_days = series.n_days
    if n_days < WINDOW_DAYS + 1:
        raise InsufficientDataError(f"need at least {WINDOW_DAYS + 1} complete days, got {n_days}")
    n = n_days - WINDOW_DAYS
    views = np.lib.stride_tricks.sliding_window_view(series.loads, WINDOW_LENGTH)
    x_raw = views[: n * HOURS_PER_DAY : HOURS_PER_DAY]
    z = np.log(series.daily()[WINDOW_DAYS:].mean(axis=1))
    days = tuple(series.start + timedelta(days=WINDOW_DAYS + k) for k in range(n))
    return WindowedDataset(np.array(x_raw), z, days, role)


def split_windows(series: LoadSeries, train: tuple, test: tuple):
    """Build train and test datasets from two calendar periods of ``series``.

    Each split is windowed from its own slice, so a test set of D days has
    D - 7 samples.
    """
    tr = build_windows(slice_period(series, *train), role="train")
    te = build_windows(slice_period(series, *test), role="test")
    return tr, te


# -- synthetic surrogate ----------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    """Profile for the synthetic surrogate.

    Amplitudes and ``noise`` are fractions of ``base``. The day-level factor
    ``exp(level)`` follows an AR(1) process in log space, which keeps loads
    positive; the remaining terms are bounded, so their sum must stay
    below 1.
    """

    base: float = 20000.0
    daily_amplitude: float = 0.15
    weekly_amplitude: float = 0.08
    seasonal_amplitude: float = 0.15
    noise: float = 0.02
    level_persistence: float = 0.9
    level_noise: float = 0.03
    start: str = "2004-01-01"
    end: str = "2006-12-31"
    zone_id: int = 1

    def validate(self):
        if not self.base > 0:
            raise ValidationError("base must be positive")
        parts = (self.daily_amplitude, self.weekly_amplitude, self.seasonal_amplitude, self.noise)
        if any(p < 0 for p in parts) or self.level_noise < 0:
            raise ValidationError("amplitudes and noise scales must be non-negative")
        if sum(parts) >= 1.0:
            raise ValidationError(
                "daily + weekly + seasonal amplitudes + noise must be < 1 to keep loads positive"
            )
        if not 0 <= self.level_persistence < 1:
            raise ValidationError("level_persistence must lie in [0, 1)")
        if date.fromisoformat(self.start) > date.fromisoformat(self.end):
            raise ValidationError("start must not be after end")

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown synthetic profile keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)


def synth_series(profile: SynthConfig, seed: int) -> LoadSeries:
    profile.validate()
    start, end = date.fromisoformat(profile.start), date.fromisoformat(profile.end)
    n_days = (end - start).days + 1
    rng = np.random.default_rng(seed)

    level = np.zeros(n_days)
    if profile.level_noise > 0:
        shocks = rng.standard_normal(n_days) * profile.level_noise
        level[0] = shocks[0] / np.sqrt(1 - profile.level_persistence**2)
        for d in range(1, n_days):
            level[d] = profile.level_persistence * level[d - 1] + shocks[d]
    jitter = rng.uniform(-1.0, 1.0, n_days * HOURS_PER_DAY) * profile.noise

    t = np.arange(n_days * HOURS_PER_DAY)
    day = t // HOURS_PER_DAY
    shape = (
        1.0
        + profile.daily_amplitude * np.sin(2 * np.pi * ((t % HOURS_PER_DAY) - 9) / HOURS_PER_DAY)
        + profile.weekly_amplitude * np.sin(2 * np.pi * t / (WINDOW_DAYS * HOURS_PER_DAY))
        + profile.seasonal_amplitude * np.cos(4 * np.pi * day / 365.25)
        + jitter
    )
    loads = profile.base * shape * np.exp(level[day])
    return LoadSeries(profile.zone_id, start, loads)


# -- split persistence ------------------------------------------------------


def save_splits(path, train: WindowedDataset, test: WindowedDataset, meta: dict):
    """Write both splits to an ``.npz`` archive plus JSON metadata inside it."""
    arrays = {}
    for name, ds in (("train", train), ("test", test)):
        arrays[f"{name}_x_raw"] = np.asarray(ds.x_raw)
        arrays[f"{name}_z"] = np.asarray(ds.z)
        arrays[f"{name}_days"] = np.array([d.toordinal() for d in ds.target_days], dtype=np.int64)
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    # Fixed entry timestamps keep the archive byte-identical across runs.
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
        for key in sorted(arrays):
            info = zipfile.ZipInfo(f"{key}.npy", date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_DEFLATED
            with zf.open(info, "w") as fh:
                np.lib.format.write_array(fh, np.ascontiguousarray(arrays[key]), allow_pickle=False)


def load_splits(path):
    """Inverse of :func:`save_splits`; returns ``(train, test, meta)``."""
    with np.load(path) as f:
        out = []
        for name in ("train", "test"):
            days = tuple(date.fromordinal(int(o)) for o in f[f"{name}_days"])
            out.append(WindowedDataset(f[f"{name}_x_raw"], f[f"{name}_z"], days, name))
        meta = json.loads(bytes(f["meta"]).decode())
    return out[0], out[1], meta


def dataset_digest(ds: WindowedDataset) -> str:
    """SHA-256 over inputs, targets and days; equal digests mean equal datasets."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(ds.x_raw).tobytes())
    h.update(np.ascontiguousarray(ds.z).tobytes())
    h.update(",".join(d.isoformat() for d in ds.target_days).encode())
    return h.hexdigest()
