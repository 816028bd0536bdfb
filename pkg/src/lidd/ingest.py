"""Loading, cleaning and gridding of raw multi-system sensor logs.

Raw logs are irregular per-sensor samples. This module bins them onto a
regular grid (one SensorFrame per system), removes short transient spikes
with a masked rolling median, and linearly interpolates short gaps.
Processing order is despike first, then gap filling.

Two input layouts are supported (UTF-8 CSV):

* long:  header ``timestamp,system,sensor,value``, RFC 3339 timestamps.
* wide:  header ``timestamp,<sensor1>,...,<sensorN>``, one file per
  system, system id = file stem. Empty fields denote missing values.

Timestamps without a zone are interpreted as UTC so results do not depend
on the host timezone.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import pandas as pd

from lidd import _core
from lidd.errors import ConfigError, ContractViolation, InputFormatError

logger = logging.getLogger(__name__)

LONG_HEADER = ("timestamp", "system", "sensor", "value")


class RawRecord(NamedTuple):
    """One raw sample: UTC epoch seconds, system id, sensor id, finite value."""

    timestamp: int
    system_id: str
    sensor_id: str
    value: float


@dataclass
class ParseStats:
    """Counters for rows rejected while parsing."""

    rows: int = 0
    malformed: int = 0
    nonfinite: int = 0
    missing: int = 0

    def merge(self, other: "ParseStats") -> None:
        self.rows += other.rows
        self.malformed += other.malformed
        self.nonfinite += other.nonfinite
        self.missing += other.missing


@dataclass(frozen=True)
class IngestConfig:
    resample_interval: int = 3600  # seconds
    aggregator: str = "median"
    despike_window: int = 5
    max_gap_fill: int = 6
    min_coverage: float = 0.5

    def validate(self) -> None:
        if self.resample_interval <= 0:
            raise ConfigError("resample_interval: must be a positive duration")
        if self.aggregator not in ("median", "mean"):
            raise ConfigError(f"aggregator: unknown value {self.aggregator!r}")
        if self.despike_window < 3 or self.despike_window % 2 == 0:
            raise ConfigError("despike_window: must be an odd integer >= 3")
        if self.max_gap_fill < 0:
            raise ConfigError("max_gap_fill: must be >= 0")
        if not 0.0 <= self.min_coverage <= 1.0:
            raise ConfigError("min_coverage: must lie in [0, 1]")


@dataclass(frozen=True)
class SensorFrame:
    """One system's regularly sampled multivariate series with a mask.

    values[t, i] is only meaningful where mask[t, i]; unobserved cells are
    stored as 0.0. grid holds UTC epoch seconds at fixed spacing `step`.
    """

    system_id: str
    sensor_ids: tuple[str, ...]
    grid: np.ndarray
    values: np.ndarray
    mask: np.ndarray
    step: int

    def __post_init__(self):
        T, N = self.values.shape
        if len(self.sensor_ids) != N:
            raise ContractViolation("sensor_ids length does not match value columns")
        if len(set(self.sensor_ids)) != N:
            raise ContractViolation("sensor_ids must be unique")
        if self.grid.shape != (T,) or self.mask.shape != (T, N):
            raise ContractViolation("grid/mask shape mismatch")
        if T > 1:
            deltas = np.diff(self.grid)
            if not np.all(deltas == self.step):
                raise ContractViolation("grid spacing is not constant")
        if not np.all(np.isfinite(self.values[self.mask])):
            raise ContractViolation("observed values must be finite")

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_sensors(self) -> int:
        return self.values.shape[1]


class _Columns(NamedTuple):
    """Columnar parse result shared by the record API and the pipeline.

    system/sensor names are dictionary-encoded: the code arrays index
    into the id tuples. values are float64 and all finite.
    """

    epochs: np.ndarray  # int64 seconds
    system_codes: np.ndarray  # int64 into system_ids
    system_ids: tuple[str, ...]
    sensor_codes: np.ndarray  # int64 into sensor_ids
    sensor_ids: tuple[str, ...]
    values: np.ndarray
    stats: ParseStats


def _parse_timestamp(s: str) -> int:
    txt = s.strip()
    if txt.endswith(("Z", "z")):
        txt = txt[:-1] + "+00:00"
    dt = datetime.fromisoformat(txt)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_timestamp(epoch: int) -> str:
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )


def _epochs_from_categorical(col: pd.Series) -> np.ndarray:
    """RFC 3339 parse through the category table; NaN rows failed to parse."""
    cats = col.cat.categories
    lut = np.empty(len(cats) + 1, dtype=np.float64)
    lut[-1] = np.nan  # cat code -1 = missing cell
    for i, s in enumerate(cats):
        try:
            lut[i] = float(_parse_timestamp(s))
        except (ValueError, TypeError):
            lut[i] = np.nan
    return lut[col.cat.codes.to_numpy()]


def _parse_values(raw: pd.Series, stats: ParseStats) -> tuple[np.ndarray, np.ndarray]:
    """(keep_mask, exact_values_for_kept); counts empty/malformed/non-finite.

    pd.to_numeric only detects unusable entries (its parser can be one ulp
    off); kept entries are re-parsed by numpy, which rounds correctly, so
    serialized values round-trip bit-exactly.
    """
    detect = pd.to_numeric(raw, errors="coerce").to_numpy(np.float64)
    bad = ~np.isfinite(detect)
    if bad.any():
        for s in raw[bad]:
            txt = str(s).strip()
            if txt == "":
                stats.missing += 1
                continue
            try:
                v = float(txt)
            except ValueError:
                stats.malformed += 1
            else:
                if np.isfinite(v):
                    stats.malformed += 1  # parseable but rejected by the detector
                else:
                    stats.nonfinite += 1
    keep = ~bad
    kept = raw[keep]
    try:
        exact = kept.to_numpy(np.float64)
    except (ValueError, TypeError):
        exact = np.array([float(str(s)) for s in kept], dtype=np.float64)
    return keep, exact


def _read_csv(stream, columns, dtype) -> pd.DataFrame:
    try:
        return pd.read_csv(
            stream,
            usecols=columns,
            dtype=dtype,
            keep_default_na=False,
            skip_blank_lines=True,
            on_bad_lines="skip",
        )
    except UnicodeDecodeError as exc:
        raise InputFormatError(f"input is not valid UTF-8: {exc}") from exc
    except (OSError, pd.errors.ParserError) as exc:
        raise InputFormatError(f"unreadable input: {exc}") from exc


def _open_stream(source) -> io.TextIOBase:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, bytes):
        return io.TextIOWrapper(io.BytesIO(source), encoding="utf-8")
    if isinstance(source, io.RawIOBase) or isinstance(source, io.BufferedIOBase):
        return io.TextIOWrapper(source, encoding="utf-8")
    return source  # already a text stream


def _header_of(stream) -> list[str]:
    pos = stream.tell()
    line = stream.readline()
    stream.seek(pos)
    return [h.strip() for h in line.rstrip("\r\n").split(",")]


def _codes_of(col: pd.Series) -> tuple[np.ndarray, tuple[str, ...]]:
    return col.cat.codes.to_numpy(np.int64), tuple(str(c) for c in col.cat.categories)


def _finish_long(df, value_col: np.ndarray, keep: np.ndarray, stats: ParseStats) -> _Columns:
    epochs = _epochs_from_categorical(df["timestamp"])
    ts_bad = ~np.isfinite(epochs)
    stats.malformed += int((ts_bad & keep).sum())
    keep = keep & ~ts_bad
    sys_codes, sys_ids = _codes_of(df["system"])
    sen_codes, sen_ids = _codes_of(df["sensor"])
    # a kept row must name a non-empty system and sensor
    named = (sys_codes >= 0) & (sen_codes >= 0)
    for ids, codes in ((sys_ids, sys_codes), (sen_ids, sen_codes)):
        empties = [i for i, s in enumerate(ids) if not s.strip()]
        if empties:
            named &= ~np.isin(codes, empties)
    stats.malformed += int((keep & ~named).sum())
    keep = keep & named
    return _Columns(
        epochs=epochs[keep].astype(np.int64),
        system_codes=sys_codes[keep],
        system_ids=sys_ids,
        sensor_codes=sen_codes[keep],
        sensor_ids=sen_ids,
        values=value_col[keep],
        stats=stats,
    )


_LONG_FAST_DTYPE = {
    "timestamp": "category",
    "system": "category",
    "sensor": "category",
    "value": np.float64,
}


def _parse_long_columns(stream, stats: ParseStats) -> _Columns:
    header = _header_of(stream)
    missing = [c for c in LONG_HEADER if c not in header]
    if missing:
        raise InputFormatError(f"long csv header lacks required columns: {missing}")
    pos = stream.tell()
    try:
        # exact float parsing; raises on non-numeric garbage in 'value'
        df = pd.read_csv(
            stream,
            usecols=list(LONG_HEADER),
            dtype=_LONG_FAST_DTYPE,
            float_precision="round_trip",
            keep_default_na=False,
            na_values=[""],
            skip_blank_lines=True,
            on_bad_lines="skip",
        )
        values = df["value"].to_numpy(np.float64)
        finite = np.isfinite(values)
        if not finite.all():
            raise ValueError("non-finite values present")
    except UnicodeDecodeError as exc:
        raise InputFormatError(f"input is not valid UTF-8: {exc}") from exc
    except OSError as exc:
        raise InputFormatError(f"unreadable input: {exc}") from exc
    except (ValueError, TypeError, pd.errors.ParserError):
        # dirty file: retake the slower string path for exact counting
        stream.seek(pos)
        return _parse_long_slow(stream, stats)
    stats.rows += len(df)
    return _finish_long(df, values, finite, stats)


def _parse_long_slow(stream, stats: ParseStats) -> _Columns:
    dtype = {"timestamp": "category", "system": "category", "sensor": "category",
             "value": str}
    df = _read_csv(stream, list(LONG_HEADER), dtype)
    stats.rows += len(df)
    keep, values = _parse_values(df["value"], stats)
    full_values = np.zeros(len(df), dtype=np.float64)
    full_values[keep] = values
    return _finish_long(df, full_values, keep, stats)


def _parse_wide_columns(stream, system_id: str, stats: ParseStats) -> _Columns:
    header = _header_of(stream)
    if not header or header[0] != "timestamp" or len(header) < 2:
        raise InputFormatError(
            "wide csv header must be 'timestamp,<sensor>,...' with >= 1 sensor"
        )
    if len(set(header[1:])) != len(header) - 1:
        raise InputFormatError("wide csv header has duplicate sensor names")
    if any(not s.strip() for s in header[1:]):
        raise InputFormatError("wide csv header has an empty sensor name")
    dtype = {c: str for c in header}
    dtype["timestamp"] = "category"
    df = _read_csv(stream, None, dtype)
    sensors = header[1:]
    stats.rows += len(df) * len(sensors)
    epochs = _epochs_from_categorical(df["timestamp"])
    ts_bad = ~np.isfinite(epochs)
    # a bad timestamp invalidates the whole row of sensor cells
    stats.malformed += int(ts_bad.sum()) * len(sensors)
    df = df[~ts_bad]
    epochs = epochs[~ts_bad]
    all_epochs, all_codes, all_values = [], [], []
    for code, sensor in enumerate(sensors):
        keep, values = _parse_values(df[sensor], stats)
        all_epochs.append(epochs[keep])
        all_codes.append(np.full(int(keep.sum()), code, dtype=np.int64))
        all_values.append(values)
    epochs_cat = np.concatenate(all_epochs) if all_epochs else np.empty(0)
    return _Columns(
        epochs=epochs_cat.astype(np.int64),
        system_codes=np.zeros(len(epochs_cat), dtype=np.int64),
        system_ids=(system_id,),
        sensor_codes=np.concatenate(all_codes) if all_codes else np.empty(0, np.int64),
        sensor_ids=tuple(sensors),
        values=np.concatenate(all_values) if all_values else np.empty(0),
        stats=stats,
    )


def merge_columns(parts: list[_Columns], stats: ParseStats) -> _Columns:
    """Concatenate per-file columns onto shared system/sensor code tables."""
    sys_ids = tuple(sorted({s for p in parts for s in p.system_ids}))
    sen_ids = tuple(sorted({s for p in parts for s in p.sensor_ids}))
    sys_index = {s: i for i, s in enumerate(sys_ids)}
    sen_index = {s: i for i, s in enumerate(sen_ids)}
    epochs, sys_codes, sen_codes, values = [], [], [], []
    for p in parts:
        sys_lut = np.array([sys_index[s] for s in p.system_ids], dtype=np.int64)
        sen_lut = np.array([sen_index[s] for s in p.sensor_ids], dtype=np.int64)
        epochs.append(p.epochs)
        sys_codes.append(sys_lut[p.system_codes] if len(p.system_codes) else p.system_codes)
        sen_codes.append(sen_lut[p.sensor_codes] if len(p.sensor_codes) else p.sensor_codes)
        values.append(p.values)
    return _Columns(
        epochs=np.concatenate(epochs) if epochs else np.empty(0, np.int64),
        system_codes=np.concatenate(sys_codes) if sys_codes else np.empty(0, np.int64),
        system_ids=sys_ids,
        sensor_codes=np.concatenate(sen_codes) if sen_codes else np.empty(0, np.int64),
        sensor_ids=sen_ids,
        values=np.concatenate(values) if values else np.empty(0),
        stats=stats,
    )


def parse_columns(source, fmt: str, system_id: str | None = None,
                  stats: ParseStats | None = None) -> _Columns:
    """Columnar parse used by both parse_records and the pipeline."""
    if stats is None:
        stats = ParseStats()
    stream = _open_stream(source)
    if fmt == "long":
        return _parse_long_columns(stream, stats)
    if fmt == "wide":
        if system_id is None:
            raise ContractViolation("wide format requires a system_id (file stem)")
        return _parse_wide_columns(stream, system_id, stats)
    raise ConfigError(f"format: unknown value {fmt!r} (use 'long' or 'wide')")


def parse_records(source, fmt: str, system_id: str | None = None) -> tuple[list[RawRecord], ParseStats]:
    """Parse an input stream into RawRecords, skipping malformed rows.

    Returns the well-formed records plus counters of skipped rows. Rows
    with empty values denote missing data and are dropped silently; rows
    with unparseable fields or non-finite values are counted.
    """
    cols = parse_columns(source, fmt, system_id=system_id)
    if cols.stats.malformed or cols.stats.nonfinite:
        logger.warning(
            "parse: skipped %d malformed and %d non-finite entries",
            cols.stats.malformed,
            cols.stats.nonfinite,
        )
    records = [
        RawRecord(int(t), cols.system_ids[s], cols.sensor_ids[n], float(v))
        for t, s, n, v in zip(
            cols.epochs, cols.system_codes, cols.sensor_codes, cols.values
        )
    ]
    return records, cols.stats


def records_to_columns(records: Sequence[RawRecord]) -> _Columns:
    n = len(records)
    sys_ids = tuple(sorted({r.system_id for r in records}))
    sen_ids = tuple(sorted({r.sensor_id for r in records}))
    sys_index = {s: i for i, s in enumerate(sys_ids)}
    sen_index = {s: i for i, s in enumerate(sen_ids)}
    epochs = np.fromiter((r.timestamp for r in records), np.int64, n)
    sys_codes = np.fromiter((sys_index[r.system_id] for r in records), np.int64, n)
    sen_codes = np.fromiter((sen_index[r.sensor_id] for r in records), np.int64, n)
    values = np.fromiter((r.value for r in records), np.float64, n)
    return _Columns(
        epochs, sys_codes, sys_ids, sen_codes, sen_ids, values, ParseStats(rows=n)
    )


def records_from_frame(frame: SensorFrame) -> list[RawRecord]:
    """Emit one RawRecord per observed cell (inverse of build_frames)."""
    out = []
    t_idx, s_idx = np.nonzero(frame.mask)
    for t, s in zip(t_idx, s_idx):
        out.append(
            RawRecord(
                int(frame.grid[t]),
                frame.system_id,
                frame.sensor_ids[s],
                float(frame.values[t, s]),
            )
        )
    return out


def write_long_csv(frames: Iterable[SensorFrame], path) -> None:
    """Serialize frames as a long-format CSV (observed cells only)."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("timestamp,system,sensor,value\n")
        for frame in frames:
            ts_strings = [format_timestamp(t) for t in frame.grid]
            t_idx, s_idx = np.nonzero(frame.mask)
            rows = [
                f"{ts_strings[t]},{frame.system_id},{frame.sensor_ids[s]},{float(frame.values[t, s])!r}"
                for t, s in zip(t_idx, s_idx)
            ]
            f.write("\n".join(rows))
            if rows:
                f.write("\n")


def _aggregate_bins(bins, sensor_codes, values, T, n_sensors, aggregator):
    """Aggregate raw samples per (grid bin, sensor) cell; returns values+mask."""
    out = np.zeros((T, n_sensors), dtype=np.float64)
    mask = np.zeros((T, n_sensors), dtype=bool)
    if len(bins) == 0:
        return out, mask
    order = np.lexsort((values, bins, sensor_codes))
    b = bins[order]
    sc = sensor_codes[order]
    v = values[order]
    key = sc.astype(np.int64) * np.int64(T) + b
    starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    counts = np.diff(np.r_[starts, len(key)])
    if aggregator == "median":
        mid = starts + counts // 2
        odd = counts % 2 == 1
        agg = np.where(odd, v[mid], 0.5 * (v[np.maximum(mid - 1, 0)] + v[mid]))
    else:
        sums = np.add.reduceat(v, starts)
        agg = sums / counts
    cell_b = b[starts]
    cell_s = sc[starts]
    out[cell_b, cell_s] = agg
    mask[cell_b, cell_s] = True
    return out, mask


def build_frames(records, cfg: IngestConfig) -> list[SensorFrame]:
    """Grid raw records into one SensorFrame per system.

    The sensor universe is the sorted union of sensors across all systems;
    systems missing a sensor carry a fully masked column so downstream
    comparisons always see an identical sensor ordering. Each grid cell
    aggregates the raw samples falling in [t, t+step) with the configured
    aggregator; empty cells are masked.
    """
    cfg.validate()
    cols = records if isinstance(records, _Columns) else records_to_columns(records)
    if len(cols.epochs) == 0:
        raise ContractViolation("build_frames: no records")
    step = int(cfg.resample_interval)
    # canonical orderings: sorted sensor union, systems in sorted id order
    sensor_order = np.argsort(np.array(cols.sensor_ids))
    sensor_ids = tuple(cols.sensor_ids[i] for i in sensor_order)
    sensor_lut = np.empty(len(cols.sensor_ids), dtype=np.int64)
    sensor_lut[sensor_order] = np.arange(len(sensor_order))
    sensor_codes = sensor_lut[cols.sensor_codes]
    # one sort groups the rows by system; sorted-id order via a second lut
    system_order = np.argsort(np.array(cols.system_ids))
    system_lut = np.empty(len(cols.system_ids), dtype=np.int64)
    system_lut[system_order] = np.arange(len(system_order))
    ordered_ids = [cols.system_ids[i] for i in system_order]
    ranks = system_lut[cols.system_codes]
    row_order = np.argsort(ranks, kind="stable")
    ranks_sorted = ranks[row_order]
    boundaries = np.flatnonzero(np.r_[True, ranks_sorted[1:] != ranks_sorted[:-1]])
    segments = list(zip(boundaries, np.r_[boundaries[1:], len(ranks_sorted)]))
    frames = []
    for start, end in segments:
        system = ordered_ids[int(ranks_sorted[start])]
        sel = row_order[start:end]
        epochs = cols.epochs[sel]
        codes = sensor_codes[sel]
        vals = cols.values[sel]
        g0 = (epochs.min() // step) * step
        gN = (epochs.max() // step) * step
        T = int((gN - g0) // step) + 1
        bins = (epochs - g0) // step
        values, mask = _aggregate_bins(bins, codes, vals, T, len(sensor_ids), cfg.aggregator)
        grid = g0 + step * np.arange(T, dtype=np.int64)
        frames.append(
            SensorFrame(
                system_id=system,
                sensor_ids=sensor_ids,
                grid=grid,
                values=values,
                mask=mask,
                step=step,
            )
        )
    return frames


def despike(frame: SensorFrame, window: int) -> SensorFrame:
    """Replace each observed cell by the masked rolling median of its column.

    The window is centered and truncated at the edges; masked cells stay
    masked and never contribute to a median.
    """
    if window < 3 or window % 2 == 0:
        raise ContractViolation("despike: window must be an odd integer >= 3")
    filtered = _core.rolling_median_masked(frame.values, frame.mask, window)
    return SensorFrame(
        system_id=frame.system_id,
        sensor_ids=frame.sensor_ids,
        grid=frame.grid,
        values=filtered,
        mask=frame.mask.copy(),
        step=frame.step,
    )


def fill_gaps(frame: SensorFrame, max_gap: int) -> SensorFrame:
    """Linearly interpolate masked runs of length <= max_gap.

    Only interior runs bounded by observed cells on both sides are filled;
    boundary runs and longer runs stay masked.
    """
    if max_gap < 0:
        raise ContractViolation("fill_gaps: max_gap must be >= 0")
    values = frame.values.copy()
    mask = frame.mask.copy()
    if max_gap > 0:
        T = frame.n_samples
        for c in range(frame.n_sensors):
            col_mask = frame.mask[:, c]
            obs_idx = np.flatnonzero(col_mask)
            if len(obs_idx) < 2:
                continue
            gaps = np.flatnonzero(np.diff(obs_idx) > 1)
            for g in gaps:
                a, b = obs_idx[g], obs_idx[g + 1]
                run = b - a - 1
                if run > max_gap:
                    continue
                va, vb = values[a, c], values[b, c]
                ks = np.arange(1, run + 1)
                values[a + ks, c] = va + (vb - va) * (ks / (b - a))
                mask[a + ks, c] = True
    return SensorFrame(
        system_id=frame.system_id,
        sensor_ids=frame.sensor_ids,
        grid=frame.grid,
        values=values,
        mask=mask,
        step=frame.step,
    )


def coverage_check(frame: SensorFrame, min_coverage: float) -> list[tuple[str, float]]:
    """Observed fraction per sensor column (all columns, low ones flagged upstream).

    Columns below min_coverage are reported for warnings only; they are
    never dropped, since downstream similarity handles sparse columns.
    """
    T = frame.n_samples
    fractions = frame.mask.sum(axis=0) / float(T)
    out = list(zip(frame.sensor_ids, (float(f) for f in fractions)))
    low = [(s, f) for s, f in out if f < min_coverage]
    for s, f in low:
        logger.warning(
            "coverage: system %s sensor %s observed fraction %.3f < %.3f",
            frame.system_id,
            s,
            f,
            min_coverage,
        )
    return out


def clean_frame(frame: SensorFrame, cfg: IngestConfig) -> SensorFrame:
    """Standard cleaning order: despike, then fill short gaps."""
    return fill_gaps(despike(frame, cfg.despike_window), cfg.max_gap_fill)
