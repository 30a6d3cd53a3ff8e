"""Soil-matric-potential time series: CSV ingest, subsampling, synthesis.

CSV schema (header required):

    timestamp_iso8601,smp_kpa

Timestamps are ISO-8601 UTC; SMP values are kPa and must be <= 0
(more negative = drier soil).  Gaps in the nominal sampling grid are
reported, not interpolated (interpolation invents data); a hold-last
fill is available behind an explicit flag.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone

import numpy as np

__all__ = [
    "SmpSeries",
    "SynthParams",
    "SeriesFormatError",
    "load_csv",
    "save_csv",
    "subsample",
    "generate_synthetic",
]


class SeriesFormatError(ValueError):
    """Malformed or invariant-violating series input."""


@dataclass(frozen=True)
class SmpSeries:
    timestamps: tuple[datetime, ...]
    values_kpa: tuple[float, ...]
    interval: timedelta = timedelta(minutes=15)
    crop: str = ""
    depth_cm: float = 0.0

    def __post_init__(self):
        if len(self.timestamps) != len(self.values_kpa):
            raise SeriesFormatError("timestamps and values must align")
        for a, b in zip(self.timestamps, self.timestamps[1:]):
            if b <= a:
                raise SeriesFormatError(f"timestamps not strictly increasing at {b}")
        for t, v in zip(self.timestamps, self.values_kpa):
            if v > 0:
                raise SeriesFormatError(f"positive SMP {v} kPa at {t}")

    def __len__(self) -> int:
        return len(self.timestamps)

    def gaps(self) -> list[datetime]:
        """Nominal-grid slots with no sample (start of each missing slot)."""
        out = []
        tol = self.interval / 2
        for a, b in zip(self.timestamps, self.timestamps[1:]):
            expect = a + self.interval
            while b - expect > tol:
                out.append(expect)
                expect += self.interval
        return out

    def fill_gaps_hold(self) -> "SmpSeries":
        """Hold-last-value fill onto the nominal grid (opt-in)."""
        ts: list[datetime] = []
        vs: list[float] = []
        tol = self.interval / 2
        for (a, va), b in zip(
            zip(self.timestamps, self.values_kpa), self.timestamps[1:] + (None,)
        ):
            ts.append(a)
            vs.append(va)
            if b is None:
                break
            expect = a + self.interval
            while b - expect > tol:
                ts.append(expect)
                vs.append(va)
                expect += self.interval
        return replace(self, timestamps=tuple(ts), values_kpa=tuple(vs))


@dataclass(frozen=True)
class SynthParams:
    drydown_rate: float = -4.0  # kPa/day, negative = drying trend
    irrigation_jump: float = 30.0  # kPa recovery toward wet, > 0
    noise_sd: float = 0.5  # kPa
    diurnal_amp: float = 1.0  # kPa
    seed: int = 0
    days: int = 30
    samples_per_day: int = 96  # 15-min grid
    mode: str = "closed"  # "closed" | "open" | "none"
    irrigation_every_days: float = 7.0  # open-loop schedule
    response_delay_days: float = 1.0  # lag from trigger to rebound at the sensor
    start_kpa: float | None = None  # default: midway between th_off and ceil

    def __post_init__(self):
        if self.mode not in ("closed", "open", "none"):
            raise ValueError(f"bad mode {self.mode!r}")
        if self.drydown_rate >= 0:
            raise ValueError("drydown_rate must be < 0 (toward dryness)")
        if self.irrigation_jump <= 0:
            raise ValueError("irrigation_jump must be > 0 (toward wetness)")
        if self.noise_sd < 0 or self.diurnal_amp < 0:
            raise ValueError("noise_sd and diurnal_amp must be >= 0")
        if self.days <= 0 or self.samples_per_day <= 0:
            raise ValueError("days and samples_per_day must be > 0")
        if self.response_delay_days < 0:
            raise ValueError("response_delay_days must be >= 0")


def load_csv(path) -> SmpSeries:
    """Parse and validate a `timestamp_iso8601,smp_kpa` file."""
    ts: list[datetime] = []
    vs: list[float] = []
    with open(path) as f:
        header = f.readline().strip()
        if header != "timestamp_iso8601,smp_kpa":
            raise SeriesFormatError(f"{path}: bad header {header!r}")
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise SeriesFormatError(f"{path}:{lineno}: expected 2 fields, got {len(parts)}")
            try:
                t = datetime.fromisoformat(parts[0])
                v = float(parts[1])
            except ValueError as exc:
                raise SeriesFormatError(f"{path}:{lineno}: {exc}") from exc
            if t.tzinfo is None:
                t = t.replace(tzinfo=timezone.utc)
            if v > 0:
                raise SeriesFormatError(f"{path}:{lineno}: positive SMP {v} kPa")
            if ts and t <= ts[-1]:
                raise SeriesFormatError(f"{path}:{lineno}: non-monotone timestamp {parts[0]}")
            ts.append(t)
            vs.append(v)
    return SmpSeries(tuple(ts), tuple(vs))


def save_csv(series: SmpSeries, path) -> None:
    with open(path, "w") as f:
        f.write("timestamp_iso8601,smp_kpa\n")
        for t, v in zip(series.timestamps, series.values_kpa):
            f.write(f"{t.isoformat()},{v:.6g}\n")


def subsample(series: SmpSeries, stride: int) -> SmpSeries:
    """Keep every stride-th sample, first sample always kept."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if stride == 1:
        return series
    return replace(
        series,
        timestamps=series.timestamps[::stride],
        values_kpa=series.values_kpa[::stride],
        interval=series.interval * stride,
    )


def generate_synthetic(params: SynthParams, profile) -> SmpSeries:
    """Seeded sawtooth drydown trace with irrigation rebounds.

    Closed-loop mode: a rebound of `irrigation_jump` kPa is applied over
    the samples following any crossing of the profile's th_on (the trace
    mimics a valve opening).  Values clamp to the profile's mapped range.
    """
    rng = np.random.default_rng(params.seed)
    n = params.days * params.samples_per_day
    dt_day = 1.0 / params.samples_per_day

    start = params.start_kpa
    if start is None:
        start = (profile.th_off + profile.smp_ceil) / 2.0
    t0 = datetime(2024, 1, 1, tzinfo=timezone.utc)
    interval = timedelta(days=dt_day)
    sched = max(int(round(params.irrigation_every_days * params.samples_per_day)), 1)

    # Water released at the valve reaches the sensor's depth only after
    # a transport lag; until then the trace keeps drying past the trigger.
    delay = int(round(params.response_delay_days * params.samples_per_day))

    vals = np.empty(n)
    v = start
    rebound_left = 0.0
    rebound_at: int | None = None
    for k in range(n):
        v += params.drydown_rate * dt_day
        if rebound_at is not None and k >= rebound_at:
            rebound_left = params.irrigation_jump
            rebound_at = None
        if rebound_left > 0.0:
            step = params.irrigation_jump * dt_day / 0.5  # rebound over ~half a day
            step = min(step, rebound_left)
            v += step
            rebound_left -= step
        v_obs = (
            v
            + params.diurnal_amp * np.sin(2.0 * np.pi * k * dt_day)
            + rng.normal(0.0, params.noise_sd)
        )
        v_obs = min(max(v_obs, profile.smp_floor), profile.smp_ceil)
        vals[k] = v_obs
        if rebound_left <= 0.0 and rebound_at is None:
            if params.mode == "closed" and v_obs < profile.th_on:
                rebound_at = k + 1 + delay
            elif params.mode == "open" and k > 0 and k % sched == 0:
                rebound_at = k + 1
        v = min(max(v, profile.smp_floor), profile.smp_ceil)

    return SmpSeries(
        timestamps=tuple(t0 + k * interval for k in range(n)),
        values_kpa=tuple(float(x) for x in vals),
        interval=interval,
        crop=profile.name,
    )
