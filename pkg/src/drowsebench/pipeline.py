"""Staged frame-processing pipeline and its queueing simulator.

A frame passes through three stages in fixed order: face detection,
landmark detection, blink detection.  The pipeline timestamps the frame
when processing starts and after each stage, which is all the
instrumentation needed to recover per-stage durations.

Stages are pluggable: a real stage does actual work under a wall clock,
a synthetic stage advances a virtual clock by a sampled service time.
``simulate_session`` runs synthetic stages behind a single-server FIFO
queue fed at a fixed frame rate, entirely on the virtual clock, so a
multi-minute session simulates in milliseconds and is exactly
reproducible from its seed.
"""

from __future__ import annotations

import csv
import json
import math
import random
import statistics
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Mapping

TIMING_CSV_HEADER = ["frame_id", "face_ms", "landmark_ms", "blink_ms", "total_ms"]


class StageName(str, Enum):
    FACE = "face"
    LANDMARK = "landmark"
    BLINK = "blink"


STAGE_ORDER = (StageName.FACE, StageName.LANDMARK, StageName.BLINK)


class Distribution(str, Enum):
    DETERMINISTIC = "deterministic"
    TRUNC_NORMAL = "trunc_normal"


class StageFailure(Exception):
    """Raised by a stage to signal that it could not process the frame."""


@dataclass(frozen=True)
class StageProfile:
    """Service-time distribution of one synthetic stage, in milliseconds.

    ``mean_ms``/``std_ms`` are the moments of the sampled distribution
    itself, so long-run averages converge to ``mean_ms`` exactly.
    """

    name: StageName
    mean_ms: float
    std_ms: float = 0.0
    dist: Distribution = Distribution.TRUNC_NORMAL

    def __post_init__(self):
        if self.mean_ms <= 0:
            raise ValueError(f"stage {self.name}: mean_ms must be positive, got {self.mean_ms}")
        if self.std_ms < 0:
            raise ValueError(f"stage {self.name}: std_ms must be non-negative, got {self.std_ms}")


@dataclass(frozen=True)
class TimingRecord:
    """Timestamps (microseconds) of one frame's trip through the stages.

    ``recv_ts_us`` is taken when processing starts; each ``*_done``
    timestamp is taken right after its stage.  If a stage fails, it is
    named in ``failed_stage`` and all later timestamps are None.
    """

    frame_id: int
    recv_ts_us: float
    face_done_ts_us: float | None
    landmark_done_ts_us: float | None
    blink_done_ts_us: float | None
    failed_stage: StageName | None = None

    @property
    def complete(self) -> bool:
        return self.blink_done_ts_us is not None

    @property
    def face_ms(self) -> float:
        return (self.face_done_ts_us - self.recv_ts_us) / 1000.0

    @property
    def landmark_ms(self) -> float:
        return (self.landmark_done_ts_us - self.face_done_ts_us) / 1000.0

    @property
    def blink_ms(self) -> float:
        return (self.blink_done_ts_us - self.landmark_done_ts_us) / 1000.0

    @property
    def total_ms(self) -> float:
        return (self.blink_done_ts_us - self.recv_ts_us) / 1000.0


class VirtualClock:
    """Monotone simulated clock in microseconds."""

    def __init__(self, start_us: float = 0.0):
        self._now_us = float(start_us)

    def now_us(self) -> float:
        return self._now_us

    def advance_us(self, delta_us: float) -> None:
        if delta_us < 0:
            raise ValueError(f"cannot advance by {delta_us} us")
        self._now_us += delta_us

    def advance_to_us(self, ts_us: float) -> None:
        if ts_us > self._now_us:
            self._now_us = ts_us


class WallClock:
    """Real monotonic clock in microseconds."""

    def now_us(self) -> float:
        return time.monotonic_ns() / 1000.0


def _norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _norm_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def clamped_normal_moments(a: float, b: float) -> tuple[float, float]:
    """Mean and std of max(N(a, b^2), 0)."""
    if b == 0:
        m = max(a, 0.0)
        return m, 0.0
    alpha = a / b
    mean = a * _norm_cdf(alpha) + b * _norm_pdf(alpha)
    second = (a * a + b * b) * _norm_cdf(alpha) + a * b * _norm_pdf(alpha)
    return mean, math.sqrt(max(second - mean * mean, 0.0))


def clamped_normal_params(mean: float, std: float) -> tuple[float, float]:
    """Gaussian (a, b) such that max(N(a, b^2), 0) has the given moments.

    Clamping negative draws to zero shifts the moments when std is large
    relative to mean, so the underlying Gaussian is solved for rather
    than used as-is; with std << mean the answer is (mean, std).
    """
    if mean <= 0:
        raise ValueError(f"mean must be positive, got {mean}")
    if std < 0:
        raise ValueError(f"std must be non-negative, got {std}")
    if std == 0 or mean / std >= 8.0:
        return mean, std

    target = std / mean

    def ratio(alpha: float) -> float:
        g = alpha * _norm_cdf(alpha) + _norm_pdf(alpha)
        m2 = (alpha * alpha + 1.0) * _norm_cdf(alpha) + alpha * _norm_pdf(alpha)
        return math.sqrt(max(m2 - g * g, 0.0)) / g

    lo, hi = -4.0, 8.0
    if target >= ratio(lo):
        raise ValueError(f"std/mean ratio {target:.3f} too large for a clamped normal")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ratio(mid) > target:
            lo = mid
        else:
            hi = mid
    alpha = 0.5 * (lo + hi)
    b = mean / (alpha * _norm_cdf(alpha) + _norm_pdf(alpha))
    return alpha * b, b


def make_sampler(profile: StageProfile, rng: random.Random) -> Callable[[], float]:
    """Service-time sampler (milliseconds) for one stage profile."""
    if profile.dist is Distribution.DETERMINISTIC:
        return lambda: profile.mean_ms
    a, b = clamped_normal_params(profile.mean_ms, profile.std_ms)
    return lambda: max(0.0, rng.gauss(a, b))


class SyntheticStage:
    """Stage that consumes virtual time instead of doing work."""

    def __init__(self, profile: StageProfile, clock: VirtualClock, rng: random.Random):
        self.name = profile.name
        self.profile = profile
        self._clock = clock
        self._sample = make_sampler(profile, rng)

    def __call__(self, frame: object) -> None:
        self._clock.advance_us(self._sample() * 1000.0)


class FramePipeline:
    """Runs the three stages in order, timestamping after each one."""

    def __init__(self, stages: Mapping[StageName, Callable[[object], None]], clock):
        missing = [name.value for name in STAGE_ORDER if name not in stages]
        if missing:
            raise ValueError(f"missing stages: {', '.join(missing)}")
        self.stages = dict(stages)
        self.clock = clock

    def process_frame(self, frame_id: int, frame: object = None) -> TimingRecord:
        recv = self.clock.now_us()
        done: dict[StageName, float] = {}
        failed = None
        for name in STAGE_ORDER:
            try:
                self.stages[name](frame)
            except StageFailure:
                failed = name
                break
            done[name] = self.clock.now_us()
        return TimingRecord(
            frame_id=frame_id,
            recv_ts_us=recv,
            face_done_ts_us=done.get(StageName.FACE),
            landmark_done_ts_us=done.get(StageName.LANDMARK),
            blink_done_ts_us=done.get(StageName.BLINK),
            failed_stage=failed,
        )


@dataclass(frozen=True)
class StatPair:
    mean_ms: float
    std_ms: float


@dataclass(frozen=True)
class TimingSummary:
    count: int
    face: StatPair
    landmark: StatPair
    blink: StatPair
    total: StatPair


def summarize_timings(records: Iterable[TimingRecord]) -> TimingSummary:
    """Per-stage and total duration statistics over complete records."""
    complete = [r for r in records if r.complete]
    if not complete:
        raise ValueError("no complete records to summarize")

    def stat(values: list[float]) -> StatPair:
        return StatPair(statistics.fmean(values), statistics.pstdev(values))

    return TimingSummary(
        count=len(complete),
        face=stat([r.face_ms for r in complete]),
        landmark=stat([r.landmark_ms for r in complete]),
        blink=stat([r.blink_ms for r in complete]),
        total=stat([r.total_ms for r in complete]),
    )


@dataclass(frozen=True)
class StabilityVerdict:
    """Whether a stage set keeps up with the frame rate.

    The queue is stable when the mean service time fits in the frame
    period; otherwise the backlog grows at ``fps - 1000 / mean`` frames
    per second.  ``stable`` is exactly ``backlog_growth_rate == 0``.
    """

    stable: bool
    backlog_growth_rate: float
    service_ms: float
    budget_ms: float


def queue_stability(profiles: Iterable[StageProfile], fps: float) -> StabilityVerdict:
    if fps <= 0:
        raise ValueError(f"fps must be positive, got {fps}")
    service_ms = sum(p.mean_ms for p in profiles)
    budget_ms = 1000.0 / fps
    growth = max(0.0, fps - 1000.0 / service_ms)
    return StabilityVerdict(
        stable=growth == 0.0,
        backlog_growth_rate=growth,
        service_ms=service_ms,
        budget_ms=budget_ms,
    )


@dataclass(frozen=True)
class SessionTrace:
    """Outcome of a simulated fixed-rate session.

    Records cover every arrived frame, including ones still queued when
    the session clock ran out; ``completed``/``backlog`` split them at
    the session end.  ``queue_length_at_arrival[k]`` counts frames still
    in the system (queued or in service) when frame k arrived.
    """

    fps: float
    duration_s: float
    records: tuple[TimingRecord, ...]
    queue_length_at_arrival: tuple[int, ...]
    dropped: int = 0

    @property
    def arrived(self) -> int:
        return len(self.records)

    @property
    def completed(self) -> int:
        end_us = self.duration_s * 1e6
        return sum(1 for r in self.records if r.blink_done_ts_us <= end_us)

    @property
    def backlog(self) -> int:
        return self.arrived - self.completed

    @property
    def max_queue_length(self) -> int:
        return max(self.queue_length_at_arrival, default=0)


def simulate_session(
    fps: float,
    duration_s: float,
    profiles: Iterable[StageProfile],
    seed: int,
) -> SessionTrace:
    """Simulate a single-worker FIFO pipeline fed at ``fps`` for ``duration_s``.

    Frames arrive every 1/fps on the virtual clock and are served in
    order by one worker running the three synthetic stages.  The same
    seed always yields the same trace.
    """
    if fps <= 0:
        raise ValueError(f"fps must be positive, got {fps}")
    if duration_s <= 0:
        raise ValueError(f"duration_s must be positive, got {duration_s}")

    by_name = {p.name: p for p in profiles}
    rng = random.Random(seed)
    clock = VirtualClock()
    pipeline = FramePipeline(
        {name: SyntheticStage(by_name[name], clock, rng) for name in STAGE_ORDER}, clock
    )

    n_frames = round(fps * duration_s)
    period_us = 1e6 / fps
    records: list[TimingRecord] = []
    queue_lengths: list[int] = []
    finished = 0  # frames whose service ended at or before the current arrival
    for k in range(n_frames):
        arrival_us = k * period_us
        while finished < k and records[finished].blink_done_ts_us <= arrival_us:
            finished += 1
        queue_lengths.append(k - finished)
        clock.advance_to_us(arrival_us)
        records.append(pipeline.process_frame(k))

    return SessionTrace(
        fps=fps,
        duration_s=duration_s,
        records=tuple(records),
        queue_length_at_arrival=tuple(queue_lengths),
    )


def load_stage_sets(path: str | Path) -> dict[str, list[StageProfile]]:
    """Load stage profiles from a JSON file.

    Accepts either a single stage set ``{"stages": [...]}`` (returned
    under the key "default") or a device file mapping resolutions to
    stage sets: ``{"device": ..., "resolutions": {"320x240": {"stages":
    [...]}, ...}}``.
    """
    with open(path) as fh:
        doc = json.load(fh)

    def parse_set(obj) -> list[StageProfile]:
        profiles = [
            StageProfile(
                name=StageName(entry["name"]),
                mean_ms=float(entry["mean_ms"]),
                std_ms=float(entry.get("std_ms", 0.0)),
                dist=Distribution(entry.get("dist", "trunc_normal")),
            )
            for entry in obj["stages"]
        ]
        names = [p.name for p in profiles]
        if sorted(names, key=STAGE_ORDER.index) != list(STAGE_ORDER) or len(set(names)) != 3:
            raise ValueError(f"stage set must define face, landmark and blink once each: {names}")
        return profiles

    if "stages" in doc:
        return {"default": parse_set(doc)}
    if "resolutions" in doc:
        return {res: parse_set(obj) for res, obj in doc["resolutions"].items()}
    raise ValueError(f"{path}: expected a 'stages' or 'resolutions' key")


def average_stage_set(stage_sets: Mapping[str, list[StageProfile]]) -> list[StageProfile]:
    """Per-stage average of several stage sets (mean of means and of stds)."""
    if not stage_sets:
        raise ValueError("no stage sets to average")
    sets = list(stage_sets.values())
    averaged = []
    for idx, name in enumerate(STAGE_ORDER):
        rows = [sorted(s, key=lambda p: STAGE_ORDER.index(p.name))[idx] for s in sets]
        averaged.append(
            StageProfile(
                name=name,
                mean_ms=statistics.fmean(p.mean_ms for p in rows),
                std_ms=statistics.fmean(p.std_ms for p in rows),
                dist=rows[0].dist,
            )
        )
    return averaged


def write_timings_csv(records: Iterable[TimingRecord], path: str | Path) -> None:
    """Export per-frame stage durations (complete records only)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMING_CSV_HEADER)
        for r in records:
            if not r.complete:
                continue
            writer.writerow([r.frame_id, r.face_ms, r.landmark_ms, r.blink_ms, r.total_ms])


def read_timings_csv(path: str | Path) -> list[dict[str, float]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TIMING_CSV_HEADER:
            raise ValueError(f"unexpected header {reader.fieldnames} in {path}")
        for row in reader:
            rows.append(
                {
                    "frame_id": int(row["frame_id"]),
                    "face_ms": float(row["face_ms"]),
                    "landmark_ms": float(row["landmark_ms"]),
                    "blink_ms": float(row["blink_ms"]),
                    "total_ms": float(row["total_ms"]),
                }
            )
    return rows
