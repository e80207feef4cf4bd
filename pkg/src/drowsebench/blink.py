"""Eye-aspect-ratio blink detection and per-blink feature extraction.

The eye aspect ratio (EAR) of six eye landmarks p1..p6 is

    ear = (|p2 - p6| + |p3 - p5|) / (2 |p1 - p4|)

with p1/p4 the horizontal corners.  It is invariant under translation,
rotation and uniform scaling, sits around 0.2-0.4 for an open eye and
drops toward zero when the eye closes.  A blink is a run of consecutive
below-threshold samples; its features (amplitude, closing velocity,
duration, recent frequency) are normalized against a per-subject
baseline built from the first third of the blinks.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

EAR_CSV_HEADER = ["frame_id", "ts_us", "ear"]
FEATURES_CSV_HEADER = ["blink_id", "amplitude", "velocity", "duration_s", "freq_per_min"]

FEATURE_NAMES = ("amplitude", "velocity", "duration_s", "freq_per_min")

Point = tuple[float, float]


class DegenerateEyeError(ValueError):
    """The horizontal eye corners coincide, so the EAR is undefined."""


@dataclass(frozen=True)
class EyeLandmarks:
    """Six eye landmarks: p1/p4 horizontal corners, p2/p3 top, p5/p6 bottom."""

    p1: Point
    p2: Point
    p3: Point
    p4: Point
    p5: Point
    p6: Point

    @classmethod
    def from_points(cls, points: Sequence[Point]) -> "EyeLandmarks":
        if len(points) != 6:
            raise ValueError(f"expected 6 landmarks, got {len(points)}")
        return cls(*[(float(x), float(y)) for x, y in points])


def _dist(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def eye_ear(eye: EyeLandmarks) -> float:
    """EAR of a single eye."""
    horizontal = _dist(eye.p1, eye.p4)
    if horizontal == 0.0:
        raise DegenerateEyeError("p1 and p4 coincide")
    return (_dist(eye.p2, eye.p6) + _dist(eye.p3, eye.p5)) / (2.0 * horizontal)


def ear(left: EyeLandmarks, right: EyeLandmarks) -> float:
    """Mean EAR of both eyes."""
    return (eye_ear(left) + eye_ear(right)) / 2.0


@dataclass(frozen=True)
class EarSample:
    frame_id: int
    ts_us: int
    ear: float

    def __post_init__(self):
        if self.ear < 0:
            raise ValueError(f"ear must be non-negative, got {self.ear}")


@dataclass(frozen=True)
class Blink:
    """One detected blink, in frame ids of the source series.

    start/end are the nearest at-or-above-threshold samples bracketing
    the closed run (clamped to the series edges), apex is the earliest
    minimum-EAR frame of the run, and baseline_ear is the median EAR of
    up to 10 samples preceding start.
    """

    start_frame: int
    apex_frame: int
    end_frame: int
    min_ear: float
    baseline_ear: float


@dataclass(frozen=True)
class BlinkDetectionConfig:
    close_threshold: float = 0.2
    min_closed_frames: int = 2

    def __post_init__(self):
        if self.close_threshold <= 0:
            raise ValueError(f"close_threshold must be positive, got {self.close_threshold}")
        if self.min_closed_frames < 1:
            raise ValueError(f"min_closed_frames must be >= 1, got {self.min_closed_frames}")


def detect_blinks(
    series: Sequence[EarSample],
    config: BlinkDetectionConfig = BlinkDetectionConfig(),
) -> list[Blink]:
    """Find blinks as maximal runs of below-threshold samples.

    A run must span at least ``min_closed_frames`` samples with
    ``ear < close_threshold``.  Returned blinks are sorted and
    non-overlapping by construction.
    """
    if not series:
        raise ValueError("empty EAR series")
    values = [s.ear for s in series]
    n = len(values)

    blinks: list[Blink] = []
    i = 0
    while i < n:
        if values[i] >= config.close_threshold:
            i += 1
            continue
        j = i
        while j + 1 < n and values[j + 1] < config.close_threshold:
            j += 1
        if j - i + 1 >= config.min_closed_frames:
            start = max(i - 1, 0)
            end = min(j + 1, n - 1)
            apex = min(range(i, j + 1), key=lambda k: (values[k], k))
            min_ear = values[apex]
            preceding = values[max(0, start - 10) : start]
            baseline = statistics.median(preceding) if preceding else values[start]
            blinks.append(
                Blink(
                    start_frame=series[start].frame_id,
                    apex_frame=series[apex].frame_id,
                    end_frame=series[end].frame_id,
                    min_ear=min_ear,
                    baseline_ear=max(baseline, min_ear),
                )
            )
        i = j + 1
    return blinks


@dataclass(frozen=True)
class BlinkFeatures:
    """Per-blink features: EAR units, seconds, blinks per minute."""

    amplitude: float
    velocity: float
    duration_s: float
    freq_per_min: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.amplitude, self.velocity, self.duration_s, self.freq_per_min)


def extract_features(
    blink: Blink,
    series: Sequence[EarSample],
    fps: float,
    recent_apex_times_s: Sequence[float] = (),
) -> BlinkFeatures:
    """Compute one blink's features from its source series.

    ``recent_apex_times_s`` holds apex times (seconds, ``frame / fps``)
    of earlier blinks; frequency counts those within the trailing 60 s
    window plus this blink itself.
    """
    if fps <= 0:
        raise ValueError(f"fps must be positive, got {fps}")
    index_of = {s.frame_id: k for k, s in enumerate(series)}
    try:
        start = index_of[blink.start_frame]
        apex = index_of[blink.apex_frame]
    except KeyError as exc:
        raise ValueError(f"blink frame {exc} not present in series") from None

    amplitude = blink.baseline_ear - blink.min_ear
    drops = [series[k].ear - series[k + 1].ear for k in range(start, apex)]
    velocity = max(drops, default=0.0) * fps
    duration_s = (blink.end_frame - blink.start_frame + 1) / fps

    apex_time_s = blink.apex_frame / fps
    recent = sum(1 for t in recent_apex_times_s if apex_time_s - 60.0 < t <= apex_time_s)
    return BlinkFeatures(
        amplitude=amplitude,
        velocity=velocity,
        duration_s=duration_s,
        freq_per_min=float(recent + 1),
    )


def extract_all_features(
    blinks: Sequence[Blink], series: Sequence[EarSample], fps: float
) -> list[BlinkFeatures]:
    """Features for a chronological list of blinks from one series."""
    features = []
    apex_times: list[float] = []
    for blink in blinks:
        features.append(extract_features(blink, series, fps, apex_times))
        apex_times.append(blink.apex_frame / fps)
    return features


@dataclass(frozen=True)
class BaselineStats:
    """Alert-phase feature statistics used for normalization.

    Built from the first third (rounded up) of the blinks, which the
    calibration protocol guarantees were recorded while alert.
    """

    mean: BlinkFeatures
    std: BlinkFeatures
    source_count: int


def baseline_stats(features: Sequence[BlinkFeatures]) -> BaselineStats:
    if not features:
        raise ValueError("no features to build a baseline from")
    head = features[: math.ceil(len(features) / 3)]
    columns = list(zip(*(f.as_tuple() for f in head)))
    means = [statistics.fmean(col) for col in columns]
    stds = [statistics.pstdev(col) for col in columns]
    return BaselineStats(
        mean=BlinkFeatures(*means), std=BlinkFeatures(*stds), source_count=len(head)
    )


@dataclass(frozen=True)
class NormalizedFeatures:
    """Z-scores of one blink's features against the alert baseline.

    Features whose baseline std is zero normalize to 0 and are listed
    in ``degenerate``.
    """

    amplitude: float
    velocity: float
    duration_s: float
    freq_per_min: float
    degenerate: tuple[str, ...] = ()


def normalize_features(features: BlinkFeatures, baseline: BaselineStats) -> NormalizedFeatures:
    scores = []
    degenerate = []
    for name, value, mean, std in zip(
        FEATURE_NAMES, features.as_tuple(), baseline.mean.as_tuple(), baseline.std.as_tuple()
    ):
        if std == 0:
            scores.append(0.0)
            degenerate.append(name)
        else:
            scores.append((value - mean) / std)
    return NormalizedFeatures(*scores, degenerate=tuple(degenerate))


def denormalize_features(normalized: NormalizedFeatures, baseline: BaselineStats) -> BlinkFeatures:
    """Inverse of normalize_features for non-degenerate baselines."""
    values = []
    for name, score, mean, std in zip(
        FEATURE_NAMES,
        (normalized.amplitude, normalized.velocity, normalized.duration_s,
         normalized.freq_per_min),
        baseline.mean.as_tuple(),
        baseline.std.as_tuple(),
    ):
        if name in normalized.degenerate:
            values.append(mean)
        else:
            values.append(mean + score * std)
    return BlinkFeatures(*values)


def write_ear_csv(series: Iterable[EarSample], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EAR_CSV_HEADER)
        for s in series:
            writer.writerow([s.frame_id, s.ts_us, s.ear])


def read_ear_csv(path: str | Path) -> list[EarSample]:
    series = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != EAR_CSV_HEADER:
            raise ValueError(f"unexpected header {reader.fieldnames} in {path}")
        for row in reader:
            series.append(
                EarSample(
                    frame_id=int(row["frame_id"]),
                    ts_us=int(row["ts_us"]),
                    ear=float(row["ear"]),
                )
            )
    return series


def write_features_csv(features: Iterable[BlinkFeatures], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FEATURES_CSV_HEADER)
        for blink_id, f in enumerate(features):
            writer.writerow([blink_id, f.amplitude, f.velocity, f.duration_s, f.freq_per_min])
