"""Kinematic handwriting features computed from on-surface movement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cohort_io import Recording
from .errors import NoStrokes, SeriesTooShort, ZeroDuration
from .signal_prep import (
    DEFAULT_SCALE_MM,
    DEFAULT_SPAN,
    MIN_STROKE_SAMPLES,
    SERIES_FIELDS,
    DerivedSeries,
    Stroke,
    derive_kinematics,
    discarded_runs,
    segment_strokes,
)


def stroke_speed(stroke: Stroke) -> float:
    """Path length of the stroke divided by its duration, in mm/s."""
    duration = stroke.duration
    if duration <= 0:
        raise ZeroDuration(f"stroke at samples {stroke.start}:{stroke.stop} has zero duration")
    return stroke.path_length / duration


def global_speed(strokes: list[Stroke]) -> float:
    """Total on-surface path over the span from first to last on-surface sample."""
    if not strokes:
        raise NoStrokes("no strokes")
    span = strokes[-1].end_time - strokes[0].start_time
    if span <= 0:
        raise ZeroDuration("writing span is zero")
    return sum(s.path_length for s in strokes) / span


EQUAL_RTOL = 1e-9
# accelerations below this fraction of (stroke speed / stroke duration) are rounding noise
ACCELERATION_FLOOR = 1e-6


def count_direction_changes(series: np.ndarray, rtol: float = EQUAL_RTOL, atol: float = 0.0) -> int:
    """Number of strict local extrema.

    Consecutive samples closer than ``max(rtol * max|series|, atol)`` count
    as equal, and runs of equal values are collapsed, so a plateau is judged
    against its nearest differing neighbours.  Plateaus touching either end
    of the series are never counted.
    """
    v = np.asarray(series, dtype=float)
    if len(v) < 3:
        raise SeriesTooShort(len(v), 3)
    d = np.diff(v)
    d = d[np.abs(d) > max(rtol * np.abs(v).max(), atol)]
    return int(np.count_nonzero(d[:-1] * d[1:] < 0))


@dataclass(frozen=True, eq=False)
class KinematicRaw:
    stroke_speeds: np.ndarray
    speed: float
    series: dict[str, np.ndarray]  # per-sample, concatenated across strokes
    ncv: np.ndarray  # per stroke
    nca: np.ndarray
    relative_ncv: float
    relative_nca: float
    on_surface_time: float
    normalized_on_surface_time: float
    discarded_runs: int = 0

    def __getattr__(self, name: str) -> np.ndarray:
        series = self.__dict__.get("series")
        if series is not None and name in series:
            return series[name]
        raise AttributeError(name)


def kinematics_for_recording(
    rec: Recording,
    strokes: list[Stroke] | None = None,
    derived: list[DerivedSeries] | None = None,
    *,
    scale: float = DEFAULT_SCALE_MM,
    min_stroke_samples: int = MIN_STROKE_SAMPLES,
    smooth_coordinates: bool = False,
    span: int = DEFAULT_SPAN,
    ncv_aggregate: str = "mean",
) -> KinematicRaw:
    """All kinematic quantities of one recording.

    NCV/NCA are stored per stroke; the relative variants divide the mean
    (or, with ``ncv_aggregate="total"``, the summed) per-stroke count by the
    recording span, first to last sample including in-air movement.
    """
    if ncv_aggregate not in ("mean", "total"):
        raise ValueError(f"ncv_aggregate must be 'mean' or 'total', got {ncv_aggregate!r}")
    if strokes is None:
        strokes = segment_strokes(rec, min_stroke_samples, scale)
    if not strokes:
        raise NoStrokes(f"subject {rec.subject_id} task {rec.task_id}: no usable strokes")
    if derived is None:
        derived = [derive_kinematics(s, smooth_coordinates, span) for s in strokes]

    series = {
        name: np.concatenate([getattr(d, name) for d in derived]) for name in SERIES_FIELDS
    }
    ncv = np.array([count_direction_changes(d.velocity) for d in derived])
    nca = np.array(
        [
            count_direction_changes(d.acceleration, atol=ACCELERATION_FLOOR * stroke_speed(s) / s.duration)
            for s, d in zip(strokes, derived)
        ]
    )
    agg = np.mean if ncv_aggregate == "mean" else np.sum

    span_s = rec.duration
    if span_s <= 0:
        raise ZeroDuration("recording span is zero")
    on_surface = float(sum(s.duration for s in strokes))
    return KinematicRaw(
        stroke_speeds=np.array([stroke_speed(s) for s in strokes]),
        speed=global_speed(strokes),
        series=series,
        ncv=ncv,
        nca=nca,
        relative_ncv=float(agg(ncv)) / span_s,
        relative_nca=float(agg(nca)) / span_s,
        on_surface_time=on_surface,
        normalized_on_surface_time=on_surface / span_s,
        discarded_runs=discarded_runs(rec, min_stroke_samples),
    )

