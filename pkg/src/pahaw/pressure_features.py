"""Pressure features: raw level and rate, NCP, edge segmentation, edge ranges,
overshoot and pressure/kinematics correlations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cohort_io import Recording
from .errors import NoStrokes, SeriesTooShort, ZeroDuration
from .kinematic_features import count_direction_changes
from .signal_prep import DEFAULT_SPAN, DerivedSeries, Stroke, differentiate, smooth_clamped

SCOPES = ("whole", "rise", "main", "fall")

# correlation partner channels, keyed by the short name used in feature names
CORRELATION_CHANNELS = {
    "vel": "velocity",
    "horizontal_vel": "horizontal_velocity",
    "vertical_vel": "vertical_velocity",
    "acc": "acceleration",
    "horizontal_acc": "horizontal_acceleration",
    "vertical_acc": "vertical_acceleration",
}


@dataclass(frozen=True)
class PressureSegmentation:
    rise: range
    main: range
    fall: range

    def scope(self, name: str) -> slice:
        if name == "whole":
            return slice(0, self.fall.stop)
        r = getattr(self, name)
        return slice(r.start, r.stop)

    def __len__(self) -> int:
        return self.fall.stop


def segment_pressure(stroke_pressure: np.ndarray, span: int = DEFAULT_SPAN) -> PressureSegmentation:
    """Split a stroke into rising edge, main movement and falling edge.

    The main movement runs from the first to the last sample whose smoothed
    pressure reaches the median of the smoothed pressure.
    """
    p = np.asarray(stroke_pressure, dtype=float)
    n = len(p)
    if n < 3:
        raise SeriesTooShort(n, 3)
    s = smooth_clamped(p, span)
    m = np.median(s)
    # tolerance keeps flat profiles from splitting on rounding noise
    tol = 1e-9 * max(np.abs(s).max(), 1e-300)
    above = np.flatnonzero(s >= m - tol)
    first, last = int(above[0]), int(above[-1])
    return PressureSegmentation(range(0, first), range(first, last + 1), range(last + 1, n))


def count_pressure_changes(stroke_pressure: np.ndarray, span: int = DEFAULT_SPAN) -> int:
    """Local extrema of the smoothed pressure profile (NCP)."""
    p = np.asarray(stroke_pressure, dtype=float)
    if len(p) < 3:
        raise SeriesTooShort(len(p), 3)
    return count_direction_changes(smooth_clamped(p, span))


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation, NaN for fewer than 3 points or a flat channel."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = len(a)
    if n < 3:
        return float("nan")
    da = a - a.mean()
    db = b - b.mean()
    saa = float(da @ da)
    sbb = float(db @ db)
    # treat variance at rounding-noise level as zero
    floor_a = (1e-12 * np.abs(a).max()) ** 2 * n
    floor_b = (1e-12 * np.abs(b).max()) ** 2 * n
    if saa <= floor_a or sbb <= floor_b:
        return float("nan")
    r = float(da @ db) / np.sqrt(saa * sbb)
    return min(1.0, max(-1.0, r))


def pressure_correlations(
    stroke_pressure: np.ndarray, dk: DerivedSeries, seg: PressureSegmentation
) -> dict[tuple[str, str], float]:
    """Pearson correlation of raw pressure with six kinematic channels, per scope.

    Keys are ``(channel, scope)``; degenerate scopes map to NaN.
    """
    p = np.asarray(stroke_pressure, dtype=float)
    out = {}
    for short, field_name in CORRELATION_CHANNELS.items():
        channel = getattr(dk, field_name)
        for scope in SCOPES:
            sl = seg.scope(scope)
            out[(short, scope)] = pearson(p[sl], channel[sl])
    return out


@dataclass(frozen=True)
class EdgeFeatures:
    r_time_rise: float
    r_time_fall: float
    r_press_rise: float
    r_press_fall: float
    overshoot: float


def edge_features(
    stroke_pressure: np.ndarray, timestamps: np.ndarray, seg: PressureSegmentation
) -> EdgeFeatures:
    """Edge durations and pressure ranges, plus pressure overshoot.

    The rising-edge duration is the time from stroke start to the onset of
    the main movement; the falling-edge duration is the time from the end of
    the main movement to stroke end.  Empty edges give zeros.
    """
    p = np.asarray(stroke_pressure, dtype=float)
    t = np.asarray(timestamps, dtype=float)
    rise, fall = seg.rise, seg.fall
    r_time_rise = float(t[seg.main.start] - t[0]) if len(rise) else 0.0
    r_time_fall = float(t[-1] - t[seg.main.stop - 1]) if len(fall) else 0.0
    r_press_rise = float(np.ptp(p[rise.start : rise.stop])) if len(rise) else 0.0
    r_press_fall = float(np.ptp(p[fall.start : fall.stop])) if len(fall) else 0.0
    overshoot = float(p.max() - np.median(p))
    return EdgeFeatures(r_time_rise, r_time_fall, r_press_rise, r_press_fall, overshoot)


@dataclass(frozen=True, eq=False)
class PressureRaw:
    pressure: dict[str, np.ndarray]  # scope -> samples concatenated over strokes
    pressure_rate: dict[str, np.ndarray]
    ncp: np.ndarray  # per stroke
    relative_ncp: float
    rho: dict[tuple[str, str], np.ndarray]  # (channel, scope) -> per stroke, NaN if absent
    rho_concatenated: dict[tuple[str, str], float]
    r_time_rise: np.ndarray
    r_time_fall: np.ndarray
    r_press_rise: np.ndarray
    r_press_fall: np.ndarray
    overshoot: np.ndarray
    segmentations: list[PressureSegmentation]


def pressure_for_recording(
    rec: Recording,
    strokes: list[Stroke],
    derived: list[DerivedSeries],
    *,
    span: int = DEFAULT_SPAN,
    ncv_aggregate: str = "mean",
    relative_ncp_basis: str = "duration",
) -> PressureRaw:
    """Assemble every pressure quantity of one recording."""
    if not strokes:
        raise NoStrokes(f"subject {rec.subject_id} task {rec.task_id}: no usable strokes")
    if relative_ncp_basis not in ("duration", "length"):
        raise ValueError(f"relative_ncp_basis must be 'duration' or 'length', got {relative_ncp_basis!r}")

    segs = [segment_pressure(s.pressure, span) for s in strokes]
    rates = [differentiate(s.pressure, s.timestamp) for s in strokes]

    pressure = {}
    pressure_rate = {}
    for scope in SCOPES:
        pressure[scope] = np.concatenate([s.pressure[g.scope(scope)] for s, g in zip(strokes, segs)])
        pressure_rate[scope] = np.concatenate([r[g.scope(scope)] for r, g in zip(rates, segs)])

    ncp = np.array([count_pressure_changes(s.pressure, span) for s in strokes])
    agg = np.mean if ncv_aggregate == "mean" else np.sum
    if relative_ncp_basis == "duration":
        basis = rec.duration
    else:
        basis = sum(s.path_length for s in strokes)
    if basis <= 0:
        raise ZeroDuration("relative NCP basis is zero")

    per_stroke = [pressure_correlations(s.pressure, d, g) for s, d, g in zip(strokes, derived, segs)]
    rho = {key: np.array([c[key] for c in per_stroke]) for key in per_stroke[0]}

    rho_cat = {}
    for short, field_name in CORRELATION_CHANNELS.items():
        for scope in SCOPES:
            ch = np.concatenate(
                [getattr(d, field_name)[g.scope(scope)] for d, g in zip(derived, segs)]
            )
            rho_cat[(short, scope)] = pearson(pressure[scope], ch)

    edges = [edge_features(s.pressure, s.timestamp, g) for s, g in zip(strokes, segs)]
    return PressureRaw(
        pressure=pressure,
        pressure_rate=pressure_rate,
        ncp=ncp,
        relative_ncp=float(agg(ncp)) / basis,
        rho=rho,
        rho_concatenated=rho_cat,
        r_time_rise=np.array([e.r_time_rise for e in edges]),
        r_time_fall=np.array([e.r_time_fall for e in edges]),
        r_press_rise=np.array([e.r_press_rise for e in edges]),
        r_press_fall=np.array([e.r_press_fall for e in edges]),
        overshoot=np.array([e.overshoot for e in edges]),
        segmentations=segs,
    )
