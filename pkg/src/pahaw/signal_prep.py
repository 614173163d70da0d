"""Stroke segmentation, LOWESS smoothing and time derivatives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cohort_io import Recording
from .errors import AllTimestampsEqual, SeriesTooShort, SpanTooLarge, StrokeTooShort

DEFAULT_SCALE_MM = 0.01  # one device unit = 1/100 mm
DEFAULT_SPAN = 5
MIN_STROKE_SAMPLES = 5


@dataclass(frozen=True, eq=False)
class Stroke:
    """Maximal on-surface run, positions converted to millimetres."""

    start: int  # index into the recording
    stop: int  # exclusive
    x: np.ndarray
    y: np.ndarray
    timestamp: np.ndarray
    pressure: np.ndarray

    def __len__(self) -> int:
        return self.stop - self.start

    @property
    def start_time(self) -> float:
        return float(self.timestamp[0])

    @property
    def end_time(self) -> float:
        return float(self.timestamp[-1])

    @property
    def duration(self) -> float:
        return self.end_time - self.start_time

    @property
    def path_length(self) -> float:
        return float(np.hypot(np.diff(self.x), np.diff(self.y)).sum())


def button_runs(button: np.ndarray) -> list[tuple[int, int]]:
    """Half-open ``(start, stop)`` bounds of every maximal run of ``button == 1``."""
    b = np.asarray(button) == 1
    padded = np.concatenate(([False], b, [False])).astype(np.int8)
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    return [(int(a), int(z)) for a, z in zip(starts, stops)]


def segment_strokes(
    rec: Recording,
    min_stroke_samples: int = MIN_STROKE_SAMPLES,
    scale: float = DEFAULT_SCALE_MM,
) -> list[Stroke]:
    """Split a recording into strokes, dropping runs shorter than ``min_stroke_samples``.

    Use :func:`discarded_runs` for the number of dropped runs.
    """
    strokes = []
    for a, z in button_runs(rec.button):
        if z - a < min_stroke_samples:
            continue
        strokes.append(
            Stroke(
                a,
                z,
                rec.x[a:z] * scale,
                rec.y[a:z] * scale,
                rec.timestamp[a:z].copy(),
                rec.pressure[a:z].astype(float),
            )
        )
    return strokes


def discarded_runs(rec: Recording, min_stroke_samples: int = MIN_STROKE_SAMPLES) -> int:
    return sum(1 for a, z in button_runs(rec.button) if z - a < min_stroke_samples)


def lowess_smooth(series: np.ndarray, span: int = DEFAULT_SPAN) -> np.ndarray:
    """Local linear regression with tricube weights over a sliding window.

    The window covers ``span`` consecutive samples centred on each point and
    is truncated at the ends of the series, so boundary fits are one-sided.
    Abscissae are sample indices.  Tricube distances are scaled by
    ``(span - 1) / 2 + 1`` so every sample inside the window has positive
    weight.
    """
    y = np.asarray(series, dtype=float)
    n = len(y)
    if span < 3 or span % 2 == 0:
        raise ValueError(f"span must be an odd integer >= 3, got {span}")
    if n < 3:
        raise SeriesTooShort(n, 3)
    if span > n:
        raise SpanTooLarge(span, n)

    h = (span - 1) // 2
    offsets = np.arange(-h, h + 1)
    w = (1.0 - (np.abs(offsets) / (h + 1.0)) ** 3) ** 3
    idx = np.arange(n)[:, None] + offsets[None, :]
    inside = (idx >= 0) & (idx < n)
    W = np.where(inside, w[None, :], 0.0)
    Y = y[np.clip(idx, 0, n - 1)]
    k = offsets[None, :].astype(float)
    s0 = W.sum(axis=1)
    s1 = (W * k).sum(axis=1)
    s2 = (W * k * k).sum(axis=1)
    t0 = (W * Y).sum(axis=1)
    t1 = (W * k * Y).sum(axis=1)
    # intercept of the weighted line, i.e. the fit evaluated at the centre
    return (s2 * t0 - s1 * t1) / (s0 * s2 - s1 * s1)


def smooth_clamped(series: np.ndarray, span: int = DEFAULT_SPAN) -> np.ndarray:
    """:func:`lowess_smooth` with the span shrunk to fit short series."""
    n = len(series)
    if n < 3:
        return np.asarray(series, dtype=float).copy()
    span = min(span, n if n % 2 else n - 1)
    return lowess_smooth(series, span)


def differentiate(series: np.ndarray, timestamps: np.ndarray) -> np.ndarray:
    """Derivative on a non-uniform, possibly repeating time grid.

    Interior points use the three-point second-order formula over the
    nearest strictly earlier and strictly later samples; endpoints use
    second-order one-sided differences (first order when only two distinct
    times exist).  Samples sharing a timestamp therefore never divide by zero.
    """
    f = np.asarray(series, dtype=float)
    t = np.asarray(timestamps, dtype=float)
    n = len(f)
    if n < 2:
        raise SeriesTooShort(n, 2)
    if len(t) != n:
        raise ValueError("series and timestamps differ in length")
    if t[-1] == t[0]:
        raise AllTimestampsEqual("cannot differentiate over a zero time span")

    left = np.searchsorted(t, t, side="left") - 1
    right = np.searchsorted(t, t, side="right")
    has_l = left >= 0
    has_r = right < n
    out = np.empty(n)
    i = np.arange(n)

    m = has_l & has_r
    if m.any():
        ii, ll, rr = i[m], left[m], right[m]
        d1 = t[ii] - t[ll]
        d2 = t[rr] - t[ii]
        out[m] = (d1 * d1 * f[rr] - d2 * d2 * f[ll] + (d2 * d2 - d1 * d1) * f[ii]) / (
            d1 * d2 * (d1 + d2)
        )

    m = ~has_l
    if m.any():
        ii, rr = i[m], right[m]
        rr2 = right[np.minimum(rr, n - 1)]
        second = rr2 < n
        d1 = t[rr] - t[ii]
        res = (f[rr] - f[ii]) / d1
        if second.any():
            a, b, c = ii[second], rr[second], rr2[second]
            e1 = t[b] - t[a]
            e2 = t[c] - t[b]
            res[second] = (
                -(2 * e1 + e2) / (e1 * (e1 + e2)) * f[a]
                + (e1 + e2) / (e1 * e2) * f[b]
                - e1 / (e2 * (e1 + e2)) * f[c]
            )
        out[m] = res

    m = ~has_r
    if m.any():
        ii, ll = i[m], left[m]
        ll2 = left[np.maximum(ll, 0)]
        second = ll2 >= 0
        d2 = t[ii] - t[ll]
        res = (f[ii] - f[ll]) / d2
        if second.any():
            a, b, c = ll2[second], ll[second], ii[second]
            e1 = t[b] - t[a]
            e2 = t[c] - t[b]
            res[second] = (
                e2 / (e1 * (e1 + e2)) * f[a]
                - (e1 + e2) / (e1 * e2) * f[b]
                + (2 * e2 + e1) / (e2 * (e1 + e2)) * f[c]
            )
        out[m] = res
    return out


@dataclass(frozen=True, eq=False)
class DerivedSeries:
    timestamp: np.ndarray
    velocity: np.ndarray
    horizontal_velocity: np.ndarray
    vertical_velocity: np.ndarray
    acceleration: np.ndarray
    horizontal_acceleration: np.ndarray
    vertical_acceleration: np.ndarray
    jerk: np.ndarray
    horizontal_jerk: np.ndarray
    vertical_jerk: np.ndarray

    def __len__(self) -> int:
        return len(self.timestamp)


SERIES_FIELDS = (
    "velocity",
    "horizontal_velocity",
    "vertical_velocity",
    "acceleration",
    "horizontal_acceleration",
    "vertical_acceleration",
    "jerk",
    "horizontal_jerk",
    "vertical_jerk",
)


def derive_kinematics(
    stroke: Stroke, smooth_coordinates: bool = False, span: int = DEFAULT_SPAN
) -> DerivedSeries:
    """Velocity, acceleration and jerk of a stroke, total and per axis.

    Directional channels are successive derivatives of x (horizontal) and
    y (vertical).  The total channels are Euclidean norms of the derivative
    vectors, so ``acceleration`` includes the centripetal part of curved
    motion rather than only the change of speed.
    """
    n = len(stroke)
    if n < 4:
        raise StrokeTooShort(n)
    t = stroke.timestamp
    x, y = stroke.x, stroke.y
    if smooth_coordinates:
        x, y = smooth_clamped(x, span), smooth_clamped(y, span)
    vx, vy = differentiate(x, t), differentiate(y, t)
    ax, ay = differentiate(vx, t), differentiate(vy, t)
    jx, jy = differentiate(ax, t), differentiate(ay, t)
    return DerivedSeries(
        timestamp=t,
        velocity=np.hypot(vx, vy),
        horizontal_velocity=vx,
        vertical_velocity=vy,
        acceleration=np.hypot(ax, ay),
        horizontal_acceleration=ax,
        vertical_acceleration=ay,
        jerk=np.hypot(jx, jy),
        horizontal_jerk=jx,
        vertical_jerk=jy,
    )
