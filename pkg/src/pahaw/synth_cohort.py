"""Seeded synthetic cohorts with known group effects, plus closed-form fixtures.

Each subject draws one latent value per signal family.  Healthy subjects
draw ``mean + sd * z``; PD subjects draw ``mean + sd * (z + effect)``, so an
effect is measured in between-subject standard deviations.  Recordings are
pen traces over glyph-like curves with a rising, slowly increasing and
falling pressure profile.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from ._folds import derived_rng
from ._io import atomic_write_text
from .cohort_io import TASK_IDS, Cohort, Recording, SubjectRecord, validate_recording, write_cohort
from .errors import InvalidSpec
from .feature_matrix import FeatureMatrix, FeatureName
from .signal_prep import DEFAULT_SCALE_MM

RATE_HZ = 100.0


@dataclass(frozen=True)
class Family:
    mean: float
    sd: float
    floor: float  # latent values are clipped here
    bases: tuple[str, ...]  # feature bases expected to respond


FAMILIES: dict[str, Family] = {
    "stroke_speed": Family(30.0, 5.0, 5.0, ("stroke speed", "speed", "velocity", "horizontal velocity", "vertical velocity")),
    "stroke_size": Family(10.0, 1.5, 3.0, ("on-surface time", "normalized on-surface time", "stroke speed", "speed")),
    "pressure_level": Family(600.0, 80.0, 150.0, ("pressure", "overshoot", "R_press")),
    "pressure_roughness": Family(8.0, 3.0, 0.0, ("NCP", "relative NCP", "pressure rate", "pressure", "overshoot")),
    "rise_time": Family(0.08, 0.02, 0.02, ("R_time", "R_press", "pressure rate")),
    "pause": Family(0.3, 0.08, 0.05, ("normalized on-surface time", "relative NCV", "relative NCA", "relative NCP")),
    "tremor": Family(0.3, 0.15, 0.0, ("NCV", "NCA", "relative NCV", "relative NCA", "jerk", "acceleration", "horizontal jerk", "vertical jerk")),
}


@dataclass(frozen=True)
class PressureProfile:
    fall_time: float = 0.08  # s
    main_increase: float = 0.15  # fractional rise of pressure across the main movement
    roughness_scale: float = 1.0  # multiplies the roughness family value


@dataclass(frozen=True)
class SynthSpec:
    n_per_group: int = 20
    seed: int = 0
    tasks: tuple[int, ...] = TASK_IDS
    effect_map: Mapping[str, float] = field(default_factory=dict)
    noise_level: float = 1.0  # per-sample noise multiplier
    strokes_per_task: int = 4
    pressure_profile: PressureProfile = PressureProfile()
    tremor_hz: float | None = 6.0

    def validate(self) -> None:
        if self.n_per_group < 2:
            raise InvalidSpec("n_per_group must be at least 2")
        if not self.tasks or any(k not in TASK_IDS for k in self.tasks):
            raise InvalidSpec(f"tasks must be a non-empty subset of 1..8, got {self.tasks}")
        for fam, eff in self.effect_map.items():
            if fam not in FAMILIES:
                raise InvalidSpec(f"unknown effect family {fam!r}; known: {sorted(FAMILIES)}")
            if not math.isfinite(eff):
                raise InvalidSpec(f"effect for {fam} is not finite")
        if self.noise_level < 0 or not math.isfinite(self.noise_level):
            raise InvalidSpec("noise_level must be finite and >= 0")
        if self.strokes_per_task < 1:
            raise InvalidSpec("strokes_per_task must be >= 1")
        if self.tremor_hz is not None and not self.tremor_hz > 0:
            raise InvalidSpec("tremor_hz must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tasks"] = list(self.tasks)
        d["effect_map"] = dict(sorted(self.effect_map.items()))
        return d


# --- glyph paths ------------------------------------------------------------


def _glyph(task_id: int, stroke: int, size: float, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit-time curve for one stroke, in mm relative to the stroke origin."""
    if task_id == 1:
        theta = u * 4 * 2 * np.pi  # four-turn Archimedean spiral
        r = size * 0.6 * theta / (2 * np.pi) + 0.5  # about 5 cm across
        return r * np.cos(theta), r * np.sin(theta)
    loops = 1 + (task_id + stroke) % 3
    x = size * (0.9 * u + 0.12 * np.sin(2 * np.pi * loops * u))
    y = size * (0.5 * np.sin(np.pi * u) + 0.25 * np.sin(2 * np.pi * loops * u + 0.5 * task_id))
    return x, y


def _path_length(task_id: int, stroke: int, size: float) -> float:
    u = np.linspace(0.0, 1.0, 2001)
    x, y = _glyph(task_id, stroke, size, u)
    return float(np.hypot(np.diff(x), np.diff(y)).sum())


def _strokes_for_task(spec: SynthSpec, task_id: int) -> int:
    if task_id == 1:
        return 1
    return spec.strokes_per_task * (2 if task_id >= 5 else 1)


def _pressure_profile(
    n: int, level: float, rise_time: float, rough: float, prof: PressureProfile, rng: np.random.Generator
) -> np.ndarray:
    t = np.arange(n) / RATE_HZ
    dur = t[-1] if n > 1 else 0.0
    rise = min(rise_time, 0.3 * dur)
    fall = min(prof.fall_time, 0.3 * dur)
    base = level * (1.0 + prof.main_increase * t / max(dur, 1e-9))
    env = np.clip(np.minimum(t / max(rise, 1e-9), (dur - t) / max(fall, 1e-9)), 0.0, 1.0)
    # smooth roughness: a few random sinusoids
    wobble = np.zeros(n)
    for _ in range(4):
        f = rng.uniform(1.0, 6.0)
        wobble += np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    main = base + rough * prof.roughness_scale * wobble
    return np.maximum(env * main, 1.0)


def _recording(
    sid: str, task_id: int, latent: dict[str, float], spec: SynthSpec, rng: np.random.Generator
) -> Recording:
    xs, ys, ps, bs = [], [], [], []
    pen_x, pen_y = 20.0, 20.0  # mm
    noise = spec.noise_level
    for s in range(_strokes_for_task(spec, task_id)):
        size = latent["stroke_size"] * rng.uniform(0.9, 1.1)
        speed = latent["stroke_speed"] * rng.uniform(0.9, 1.1)
        dur = max(_path_length(task_id, s, size) / speed, 0.1)
        n = int(round(dur * RATE_HZ)) + 1
        u = np.arange(n) / (n - 1)
        gx, gy = _glyph(task_id, s, size, u)
        t = np.arange(n) / RATE_HZ
        if spec.tremor_hz is not None and latent["tremor"] > 0:
            phase = rng.uniform(0, 2 * np.pi)
            gx = gx + latent["tremor"] * np.sin(2 * np.pi * spec.tremor_hz * t + phase)
            gy = gy + latent["tremor"] * np.cos(2 * np.pi * spec.tremor_hz * t + phase)
        gx = gx + rng.normal(0.0, 0.005 * noise, n)
        gy = gy + rng.normal(0.0, 0.005 * noise, n)
        p = _pressure_profile(
            n, latent["pressure_level"] * rng.uniform(0.95, 1.05), latent["rise_time"],
            latent["pressure_roughness"], spec.pressure_profile, rng,
        )
        p = p + rng.normal(0.0, 2.0 * noise, n)
        xs.append(pen_x + gx)
        ys.append(pen_y + gy)
        ps.append(np.maximum(np.round(p), 1.0))
        bs.append(np.ones(n, dtype=np.int8))
        pen_x, pen_y = xs[-1][-1], ys[-1][-1]

        if s + 1 < _strokes_for_task(spec, task_id):
            # hover to the next stroke origin
            gap = max(latent["pause"] * rng.uniform(0.8, 1.2), 0.03)
            m = max(int(round(gap * RATE_HZ)), 2)
            hop_x = pen_x + np.linspace(0, 3.0, m + 2)[1:-1]
            hop_y = pen_y + np.linspace(0, -2.0, m + 2)[1:-1]
            xs.append(hop_x)
            ys.append(hop_y)
            ps.append(np.zeros(m))
            bs.append(np.zeros(m, dtype=np.int8))
            pen_x, pen_y = pen_x + 3.0, pen_y - 2.0

    x = np.round(np.concatenate(xs) / DEFAULT_SCALE_MM)
    y = np.round(np.concatenate(ys) / DEFAULT_SCALE_MM)
    n_total = len(x)
    rec = Recording(
        sid,
        task_id,
        x,
        y,
        np.arange(n_total) / RATE_HZ,
        np.concatenate(bs).astype(np.int8),
        np.concatenate(ps),
        RATE_HZ,
    )
    validate_recording(rec)
    return rec


@dataclass(frozen=True)
class SynthLedger:
    spec: dict
    families: dict  # family -> effect in sd units, baseline mean/sd and natural-unit delta
    subjects: dict  # subject id -> {"diagnosis": ..., family: latent value}

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SynthLedger":
        d = json.loads(text)
        return cls(d["spec"], d["families"], d["subjects"])


def generate(spec: SynthSpec) -> tuple[Cohort, SynthLedger]:
    """Build a cohort of ``n_per_group`` PD and healthy subjects.

    Every draw comes from generators derived from ``spec.seed`` and the
    subject index, so one subject's data do not depend on the others.
    """
    spec.validate()
    subjects: list[SubjectRecord] = []
    recordings: dict[tuple[str, int], Recording] = {}
    latent_log: dict[str, dict] = {}
    n = 2 * spec.n_per_group
    for i in range(n):
        is_pd = i < spec.n_per_group
        sid = f"{i + 1:05d}"
        rng = derived_rng(spec.seed, i)
        latent = {}
        for fam, info in FAMILIES.items():
            z = rng.normal()
            if is_pd:
                z += spec.effect_map.get(fam, 0.0)
            latent[fam] = max(info.mean + info.sd * z, info.floor)
        age = float(round(rng.normal(68.0 if is_pd else 63.0, 10.0)))
        sex = "M" if rng.random() < 0.5 else "F"
        if is_pd:
            years = float(round(rng.uniform(1, 15)))
            subjects.append(
                SubjectRecord(sid, sex, "PD", age, float(round(rng.uniform(200, 2000))), float(rng.integers(1, 5)), years)
            )
        else:
            subjects.append(SubjectRecord(sid, sex, "H", age))
        latent_log[sid] = {"diagnosis": "PD" if is_pd else "H", **latent}
        for k in spec.tasks:
            recordings[(sid, k)] = _recording(sid, k, latent, spec, derived_rng(spec.seed, i, k))
    families = {
        fam: {
            "effect_sd": float(spec.effect_map.get(fam, 0.0)),
            "baseline_mean": info.mean,
            "baseline_sd": info.sd,
            "delta": float(spec.effect_map.get(fam, 0.0)) * info.sd,
            "feature_bases": list(info.bases),
        }
        for fam, info in FAMILIES.items()
    }
    return Cohort(subjects, recordings), SynthLedger(spec.to_dict(), families, latent_log)


def write_synthetic(spec: SynthSpec, root) -> SynthLedger:
    """Generate and write the cohort layout plus ``ledger.json``."""
    cohort, ledger = generate(spec)
    root = Path(root)
    write_cohort(cohort, root)
    atomic_write_text(root / "ledger.json", ledger.to_json())
    return ledger


# --- matrix-level generator -------------------------------------------------


def synthetic_feature_matrix(
    n_per_group: int,
    n_features: int = 50,
    n_informative: int = 5,
    effect: float = 2.0,
    seed: int = 0,
) -> tuple[FeatureMatrix, list[FeatureName]]:
    """Gaussian subject-by-feature matrix with ``n_informative`` shifted columns.

    PD rows of the informative columns have mean ``effect`` instead of 0;
    everything has unit variance.  Informative columns sit at seeded random
    positions.  Returns the matrix and the informative column names.
    """
    if n_informative > n_features:
        raise InvalidSpec("more informative columns than columns")
    if n_per_group < 2:
        raise InvalidSpec("n_per_group must be at least 2")
    rng = derived_rng(seed, 0x6D78)
    n = 2 * n_per_group
    labels = np.r_[np.ones(n_per_group, dtype=int), np.zeros(n_per_group, dtype=int)]
    X = rng.normal(size=(n, n_features))
    informative = np.sort(rng.choice(n_features, size=n_informative, replace=False))
    X[np.ix_(labels == 1, informative)] += effect
    columns = [FeatureName(f"synthetic {j:03d}", "whole", "none", 0) for j in range(n_features)]
    ids = [f"{i + 1:05d}" for i in range(n)]
    return FeatureMatrix(ids, labels, columns, X), [columns[j] for j in informative]


# --- closed-form fixtures ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class AnalyticFixture:
    name: str
    recording: Recording
    expected: dict


def _single_stroke(name: str, x_mm, y_mm, t, pressure) -> Recording:
    n = len(t)
    return Recording(
        name,
        2,
        np.asarray(x_mm, dtype=float) / DEFAULT_SCALE_MM,
        np.asarray(y_mm, dtype=float) / DEFAULT_SCALE_MM,
        np.asarray(t, dtype=float),
        np.ones(n, dtype=np.int8),
        np.asarray(pressure, dtype=float),
        RATE_HZ,
    )


def trapezoid_pressure(ramp: int, flat: int, peak: float = 500.0) -> np.ndarray:
    """``ramp`` samples up (excluding the peak), ``flat`` at the peak, ``ramp`` down."""
    up = peak * (np.arange(ramp) + 1) / (ramp + 1)
    return np.concatenate([up, np.full(flat, peak), up[::-1]])


def trapezoid_edge_samples(ramp: int, flat: int) -> float:
    """Rising-edge length predicted by a median split of :func:`trapezoid_pressure`.

    Half of the ``2 * ramp + flat`` samples sit above the median: the whole
    plateau plus an equal share from each ramp, i.e. ``(2 * ramp - flat) / 4``
    per ramp.  Valid while ``flat <= 2 * ramp``.
    """
    if flat > 2 * ramp:
        raise ValueError("plateau holds more than half the samples; the median lies on it")
    return ramp - (2 * ramp - flat) / 4.0


def analytic_fixtures() -> list[AnalyticFixture]:
    out = []
    n = 101
    t = np.arange(n) / RATE_HZ
    flat_p = np.full(n, 400.0)

    v = 25.0
    out.append(
        AnalyticFixture(
            "line",
            _single_stroke("line", 5.0 + v * t, np.full(n, 7.0), t, flat_p),
            {"speed": v, "acceleration": 0.0, "jerk": 0.0, "ncv": 0, "nca": 0},
        )
    )

    R, omega = 10.0, 2 * np.pi  # one turn per second
    out.append(
        AnalyticFixture(
            "circle",
            _single_stroke("circle", 20 + R * np.cos(omega * t), 20 + R * np.sin(omega * t), t, flat_p),
            {"speed": R * omega, "acceleration": R * omega**2},
        )
    )

    periods, T = 3, t[-1]
    v0, amp = 20.0, 8.0
    k = 2 * np.pi * periods / T
    x = v0 * t + amp / k * (1 - np.cos(k * t))  # dx/dt = v0 + amp sin(k t)
    out.append(
        AnalyticFixture(
            "sine_velocity",
            _single_stroke("sine_velocity", x, np.full(n, 3.0), t, flat_p),
            {"periods": periods, "ncv": 2 * periods},
        )
    )

    ramp, flat = 20, 6
    p = trapezoid_pressure(ramp, flat)
    m = len(p)
    tp = np.arange(m) / RATE_HZ
    edge = trapezoid_edge_samples(ramp, flat)
    out.append(
        AnalyticFixture(
            "trapezoid",
            _single_stroke("trapezoid", 5.0 + 10.0 * tp, np.full(m, 3.0), tp, p),
            {
                "rise_samples": edge,
                "fall_samples": edge,
                "r_time_rise": edge / RATE_HZ,
                "overshoot": float(p.max() - np.median(p)),
            },
        )
    )
    return out
