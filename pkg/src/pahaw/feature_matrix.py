"""Statistical functionals, the feature catalogue, subject-by-feature matrices,
task merging and per-feature z-scoring."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from ._io import atomic_write_text, fmt_float
from .cohort_io import Cohort, Recording
from .errors import (
    DegenerateFitSet,
    EmptyInput,
    FeatureError,
    NoCommonSubjects,
    SignalError,
    TaskUnavailable,
)
from .kinematic_features import kinematics_for_recording
from .pressure_features import CORRELATION_CHANNELS, SCOPES, pressure_for_recording
from .signal_prep import derive_kinematics, discarded_runs, segment_strokes

log = logging.getLogger(__name__)

CATALOGUE_VERSION = "1"

FUNCTIONALS = ("mean", "median", "std", "p1", "p99", "p99_minus_p1")
MERGED_TASKS = (2, 3, 4, 5, 6, 7, 8)


class FeatureName(NamedTuple):
    base: str
    segment: str
    functional: str
    task_id: int

    def __str__(self) -> str:
        return f"{self.base}|{self.segment}|{self.functional}|task{self.task_id}"

    @classmethod
    def parse(cls, text: str) -> "FeatureName":
        try:
            base, segment, functional, task = text.split("|")
            if not task.startswith("task"):
                raise ValueError
            return cls(base, segment, functional, int(task[4:]))
        except ValueError:
            raise ValueError(f"not a feature name: {text!r}") from None

    @property
    def family(self) -> str:
        return "kinematic" if self.base in KINEMATIC_BASES else "pressure"


@dataclass(frozen=True)
class FeatureConfig:
    scale: float = 0.01  # mm per device unit
    min_stroke_samples: int = 5
    span: int = 5
    smooth_coordinates: bool = False
    ncv_aggregate: str = "mean"  # or "total"
    relative_ncp_basis: str = "duration"  # or "length"
    correlation_mode: str = "stroke"  # or "concatenated"
    segment_kinematics: bool = False

    def __post_init__(self) -> None:
        if self.min_stroke_samples < 4:
            raise ValueError("min_stroke_samples must be >= 4 so jerk is defined")
        if self.span < 3 or self.span % 2 == 0:
            raise ValueError("span must be odd and >= 3")
        if self.correlation_mode not in ("stroke", "concatenated"):
            raise ValueError(f"unknown correlation_mode {self.correlation_mode!r}")
        if self.ncv_aggregate not in ("mean", "total"):
            raise ValueError(f"unknown ncv_aggregate {self.ncv_aggregate!r}")
        if self.relative_ncp_basis not in ("duration", "length"):
            raise ValueError(f"unknown relative_ncp_basis {self.relative_ncp_basis!r}")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


# --- catalogue --------------------------------------------------------------

KINEMATIC_SERIES = {
    "velocity": "velocity",
    "horizontal velocity": "horizontal_velocity",
    "vertical velocity": "vertical_velocity",
    "acceleration": "acceleration",
    "horizontal acceleration": "horizontal_acceleration",
    "vertical acceleration": "vertical_acceleration",
    "jerk": "jerk",
    "horizontal jerk": "horizontal_jerk",
    "vertical jerk": "vertical_jerk",
}
KINEMATIC_PER_STROKE = ("stroke speed", "NCV", "NCA")
KINEMATIC_SCALARS = (
    "speed",
    "relative NCV",
    "relative NCA",
    "on-surface time",
    "normalized on-surface time",
)
PRESSURE_SERIES = ("pressure", "pressure rate")
RHO_BASES = {short: f"rho {short}" for short in CORRELATION_CHANNELS}

KINEMATIC_BASES = frozenset(KINEMATIC_SERIES) | frozenset(KINEMATIC_PER_STROKE) | frozenset(
    KINEMATIC_SCALARS
)


def _catalogue_entries(cfg: FeatureConfig) -> list[tuple[str, str, str]]:
    entries: list[tuple[str, str, str]] = []
    kin_scopes = SCOPES if cfg.segment_kinematics else ("whole",)
    for base in KINEMATIC_SERIES:
        for scope in kin_scopes:
            entries += [(base, scope, f) for f in FUNCTIONALS]
    for base in KINEMATIC_PER_STROKE:
        entries += [(base, "whole", f) for f in FUNCTIONALS]
    entries += [(base, "whole", "none") for base in KINEMATIC_SCALARS]

    for base in PRESSURE_SERIES:
        for scope in SCOPES:
            entries += [(base, scope, f) for f in FUNCTIONALS]
    entries += [("NCP", "whole", f) for f in FUNCTIONALS]
    entries.append(("relative NCP", "whole", "none"))
    for base in ("R_time", "R_press"):
        for scope in ("rise", "fall"):
            entries += [(base, scope, f) for f in FUNCTIONALS]
    entries += [("overshoot", "whole", f) for f in FUNCTIONALS]
    for base in RHO_BASES.values():
        for scope in SCOPES:
            if cfg.correlation_mode == "stroke":
                entries += [(base, scope, f) for f in FUNCTIONALS]
            else:
                entries.append((base, scope, "none"))
    return entries


def feature_catalogue(cfg: FeatureConfig, task_id: int) -> list[FeatureName]:
    """Canonically ordered columns of a per-task matrix; depends on ``cfg`` only."""
    return sorted(FeatureName(b, s, f, task_id) for b, s, f in _catalogue_entries(cfg))


# --- functionals ------------------------------------------------------------


def apply_functionals(values: Iterable[float]) -> tuple[float, float, float, float, float, float]:
    """Mean, median, sample std, 1st and 99th percentile, and their spread.

    Percentiles interpolate linearly between closest ranks (inclusive
    definition).  The standard deviation is 0 for a single value.
    """
    v = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    if v.size == 0 or not np.all(np.isfinite(v)):
        if v.size == 0:
            raise EmptyInput("functionals need at least one value")
        raise EmptyInput("functionals need finite values")
    std = float(v.std(ddof=1)) if v.size > 1 else 0.0
    p1, p99 = np.percentile(v, [1, 99], method="linear")
    return (float(v.mean()), float(np.median(v)), std, float(p1), float(p99), float(p99 - p1))


def _functional_block(
    out: dict, base: str, scope: str, values: np.ndarray
) -> None:
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        for f in FUNCTIONALS:
            out[(base, scope, f)] = float("nan")
        return
    for f, val in zip(FUNCTIONALS, apply_functionals(v)):
        out[(base, scope, f)] = val


def recording_features(rec: Recording, cfg: FeatureConfig = FeatureConfig()) -> dict[tuple[str, str, str], float]:
    """Every catalogue feature of one recording, keyed by ``(base, segment, functional)``."""
    strokes = segment_strokes(rec, cfg.min_stroke_samples, cfg.scale)
    derived = [derive_kinematics(s, cfg.smooth_coordinates, cfg.span) for s in strokes]
    kin = kinematics_for_recording(
        rec,
        strokes,
        derived,
        scale=cfg.scale,
        min_stroke_samples=cfg.min_stroke_samples,
        ncv_aggregate=cfg.ncv_aggregate,
    )
    prs = pressure_for_recording(
        rec,
        strokes,
        derived,
        span=cfg.span,
        ncv_aggregate=cfg.ncv_aggregate,
        relative_ncp_basis=cfg.relative_ncp_basis,
    )

    out: dict[tuple[str, str, str], float] = {}
    for base, attr in KINEMATIC_SERIES.items():
        _functional_block(out, base, "whole", kin.series[attr])
        if cfg.segment_kinematics:
            for scope in ("rise", "main", "fall"):
                parts = [getattr(d, attr)[g.scope(scope)] for d, g in zip(derived, prs.segmentations)]
                _functional_block(out, base, scope, np.concatenate(parts))
    _functional_block(out, "stroke speed", "whole", kin.stroke_speeds)
    _functional_block(out, "NCV", "whole", kin.ncv)
    _functional_block(out, "NCA", "whole", kin.nca)
    out[("speed", "whole", "none")] = kin.speed
    out[("relative NCV", "whole", "none")] = kin.relative_ncv
    out[("relative NCA", "whole", "none")] = kin.relative_nca
    out[("on-surface time", "whole", "none")] = kin.on_surface_time
    out[("normalized on-surface time", "whole", "none")] = kin.normalized_on_surface_time

    for scope in SCOPES:
        _functional_block(out, "pressure", scope, prs.pressure[scope])
        _functional_block(out, "pressure rate", scope, prs.pressure_rate[scope])
    _functional_block(out, "NCP", "whole", prs.ncp)
    out[("relative NCP", "whole", "none")] = prs.relative_ncp
    _functional_block(out, "R_time", "rise", prs.r_time_rise)
    _functional_block(out, "R_time", "fall", prs.r_time_fall)
    _functional_block(out, "R_press", "rise", prs.r_press_rise)
    _functional_block(out, "R_press", "fall", prs.r_press_fall)
    _functional_block(out, "overshoot", "whole", prs.overshoot)
    for short, base in RHO_BASES.items():
        for scope in SCOPES:
            if cfg.correlation_mode == "stroke":
                _functional_block(out, base, scope, prs.rho[(short, scope)])
            else:
                out[(base, scope, "none")] = prs.rho_concatenated[(short, scope)]
    return out


# --- matrices ---------------------------------------------------------------


@dataclass
class FeatureMatrix:
    """Subjects by named features; NaN marks an absent value."""

    subject_ids: list[str]
    labels: np.ndarray  # 1 = PD, 0 = healthy
    columns: list[FeatureName]
    values: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=int)
        self.values = np.asarray(self.values, dtype=float)
        n, d = len(self.subject_ids), len(self.columns)
        if self.values.shape != (n, d):
            raise ValueError(f"values shape {self.values.shape} != ({n}, {d})")
        if self.labels.shape != (n,):
            raise ValueError("labels must have one entry per subject")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def take_rows(self, idx: Sequence[int] | np.ndarray) -> "FeatureMatrix":
        idx = np.asarray(idx, dtype=int)
        return FeatureMatrix(
            [self.subject_ids[i] for i in idx],
            self.labels[idx],
            list(self.columns),
            self.values[idx],
            dict(self.diagnostics),
        )

    def select_columns(self, keep: Sequence[int] | np.ndarray) -> "FeatureMatrix":
        keep = np.asarray(keep, dtype=int)
        return FeatureMatrix(
            list(self.subject_ids),
            self.labels.copy(),
            [self.columns[j] for j in keep],
            self.values[:, keep],
            dict(self.diagnostics),
        )

    def feature_set(self, which: str) -> "FeatureMatrix":
        """Restrict to ``"kinematic"``, ``"pressure"`` or ``"both"`` columns."""
        if which == "both":
            return self
        if which not in ("kinematic", "pressure"):
            raise ValueError(f"unknown feature set {which!r}")
        keep = [j for j, c in enumerate(self.columns) if c.family == which]
        return self.select_columns(keep)

    def column_index(self, name: FeatureName | str) -> int:
        if isinstance(name, str):
            name = FeatureName.parse(name)
        return self.columns.index(name)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["subject", "label"] + [str(c) for c in self.columns])
        for sid, lab, row in zip(self.subject_ids, self.labels, self.values):
            writer.writerow([sid, int(lab)] + ["" if np.isnan(v) else fmt_float(v) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv_text(cls, text: str) -> "FeatureMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0][:2] != ["subject", "label"]:
            raise FeatureError("matrix CSV must start with 'subject,label'")
        columns = [FeatureName.parse(c) for c in rows[0][2:]]
        ids, labels, values = [], [], []
        for r in rows[1:]:
            ids.append(r[0])
            labels.append(int(r[1]))
            values.append([float(v) if v != "" else np.nan for v in r[2:]])
        vals = np.array(values, dtype=float).reshape(len(ids), len(columns))
        return cls(ids, np.array(labels, dtype=int), columns, vals)

    def write(self, path, sidecar: dict | None = None) -> None:
        """CSV plus a JSON sidecar with diagnostics and catalogue version."""
        from pathlib import Path

        path = Path(path)
        atomic_write_text(path, self.to_csv_text())
        meta = {
            "catalogue_version": CATALOGUE_VERSION,
            "n_subjects": len(self.subject_ids),
            "n_columns": len(self.columns),
            "diagnostics": self.diagnostics,
        }
        if sidecar:
            meta.update(sidecar)
        atomic_write_text(path.with_suffix(".json"), json.dumps(meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path) -> "FeatureMatrix":
        from pathlib import Path

        return cls.from_csv_text(Path(path).read_text(encoding="utf-8"))


def build_task_matrix(cohort: Cohort, task_id: int, cfg: FeatureConfig = FeatureConfig()) -> FeatureMatrix:
    """One row per subject with a usable recording of ``task_id``."""
    subjects = cohort.subjects_with_task(task_id)
    if len(subjects) < 2:
        raise TaskUnavailable(task_id, len(subjects))
    columns = feature_catalogue(cfg, task_id)
    keys = [(c.base, c.segment, c.functional) for c in columns]
    ids, labels, rows = [], [], []
    failed: dict[str, str] = {}
    discarded: dict[str, int] = {}
    inair_pressure: dict[str, int] = {}
    for s in sorted(subjects, key=lambda s: s.id):
        rec = cohort.recordings[(s.id, task_id)]
        try:
            feats = recording_features(rec, cfg)
        except SignalError as exc:
            failed[s.id] = str(exc)
            log.warning("task %d subject %s skipped: %s", task_id, s.id, exc)
            continue
        ids.append(s.id)
        labels.append(int(s.is_pd))
        rows.append([feats[k] for k in keys])
        n_disc = discarded_runs(rec, cfg.min_stroke_samples)
        if n_disc:
            discarded[s.id] = n_disc
        if rec.inair_pressure_count:
            inair_pressure[s.id] = rec.inair_pressure_count
    if len(ids) < 2:
        raise TaskUnavailable(task_id, len(ids))
    diagnostics = {
        "task_id": task_id,
        "failed_subjects": failed,
        "discarded_short_runs": discarded,
        "inair_pressure_samples": inair_pressure,
    }
    return FeatureMatrix(ids, np.array(labels), columns, np.array(rows, dtype=float), diagnostics)


def merge_tasks(matrices: Sequence[FeatureMatrix]) -> FeatureMatrix:
    """Column-wise union keyed by subject; missing tasks leave NaN blocks."""
    if not matrices:
        raise NoCommonSubjects("nothing to merge")
    common = set(matrices[0].subject_ids)
    for m in matrices[1:]:
        common &= set(m.subject_ids)
    if not common:
        raise NoCommonSubjects("no subject appears in every matrix")

    label_of: dict[str, int] = {}
    for m in matrices:
        for sid, lab in zip(m.subject_ids, m.labels):
            if label_of.setdefault(sid, int(lab)) != int(lab):
                raise FeatureError(f"subject {sid} has inconsistent labels across tasks")
    ids = sorted(label_of)
    row_of = {sid: i for i, sid in enumerate(ids)}

    columns: list[FeatureName] = []
    for m in matrices:
        columns.extend(m.columns)
    if len(set(columns)) != len(columns):
        raise FeatureError("duplicate columns across merged matrices")
    order = sorted(range(len(columns)), key=lambda j: columns[j])

    values = np.full((len(ids), len(columns)), np.nan)
    offset = 0
    for m in matrices:
        rows = [row_of[sid] for sid in m.subject_ids]
        values[np.ix_(rows, range(offset, offset + len(m.columns)))] = m.values
        offset += len(m.columns)
    missing: dict[str, list[int]] = {}
    for m in matrices:
        present = set(m.subject_ids)
        tasks = sorted({c.task_id for c in m.columns})
        for sid in ids:
            if sid not in present:
                missing.setdefault(sid, []).extend(tasks)
    diagnostics = {"merged_tasks": sorted({c.task_id for c in columns}), "missing_tasks": missing}
    return FeatureMatrix(
        ids,
        np.array([label_of[s] for s in ids]),
        [columns[j] for j in order],
        values[:, order],
        diagnostics,
    )


# --- normalisation ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Normalizer:
    """Per-column median imputation then z-scoring, fitted on a row subset."""

    columns: list[FeatureName]  # columns of the matrix it was fitted on
    keep: np.ndarray  # indices of retained columns
    median: np.ndarray  # for retained columns
    mean: np.ndarray
    std: np.ndarray
    dropped: list[tuple[str, str]]

    @property
    def kept_columns(self) -> list[FeatureName]:
        return [self.columns[j] for j in self.keep]

    def params_equal(self, other: "Normalizer") -> bool:
        return (
            self.columns == other.columns
            and np.array_equal(self.keep, other.keep)
            and np.array_equal(self.median, other.median)
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.std, other.std)
        )


def fit_normalizer(m: FeatureMatrix, fit_rows: Sequence[int] | np.ndarray | None = None) -> Normalizer:
    """Fit imputation medians and z-score parameters on ``fit_rows`` only.

    Columns that are entirely absent or constant over the fit rows are
    dropped and listed in ``dropped``.
    """
    rows = np.arange(m.shape[0]) if fit_rows is None else np.asarray(fit_rows, dtype=int)
    if len(rows) < 2:
        raise DegenerateFitSet(f"need at least 2 fit rows, got {len(rows)}")
    X = m.values[rows]
    present = np.isfinite(X)
    any_present = present.any(axis=0)
    with np.errstate(all="ignore"):
        med = np.nanmedian(np.where(present, X, np.nan), axis=0) if X.size else np.zeros(0)
    med = np.where(any_present, med, np.nan)
    Xi = np.where(present, X, med[None, :])
    mean = Xi.mean(axis=0)
    std = Xi.std(axis=0, ddof=1)
    dropped: list[tuple[str, str]] = []
    keep = []
    for j, col in enumerate(m.columns):
        if not any_present[j]:
            dropped.append((str(col), "absent"))
        elif not np.isfinite(std[j]) or std[j] <= 1e-12 * max(1.0, abs(mean[j])):
            dropped.append((str(col), "constant"))
        else:
            keep.append(j)
    for name, why in dropped:
        log.debug("normalizer drops %s (%s)", name, why)
    if not keep:
        raise DegenerateFitSet("every column is absent or constant on the fit rows")
    keep_arr = np.array(keep, dtype=int)
    return Normalizer(list(m.columns), keep_arr, med[keep_arr], mean[keep_arr], std[keep_arr], dropped)


def apply_normalizer(norm: Normalizer, m: FeatureMatrix) -> FeatureMatrix:
    if list(m.columns) != norm.columns:
        raise FeatureError("matrix columns differ from those the normalizer was fitted on")
    X = m.values[:, norm.keep]
    X = np.where(np.isfinite(X), X, norm.median[None, :])
    Z = (X - norm.mean[None, :]) / norm.std[None, :]
    diag = dict(m.diagnostics)
    diag["normalizer_dropped"] = [list(d) for d in norm.dropped]
    return FeatureMatrix(list(m.subject_ids), m.labels.copy(), norm.kept_columns, Z, diag)
