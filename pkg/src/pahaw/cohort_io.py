"""Reading and writing digitizer recordings and the subject manifest.

On-disk layout::

    <root>/manifest.csv
    <root>/<subject_id>/task<k>.svc

A recording file starts with the sample count ``N`` followed by ``N`` lines
``x y t b p`` (position, timestamp, button status, pressure) separated by
single spaces.  Timestamps written with a decimal point or exponent are
seconds; integer-only timestamp columns are taken to be milliseconds.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from ._io import atomic_write_text, fmt_float
from .errors import (
    CountMismatch,
    DuplicateId,
    EmptyGroup,
    MalformedLine,
    MalformedRow,
    MissingFile,
    NonMonotoneTime,
    TooFewOnSurface,
)

TASK_IDS = tuple(range(1, 9))

TASK_NAMES = {
    1: "Archimedean spiral",
    2: "letter l",
    3: "bigram le",
    4: "trigram les",
    5: "word lektorka",
    6: "word porovnat",
    7: "word nepopadnout",
    8: "sentence",
}

MANIFEST_COLUMNS = ("id", "sex", "diagnosis", "age", "led", "updrs_v", "years_since_diag")

_INT_RE = re.compile(r"^[+-]?\d+$")


class Sample(NamedTuple):
    x: float
    y: float
    timestamp: float
    button: int
    pressure: float


@dataclass(frozen=True, eq=False)
class Recording:
    """One task performed by one subject, as parallel sample arrays.

    ``x``/``y`` stay in device units; conversion to millimetres happens at
    stroke segmentation.  ``timestamp`` is in seconds.
    """

    subject_id: str
    task_id: int
    x: np.ndarray
    y: np.ndarray
    timestamp: np.ndarray
    button: np.ndarray
    pressure: np.ndarray
    nominal_rate: float = 100.0

    def __len__(self) -> int:
        return len(self.timestamp)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Recording):
            return NotImplemented
        return (
            self.subject_id == other.subject_id
            and self.task_id == other.task_id
            and self.nominal_rate == other.nominal_rate
            and all(
                np.array_equal(getattr(self, k), getattr(other, k))
                for k in ("x", "y", "timestamp", "button", "pressure")
            )
        )

    def sample(self, i: int) -> Sample:
        return Sample(
            float(self.x[i]),
            float(self.y[i]),
            float(self.timestamp[i]),
            int(self.button[i]),
            float(self.pressure[i]),
        )

    @property
    def samples(self) -> list[Sample]:
        return [self.sample(i) for i in range(len(self))]

    @property
    def duration(self) -> float:
        return float(self.timestamp[-1] - self.timestamp[0])

    @property
    def inair_pressure_count(self) -> int:
        """In-air samples reporting residual pressure (flagged, never rejected)."""
        return int(np.count_nonzero((self.button == 0) & (self.pressure > 0)))

    @classmethod
    def from_samples(
        cls,
        subject_id: str,
        task_id: int,
        samples: Iterable[Sequence[float]],
        nominal_rate: float = 100.0,
    ) -> "Recording":
        arr = np.asarray(list(samples), dtype=float).reshape(-1, 5)
        rec = cls(
            subject_id,
            int(task_id),
            arr[:, 0].copy(),
            arr[:, 1].copy(),
            arr[:, 2].copy(),
            arr[:, 3].astype(np.int8),
            arr[:, 4].copy(),
            nominal_rate,
        )
        validate_recording(rec)
        return rec


def validate_recording(rec: Recording, path: str | None = None) -> None:
    """Check the type invariants; raise the matching ingest error."""
    t = rec.timestamp
    # line numbers are 1-based file lines; line 1 is the count header
    bad = np.flatnonzero(np.diff(t) < 0)
    if bad.size:
        raise NonMonotoneTime(int(bad[0]) + 3, path)
    for name in ("x", "y", "timestamp", "pressure"):
        arr = getattr(rec, name)
        nonfinite = np.flatnonzero(~np.isfinite(arr))
        if nonfinite.size:
            raise MalformedLine(int(nonfinite[0]) + 2, f"non-finite {name}", path)
    wrong_button = np.flatnonzero((rec.button != 0) & (rec.button != 1))
    if wrong_button.size:
        raise MalformedLine(int(wrong_button[0]) + 2, "button must be 0 or 1", path)
    negative = np.flatnonzero(rec.pressure < 0)
    if negative.size:
        raise MalformedLine(int(negative[0]) + 2, "negative pressure", path)
    on_surface = int(np.count_nonzero(rec.button == 1))
    if on_surface < 2:
        raise TooFewOnSurface(on_surface, path)


def parse_recording_text(
    text: str,
    subject_id: str,
    task_id: int,
    time_unit: str = "auto",
    path: str | None = None,
) -> Recording:
    if time_unit not in ("auto", "s", "ms"):
        raise ValueError(f"time_unit must be 'auto', 's' or 'ms', got {time_unit!r}")
    lines = text.split("\n")
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise MalformedLine(1, "empty file", path)
    header = lines[0].strip()
    if not _INT_RE.match(header) or int(header) < 0:
        raise MalformedLine(1, "first line must be the sample count", path)
    expected = int(header)
    body = lines[1:]
    if len(body) != expected:
        raise CountMismatch(expected, len(body), path)

    values = np.empty((expected, 5), dtype=float)
    time_tokens_integer = True
    for k, line in enumerate(body):
        line_no = k + 2
        parts = line.split()
        if len(parts) == 7:
            # x y t button azimuth altitude pressure: the pen angles are not used
            parts = parts[:4] + parts[6:]
        elif len(parts) != 5:
            raise MalformedLine(line_no, f"expected 5 or 7 columns, got {len(parts)}", path)
        try:
            row = [float(p) for p in parts]
        except ValueError:
            raise MalformedLine(line_no, "non-numeric column", path) from None
        if not all(math.isfinite(v) for v in row):
            raise MalformedLine(line_no, "non-finite value", path)
        if row[3] not in (0.0, 1.0):
            raise MalformedLine(line_no, "button must be 0 or 1", path)
        if row[4] < 0:
            raise MalformedLine(line_no, "negative pressure", path)
        if k and row[2] < values[k - 1, 2]:
            raise NonMonotoneTime(line_no, path)
        if time_tokens_integer and not _INT_RE.match(parts[2]):
            time_tokens_integer = False
        values[k] = row

    t = values[:, 2]
    if time_unit == "ms" or (time_unit == "auto" and time_tokens_integer and expected):
        t = t / 1000.0
    rec = Recording(
        subject_id,
        int(task_id),
        values[:, 0].copy(),
        values[:, 1].copy(),
        t.copy(),
        values[:, 3].astype(np.int8),
        values[:, 4].copy(),
    )
    on_surface = int(np.count_nonzero(rec.button == 1))
    if on_surface < 2:
        raise TooFewOnSurface(on_surface, path)
    return rec


def parse_recording(
    path: str | Path, subject_id: str, task_id: int, time_unit: str = "auto"
) -> Recording:
    path = Path(path)
    if not path.exists():
        raise MissingFile(str(path))
    text = path.read_text(encoding="utf-8")
    return parse_recording_text(text, subject_id, task_id, time_unit, str(path))


def format_recording(rec: Recording) -> str:
    out = io.StringIO()
    out.write(f"{len(rec)}\n")
    for i in range(len(rec)):
        out.write(
            f"{fmt_float(rec.x[i])} {fmt_float(rec.y[i])} {fmt_float(rec.timestamp[i])} "
            f"{int(rec.button[i])} {fmt_float(rec.pressure[i])}\n"
        )
    return out.getvalue()


def write_recording(rec: Recording, path: str | Path) -> None:
    atomic_write_text(path, format_recording(rec))


# --- manifest ---------------------------------------------------------------


@dataclass(frozen=True)
class SubjectRecord:
    id: str
    sex: str
    diagnosis: str  # "PD" or "H"
    age: float
    led: float | None = None
    updrs_v: float | None = None
    years_since_diag: float | None = None

    @property
    def is_pd(self) -> bool:
        return self.diagnosis == "PD"


def _optional_float(token: str) -> float | None:
    token = token.strip()
    if token == "-" or token == "":
        return None
    return float(token)


def parse_manifest_text(text: str, path: str | None = None) -> list[SubjectRecord]:
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if any(cell.strip() for cell in r)]
    if not rows:
        raise MalformedRow(1, "missing header", path)
    header = tuple(c.strip().lower() for c in rows[0])
    if header != MANIFEST_COLUMNS:
        raise MalformedRow(1, f"header must be {','.join(MANIFEST_COLUMNS)}", path)

    subjects: list[SubjectRecord] = []
    seen: set[str] = set()
    for row_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(MANIFEST_COLUMNS):
            raise MalformedRow(row_no, f"expected {len(MANIFEST_COLUMNS)} fields", path)
        sid, sex, diag, age, led, updrs, years = (c.strip() for c in row)
        if not sid:
            raise MalformedRow(row_no, "empty id", path)
        sex = sex.upper()
        if sex not in ("M", "F"):
            raise MalformedRow(row_no, f"sex must be M or F, got {sex!r}", path)
        d = diag.lower()
        if d == "pd":
            diagnosis = "PD"
        elif d in ("healthy", "h"):
            diagnosis = "H"
        else:
            raise MalformedRow(row_no, f"unknown diagnosis {diag!r}", path)
        try:
            record = SubjectRecord(
                sid,
                sex,
                diagnosis,
                float(age),
                _optional_float(led),
                _optional_float(updrs),
                _optional_float(years),
            )
        except ValueError:
            raise MalformedRow(row_no, "non-numeric field", path) from None
        if diagnosis == "H" and any(
            v is not None for v in (record.led, record.updrs_v, record.years_since_diag)
        ):
            raise MalformedRow(row_no, "healthy subject with clinical fields", path)
        if sid in seen:
            raise DuplicateId(sid, path)
        seen.add(sid)
        subjects.append(record)
    return subjects


def parse_manifest(path: str | Path) -> list[SubjectRecord]:
    path = Path(path)
    if not path.exists():
        raise MissingFile(str(path))
    return parse_manifest_text(path.read_text(encoding="utf-8"), str(path))


def _fmt_number(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return fmt_float(value)


def _fmt_optional(value: float | None) -> str:
    return "-" if value is None else _fmt_number(value)


def format_manifest(subjects: Sequence[SubjectRecord]) -> str:
    lines = [",".join(MANIFEST_COLUMNS)]
    for s in subjects:
        lines.append(
            ",".join(
                [
                    s.id,
                    s.sex,
                    "PD" if s.is_pd else "healthy",
                    _fmt_number(s.age),
                    _fmt_optional(s.led),
                    _fmt_optional(s.updrs_v),
                    _fmt_optional(s.years_since_diag),
                ]
            )
        )
    return "\n".join(lines) + "\n"


# --- cohort -----------------------------------------------------------------


@dataclass
class Cohort:
    subjects: list[SubjectRecord]
    recordings: dict[tuple[str, int], Recording] = field(default_factory=dict)

    def __post_init__(self) -> None:
        ids = {s.id for s in self.subjects}
        for sid, _ in self.recordings:
            if sid not in ids:
                raise ValueError(f"recording for unknown subject {sid!r}")

    def subject(self, subject_id: str) -> SubjectRecord:
        for s in self.subjects:
            if s.id == subject_id:
                return s
        raise KeyError(subject_id)

    def subjects_with_task(self, task_id: int) -> list[SubjectRecord]:
        return [s for s in self.subjects if (s.id, task_id) in self.recordings]

    @property
    def task_ids(self) -> list[int]:
        return sorted({k for _, k in self.recordings})


def load_cohort(
    root: str | Path, tasks: Iterable[int] | None = None, time_unit: str = "auto"
) -> Cohort:
    root = Path(root)
    subjects = parse_manifest(root / "manifest.csv")
    wanted = tuple(tasks) if tasks is not None else TASK_IDS
    recordings: dict[tuple[str, int], Recording] = {}
    for s in subjects:
        for k in wanted:
            path = root / s.id / f"task{k}.svc"
            if path.exists():
                recordings[(s.id, k)] = parse_recording(path, s.id, k, time_unit)
    return Cohort(subjects, recordings)


def write_cohort(cohort: Cohort, root: str | Path) -> None:
    root = Path(root)
    atomic_write_text(root / "manifest.csv", format_manifest(cohort.subjects))
    for (sid, k), rec in sorted(cohort.recordings.items()):
        write_recording(rec, root / sid / f"task{k}.svc")


# --- summary ----------------------------------------------------------------


@dataclass(frozen=True)
class Stat:
    n: int
    mean: float | None
    std: float | None  # sample std (n - 1); None when n < 2


@dataclass(frozen=True)
class GroupSummary:
    label: str
    count: int
    n_male: int
    n_female: int
    age: Stat
    updrs_v: Stat
    years_since_diag: Stat
    led: Stat


def _stat(values: Sequence[float | None]) -> Stat:
    present = np.array([v for v in values if v is not None], dtype=float)
    n = len(present)
    if n == 0:
        return Stat(0, None, None)
    mean = float(present.mean())
    std = float(present.std(ddof=1)) if n > 1 else None
    return Stat(n, mean, std)


def cohort_summary(
    cohort: Cohort | Sequence[SubjectRecord],
) -> dict[str, GroupSummary]:
    """Per-group demographics in the layout of the usual cohort table."""
    subjects = cohort.subjects if isinstance(cohort, Cohort) else list(cohort)
    out: dict[str, GroupSummary] = {}
    for label in ("PD", "H"):
        group = [s for s in subjects if s.diagnosis == label]
        if not group:
            raise EmptyGroup(label)
        out[label] = GroupSummary(
            label=label,
            count=len(group),
            n_male=sum(s.sex == "M" for s in group),
            n_female=sum(s.sex == "F" for s in group),
            age=_stat([s.age for s in group]),
            updrs_v=_stat([s.updrs_v for s in group]),
            years_since_diag=_stat([s.years_since_diag for s in group]),
            led=_stat([s.led for s in group]),
        )
    return out


def labels_for(subjects: Mapping[str, SubjectRecord] | Sequence[SubjectRecord]) -> dict[str, int]:
    """Map subject id to binary label, PD = 1."""
    items = subjects.values() if isinstance(subjects, Mapping) else subjects
    return {s.id: int(s.is_pd) for s in items}
