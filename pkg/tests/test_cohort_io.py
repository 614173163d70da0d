from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pahaw.cohort_io import (
    Cohort,
    Recording,
    SubjectRecord,
    cohort_summary,
    format_manifest,
    format_recording,
    labels_for,
    load_cohort,
    parse_manifest,
    parse_manifest_text,
    parse_recording,
    parse_recording_text,
    write_cohort,
    write_recording,
)
from pahaw.errors import (
    CountMismatch,
    DuplicateId,
    EmptyGroup,
    MalformedLine,
    MalformedRow,
    MissingFile,
    NonMonotoneTime,
    TooFewOnSurface,
)
from pahaw.synth_cohort import SynthSpec, generate

HEADER = "id,sex,diagnosis,age,led,updrs_v,years_since_diag\n"


# --- recordings -------------------------------------------------------------


def test_minimal_file():
    rec = parse_recording_text("2\n0 0 0.00 1 100\n10 0 0.10 1 100", "01", 2)
    assert len(rec) == 2
    assert rec.duration == pytest.approx(0.10)
    assert rec.sample(1).x == 10.0


def test_count_mismatch_reports_both_numbers():
    with pytest.raises(CountMismatch) as info:
        parse_recording_text("3\n0 0 0.00 1 100\n10 0 0.10 1 100\n", "01", 2)
    assert (info.value.expected, info.value.got) == (3, 2)


def test_integer_timestamps_are_milliseconds():
    rec = parse_recording_text("3\n0 0 0 1 5\n1 0 10 1 5\n2 0 20 1 5\n", "01", 2)
    np.testing.assert_allclose(rec.timestamp, [0.0, 0.01, 0.02])
    rec_s = parse_recording_text("3\n0 0 0 1 5\n1 0 10 1 5\n2 0 20 1 5\n", "01", 2, time_unit="s")
    np.testing.assert_array_equal(rec_s.timestamp, [0.0, 10.0, 20.0])


@pytest.mark.parametrize(
    "text, error, line",
    [
        ("2\n0 0 0.0 1 1\n1 0 0.1 1\n", MalformedLine, 3),
        ("2\n0 0 0.0 1 1\n1 0 x 1 1\n", MalformedLine, 3),
        ("2\n0 0 0.0 2 1\n1 0 0.1 1 1\n", MalformedLine, 2),
        ("2\n0 0 0.0 1 -1\n1 0 0.1 1 1\n", MalformedLine, 2),
        ("3\n0 0 0.2 1 1\n1 0 0.1 1 1\n2 0 0.3 1 1\n", NonMonotoneTime, 3),
        ("two\n0 0 0.0 1 1\n", MalformedLine, 1),
    ],
)
def test_malformed_files_name_the_line(text, error, line):
    with pytest.raises(error) as info:
        parse_recording_text(text, "01", 2, path="f.svc")
    assert info.value.line_no == line
    assert "f.svc" in str(info.value)


def test_pen_angle_columns_are_skipped():
    five = parse_recording_text("2\n3 4 0.0 1 250\n5 6 0.01 1 260\n", "01", 2)
    seven = parse_recording_text("2\n3 4 0.0 1 1200 600 250\n5 6 0.01 1 1210 610 260\n", "01", 2)
    for field in ("x", "y", "timestamp", "button", "pressure"):
        np.testing.assert_array_equal(getattr(seven, field), getattr(five, field))
    with pytest.raises(MalformedLine):
        parse_recording_text("1\n3 4 0.0 1 1200 250\n", "01", 2)


def test_one_on_surface_sample_is_rejected():
    with pytest.raises(TooFewOnSurface):
        parse_recording_text("3\n0 0 0.0 0 0\n1 0 0.1 1 3\n2 0 0.2 0 0\n", "01", 2)


def test_inair_pressure_is_flagged_not_rejected():
    rec = parse_recording_text("3\n0 0 0.0 0 7\n1 0 0.1 1 3\n2 0 0.2 1 3\n", "01", 2)
    assert rec.inair_pressure_count == 1


def test_duplicate_timestamps_allowed():
    rec = parse_recording_text("3\n0 0 0.0 1 1\n1 0 0.0 1 1\n2 0 0.1 1 1\n", "01", 2)
    assert len(rec) == 3


def test_missing_file(tmp_path):
    with pytest.raises(MissingFile):
        parse_recording(tmp_path / "nope.svc", "01", 1)


def test_synthetic_spiral_round_trip(tmp_path):
    cohort, _ = generate(SynthSpec(n_per_group=2, seed=4, tasks=(1,)))
    rec = cohort.recordings[("00001", 1)]
    assert len(rec) >= 1000
    path = tmp_path / "task1.svc"
    write_recording(rec, path)
    back = parse_recording(path, rec.subject_id, 1)
    assert back == rec
    assert path.read_text() == format_recording(back)


_finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False, width=32)


@st.composite
def recordings(draw):
    n = draw(st.integers(2, 40))
    steps = draw(st.lists(st.floats(0, 0.05, allow_nan=False), min_size=n, max_size=n))
    t = np.cumsum(np.asarray(steps, dtype=float))
    button = np.asarray(draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)), dtype=np.int8)
    button[:2] = 1
    xs = draw(st.lists(_finite, min_size=n, max_size=n))
    ys = draw(st.lists(_finite, min_size=n, max_size=n))
    ps = draw(st.lists(st.floats(0, 4096, allow_nan=False, width=32), min_size=n, max_size=n))
    return Recording("s", 3, np.array(xs, float), np.array(ys, float), t, button, np.array(ps, float))


@given(recordings())
def test_format_then_parse_is_identity(rec):
    text = format_recording(rec)
    back = parse_recording_text(text, "s", 3, time_unit="s")
    assert back == rec
    assert format_recording(back) == text


@given(recordings(), st.sampled_from(["time", "button", "pressure", "count"]), st.data())
def test_corrupted_files_raise_the_matching_error(rec, fault, data):
    lines = format_recording(rec).splitlines()
    n = len(rec)
    if fault == "count":
        lines[0] = str(n + data.draw(st.integers(1, 3)))
        expected = CountMismatch
    else:
        k = data.draw(st.integers(1, n - 1)) if fault == "time" else data.draw(st.integers(0, n - 1))
        parts = lines[k + 1].split()
        if fault == "time":
            parts[2] = repr(float(rec.timestamp[k - 1]) - 1.0)
            expected = NonMonotoneTime
        elif fault == "button":
            parts[3] = "3"
            expected = MalformedLine
        else:
            parts[4] = "-1"
            expected = MalformedLine
        lines[k + 1] = " ".join(parts)
    with pytest.raises(expected):
        parse_recording_text("\n".join(lines), "s", 3, time_unit="s")


# --- manifest ---------------------------------------------------------------


def test_manifest_rows():
    subjects = parse_manifest_text(HEADER + "01,F,PD,68,1115,2,6\n26,F,healthy,57,-,-,-\n")
    assert subjects[0] == SubjectRecord("01", "F", "PD", 68.0, 1115.0, 2.0, 6.0)
    assert subjects[1] == SubjectRecord("26", "F", "H", 57.0)
    assert subjects[1].led is None and subjects[1].updrs_v is None


def test_duplicate_id():
    with pytest.raises(DuplicateId) as info:
        parse_manifest_text(HEADER + "01,F,PD,68,1115,2,6\n01,M,PD,60,900,2,3\n")
    assert info.value.subject_id == "01"


@pytest.mark.parametrize(
    "row",
    [
        "02,X,PD,60,1,1,1",
        "02,F,maybe,60,1,1,1",
        "02,F,PD,sixty,1,1,1",
        "02,F,healthy,60,300,-,-",
        "02,F,PD,60,1,1",
    ],
)
def test_bad_manifest_rows(row):
    with pytest.raises(MalformedRow):
        parse_manifest_text(HEADER + row + "\n")


def test_manifest_round_trip(manifest_path):
    subjects = parse_manifest(manifest_path)
    assert parse_manifest_text(format_manifest(subjects)) == subjects


def test_reference_cohort_demographics(manifest_path):
    summary = cohort_summary(parse_manifest(manifest_path))
    pd_, h = summary["PD"], summary["H"]
    assert (pd_.count, h.count) == (37, 38)
    assert (pd_.n_male, pd_.n_female) == (19, 18)
    assert (h.n_male, h.n_female) == (20, 18)
    assert pd_.age.mean == pytest.approx(69.3, abs=0.5)
    assert pd_.age.std == pytest.approx(10.9, abs=0.5)
    assert h.age.mean == pytest.approx(62.4, abs=0.5)
    assert h.age.std == pytest.approx(11.3, abs=0.5)
    assert pd_.updrs_v.mean == pytest.approx(2.27, abs=0.5)
    assert pd_.updrs_v.std == pytest.approx(0.84, abs=0.5)
    assert h.led.n == 0 and h.led.mean is None


def test_single_subject_group_has_no_std():
    subjects = [SubjectRecord("1", "M", "PD", 70.0, 500.0, 2.0, 3.0), SubjectRecord("2", "F", "H", 50.0)]
    summary = cohort_summary(subjects)
    assert summary["PD"].age.mean == 70.0
    assert summary["PD"].age.std is None


def test_empty_group():
    with pytest.raises(EmptyGroup):
        cohort_summary([SubjectRecord("1", "M", "PD", 70.0, 500.0, 2.0, 3.0)])


@pytest.mark.parametrize("seed", range(5))
def test_summary_matches_two_pass_recomputation(seed):
    rng = np.random.default_rng(seed)
    subjects = []
    for i in range(10):
        pd = i < 5
        subjects.append(
            SubjectRecord(
                str(i),
                "M" if rng.random() < 0.5 else "F",
                "PD" if pd else "H",
                float(rng.uniform(30, 90)),
                float(rng.uniform(100, 3000)) if pd else None,
                float(rng.uniform(1, 5)) if pd else None,
                float(rng.uniform(0, 20)) if pd else None,
            )
        )
    summary = cohort_summary(subjects)
    for label, group in (("PD", subjects[:5]), ("H", subjects[5:])):
        ages = [s.age for s in group]
        mean = sum(ages) / len(ages)
        var = sum((a - mean) ** 2 for a in ages) / (len(ages) - 1)
        assert abs(summary[label].age.mean - mean) <= 1e-12 * abs(mean)
        assert abs(summary[label].age.std - var**0.5) <= 1e-12 * var**0.5
        assert summary[label].count == len(group)


# --- cohort -----------------------------------------------------------------


def test_cohort_directory_round_trip(tmp_path, small_cohort):
    cohort, _ = small_cohort
    write_cohort(cohort, tmp_path)
    back = load_cohort(tmp_path)
    assert back.subjects == cohort.subjects
    assert back.recordings.keys() == cohort.recordings.keys()
    assert all(back.recordings[k] == cohort.recordings[k] for k in cohort.recordings)
    assert back.task_ids == [2, 3, 8]


def test_missing_manifest(tmp_path):
    with pytest.raises(MissingFile) as info:
        load_cohort(tmp_path)
    assert "manifest.csv" in str(info.value)


def test_cohort_rejects_unknown_subject():
    rec = parse_recording_text("2\n0 0 0.0 1 1\n1 0 0.1 1 1\n", "zz", 2)
    with pytest.raises(ValueError):
        Cohort([SubjectRecord("01", "F", "H", 50.0)], {("zz", 2): rec})


def test_subject_may_lack_tasks(small_cohort):
    cohort, _ = small_cohort
    recs = {k: v for k, v in cohort.recordings.items() if k != ("00001", 3)}
    partial = Cohort(cohort.subjects, recs)
    assert len(partial.subjects_with_task(3)) == len(cohort.subjects) - 1


def test_labels_mark_pd_as_positive(manifest_path):
    labels = labels_for(parse_manifest(manifest_path))
    assert labels["01"] == 1 and labels["26"] == 0
    assert sum(labels.values()) == 37
