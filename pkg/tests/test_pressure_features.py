from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pahaw.cohort_io import Recording
from pahaw.feature_matrix import FeatureConfig, FeatureName, feature_catalogue
from pahaw.pressure_features import (
    CORRELATION_CHANNELS,
    SCOPES,
    count_pressure_changes,
    edge_features,
    pearson,
    pressure_correlations,
    pressure_for_recording,
    segment_pressure,
)
from pahaw.signal_prep import Stroke, derive_kinematics, segment_strokes
from pahaw.synth_cohort import analytic_fixtures, trapezoid_edge_samples, trapezoid_pressure

RATE = 100.0


def _stroke(p, x=None):
    n = len(p)
    t = np.arange(n) / RATE
    x = 0.2 * np.arange(n) + 0.01 * np.sin(np.arange(n)) if x is None else x
    return Stroke(0, n, np.asarray(x, float), np.zeros(n), t, np.asarray(p, float))


def _rec(p, x_mm=None):
    n = len(p)
    t = np.arange(n) / RATE
    x_mm = 5 + 10 * t if x_mm is None else x_mm
    return Recording("s", 2, np.asarray(x_mm) * 100, np.full(n, 300.0), t, np.ones(n, dtype=np.int8), np.asarray(p, float))


# --- segmentation -----------------------------------------------------------


@pytest.mark.parametrize("ramp, flat", [(20, 6), (12, 10), (30, 0), (25, 40)])
def test_trapezoid_edges_follow_median_split(ramp, flat):
    p = trapezoid_pressure(ramp, flat)
    seg = segment_pressure(p)
    expected = trapezoid_edge_samples(ramp, flat)
    assert abs(len(seg.rise) - expected) <= 1
    assert abs(len(seg.fall) - expected) <= 1
    assert len(seg.rise) + len(seg.main) + len(seg.fall) == len(p)


def test_trapezoid_edge_prediction_rejects_long_plateaus():
    with pytest.raises(ValueError):
        trapezoid_edge_samples(10, 30)


def test_constant_pressure_is_all_main():
    seg = segment_pressure(np.full(30, 420.0))
    assert (len(seg.rise), len(seg.main), len(seg.fall)) == (0, 30, 0)


def test_increasing_ramp_splits_at_half():
    seg = segment_pressure(np.arange(1.0, 41.0))
    assert seg.rise == range(0, 20)
    assert len(seg.fall) == 0


_profiles = st.lists(st.floats(0, 2000, allow_nan=False), min_size=3, max_size=80)


@given(_profiles)
def test_segmentation_covers_stroke_exactly(p):
    seg = segment_pressure(np.array(p))
    indices = list(seg.rise) + list(seg.main) + list(seg.fall)
    assert indices == list(range(len(p)))
    assert len(seg.main) >= 1


# --- NCP --------------------------------------------------------------------


def test_ncp_monotone_ramp():
    assert count_pressure_changes(np.linspace(10, 600, 50)) == 0


def test_ncp_two_humps():
    u = np.linspace(0, 1, 120)
    p = 300 + 200 * np.sin(2 * np.pi * u) ** 2  # max, min, max inside
    assert count_pressure_changes(p) == 3


def test_smoothing_reduces_ncp_on_noisy_ramps():
    from pahaw.kinematic_features import count_direction_changes

    fewer = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        p = np.linspace(100, 600, 200) + rng.normal(0, 4.0, 200)
        fewer += count_pressure_changes(p, span=5) < count_direction_changes(p)
    assert fewer >= 95


# --- correlations -----------------------------------------------------------


def test_pearson_matches_textbook_formula():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(3, 60))
        a, b = rng.normal(size=n), rng.normal(size=n)
        ma, mb = sum(a) / n, sum(b) / n
        num = sum((x - ma) * (y - mb) for x, y in zip(a, b))
        den = math.sqrt(sum((x - ma) ** 2 for x in a) * sum((y - mb) ** 2 for y in b))
        assert abs(pearson(a, b) - num / den) <= 1e-12


def test_pearson_degenerate_cases():
    assert math.isnan(pearson(np.ones(5), np.arange(5.0)))
    assert math.isnan(pearson(np.arange(2.0), np.arange(2.0)))


def _curvy_stroke(n=60):
    t = np.arange(n) / RATE
    x = 3 * t + 0.4 * np.sin(9 * t)
    y = 0.3 * np.cos(7 * t)
    return Stroke(0, n, x, y, t, np.full(n, 100.0))


def test_pressure_equal_to_velocity():
    s = _curvy_stroke()
    dk = derive_kinematics(s)
    p = dk.velocity.copy()
    rho = pressure_correlations(p, dk, segment_pressure(p))
    assert rho[("vel", "whole")] == pytest.approx(1.0, abs=1e-12)


def test_pressure_equal_to_negated_acceleration():
    s = _curvy_stroke()
    dk = derive_kinematics(s)
    p = -dk.acceleration
    rho = pressure_correlations(p, dk, segment_pressure(p))
    assert rho[("acc", "whole")] == pytest.approx(-1.0, abs=1e-12)


def test_injected_velocity_coupling_is_recovered():
    """Pressure built to correlate 0.9 with speed gives rho_vel near 0.9."""
    rhos = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n = 150
        t = np.arange(n) / RATE
        x = 20 * t + 0.8 * np.sin(2 * np.pi * 2.3 * t + rng.uniform(0, 6))
        rec = Recording("s", 2, x * 100, np.full(n, 300.0), t, np.ones(n, dtype=np.int8), np.zeros(n))
        (s,) = segment_strokes(rec)
        dk = derive_kinematics(s)
        z = (dk.velocity - dk.velocity.mean()) / dk.velocity.std()
        e = rng.normal(size=n)
        e = (e - e.mean()) / e.std()
        p = 500 + 60 * (0.9 * z + math.sqrt(1 - 0.81) * e)
        rhos.append(pressure_correlations(p, dk, segment_pressure(p))[("vel", "whole")])
    assert 0.8 <= float(np.mean(rhos)) <= 1.0


@given(st.integers(0, 50_000))
def test_correlations_are_bounded(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 60))
    s = Stroke(0, n, np.cumsum(rng.normal(size=n)), np.cumsum(rng.normal(size=n)), np.arange(n) / RATE, np.zeros(n))
    p = rng.uniform(0, 1000, n)
    dk = derive_kinematics(s)
    for v in pressure_correlations(p, dk, segment_pressure(p)).values():
        assert math.isnan(v) or -1.0 <= v <= 1.0


# --- edge features ----------------------------------------------------------


def test_constant_pressure_edges_are_zero():
    p = np.full(40, 400.0)
    t = np.arange(40) / RATE
    e = edge_features(p, t, segment_pressure(p))
    assert (e.r_time_rise, e.r_time_fall, e.r_press_rise, e.r_press_fall, e.overshoot) == (0, 0, 0, 0, 0)


def test_trapezoid_edge_values():
    ramp, flat, peak = 20, 6, 1000.0
    p = trapezoid_pressure(ramp, flat, peak)
    t = np.arange(len(p)) / RATE
    seg = segment_pressure(p)
    e = edge_features(p, t, seg)
    edge = trapezoid_edge_samples(ramp, flat)
    assert abs(e.r_time_rise - edge / RATE) <= 1 / RATE
    assert abs(e.r_time_fall - edge / RATE) <= 1 / RATE
    step = peak / (ramp + 1)
    # the rising edge spans the ramp samples below the median
    assert abs(e.r_press_rise - step * (edge - 1)) <= step
    assert e.overshoot == pytest.approx(float(p.max() - np.median(p)), abs=1e-12)


@given(_profiles)
def test_overshoot_is_max_minus_median(p):
    p = np.array(p)
    e = edge_features(p, np.arange(len(p)) / RATE, segment_pressure(p))
    assert e.overshoot >= 0
    assert abs(e.overshoot - (p.max() - np.median(p))) <= 1e-12 * max(1.0, p.max())
    assert min(e.r_time_rise, e.r_time_fall, e.r_press_rise, e.r_press_fall) >= 0


@given(st.integers(0, 50_000), st.floats(0.05, 20.0))
def test_pressure_scale_equivariance(seed, c):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(8, 80))
    p = 300 + np.cumsum(rng.normal(0, 20, n))
    p = np.maximum(p, 1.0)
    s = _stroke(p)
    dk = derive_kinematics(s)
    seg, seg_c = segment_pressure(p), segment_pressure(c * p)
    assert seg == seg_c
    assert count_pressure_changes(p) == count_pressure_changes(c * p)
    e, e_c = edge_features(p, s.timestamp, seg), edge_features(c * p, s.timestamp, seg_c)
    assert e_c.r_press_rise == pytest.approx(c * e.r_press_rise, rel=1e-12, abs=1e-9)
    assert e_c.r_press_fall == pytest.approx(c * e.r_press_fall, rel=1e-12, abs=1e-9)
    assert e_c.overshoot == pytest.approx(c * e.overshoot, rel=1e-12, abs=1e-9)
    assert (e_c.r_time_rise, e_c.r_time_fall) == (e.r_time_rise, e.r_time_fall)
    rho, rho_c = pressure_correlations(p, dk, seg), pressure_correlations(c * p, dk, seg_c)
    for key, v in rho.items():
        if math.isnan(v):
            assert math.isnan(rho_c[key])
        else:
            assert abs(rho_c[key] - v) <= 1e-9


@pytest.mark.parametrize("ramp, flat", [(20, 6), (15, 12), (9, 4)])
def test_time_reversal_swaps_edges(ramp, flat):
    p = trapezoid_pressure(ramp, flat)
    t = np.arange(len(p)) / RATE
    fwd = edge_features(p, t, segment_pressure(p))
    back = edge_features(p[::-1], t, segment_pressure(p[::-1]))
    assert abs(fwd.r_time_rise - back.r_time_fall) <= 1 / RATE + 1e-12
    assert abs(fwd.r_time_fall - back.r_time_rise) <= 1 / RATE + 1e-12


def test_trapezoid_fixture():
    fx = next(f for f in analytic_fixtures() if f.name == "trapezoid")
    rec = fx.recording
    strokes = segment_strokes(rec)
    raw = pressure_for_recording(rec, strokes, [derive_kinematics(s) for s in strokes])
    (seg,) = raw.segmentations
    assert abs(len(seg.rise) - fx.expected["rise_samples"]) <= 1
    assert abs(len(seg.fall) - fx.expected["fall_samples"]) <= 1
    assert abs(raw.r_time_rise[0] - fx.expected["r_time_rise"]) <= 1 / RATE
    assert abs(raw.overshoot[0] - fx.expected["overshoot"]) <= 1e-12


# --- per recording ----------------------------------------------------------


def test_constant_pressure_recording():
    rec = _rec(np.full(50, 350.0))
    strokes = segment_strokes(rec)
    raw = pressure_for_recording(rec, strokes, [derive_kinematics(s) for s in strokes])
    assert raw.ncp.tolist() == [0]
    assert raw.relative_ncp == 0.0
    assert all(np.isnan(v).all() for v in raw.rho.values())
    assert set(raw.rho) == {(c, s) for c in CORRELATION_CHANNELS for s in SCOPES}


def test_catalogue_has_relevance_table_features():
    cfg = FeatureConfig()
    assert FeatureName("relative NCP", "whole", "none", 8) in feature_catalogue(cfg, 8)
    assert FeatureName("R_press", "rise", "std", 3) in feature_catalogue(cfg, 3)
    assert FeatureName("R_time", "fall", "median", 3) in feature_catalogue(cfg, 3)
    assert FeatureName("horizontal jerk", "whole", "p99", 8) in feature_catalogue(cfg, 8)
