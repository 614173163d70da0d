from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from pahaw.synth_cohort import SynthSpec, generate

DATA_DIR = Path(__file__).parent / "data"

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def manifest_path() -> Path:
    """Demographic table of the 75-subject reference cohort."""
    return DATA_DIR / "cohort_manifest.csv"


@pytest.fixture(scope="session")
def small_cohort():
    """Five subjects per group on three tasks, with a strong speed effect."""
    spec = SynthSpec(n_per_group=5, seed=11, tasks=(2, 3, 8), effect_map={"stroke_speed": -2.0})
    return generate(spec)
