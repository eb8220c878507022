import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bipec.data import Dataset, generate_quality_control  # noqa: E402


@pytest.fixture
def step_series():
    """Clean two-level series: 100 points at 0, 100 points at 5, sigma 1."""
    return generate_quality_control([(100, 0.0, 1.0), (100, 5.0, 1.0)], seed=7)


@pytest.fixture
def labeled_step_dataset():
    """Small labeled dataset of clean step series for tuner/service tests."""
    series = []
    annotations = []
    from bipec.data import AnnotationSet

    for seed in range(6):
        s, truth = generate_quality_control(
            [(80, 0.0, 1.0), (80, 5.0, 1.0)], seed=100 + seed
        )
        series.append(s)
        annotations.append(AnnotationSet(s.id, "truth", truth))
    return Dataset(name="steps", series=tuple(series), annotations=tuple(annotations))
