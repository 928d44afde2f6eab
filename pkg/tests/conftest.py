import sys
from pathlib import Path

import pytest

# tests/reference.py is imported as a plain module by several test files
sys.path.insert(0, str(Path(__file__).parent))

from opsim.core import GridSpec, ScenarioConfig


@pytest.fixture
def small_config() -> ScenarioConfig:
    """Tiny but structurally complete scenario for fast exact tests."""
    return ScenarioConfig(
        seed=11,
        duration_steps=20,
        grid=GridSpec(side_cells=120, cell_size_ft=10.0),
        n_patients=2,
        n_caregivers=3,
        n_clinical_staff=2,
        n_destinations=1,
        n_pois=5,
        participation_ratio=0.3,
        adult_population=60,
        range_mean_cells=12.0,
        range_sd_cells=4.0,
    )
