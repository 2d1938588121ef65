import io

import numpy as np
import pytest

from deltabn.dataset import DeltaDataset, compute_deltas, load_table
from deltabn.synthetic import demo_longitudinal_table
from deltabn.dataset import write_table


@pytest.fixture(scope="session")
def demo_csv(tmp_path_factory):
    """A 120-subject longitudinal CSV in the package input schema."""
    path = tmp_path_factory.mktemp("data") / "demo.csv"
    table = demo_longitudinal_table(120, seed=20240601)
    with open(path, "w") as fh:
        write_table(table, fh)
    return path


@pytest.fixture(scope="session")
def demo_deltas(demo_csv):
    return compute_deltas(load_table(demo_csv))


def continuous_dataset(columns: dict[str, np.ndarray]) -> DeltaDataset:
    """Assemble an all-continuous DeltaDataset from name -> array."""
    return DeltaDataset(
        order=tuple(columns),
        continuous={k: np.asarray(v, dtype=float) for k, v in columns.items()},
        discrete={},
        levels={},
    )


@pytest.fixture
def xy_deterministic():
    rng = np.random.default_rng(5)
    x = rng.normal(size=200)
    return continuous_dataset({"X": x, "Y": 2.0 * x})
