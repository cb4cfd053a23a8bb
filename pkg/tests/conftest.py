import numpy as np
import pytest

from pwcet.bounds import ParamGrid
from pwcet.empirical import SampleSet, load_samples


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.Generator(np.random.Philox(20240501))


@pytest.fixture
def weibull_samples(rng) -> SampleSet:
    """1000 draws of Weibull(shape 4, scale 80)."""
    return load_samples(80.0 * rng.weibull(4.0, 1000))


@pytest.fixture
def small_grid() -> ParamGrid:
    return ParamGrid(k_values=(1.0, 2.0, 4.0, 8.0), d_values=(10.0, 100.0, 1000.0))


@pytest.fixture
def write_trace(tmp_path):
    """Write text lines to a trace file and return its path."""

    def _write(lines, name="trace.txt"):
        path = tmp_path / name
        path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")
        return path

    return _write
