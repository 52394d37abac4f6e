import numpy as np
import pytest

from rtmpaint.dsp import StftParams
from rtmpaint.geometry import ImagingGrid, Position, SensorLayout, make_layout


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_params():
    """F = 33 bins; small enough for dense reference loops."""
    return StftParams(sample_rate=16000, window_length=64, hop=32, fft_size=64)


@pytest.fixture
def tiny_layout():
    return make_layout("linear", 4, 1.0, Position(0.0, 3.0))


@pytest.fixture
def tiny_grid():
    return ImagingGrid(extent=(0.0, 4.0, 0.0, 4.0), spacing=1.0)


def random_operator(rng, params, n_channels, grid_side):
    """Operator with random tensor entries over real micro geometry."""
    from rtmpaint.propagation import PropagationOperator

    layout = SensorLayout(
        kind="custom",
        positions=tuple(
            Position(float(x), float(y)) for x, y in rng.uniform(0, 5, size=(n_channels, 2))
        ),
    )
    grid = ImagingGrid(extent=(0.0, float(grid_side - 1), 0.0, float(grid_side - 1)), spacing=1.0)
    shape = (params.n_bins, n_channels, grid.n_points)
    tensor = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return PropagationOperator(
        tensor=tensor, params=params, c=343.0, layout=layout, grid=grid, r_min=0.5
    )
