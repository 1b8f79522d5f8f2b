import numpy as np
import pytest

from beamgap.arrays import ArrayConfig
from beamgap.channel import RadioConfig
from beamgap.scenario import WorldLayout


@pytest.fixture
def radio():
    return RadioConfig()


def make_world(extent=(1000.0, 1000.0), blockers=(), scatterers=None, bs_height=15.0,
               bs_rows=8, bs_cols=8):
    """Hand-built world for channel tests (no seeded placement)."""
    bs_position = np.array([0.0, 0.0, bs_height])
    return WorldLayout(
        extent=extent,
        bs_position=bs_position,
        bs_array=ArrayConfig(rows=bs_rows, cols=bs_cols, position=bs_position),
        blockers=tuple(blockers),
        scatterers=np.zeros((0, 3)) if scatterers is None else np.asarray(scatterers, dtype=float),
        seed=0,
    )


@pytest.fixture
def free_world():
    return make_world()
