import numpy as np
import pytest

from ddsr.core.config import Settings
from ddsr.models.channel import ChannelSpec, ProblemDims
from ddsr.models.experiment import SolverSuite
from ddsr.models.solvers import AdcgConfig, OmpConfig, RefinementConfig
from ddsr.services.generator import random_identifier
from ddsr.services.measurement import build_g


@pytest.fixture
def small_dims():
    """L1 = L2 = T*Omega = 11."""
    return ProblemDims(T=1.0, Omega=11.0, N1=5, N2=5)


@pytest.fixture
def medium_dims():
    return ProblemDims(T=1.0, Omega=21.0, N1=10, N2=10)


@pytest.fixture
def table_dims():
    """Dimensions of the published comparison: T*Omega = 93 < L = 101."""
    return ProblemDims(T=3.0, Omega=31.0, N1=50, N2=50)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def identifier(small_dims):
    return random_identifier(small_dims, 7)


@pytest.fixture
def G(identifier):
    return build_g(identifier)


@pytest.fixture
def single_feature(small_dims):
    """One off-grid feature with unit amplitude."""
    return ChannelSpec.from_arrays(small_dims, [1.0 + 0j], [0.1234], [1.789])


@pytest.fixture
def small_suite():
    """Solver settings with coarse grids so that every algorithm runs in well under a second."""
    return SolverSuite(
        omp=OmpConfig(grid=(16, 16)),
        refine=RefinementConfig(initial_grid=(16, 16), levels=3),
        adcg=AdcgConfig(grid=(16, 16), inner_iters=3, max_outer_iters=5),
    )


@pytest.fixture
def settings(tmp_path):
    return Settings(output_dir=tmp_path / "results", threads=1)
