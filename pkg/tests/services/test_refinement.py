import numpy as np
import pytest

from ddsr.models.channel import ChannelSpec, SampleVector
from ddsr.models.solvers import (
    OmpConfig,
    RefinementConfig,
    RefinementStrategy,
    RegularGrid,
    StopReason,
)
from ddsr.services.measurement import forward_atoms
from ddsr.services.refinement import (
    dominant_atoms,
    find_barycenters,
    local_grid,
    refine,
    strategy_barycenter,
    strategy_dominant,
)
from ddsr.services.sparse_solvers import omp

STEP = (0.01, 0.1)


class TestLocalGrid:
    def test_centred_k_by_k(self, small_dims):
        points = local_grid(small_dims, (0.1, 1.0), STEP, 5)
        assert points.shape == (25, 2)
        np.testing.assert_allclose(points.mean(axis=0), [0.1, 1.0])
        np.testing.assert_allclose(np.unique(points[:, 0]), 0.1 + 0.01 * np.arange(-2, 3))

    def test_clipped_to_domain(self, small_dims):
        points = local_grid(small_dims, (0.495, -5.45), STEP, 5)
        assert small_dims.contains(points[:, 0], points[:, 1])
        assert points[:, 0].max() == 0.5
        assert points[:, 1].min() == -5.5


class TestDominantStrategy:
    def test_threshold(self):
        points = np.array([[0.0, 0.0], [0.2, 1.0], [0.3, 2.0]])
        kept, mags = dominant_atoms(points, np.array([1.0, 0.01j, -0.5]), 0.1)
        np.testing.assert_array_equal(kept, points[[0, 2]])
        np.testing.assert_allclose(mags, [1.0, 0.5])

    def test_nothing_important(self, small_dims):
        points = np.array([[0.0, 0.0], [0.1, 1.0]])
        new = strategy_dominant(small_dims, points, np.array([0.01, 0.02]), 0.1, STEP, 5)
        assert new.shape == (0, 2)

    def test_one_dominant_atom(self, small_dims):
        points = np.array([[0.0, 0.0], [0.2, 2.0]])
        new = strategy_dominant(small_dims, points, np.array([1.0, 0.0]), 0.1, STEP, 5)
        assert len(new) == 25
        np.testing.assert_allclose(new.mean(axis=0), [0.0, 0.0], atol=1e-15)

    def test_two_far_apart(self, small_dims):
        points = np.array([[-0.3, -3.0], [0.3, 3.0]])
        new = strategy_dominant(small_dims, points, np.array([1.0, 1.0j]), 0.1, STEP, 5)
        assert len(new) == 50

    def test_keeps_only_the_largest_centers(self, small_dims):
        points = np.array([[-0.3, -3.0], [0.0, 0.0], [0.3, 3.0]])
        eta = np.array([0.5, 1.0, 0.8j])
        new = strategy_dominant(small_dims, points, eta, 0.1, STEP, 5, max_centers=2)
        assert len(new) == 50
        assert not np.any(np.all(np.isclose(new, points[0]), axis=1))
        assert np.any(np.all(np.isclose(new, points[1]), axis=1))


class TestBarycenters:
    def test_symmetric_pair(self):
        points = np.array([[0.0, 0.0], [0.1, 0.0]])
        centers, importance = find_barycenters(points, np.array([0.5, 0.5]), 0.1, (0.2, 0.2))
        np.testing.assert_allclose(centers, [[0.05, 0.0]])
        np.testing.assert_allclose(importance, [1.0])

    def test_cluster_and_weak_isolated_point(self):
        points = np.array([[0.0, 0.0], [0.01, 0.0], [0.0, 0.01], [0.4, 3.0]])
        eta = np.array([1.0, 1.0, 1.0, 0.05])
        centers, importance = find_barycenters(points, eta, 0.5, (0.05, 0.05))
        np.testing.assert_allclose(centers, [[0.01 / 3, 0.01 / 3]])
        np.testing.assert_allclose(importance, [3.0])

    def test_most_important_first(self):
        points = np.array([[0.0, 0.0], [0.3, 3.0], [0.31, 3.0]])
        centers, importance = find_barycenters(points, np.array([1.0, 0.8, 0.8]), 0.1, (0.05, 0.05))
        assert len(centers) == 2
        np.testing.assert_allclose(centers[0], [0.305, 3.0])
        assert importance[0] > importance[1]

    def test_strategy_grid_is_centred_on_barycenter(self, small_dims):
        points = np.array([[0.0, 0.0], [0.1, 0.0]])
        new = strategy_barycenter(
            small_dims, points, np.array([0.5, 0.5]), 0.1, (0.2, 0.2), STEP, 3
        )
        assert len(new) == 9
        np.testing.assert_allclose(new.mean(axis=0), [0.05, 0.0], atol=1e-15)

    def test_radius_must_be_positive(self, small_dims):
        with pytest.raises(ValueError):
            strategy_barycenter(small_dims, np.zeros((1, 2)), np.ones(1), 0.1, (0.0, 1.0), STEP, 3)


@pytest.fixture
def refine_config():
    return RefinementConfig(
        initial_grid=(16, 16),
        initial_atoms=1,
        local_grid=5,
        levels=8,
        shrink=0.5,
        lam=1e-2,
        max_features=1,
    )


class TestRefine:
    @pytest.mark.parametrize("strategy", list(RefinementStrategy))
    def test_single_off_grid_feature(self, single_feature, G, refine_config, strategy):
        cfg = refine_config.model_copy(update={"strategy": strategy})
        y = forward_atoms(single_feature, G)

        result = refine(y, G, cfg)

        coarse = RegularGrid.over(G.dims, *cfg.initial_grid)
        seed = omp(y, G, coarse, OmpConfig(grid=cfg.initial_grid, max_atoms=1))
        assert result.channel.S == 1
        assert result.stop_reason == StopReason.MAX_ITERATIONS
        assert abs(result.channel.taus()[0] - 0.1234) < coarse.tau_step / 4
        assert abs(result.channel.nus()[0] - 1.789) < coarse.nu_step / 4
        assert result.residual_norm <= seed.residual_norm
        assert len(result.history) == cfg.levels + 1

    def test_zero_data_gives_empty_atom_set(self, small_dims, G, refine_config):
        y = SampleVector.from_array(small_dims, np.zeros(small_dims.L2))
        result = refine(y, G, refine_config)
        assert result.channel.S == 0
        assert result.stop_reason == StopReason.EMPTY_ATOM_SET

    def test_keeps_most_important_features(self, small_dims, G, refine_config):
        channel = ChannelSpec.from_arrays(
            small_dims, [1.0, 0.9j], [-0.3, 0.25], [-3.2, 2.7]
        )
        cfg = refine_config.model_copy(update={"initial_atoms": 2, "max_features": 2, "levels": 4})
        result = refine(forward_atoms(channel, G), G, cfg)
        assert 1 <= result.channel.S <= 2
