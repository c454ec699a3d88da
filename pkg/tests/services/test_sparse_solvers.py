import numpy as np
import pytest

from ddsr.models.channel import ChannelSpec, ProblemDims, SampleVector
from ddsr.models.solvers import OmpConfig, RegularGrid, StopReason
from ddsr.services.generator import random_channel, random_identifier
from ddsr.services.measurement import build_g, forward_atoms
from ddsr.services.sparse_solvers import (
    GridAtomSet,
    largest_singular_value_sq,
    lasso,
    lasso_objective,
    least_squares,
    omp,
    soft_threshold,
)


def complex_gaussian(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture
def well_conditioned(rng):
    """20 x 5 matrix with singular values 1, 0.8, 0.6, 0.5, 0.4 and a data vector."""
    Q, _ = np.linalg.qr(complex_gaussian(rng, 20, 5))
    A = Q * np.array([1.0, 0.8, 0.6, 0.5, 0.4])
    y = complex_gaussian(rng, 20)
    return A, y


class TestLeastSquares:
    def test_identity(self, rng):
        y = complex_gaussian(rng, 4)
        fit = least_squares(np.eye(4), y)
        np.testing.assert_allclose(fit.eta, y)
        assert fit.residual_norm == pytest.approx(0.0, abs=1e-12)
        assert fit.rank == 4

    def test_normal_equations(self, rng):
        A = complex_gaussian(rng, 20, 5)
        y = complex_gaussian(rng, 20)
        fit = least_squares(A, y)
        gradient = A.conj().T @ (A @ fit.eta - y)
        assert np.linalg.norm(gradient) <= 1e-10 * np.linalg.norm(A.conj().T @ y)
        assert not fit.rank_deficient

    def test_rank_deficient(self, rng):
        column = complex_gaussian(rng, 10, 1)
        fit = least_squares(np.hstack([column, column]), complex_gaussian(rng, 10))
        assert fit.rank == 1
        assert fit.rank_deficient

    def test_empty_system(self, rng):
        y = complex_gaussian(rng, 6)
        fit = least_squares(np.zeros((6, 0)), y)
        assert fit.eta.size == 0
        assert fit.residual_norm == pytest.approx(np.linalg.norm(y))


class TestLassoPieces:
    def test_soft_threshold_keeps_phase(self):
        x = np.array([3 + 4j, 0.5j, 0.0])
        out = soft_threshold(x, 1.0)
        np.testing.assert_allclose(out, [(3 + 4j) * 4 / 5, 0.0, 0.0])

    def test_power_iteration(self, well_conditioned):
        A, _ = well_conditioned
        assert largest_singular_value_sq(A, 500) == pytest.approx(1.0, rel=1e-6)

    def test_power_iteration_on_wide_matrix(self):
        # rank one: sigma^2 = rows * columns; A* A would hold 2.5e9 entries
        A = np.ones((4, 50_000))
        assert largest_singular_value_sq(A) == pytest.approx(200_000.0, rel=1e-12)


class TestLasso:
    def test_zero_lambda_is_least_squares(self, well_conditioned):
        A, y = well_conditioned
        sol = lasso(A, y, 0.0, tol=1e-12, max_iter=20000)
        assert sol.converged
        np.testing.assert_allclose(sol.eta, least_squares(A, y).eta, rtol=1e-6, atol=1e-8)

    def test_zero_lambda_solves_normal_equations(self, rng):
        A = complex_gaussian(rng, 20, 5)
        y = complex_gaussian(rng, 20)
        sol = lasso(A, y, 0.0, tol=1e-10, max_iter=20000)
        assert sol.converged
        assert sol.iterations > 1
        gradient = A.conj().T @ (A @ sol.eta - y)
        assert np.linalg.norm(gradient) <= 1e-6 * np.linalg.norm(A.conj().T @ y)
        np.testing.assert_allclose(sol.eta, least_squares(A, y).eta, rtol=1e-6, atol=1e-8)

    def test_first_order_optimality(self, well_conditioned):
        A, y = well_conditioned
        lam = 0.3
        sol = lasso(A, y, lam, tol=1e-12, max_iter=20000)
        assert sol.iterations > 1
        gradient = 2.0 * A.conj().T @ (A @ sol.eta - y)
        active = np.abs(sol.eta) > 0
        assert active.any()
        np.testing.assert_allclose(
            gradient[active], -lam * sol.eta[active] / np.abs(sol.eta[active]), atol=1e-8
        )
        assert np.all(np.abs(gradient[~active]) <= lam + 1e-8)

    def test_large_lambda_gives_zero(self, well_conditioned):
        A, y = well_conditioned
        lam = 2.0 * np.abs(A.conj().T @ y).max() * 1.001
        sol = lasso(A, y, lam)
        assert not sol.eta.any()
        assert sol.objective == pytest.approx(np.linalg.norm(y) ** 2)

    def test_objective_is_reported_correctly(self, well_conditioned):
        A, y = well_conditioned
        sol = lasso(A, y, 0.3)
        assert sol.objective == pytest.approx(lasso_objective(A, y, sol.eta, 0.3), rel=1e-12)
        assert sol.residual_norm == pytest.approx(np.linalg.norm(A @ sol.eta - y), rel=1e-12)

    def test_no_random_probe_does_better(self, rng):
        A = complex_gaussian(rng, 5, 3)
        y = complex_gaussian(rng, 5)
        lam = 0.5 * 2.0 * np.abs(A.conj().T @ y).max()
        sol = lasso(A, y, lam, tol=1e-12, max_iter=20000)
        best = lasso_objective(A, y, sol.eta, lam)
        for scale in (1e-2, 1e-1, 1.0):
            probes = sol.eta + scale * complex_gaussian(rng, 3000, 3)
            for probe in probes:
                assert best <= lasso_objective(A, y, probe, lam) + 1e-10 * best

    def test_objective_never_increases(self, well_conditioned):
        A, y = well_conditioned
        objectives = [lasso(A, y, 0.2, tol=1e-16, max_iter=k).objective for k in range(1, 40)]
        assert np.all(np.diff(objectives) <= 1e-12 * objectives[0])

    def test_warm_start_from_solution(self, well_conditioned):
        A, y = well_conditioned
        sol = lasso(A, y, 0.2, tol=1e-12, max_iter=20000)
        warm = lasso(A, y, 0.2, x0=sol.eta, max_iter=5)
        assert warm.objective <= sol.objective + 1e-12

    def test_negative_lambda(self, well_conditioned):
        A, y = well_conditioned
        with pytest.raises(ValueError):
            lasso(A, y, -1.0)

    def test_empty_atom_set(self, rng):
        y = complex_gaussian(rng, 5)
        sol = lasso(np.zeros((5, 0)), y, 1.0)
        assert sol.eta.size == 0
        assert sol.objective == pytest.approx(np.linalg.norm(y) ** 2)


class TestGridAtomSet:
    def test_images(self, small_dims, G, rng):
        taus = rng.uniform(-0.5, 0.5, 3)
        nus = rng.uniform(-5.5, 5.5, 3)
        atoms = GridAtomSet(G, taus, nus)
        assert len(atoms) == 3
        np.testing.assert_allclose(atoms.GZ, G.matrix @ atoms.Z, atol=1e-10)
        assert GridAtomSet(G, [], []).GZ.shape == (small_dims.L2, 0)


@pytest.fixture
def omp_dims():
    return ProblemDims(T=1.0, Omega=101.0, N1=50, N2=50)


class TestOmp:
    def test_single_on_grid_feature(self, small_dims, G):
        grid = RegularGrid.over(small_dims, 16, 16)
        tau, nu = grid.point(5 * 16 + 11)
        channel = ChannelSpec.from_arrays(small_dims, [1.0 + 0.5j], [tau], [nu])
        y = forward_atoms(channel, G)

        result = omp(y, G, grid, OmpConfig(grid=(16, 16), max_atoms=5))

        assert result.stop_reason == StopReason.RESIDUAL
        assert len(result.history) == 1
        assert result.channel.taus()[0] == tau
        assert result.channel.nus()[0] == nu
        assert result.channel.etas()[0] == pytest.approx(1.0 + 0.5j, abs=1e-9)
        assert result.residual_norm <= 1e-9

    def test_separated_on_grid_features(self, omp_dims):
        grid = RegularGrid.over(omp_dims, 32, 32)
        flat = [3 * 32 + 4, 14 * 32 + 20, 27 * 32 + 9]
        points = np.array([grid.point(i) for i in flat])
        eta = np.exp(2j * np.pi * np.array([0.1, 0.45, 0.8]))
        channel = ChannelSpec.from_arrays(omp_dims, eta, points[:, 0], points[:, 1])
        G = build_g(random_identifier(omp_dims, 3))

        result = omp(forward_atoms(channel, G), G, grid, OmpConfig(grid=(32, 32), max_atoms=10))

        assert result.channel.S == 3
        found = sorted(zip(result.channel.taus(), result.channel.nus()))
        assert found == sorted(map(tuple, points))
        assert result.residual_norm <= 1e-9

    def test_residuals_never_increase(self, omp_dims):
        G = build_g(random_identifier(omp_dims, 4))
        y = forward_atoms(random_channel(omp_dims, 8, 4), G)
        grid = RegularGrid.over(omp_dims, 32, 32)

        result = omp(y, G, grid, OmpConfig(grid=(32, 32), max_atoms=8, residual_tol=0.0))

        residuals = [h.residual_norm for h in result.history]
        assert len(residuals) == 8
        assert np.all(np.diff(residuals) <= 1e-12 * residuals[0])
        assert result.stop_reason == StopReason.MAX_FEATURES

    def test_never_selects_a_point_twice(self, small_dims, G):
        y = forward_atoms(random_channel(small_dims, 3, 2), G)
        grid = RegularGrid.over(small_dims, 4, 4)

        result = omp(y, G, grid, OmpConfig(grid=(4, 4), max_atoms=16, residual_tol=0.0))

        pairs = list(zip(result.channel.taus(), result.channel.nus()))
        assert len(pairs) == len(set(pairs))

    def test_zero_data(self, small_dims, G):
        y = SampleVector.from_array(small_dims, np.zeros(small_dims.L2))
        result = omp(y, G, RegularGrid.over(small_dims, 8, 8))
        assert result.channel.S == 0
        assert result.stop_reason == StopReason.RESIDUAL
