"""Dirichlet kernels, atoms a(tau, nu) and their derivatives.

Atom entries are indexed by (u, v), u = -N1..N1, v = -N2..N2, and stored
row-major in an (L2, L1) array with u running fastest, i.e. flat index
(v + N2) * L1 + (u + N1).
"""
from typing import Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from ddsr.models.channel import ProblemDims
from ddsr.models.solvers import RegularGrid

ArrayLike = Union[float, np.ndarray]

# Below this |sin(pi x)| the quotient form is replaced by the cosine sum.
_SINGULAR_TOL = 1e-8


def dirichlet(N: int, x: ArrayLike) -> ArrayLike:
    """N-th Dirichlet kernel sin((2N+1) pi x) / sin(pi x), 1-periodic and even."""
    if N < 0:
        raise ValueError("Dirichlet degree must be nonnegative")
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = np.sin(np.pi * x)
    near = np.abs(s) < _SINGULAR_TOL
    out = np.sin((2 * N + 1) * np.pi * x) / np.where(near, 1.0, s)
    if np.any(near):
        k = np.arange(1, N + 1)
        out[near] = 1.0 + 2.0 * np.cos(2 * np.pi * np.multiply.outer(x[near], k)).sum(axis=-1)
    return float(out[0]) if scalar else out


def dirichlet_deriv(N: int, x: ArrayLike) -> ArrayLike:
    """Derivative D'_N(x) = -4 pi sum_{k=1}^N k sin(2 pi k x)."""
    if N < 0:
        raise ValueError("Dirichlet degree must be nonnegative")
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    k = np.arange(1, N + 1)
    out = -4 * np.pi * (np.sin(2 * np.pi * np.multiply.outer(x, k)) @ k)
    return float(out[0]) if scalar else out


def delay_factors(dims: ProblemDims, tau: np.ndarray) -> np.ndarray:
    """D_{N1}((u - Omega tau) / L1) as an (L1, J) array."""
    arg = np.subtract.outer(dims.u_indices, dims.Omega * np.atleast_1d(tau)) / dims.L1
    return dirichlet(dims.N1, arg)


def doppler_factors(dims: ProblemDims, nu: np.ndarray) -> np.ndarray:
    """D_{N2}((v - T nu) / L2) as an (L2, J) array."""
    arg = np.subtract.outer(dims.v_indices, dims.T * np.atleast_1d(nu)) / dims.L2
    return dirichlet(dims.N2, arg)


def delay_factor_derivs(dims: ProblemDims, tau: np.ndarray) -> np.ndarray:
    arg = np.subtract.outer(dims.u_indices, dims.Omega * np.atleast_1d(tau)) / dims.L1
    return dirichlet_deriv(dims.N1, arg)


def doppler_factor_derivs(dims: ProblemDims, nu: np.ndarray) -> np.ndarray:
    arg = np.subtract.outer(dims.v_indices, dims.T * np.atleast_1d(nu)) / dims.L2
    return dirichlet_deriv(dims.N2, arg)


class AtomVector(BaseModel):
    """Real atom a(tau, nu) of length L1*L2."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    entries: np.ndarray
    tau: float
    nu: float

    def as_matrix(self, dims: ProblemDims) -> np.ndarray:
        return self.entries.reshape(dims.L2, dims.L1)


class AtomJacobian(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    d_tau: np.ndarray
    d_nu: np.ndarray


def atom(dims: ProblemDims, tau: float, nu: float) -> AtomVector:
    du = delay_factors(dims, tau)[:, 0]
    dv = doppler_factors(dims, nu)[:, 0]
    entries = np.outer(dv, du).ravel() / (dims.L1 * dims.L2)
    return AtomVector(entries=entries, tau=float(tau), nu=float(nu))


def atom_jacobian(dims: ProblemDims, tau: float, nu: float) -> AtomJacobian:
    du = delay_factors(dims, tau)[:, 0]
    dv = doppler_factors(dims, nu)[:, 0]
    ddu = delay_factor_derivs(dims, tau)[:, 0]
    ddv = doppler_factor_derivs(dims, nu)[:, 0]
    d_tau = -dims.Omega / (dims.L1**2 * dims.L2) * np.outer(dv, ddu).ravel()
    d_nu = -dims.T / (dims.L1 * dims.L2**2) * np.outer(ddv, du).ravel()
    return AtomJacobian(d_tau=d_tau, d_nu=d_nu)


def atom_matrix(dims: ProblemDims, taus: np.ndarray, nus: np.ndarray) -> np.ndarray:
    """Z = [a(tau_1, nu_1), ..., a(tau_J, nu_J)] as an (L1*L2, J) array."""
    du = delay_factors(dims, taus)
    dv = doppler_factors(dims, nus)
    Z = np.einsum("vj,uj->vuj", dv, du).reshape(dims.L1 * dims.L2, -1)
    return Z / (dims.L1 * dims.L2)


def correlate_grid(
    dims: ProblemDims, g_adjoint_residual: np.ndarray, grid: RegularGrid
) -> np.ndarray:
    """|<G* r, a(tau_p, nu_q)>| for every point of a regular grid.

    The atoms are separable, so the scan reduces to two dense 1-D kernel
    products instead of one atom per grid point.
    """
    B = np.asarray(g_adjoint_residual, dtype=complex).reshape(dims.L2, dims.L1)
    du = delay_factors(dims, grid.taus)
    dv = doppler_factors(dims, grid.nus)
    return np.abs((du.T @ B.T) @ dv) / (dims.L1 * dims.L2)


def correlate_grid_naive(
    dims: ProblemDims, g_adjoint_residual: np.ndarray, grid: RegularGrid
) -> np.ndarray:
    """Per-point reference implementation of :func:`correlate_grid`."""
    g = np.asarray(g_adjoint_residual, dtype=complex)
    P, Q = grid.shape
    out = np.empty((P, Q))
    for p in range(P):
        for q in range(Q):
            out[p, q] = abs(g @ atom(dims, grid.taus[p], grid.nus[q]).entries)
    return out
