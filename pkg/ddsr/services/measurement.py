"""Measurement operator G and the forward models of the sampling problem."""
from enum import Enum
from functools import cached_property
from typing import List, Optional, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel

from ddsr.core.exceptions import DimensionError, ZeroSignal
from ddsr.models.channel import (
    ChannelSpec,
    IdentifierPoly,
    ProblemDims,
    SampleVector,
    SincIdentifier,
    require_same_dims,
)
from ddsr.models.solvers import RegularGrid
from ddsr.utils.atoms import (
    atom_matrix,
    delay_factor_derivs,
    delay_factors,
    doppler_factor_derivs,
    doppler_factors,
)


class IdentifierKind(str, Enum):
    TRIG = "trig"
    SINC = "sinc"


class MeasurementOperatorRecord(BaseModel):
    """JSON form of a measurement operator: the dense matrix split in re/im."""

    dims: ProblemDims
    provenance: IdentifierKind
    real: List[List[float]]
    imag: List[List[float]]


class MeasurementOperator:
    """G_{j,(u,v)} = exp(2 pi i x_j v / T) * w(x_j - u / Omega).

    G factors as E_{j,v} * W_{j,u}; every product with an atom or its
    derivatives is evaluated through the factors, while the dense
    L2 x L1*L2 matrix is materialized on first access.
    """

    def __init__(
        self,
        dims: ProblemDims,
        window: np.ndarray,
        provenance: IdentifierKind = IdentifierKind.TRIG,
        matrix: Optional[np.ndarray] = None,
    ):
        self.dims = dims
        self.provenance = provenance
        j = dims.v_indices
        self.modulation = np.exp(2j * np.pi * np.outer(j, dims.v_indices) / dims.L2)
        self.window = np.asarray(window, dtype=complex)
        if self.window.shape != (dims.L2, dims.L1):
            raise DimensionError(
                f"window must have shape {(dims.L2, dims.L1)}, got {self.window.shape}"
            )
        if matrix is not None:
            self.__dict__["matrix"] = np.asarray(matrix, dtype=complex)
        self._scale = 1.0 / (dims.L1 * dims.L2)

    @cached_property
    def matrix(self) -> np.ndarray:
        L1, L2 = self.dims.L1, self.dims.L2
        return (self.modulation[:, :, None] * self.window[:, None, :]).reshape(L2, L2 * L1)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """G x for a length L1*L2 vector, without the dense matrix."""
        X = np.asarray(x).reshape(self.dims.L2, self.dims.L1)
        return np.sum(self.modulation * (self.window @ X.T), axis=1)

    def adjoint(self, r: np.ndarray) -> np.ndarray:
        """G* r as a length L1*L2 vector."""
        r = np.asarray(r, dtype=complex)
        B = self.modulation.conj().T @ (r[:, None] * self.window.conj())
        return B.ravel()

    def atom_images(self, taus: np.ndarray, nus: np.ndarray) -> np.ndarray:
        """G Z(tau, nu) as an (L2, J) array."""
        du = delay_factors(self.dims, taus)
        dv = doppler_factors(self.dims, nus)
        return (self.modulation @ dv) * (self.window @ du) * self._scale

    def atom_image_jacobians(
        self, taus: np.ndarray, nus: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        """G Z^tau and G Z^nu, each (L2, J)."""
        dims = self.dims
        du = delay_factors(dims, taus)
        dv = doppler_factors(dims, nus)
        ddu = delay_factor_derivs(dims, taus)
        ddv = doppler_factor_derivs(dims, nus)
        g_tau = (self.modulation @ dv) * (self.window @ ddu) * (-dims.Omega / (dims.L1**2 * dims.L2))
        g_nu = (self.modulation @ ddv) * (self.window @ du) * (-dims.T / (dims.L1 * dims.L2**2))
        return g_tau, g_nu

    def grid_factors(self, grid: RegularGrid) -> Tuple[np.ndarray, np.ndarray]:
        """Per-axis factors A (L2, P) and B (L2, Q) with G a(tau_p, nu_q) = A[:, p] * B[:, q]."""
        A = (self.window @ delay_factors(self.dims, grid.taus)) * self._scale
        B = self.modulation @ doppler_factors(self.dims, grid.nus)
        return A, B

    def grid_image_norms(self, grid: RegularGrid) -> np.ndarray:
        """||G a(tau_p, nu_q)||_2 for every grid point, shape (P, Q)."""
        A, B = self.grid_factors(grid)
        return np.sqrt((np.abs(A) ** 2).T @ (np.abs(B) ** 2))

    def to_record(self) -> MeasurementOperatorRecord:
        return MeasurementOperatorRecord(
            dims=self.dims,
            provenance=self.provenance,
            real=self.matrix.real.tolist(),
            imag=self.matrix.imag.tolist(),
        )

    @classmethod
    def from_record(cls, record: MeasurementOperatorRecord) -> "MeasurementOperator":
        dims = record.dims
        matrix = np.asarray(record.real) + 1j * np.asarray(record.imag)
        if matrix.shape != (dims.L2, dims.L1 * dims.L2):
            raise DimensionError(f"operator matrix has shape {matrix.shape}")
        # Column block v = 0 carries the window since E_{j,0} = 1.
        window = matrix[:, dims.N2 * dims.L1 : (dims.N2 + 1) * dims.L1]
        return cls(dims, window, provenance=record.provenance, matrix=matrix)


def build_g(
    identifier: Union[IdentifierPoly, SincIdentifier], R: int = 1
) -> MeasurementOperator:
    """Measurement operator for a trigonometric (or, approximately, sinc) identifier."""
    dims = identifier.dims
    x = dims.sample_points()
    shifts = np.subtract.outer(x, dims.u_indices / dims.Omega)
    if isinstance(identifier, SincIdentifier):
        window = identifier.evaluate(shifts, R)
        provenance = IdentifierKind.SINC
    else:
        window = identifier.evaluate(shifts)
        provenance = IdentifierKind.TRIG
    logger.debug(f"Built {provenance.value} measurement operator for L1={dims.L1}, L2={dims.L2}")
    return MeasurementOperator(dims, window, provenance=provenance)


def _apply_channel(channel: ChannelSpec, evaluate) -> np.ndarray:
    dims = channel.dims
    x = dims.sample_points()
    if channel.S == 0:
        return np.zeros(dims.L2, dtype=complex)
    shifted = evaluate(np.subtract.outer(x, channel.taus()))
    phases = np.exp(2j * np.pi * np.outer(x, channel.nus()))
    return (phases * shifted) @ channel.etas()


def forward_direct(channel: ChannelSpec, identifier: IdentifierPoly) -> SampleVector:
    """y_j = sum_s eta_s exp(2 pi i nu_s x_j) w(x_j - tau_s) from the coefficients of w."""
    dims = require_same_dims(channel.dims, identifier.dims)
    return SampleVector.from_array(dims, _apply_channel(channel, identifier.evaluate))


def forward_atoms(channel: ChannelSpec, G: MeasurementOperator) -> SampleVector:
    """y = G sum_s eta_s a(tau_s, nu_s)."""
    dims = require_same_dims(channel.dims, G.dims)
    if channel.S == 0:
        return SampleVector.from_array(dims, np.zeros(dims.L2, dtype=complex))
    Z = atom_matrix(dims, channel.taus(), channel.nus())
    return SampleVector.from_array(dims, G.matrix @ (Z @ channel.etas()))


def noise_ratio(noise_db: Optional[float]) -> float:
    """||y - y_delta|| / ||y|| for a level given on the 10*log10 scale."""
    if noise_db is None or noise_db == -np.inf:
        return 0.0
    return float(10 ** (noise_db / 10))


def add_noise(y: SampleVector, noise_db: Optional[float], rng_seed: int) -> SampleVector:
    """Add complex Gaussian noise rescaled to the exact relative level.

    ``noise_db`` of None or -inf returns ``y`` unchanged.
    """
    ratio = noise_ratio(noise_db)
    if ratio == 0.0:
        return y
    values = y.array()
    norm = np.linalg.norm(values)
    if norm == 0:
        raise ZeroSignal("cannot calibrate noise relative to a zero signal")
    rng = np.random.default_rng(rng_seed)
    noise = rng.standard_normal(y.dims.L2) + 1j * rng.standard_normal(y.dims.L2)
    noise *= ratio * norm / np.linalg.norm(noise)
    return SampleVector.from_array(y.dims, values + noise)


def forward_sinc(channel: ChannelSpec, sinc_id: SincIdentifier, R: int = 1) -> SampleVector:
    """Samples of H applied to the sinc-sum identifier, evaluated directly."""
    dims = require_same_dims(channel.dims, sinc_id.dims)
    if not np.isclose(sinc_id.L, dims.time_bandwidth, rtol=1e-12, atol=0):
        raise DimensionError(
            f"sinc model needs L = T*Omega, got L={sinc_id.L}, T*Omega={dims.time_bandwidth:g}"
        )
    return SampleVector.from_array(
        dims, _apply_channel(channel, lambda x: sinc_id.evaluate(x, R))
    )
