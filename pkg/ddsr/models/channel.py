"""Domain types shared by every module: dimensions, channels, identifiers, samples.

All models are frozen pydantic models. Complex numbers serialize as
``{"re": ..., "im": ...}`` records so the JSON files stay language neutral.
"""
import math
from typing import Annotated, Any, Iterable, Mapping, Tuple, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PlainSerializer,
    PlainValidator,
    ValidationError,
    WithJsonSchema,
    field_validator,
    model_validator,
)

from ddsr.core.exceptions import DimensionError

# Relative slack on L >= T*Omega so that e.g. T=3, Omega=31, L=93 passes.
_SAMPLING_RTOL = 1e-12


def _parse_complex(value: Any) -> complex:
    if isinstance(value, Mapping):
        return complex(float(value["re"]), float(value["im"]))
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    return complex(value)


def _dump_complex(value: complex) -> dict:
    return {"re": float(value.real), "im": float(value.imag)}


ComplexValue = Annotated[
    complex,
    PlainValidator(_parse_complex),
    PlainSerializer(_dump_complex, return_type=dict),
    WithJsonSchema(
        {
            "type": "object",
            "properties": {"re": {"type": "number"}, "im": {"type": "number"}},
            "required": ["re", "im"],
        }
    ),
]


class ProblemDims(BaseModel):
    """Time span, bandwidth and polynomial degrees of a sampling problem.

    Attributes:
        T: time span of the delay domain (seconds)
        Omega: bandwidth of the Doppler domain (Hz)
        N1: degree of the identifier polynomial, L1 = 2*N1 + 1
        N2: half the number of samples, L2 = 2*N2 + 1
    """

    model_config = ConfigDict(frozen=True)

    T: float = Field(..., gt=0, allow_inf_nan=False)
    Omega: float = Field(..., gt=0, allow_inf_nan=False)
    N1: int = Field(..., ge=0)
    N2: int = Field(..., ge=0)

    @property
    def L1(self) -> int:
        return 2 * self.N1 + 1

    @property
    def L2(self) -> int:
        return 2 * self.N2 + 1

    @property
    def time_bandwidth(self) -> float:
        return self.T * self.Omega

    @property
    def u_indices(self) -> np.ndarray:
        return np.arange(-self.N1, self.N1 + 1)

    @property
    def v_indices(self) -> np.ndarray:
        return np.arange(-self.N2, self.N2 + 1)

    def sample_points(self) -> np.ndarray:
        """Sampling points x_j = T*j/L2 for j = -N2..N2."""
        return self.T * self.v_indices / self.L2

    def contains(self, tau: np.ndarray, nu: np.ndarray) -> bool:
        tol_t = _SAMPLING_RTOL * self.T
        tol_o = _SAMPLING_RTOL * self.Omega
        tau = np.asarray(tau, dtype=float)
        nu = np.asarray(nu, dtype=float)
        return bool(
            np.all(np.abs(tau) <= self.T / 2 + tol_t)
            and np.all(np.abs(nu) <= self.Omega / 2 + tol_o)
        )

    def clip(self, tau: np.ndarray, nu: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Project delay/Doppler parameters onto the domain X."""
        return (
            np.clip(tau, -self.T / 2, self.T / 2),
            np.clip(nu, -self.Omega / 2, self.Omega / 2),
        )

    @model_validator(mode="after")
    def _check_sampling(self) -> "ProblemDims":
        bound = self.time_bandwidth * (1 - _SAMPLING_RTOL)
        if self.L1 < bound:
            raise DimensionError(
                f"L1 >= T*Omega violated: L1={self.L1} < {self.time_bandwidth:g}"
            )
        if self.L2 < bound:
            raise DimensionError(
                f"L2 >= T*Omega violated: L2={self.L2} < {self.time_bandwidth:g}"
            )
        return self


def validate(dims: Union[ProblemDims, Mapping[str, Any]]) -> ProblemDims:
    """Check every ProblemDims invariant, raising DimensionError on failure."""
    if isinstance(dims, ProblemDims):
        dims = dims.model_dump()
    try:
        return ProblemDims(**dims)
    except ValidationError as e:
        raise DimensionError(f"invalid problem dimensions: {e}") from e


def require_same_dims(*dims: ProblemDims) -> ProblemDims:
    first = dims[0]
    for other in dims[1:]:
        if other != first:
            raise DimensionError(f"dimension mismatch: {first} vs {other}")
    return first


class Feature(BaseModel):
    """One translation-modulation term eta * M_nu T_tau of a channel."""

    model_config = ConfigDict(frozen=True)

    eta: ComplexValue
    tau: float = Field(..., allow_inf_nan=False)
    nu: float = Field(..., allow_inf_nan=False)

    @field_validator("eta")
    @classmethod
    def _finite(cls, value: complex) -> complex:
        if not (math.isfinite(value.real) and math.isfinite(value.imag)):
            raise ValueError("amplitude must be finite")
        return value


class ChannelSpec(BaseModel):
    """A sparse doubly-dispersive channel H = sum_s eta_s M_{nu_s} T_{tau_s}."""

    model_config = ConfigDict(frozen=True)

    features: Tuple[Feature, ...] = ()
    dims: ProblemDims

    @model_validator(mode="after")
    def _check_bounds(self) -> "ChannelSpec":
        if self.features and not self.dims.contains(self.taus(), self.nus()):
            raise ValueError(
                "every tau must lie in [-T/2, T/2] and every nu in [-Omega/2, Omega/2]"
            )
        return self

    @property
    def S(self) -> int:
        return len(self.features)

    def etas(self) -> np.ndarray:
        return np.array([f.eta for f in self.features], dtype=complex)

    def taus(self) -> np.ndarray:
        return np.array([f.tau for f in self.features], dtype=float)

    def nus(self) -> np.ndarray:
        return np.array([f.nu for f in self.features], dtype=float)

    @classmethod
    def from_arrays(
        cls,
        dims: ProblemDims,
        eta: Iterable[complex],
        tau: Iterable[float],
        nu: Iterable[float],
    ) -> "ChannelSpec":
        features = tuple(
            Feature(eta=complex(e), tau=float(t), nu=float(n))
            for e, t, n in zip(eta, tau, nu)
        )
        return cls(features=features, dims=dims)

    @classmethod
    def empty(cls, dims: ProblemDims) -> "ChannelSpec":
        return cls(features=(), dims=dims)

    def concat(self, other: "ChannelSpec") -> "ChannelSpec":
        require_same_dims(self.dims, other.dims)
        return ChannelSpec(features=self.features + other.features, dims=self.dims)

    def scaled(self, factor: complex) -> "ChannelSpec":
        return ChannelSpec.from_arrays(
            self.dims, self.etas() * factor, self.taus(), self.nus()
        )


class IdentifierPoly(BaseModel):
    """(L1/Omega)-periodic trigonometric polynomial pilot.

    w(x) = sum_{k=-N1}^{N1} w_k exp(2 pi i Omega k x / L1), stored with
    index k at position k + N1.
    """

    model_config = ConfigDict(frozen=True)

    coeffs: Tuple[ComplexValue, ...]
    dims: ProblemDims

    @model_validator(mode="after")
    def _check_length(self) -> "IdentifierPoly":
        if len(self.coeffs) != self.dims.L1:
            raise ValueError(
                f"identifier needs exactly L1={self.dims.L1} coefficients, got {len(self.coeffs)}"
            )
        return self

    @property
    def period(self) -> float:
        return self.dims.L1 / self.dims.Omega

    def coefficients(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=complex)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        k = self.dims.u_indices
        phase = np.exp(
            2j * np.pi * (self.dims.Omega / self.dims.L1) * np.multiply.outer(x, k)
        )
        return phase @ self.coefficients()

    @classmethod
    def constant(cls, dims: ProblemDims, value: complex = 1.0) -> "IdentifierPoly":
        coeffs = [0j] * dims.L1
        coeffs[dims.N1] = complex(value)
        return cls(coeffs=tuple(coeffs), dims=dims)

    @classmethod
    def from_array(cls, dims: ProblemDims, coeffs: np.ndarray) -> "IdentifierPoly":
        return cls(coeffs=tuple(complex(c) for c in coeffs), dims=dims)


class SincIdentifier(BaseModel):
    """Sum of shifted sinc functions with partially periodic real coefficients.

    Only the L base coefficients c_m, m = -N..N, are stored; the full sequence
    c_k, k = -R*L-N..R*L+N, repeats them with period L.
    """

    model_config = ConfigDict(frozen=True)

    base: Tuple[float, ...]
    dims: ProblemDims

    @model_validator(mode="after")
    def _check_shape(self) -> "SincIdentifier":
        if self.dims.N1 != self.dims.N2:
            raise DimensionError(
                f"sinc identifier needs L1 == L2, got {self.dims.L1} and {self.dims.L2}"
            )
        if len(self.base) != self.dims.L1:
            raise ValueError(
                f"sinc identifier needs exactly L={self.dims.L1} base coefficients"
            )
        return self

    @property
    def L(self) -> int:
        return self.dims.L1

    @property
    def N(self) -> int:
        return self.dims.N1

    def coefficients(self, R: int = 1) -> Tuple[np.ndarray, np.ndarray]:
        """Indices k = -R*L-N..R*L+N and the partially periodic c_k."""
        base = np.asarray(self.base, dtype=float)
        k = np.arange(-R * self.L - self.N, R * self.L + self.N + 1)
        return k, base[(k + self.N) % self.L]

    def evaluate(self, x: np.ndarray, R: int = 1) -> np.ndarray:
        k, c = self.coefficients(R)
        x = np.asarray(x, dtype=float)
        return np.sinc(np.subtract.outer(x * self.dims.Omega, k)) @ c

    def matched_trig(self) -> IdentifierPoly:
        """Trigonometric identifier taking the same values at x = m/Omega."""
        m = np.arange(-self.N, self.N + 1)
        base = np.asarray(self.base, dtype=complex)
        dft = np.exp(-2j * np.pi * np.outer(m, m) / self.L)
        return IdentifierPoly.from_array(self.dims, dft @ base / self.L)


class SampleVector(BaseModel):
    """Samples y_j = (H w)(x_j), j = -N2..N2."""

    model_config = ConfigDict(frozen=True)

    values: Tuple[ComplexValue, ...]
    dims: ProblemDims

    @model_validator(mode="after")
    def _check_length(self) -> "SampleVector":
        if len(self.values) != self.dims.L2:
            raise ValueError(
                f"sample vector needs exactly L2={self.dims.L2} values, got {len(self.values)}"
            )
        return self

    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=complex)

    @classmethod
    def from_array(cls, dims: ProblemDims, values: np.ndarray) -> "SampleVector":
        return cls(values=tuple(complex(v) for v in values), dims=dims)
