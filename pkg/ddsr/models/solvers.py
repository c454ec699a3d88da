"""Configuration and result models for the recovery algorithms."""
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ddsr.models.channel import ChannelSpec, ProblemDims


class RegularGrid(BaseModel):
    """Regular P x Q grid over X = [-T/2, T/2) x [-Omega/2, Omega/2).

    The right end points are left out: for L1 = T*Omega the atoms at
    tau = -T/2 and tau = T/2 coincide.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    taus: np.ndarray
    nus: np.ndarray

    @classmethod
    def over(cls, dims: ProblemDims, P: int, Q: int) -> "RegularGrid":
        if P < 1 or Q < 1:
            raise ValueError("grid needs at least one point in each direction")
        taus = -dims.T / 2 + dims.T * np.arange(P) / P
        nus = -dims.Omega / 2 + dims.Omega * np.arange(Q) / Q
        return cls(taus=taus, nus=nus)

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self.taus), len(self.nus)

    @property
    def tau_step(self) -> float:
        return float(self.taus[1] - self.taus[0]) if len(self.taus) > 1 else 0.0

    @property
    def nu_step(self) -> float:
        return float(self.nus[1] - self.nus[0]) if len(self.nus) > 1 else 0.0

    def point(self, flat_index: int) -> Tuple[float, float]:
        p, q = np.unravel_index(flat_index, self.shape)
        return float(self.taus[p]), float(self.nus[q])


class StopReason(str, Enum):
    MAX_FEATURES = "max_features"
    RESIDUAL = "residual"
    STAGNATION = "stagnation"
    MAX_ITERATIONS = "max_iterations"
    EMPTY_ATOM_SET = "empty_atom_set"


class RefinementStrategy(str, Enum):
    DOMINANT = "dominant"
    BARYCENTER = "barycenter"


class LassoConfig(BaseModel):
    """Proximal-gradient settings for the l1-regularized grid problem."""

    tol: float = Field(default=1e-8, gt=0)
    max_iter: int = Field(default=5000, ge=1)
    power_iter: int = Field(default=100, ge=1)


class OmpConfig(BaseModel):
    grid: Tuple[int, int] = (1024, 1024)
    max_atoms: int = Field(default=10, ge=1)
    residual_tol: float = Field(default=1e-6, ge=0)


class RefinementConfig(BaseModel):
    """Multi-level time-frequency refinement.

    ``epsilon`` is relative: an atom is important when its weight is at least
    ``epsilon * max|eta*|``.
    """

    initial_grid: Tuple[int, int] = (256, 256)
    initial_atoms: int = Field(default=10, ge=1)
    initial_residual_tol: float = Field(default=1e-6, ge=0)
    local_grid: int = Field(default=5, ge=3)
    levels: int = Field(default=15, ge=0)
    shrink: float = Field(default=0.75, gt=0, lt=1)
    epsilon: float = Field(default=0.05, gt=0, le=1)
    strategy: RefinementStrategy = RefinementStrategy.BARYCENTER
    lam: float = Field(default=500.0, ge=0, alias="lambda")
    max_features: Optional[int] = Field(default=None, ge=1)
    lasso: LassoConfig = Field(default_factory=LassoConfig)

    model_config = ConfigDict(populate_by_name=True)

    @field_validator("local_grid")
    @classmethod
    def _odd(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError("local grid size must be odd")
        return value


class DescentConfig(BaseModel):
    """Projected gradient descent with Armijo backtracking over locations."""

    max_steps: int = Field(default=50, ge=1)
    armijo: float = Field(default=1e-4, gt=0, lt=1)
    initial_step: float = Field(default=0.5, gt=0)
    step_floor: float = Field(default=1e-12, gt=0)
    grad_tol: float = Field(default=1e-12, ge=0)


class AdcgConfig(BaseModel):
    grid: Tuple[int, int] = (1024, 1024)
    inner_iters: int = Field(default=25, ge=1)
    lam: float = Field(default=500.0, ge=0, alias="lambda")
    local_descent: bool = True
    refine_expansion: bool = False
    descent: DescentConfig = Field(default_factory=DescentConfig)
    max_features: Optional[int] = Field(default=None, ge=1)
    max_outer_iters: int = Field(default=100, ge=1)
    residual_tol: float = Field(default=1e-6, ge=0)
    stagnation_tol: float = Field(default=1e-6, ge=0)
    prune_tol: float = Field(default=1e-8, ge=0)
    lasso: LassoConfig = Field(default_factory=LassoConfig)

    model_config = ConfigDict(populate_by_name=True)


class LeastSquaresResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    eta: np.ndarray
    residual_norm: float
    rank: int
    rank_deficient: bool


class SparseSolution(BaseModel):
    """Solution of min ||A eta - y||^2 + lam ||eta||_1."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    eta: np.ndarray
    objective: float
    iterations: int
    residual_norm: float
    converged: bool
    lam: float


class IterationRecord(BaseModel):
    iteration: int
    features: int
    residual_norm: float
    objective: float


class RecoveryResult(BaseModel):
    """Estimated channel plus the solver's stop reason and trace."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    algorithm: str
    channel: ChannelSpec
    stop_reason: StopReason
    residual_norm: float
    history: List[IterationRecord] = Field(default_factory=list)

    @model_validator(mode="after")
    def _finite_residual(self) -> "RecoveryResult":
        if not np.isfinite(self.residual_norm):
            raise ValueError("residual norm must be finite")
        return self


class DescentResult(BaseModel):
    """Locations after projected gradient descent and F after every accepted step."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    tau: np.ndarray
    nu: np.ndarray
    objective_trace: List[float]
    steps: int
