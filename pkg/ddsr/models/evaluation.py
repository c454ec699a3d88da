"""Result models for channel comparisons."""
import math
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator


class NormBasis(str, Enum):
    """Identifier space on which the operator norm is taken."""

    TRIG = "trig"
    SINC = "sinc"


class MatchedErrors(BaseModel):
    """Parameter errors of an estimate under an optimal feature assignment.

    Attributes:
        max_tau_err: largest |tau_est - tau_true| over matched pairs
        max_nu_err: largest |nu_est - nu_true| over matched pairs
        max_eta_err: largest |eta_est - eta_true| over matched pairs
        assignment: (truth index, estimate index) pairs, injective on both sides
        total_cost: summed normalized distance of the assignment
        unmatched_truth: true features left without a partner
        unmatched_estimate: estimated features left without a partner
    """

    max_tau_err: Optional[float]
    max_nu_err: Optional[float]
    max_eta_err: Optional[float]
    assignment: List[Tuple[int, int]] = Field(default_factory=list)
    total_cost: float = 0.0
    unmatched_truth: int = 0
    unmatched_estimate: int = 0

    @field_validator("max_tau_err", "max_nu_err", "max_eta_err", mode="before")
    @classmethod
    def _none_is_nan(cls, value: Optional[float]) -> float:
        return math.nan if value is None else value

    @model_validator(mode="after")
    def _injective(self) -> "MatchedErrors":
        truth = [i for i, _ in self.assignment]
        estimate = [j for _, j in self.assignment]
        if len(set(truth)) != len(truth) or len(set(estimate)) != len(estimate):
            raise ValueError("feature assignment must be injective")
        return self


class OperatorNormReport(BaseModel):
    """Operator-norm distance between two channels.

    ``rel_err_db`` is 10*log10(abs_err / reference_norm); it is -inf exactly
    when ``abs_err`` is zero and serializes as null in that case.
    """

    abs_err: float = Field(..., ge=0)
    rel_err_db: float
    reference_norm: float = Field(..., ge=0)
    M: int = Field(..., ge=1)
    basis: NormBasis = NormBasis.TRIG
    resolution_change: Optional[float] = None

    @field_validator("rel_err_db", mode="before")
    @classmethod
    def _null_is_minus_inf(cls, value: Optional[float]) -> float:
        return -math.inf if value is None else value

    @model_validator(mode="after")
    def _db_sentinel(self) -> "OperatorNormReport":
        if (self.abs_err == 0) != (self.rel_err_db == -math.inf):
            raise ValueError("rel_err_db must be -inf exactly when abs_err is zero")
        return self
