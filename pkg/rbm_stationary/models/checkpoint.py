from typing import Any, Dict, List, Optional

from pydantic import Field, validator

from rbm_stationary.constants import FORMAT_VERSION
from rbm_stationary.models.base import StrictModel


class CheckpointRecord(StrictModel):
    """
    Everything needed to continue a replication bitwise: chain position, RNG
    state, schedule accumulators, measure accumulators and the trace so far.
    All floats are stored as JSON numbers, which round-trip exactly.
    """
    format_version: int = Field(
        default=FORMAT_VERSION,
        description="Layout version of this record"
    )
    config_hash: str = Field(
        ...,
        description="Hash of the RunConfig that produced the chain"
    )
    spec_hash: str = Field(
        ...,
        description="Hash of the problem data"
    )
    replication: int = Field(
        ...,
        ge=0,
        description="Replication index, selects the RNG stream"
    )
    k: int = Field(
        ...,
        ge=0,
        description="Steps taken"
    )
    X: List[float] = Field(
        ...,
        description="Current state X_k"
    )
    stream: Dict[str, Any] = Field(
        ...,
        description="Bit generator state and word counter"
    )
    schedule: Dict[str, Any] = Field(
        ...,
        description="Schedule position and compensated Lambda accumulators"
    )
    truncation_count: int = Field(
        default=0,
        ge=0
    )
    measure: Dict[str, Any] = Field(
        ...,
        description="WeightedMeasure accumulators"
    )
    boundary: Optional[Dict[str, Any]] = Field(
        default=None,
        description="BoundaryMeasure accumulators, if collected"
    )
    trace: List[List[Any]] = Field(
        default=[],
        description="Trace rows written so far"
    )
    sweep: bool = Field(
        default=False,
        description="Chain of an alpha sweep, its files carry the schedule exponent"
    )
    config: Dict[str, Any] = Field(
        ...,
        description="Full RunConfig, used by resume"
    )

    @validator("format_version")
    def check_version(cls, version):
        if version != FORMAT_VERSION:
            raise ValueError(f"checkpoint format_version {version} is not supported (expected {FORMAT_VERSION})")
        return version
