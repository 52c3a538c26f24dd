from typing import Any, Dict, List, Literal, Optional

from pydantic import Field, root_validator, validator
import yaml

from rbm_stationary.constants import CHECKPOINT_EVERY, THREADS
from rbm_stationary.exceptions import ConfigError
from rbm_stationary.models.base import StrictModel
from rbm_stationary.utils import canonical_hash

EXAMPLE_NAMES = ("product-3d", "tandem-2d", "symmetric-8d")
NOISE_LAWS = ("standard_normal", "rademacher", "uniform_scaled", "two_point_asymmetric")


class SpecSection(StrictModel):
    """
    Either a named benchmark example or inline problem data. Inline data uses
    constant coefficients; the columns of `reflection` are the directions d_i.
    """
    name: Optional[Literal["product-3d", "tandem-2d", "symmetric-8d"]] = Field(
        default=None,
        description="Named benchmark example"
    )
    r: float = Field(
        default=0.1,
        description="Off-diagonal reflection magnitude of symmetric-8d"
    )
    rho: float = Field(
        default=0.0,
        description="Off-diagonal correlation of symmetric-8d"
    )
    reflection: Optional[List[List[float]]] = Field(
        default=None,
        description="Inline reflection matrix R = [d_1 ... d_m]"
    )
    drift: Optional[List[float]] = Field(
        default=None,
        description="Inline constant drift b"
    )
    diffusion: Optional[List[List[float]]] = Field(
        default=None,
        description="Inline constant diffusion coefficient sigma"
    )
    x0: Optional[List[float]] = Field(
        default=None,
        description="Initial point, all ones if not set"
    )
    label: Optional[str] = Field(
        default=None,
        description="Free text label of an inline spec"
    )

    @root_validator(skip_on_failure=True)
    def check_named_or_inline(cls, values):
        inline = [values.get(key) is not None for key in ("reflection", "drift", "diffusion")]
        if values.get("name") is None and not all(inline):
            raise ValueError("spec needs either `name` or all of `reflection`, `drift`, `diffusion`")
        if values.get("name") is not None and any(inline):
            raise ValueError("spec cannot mix `name` with inline problem data")
        return values


class ScheduleSection(StrictModel):
    kind: Literal["power", "explicit"] = Field(
        default="power",
        description="power: lambda_k = c * k^-exponent; explicit: given list"
    )
    c: float = Field(
        default=1.0,
        gt=0.0,
        description="Scale of the power schedule"
    )
    exponent: float = Field(
        default=0.5,
        ge=0.0,
        le=1.0,
        description="Decay exponent of the power schedule, 0 gives a constant step"
    )
    steps: Optional[List[float]] = Field(
        default=None,
        description="Explicit step list for kind=explicit"
    )
    alphas: List[float] = Field(
        default=[1.5],
        description="Exponents alpha of the extra accumulators Lambda_n^(alpha)"
    )

    @root_validator(skip_on_failure=True)
    def check_steps(cls, values):
        if values.get("kind") == "explicit":
            steps = values.get("steps")
            if not steps:
                raise ValueError("explicit schedule needs a non-empty `steps` list")
            if any(step <= 0.0 for step in steps):
                raise ValueError("explicit schedule steps must be positive")
        return values


class NoiseSection(StrictModel):
    law: Literal["standard_normal", "rademacher", "uniform_scaled", "two_point_asymmetric"] = Field(
        default="standard_normal",
        description="Law of the increments U_k"
    )
    p: float = Field(
        default=0.2,
        gt=0.0,
        lt=1.0,
        description="Probability of the positive atom of two_point_asymmetric"
    )


class SkorokhodConfig(StrictModel):
    active_tol: float = Field(
        default=1e-12,
        ge=0.0,
        description="Coordinates at or below this value count as on the face"
    )
    max_events: Optional[int] = Field(
        default=None,
        ge=1,
        description="Chattering threshold on segments per step, 16 * m if not set"
    )

    def events_for(self, m: int) -> int:
        return self.max_events if self.max_events is not None else 16 * m


class TestFunctionSection(StrictModel):
    __test__ = False

    kind: Literal["coordinate", "half_square_norm", "bump", "cubic_coordinate", "exp_moment"] = Field(
        ...,
        description="Shipped test function family"
    )
    index: int = Field(
        default=0,
        ge=0,
        description="Coordinate index (0-based) of coordinate / cubic_coordinate"
    )
    center: Optional[List[float]] = Field(
        default=None,
        description="Center of a bump"
    )
    radius: float = Field(
        default=1.0,
        gt=0.0,
        description="Radius of a bump"
    )
    zeta: float = Field(
        default=0.1,
        gt=0.0,
        description="Exponent of exp_moment"
    )
    name: Optional[str] = Field(
        default=None,
        description="Sink name, derived from kind and parameters if not set"
    )

    @validator("center")
    def check_center(cls, center):
        if center is not None and len(center) == 0:
            raise ValueError("bump center must not be empty")
        return center


class HistogramSection(StrictModel):
    bins: int = Field(
        default=2000,
        ge=1,
        description="Bins on (0, x_max] per coordinate, plus a zero bin and an overflow bin"
    )
    x_max: float = Field(
        default=20.0,
        gt=0.0,
        description="Upper edge of the last regular bin"
    )


class SinksSection(StrictModel):
    moments: bool = Field(
        default=True,
        description="Write moments.csv"
    )
    histogram: HistogramSection = Field(
        default_factory=HistogramSection,
        description="Histogram layout, fixed before the run"
    )
    reservoir: bool = Field(
        default=False,
        description="Keep a weighted reservoir of atoms for step cdfs"
    )
    reservoir_capacity: int = Field(
        default=2 ** 20,
        ge=1,
        description="Reservoir capacity in atoms"
    )
    test_functions: List[TestFunctionSection] = Field(
        default=[],
        description="Streaming sinks nu_n(f)"
    )
    boundary: bool = Field(
        default=False,
        description="Collect boundary measures mu_n^i"
    )
    trace_points: int = Field(
        default=50,
        ge=0,
        description="Log-spaced n at which the running mean is traced"
    )
    trace_coordinate: int = Field(
        default=0,
        ge=0,
        description="Coordinate (0-based) whose running mean is traced"
    )


class CltSection(StrictModel):
    test_function: TestFunctionSection = Field(
        ...,
        description="phi of the CLT statistic sqrt(Lambda_n) nu_n(A phi)"
    )


class RunConfig(StrictModel):
    spec: SpecSection
    schedule: ScheduleSection = Field(default_factory=ScheduleSection)
    noise: NoiseSection = Field(default_factory=NoiseSection)
    n_steps: int = Field(
        default=1000,
        ge=1,
        description="Steps per chain"
    )
    replications: int = Field(
        default=1,
        ge=1,
        description="Independent chains, one RNG stream each"
    )
    seed: int = Field(
        default=0,
        ge=0,
        lt=2 ** 64,
        description="Master seed of all replication streams"
    )
    threads: int = Field(
        default=THREADS,
        ge=1,
        description="Worker processes for replications, does not change any output"
    )
    skorokhod: SkorokhodConfig = Field(default_factory=SkorokhodConfig)
    sinks: SinksSection = Field(default_factory=SinksSection)
    output_dir: Optional[str] = Field(
        default=None,
        description="Output directory, BASE_DIR/runs/<config hash> if not set"
    )
    checkpoint_every: int = Field(
        default=CHECKPOINT_EVERY,
        ge=0,
        description="Checkpoint cadence in steps, 0 disables checkpoints"
    )
    alphas: List[float] = Field(
        default=[0.1, 0.3, 0.5, 0.7, 0.9],
        description="Schedule exponents of alpha-sweep"
    )
    clt: Optional[CltSection] = Field(
        default=None,
        description="CLT study settings"
    )

    @validator("alphas")
    def check_alphas(cls, alphas):
        if not alphas:
            raise ValueError("alphas must not be empty")
        if any(not 0.0 <= alpha <= 1.0 for alpha in alphas):
            raise ValueError("alphas must lie in [0, 1]")
        return alphas

    def config_hash(self) -> str:
        """
        Hash of everything that influences numbers; threads and output_dir excluded
        """
        return canonical_hash(self.dict(exclude={"threads", "output_dir"}))

    @staticmethod
    def from_yaml(path: str, overrides: Dict[str, Any] = None) -> "RunConfig":
        try:
            with open(path) as fin:
                document = yaml.safe_load(fin) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"Cannot read config file {path}: {e}") from e
        if not isinstance(document, dict):
            raise ConfigError(f"Config file {path} must hold a mapping at top level")
        for key, value in (overrides or {}).items():
            if value is not None:
                document[key] = value
        return RunConfig.parse_obj(document)
