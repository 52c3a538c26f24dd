from typing import Dict, List, Literal, Optional

from pydantic import Field

from rbm_stationary.models.base import StrictModel


class StabilityReport(StrictModel):
    label: str = Field(
        default="",
        description="Label of the validated spec"
    )
    m: int = Field(
        ...,
        description="Dimension"
    )
    spectral_radius: float = Field(
        ...,
        description="rho(|V|) of R = diag(R) (I - V)"
    )
    completely_s: Literal["proven", "implied", "failed"] = Field(
        ...,
        description="Completely-S status of R"
    )
    cone_certificate: Optional[List[float]] = Field(
        default=None,
        description="alpha = -R^-1 b at the state with the smallest margin"
    )
    cone_margin: Optional[float] = Field(
        default=None,
        description="min_i alpha_i"
    )
    min_ellipticity: float = Field(
        ...,
        description="Smallest eigenvalue of sigma sigma' over the checked states"
    )
    overall: Literal["pass", "fail"] = Field(
        ...,
        description="pass iff rho < 1, alpha > 0 and the diffusion is non-degenerate"
    )
    reasons: List[str] = Field(
        default=[],
        description="Failed checks"
    )

    @property
    def passed(self) -> bool:
        return self.overall == "pass"


class MarginalSummary(StrictModel):
    coordinate: int
    mean: float
    second_moment: float
    variance: float
    quantiles: Dict[str, float] = Field(
        default={},
        description="Quantiles at 0.1, 0.25, 0.5, 0.75, 0.9 from the histogram"
    )
    ks_distance: Optional[float] = Field(
        default=None,
        description="Sup distance to the reference exponential cdf on the grid"
    )
    reference_rate: Optional[float] = Field(
        default=None,
        description="Rate of the reference exponential marginal"
    )


class ReplicationSummary(StrictModel):
    replication: int
    n_steps: int
    total_weight: float = Field(
        ...,
        description="Lambda_n"
    )
    mean: List[float] = Field(
        ...,
        description="nu_n(x_j) per coordinate"
    )
    truncations: int = Field(
        default=0,
        description="Steps that hit the chattering threshold"
    )
    final_state: List[float]


class SummaryModel(StrictModel):
    command: str
    label: str
    n_steps: int
    replications: int
    schedule_exponent: float
    noise_law: str
    mass: float = Field(
        ...,
        description="nu_n(1) of the merged measure, 1 up to roundoff"
    )
    total_weight: float = Field(
        ...,
        description="Sum of Lambda_n over replications"
    )
    mean: List[float] = Field(
        ...,
        description="Replication-averaged nu_n(x_j)"
    )
    mean_stderr: List[float] = Field(
        default=[],
        description="Standard error of the replication average, empty for one replication"
    )
    truncation_rate: float
    reference_m1: Optional[float] = Field(
        default=None,
        description="Closed-form E[x_1] of the benchmark example, if known"
    )
    marginals: List[MarginalSummary] = []
    test_functions: Dict[str, float] = Field(
        default={},
        description="nu_n(f) per registered streaming sink"
    )
    replication_details: List[ReplicationSummary] = []


class CltSummaryModel(StrictModel):
    label: str
    regime: Literal["fast", "slow", "critical"]
    schedule_exponent: float
    n_steps: int
    replications: int
    total_weight: float = Field(
        ...,
        description="Lambda_n of one replication"
    )
    total_weight_three_halves: float = Field(
        ...,
        description="Lambda_n^(3/2) of one replication"
    )
    lambda_ratio: float = Field(
        ...,
        description="Lambda_n^(3/2) / sqrt(Lambda_n)"
    )
    statistic_mean: float
    statistic_variance: float
    plugin_variance: float = Field(
        ...,
        description="Replication average of nu_n(|sigma' grad phi|^2)"
    )
    variance_ratio: float
    skewness: float
    excess_kurtosis: float
    ks_to_normal: float = Field(
        ...,
        description="Kolmogorov distance of the standardized statistics to N(0, 1)"
    )
    m_tilde: float = Field(
        ...,
        description="Third-moment bias term, 0 for symmetric noise"
    )
    predicted_mean: Optional[float] = Field(
        default=None,
        description="Limit mean of the statistic: 0 (fast), lambda~ m~ (critical), none (slow)"
    )
    slow_statistic_mean: Optional[float] = Field(
        default=None,
        description="Replication average of Lambda_n / Lambda_n^(3/2) nu_n(A phi), slow regime only"
    )
    echeverria_residual: Optional[float] = Field(
        default=None,
        description="Replication average of nu_n(A phi) + sum_i mu_n^i(D_i phi)"
    )
