"""
Decreasing-step Euler scheme with Skorokhod projection:

    Y_(k+1) = X_k + b(X_k) l_(k+1) + sigma(X_k) sqrt(l_(k+1)) U_(k+1)
    X_(k+1) = S(X_k, Y_(k+1) - X_k)

Each step emits the atom (X_k, l_(k+1)), the pre-step state weighted by the
step's size, so that nu_n weights X_(k-1) by l_k.
"""
from time import time
from typing import Any, Callable, Collection, Dict, NamedTuple, Optional, Sequence
import json
import logging

import numpy as np
from pydantic import ValidationError

from rbm_stationary.exceptions import CheckpointCorrupt, ScheduleExhausted
from rbm_stationary.measure import BoundaryMeasure, WeightedMeasure
from rbm_stationary.models.checkpoint import CheckpointRecord
from rbm_stationary.models.config import ScheduleSection, SkorokhodConfig
from rbm_stationary.noise import NoiseModel, RngStream, draw_increment
from rbm_stationary.numerics import KahanSum, Vector
from rbm_stationary.problem import ProblemSpec
from rbm_stationary.skorokhod import ReflectionBreakdown, reflect
from rbm_stationary.utils import write_json

__all__ = [
    "ChainSinks",
    "ChainState",
    "StepOutcome",
    "StepSchedule",
    "TRUNCATION_ALERT_RATE",
    "load_checkpoint",
    "restore_state",
    "run",
    "save_checkpoint",
    "step",
]

logger = logging.getLogger(__name__)

TRUNCATION_ALERT_RATE = 1e-4
THREE_HALVES = 1.5


class StepSchedule:
    """
    Step sizes l_k (k >= 1) and the running sums Lambda_n = sum l_k and
    Lambda_n^(alpha) = sum l_k^alpha, accumulated with compensation.
    Lambda_n^(3/2) is always tracked.
    """

    def __init__(self, kind: str = "power", c: float = 1.0, exponent: float = 0.5,
                 steps: Sequence[float] = None, alphas: Sequence[float] = (THREE_HALVES,)):
        if kind not in ("power", "explicit"):
            raise ValueError(f"Unknown schedule kind: {kind}")
        if kind == "power" and (c <= 0.0 or not 0.0 <= exponent <= 1.0):
            raise ValueError(f"Power schedule needs c > 0 and exponent in [0, 1], got c={c}, exponent={exponent}")
        if kind == "explicit" and (not steps or min(steps) <= 0.0):
            raise ValueError("Explicit schedule needs a non-empty list of positive steps")
        self.kind = kind
        self.c = float(c)
        self.exponent = float(exponent)
        self.steps = None if steps is None else [float(s) for s in steps]
        self.alphas = sorted(set(float(a) for a in alphas) | {THREE_HALVES})
        self.k = 0
        self.total = KahanSum()
        self.power_totals = {alpha: KahanSum() for alpha in self.alphas}
        if kind == "power" and self.exponent == 0.0:
            logger.warning(f"Constant step {self.c}: the schedule does not decrease, "
                           f"nu_n carries a discretization bias")

    @staticmethod
    def create(section: ScheduleSection, exponent: float = None) -> "StepSchedule":
        return StepSchedule(
            kind=section.kind,
            c=section.c,
            exponent=section.exponent if exponent is None else exponent,
            steps=section.steps,
            alphas=section.alphas,
        )

    def lambda_at(self, k: int) -> float:
        if k < 1:
            raise ValueError(f"Steps are numbered from 1, got {k}")
        if self.kind == "explicit":
            if k > len(self.steps):
                raise ScheduleExhausted(f"Explicit schedule has {len(self.steps)} steps, step {k} requested")
            return self.steps[k - 1]
        return self.c * float(k) ** -self.exponent

    @property
    def lambda_0(self) -> float:
        """
        sup_k l_k
        """
        if self.kind == "explicit":
            return max(self.steps)
        return self.c

    def advance(self) -> float:
        lam = self.lambda_at(self.k + 1)
        self.k += 1
        self.total.add(lam)
        for alpha, acc in self.power_totals.items():
            acc.add(lam ** alpha)
        return lam

    @property
    def total_weight(self) -> float:
        return self.total.value

    def weight_power(self, alpha: float) -> float:
        if alpha not in self.power_totals:
            raise KeyError(f"Lambda^({alpha}) is not tracked, tracked: {self.alphas}")
        return self.power_totals[alpha].value

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "c": self.c, "exponent": self.exponent, "steps": self.steps,
                "alphas": self.alphas}

    def get_state(self) -> Dict[str, Any]:
        return {
            **self.describe(),
            "k": self.k,
            "total": self.total.get_state(),
            "power_totals": {repr(alpha): acc.get_state() for alpha, acc in self.power_totals.items()},
        }

    @staticmethod
    def from_state(state: Dict[str, Any]) -> "StepSchedule":
        schedule = StepSchedule(state["kind"], state["c"], state["exponent"], state["steps"], state["alphas"])
        schedule.k = state["k"]
        schedule.total = KahanSum.from_state(state["total"])
        schedule.power_totals = {
            float(alpha): KahanSum.from_state(acc) for alpha, acc in state["power_totals"].items()
        }
        return schedule


class ChainState:
    def __init__(self, X: Vector, stream: RngStream, schedule: StepSchedule,
                 k: int = 0, truncation_count: int = 0):
        self.X = np.asarray(X, dtype=float).copy()
        self.stream = stream
        self.schedule = schedule
        self.k = k
        self.truncation_count = truncation_count
        self.started_at = time()

    @staticmethod
    def create(spec: ProblemSpec, schedule: StepSchedule, seed: int, replication: int) -> "ChainState":
        return ChainState(spec.x0, RngStream(seed, replication), schedule)

    @property
    def elapsed(self) -> float:
        return time() - self.started_at

    def __repr__(self) -> str:
        return f"ChainState(k={self.k}, X={self.X.tolist()}, truncations={self.truncation_count})"


class StepOutcome(NamedTuple):
    atom: Vector
    weight: float
    breakdown: ReflectionBreakdown
    increment: Vector


class ChainSinks(NamedTuple):
    measure: WeightedMeasure
    boundary: Optional[BoundaryMeasure] = None


def step(state: ChainState, spec: ProblemSpec, model: NoiseModel, cfg: SkorokhodConfig) -> StepOutcome:
    """
    Advance the chain by one step in place and return the emitted atom
    (X_k, l_(k+1)) together with the reflection breakdown of the step.
    """
    x = state.X
    lam = state.schedule.advance()
    b = spec.drift.evaluate(x)
    sigma = spec.diffusion.evaluate(x)
    increment = draw_increment(model, state.stream, sigma.shape[1])
    theta = b * lam + np.sqrt(lam) * (sigma @ increment)
    breakdown = reflect(x, theta, spec.R, cfg)
    if breakdown.truncated:
        state.truncation_count += 1
    state.X = breakdown.endpoint
    state.k += 1
    return StepOutcome(x, lam, breakdown, increment)


def run(spec: ProblemSpec, model: NoiseModel, cfg: SkorokhodConfig, n_steps: int,
        sinks: ChainSinks, state: ChainState,
        checkpoint_every: int = 0, on_checkpoint: Callable[[ChainState], None] = None,
        trace_at: Collection[int] = (), on_trace: Callable[[ChainState], None] = None) -> ChainState:
    """
    Run `n_steps` further steps from `state`, streaming every atom into the
    sinks. Continuing a restored state is bitwise identical to an
    uninterrupted run.
    """
    if n_steps < 0:
        raise ValueError(f"n_steps must be non-negative, got {n_steps}")
    measure, boundary = sinks
    target = state.k + n_steps
    while state.k < target:
        outcome = step(state, spec, model, cfg)
        measure.absorb(outcome.atom, outcome.weight)
        if boundary is not None:
            boundary.absorb_boundary(outcome.breakdown, outcome.weight,
                                     float(np.linalg.norm(outcome.increment)))
        if on_trace is not None and state.k in trace_at:
            on_trace(state)
        if checkpoint_every and on_checkpoint is not None and state.k % checkpoint_every == 0:
            on_checkpoint(state)

    if state.k and state.truncation_count / state.k > TRUNCATION_ALERT_RATE:
        logger.warning(f"Chattering truncation rate {state.truncation_count / state.k:.3e} "
                       f"above {TRUNCATION_ALERT_RATE} ({state.truncation_count} of {state.k} steps)")
    elif state.truncation_count:
        logger.info(f"{state.truncation_count} truncated steps of {state.k}")
    logger.debug(f"Chain at k={state.k}, {state.elapsed:.1f}s since start or restore")
    return state


def save_checkpoint(path: str, record: CheckpointRecord) -> str:
    write_json(path, record.dict())
    logger.info(f"Checkpoint written: {path} (k={record.k})")
    return path


def load_checkpoint(path: str, expected_config_hash: str = None) -> CheckpointRecord:
    try:
        with open(path) as fin:
            document = json.load(fin)
        record = CheckpointRecord.parse_obj(document)
    except (OSError, ValueError, ValidationError) as e:
        raise CheckpointCorrupt(f"Cannot read checkpoint {path}: {e}") from e
    if expected_config_hash is not None and record.config_hash != expected_config_hash:
        raise CheckpointCorrupt(
            f"Checkpoint {path} belongs to config {record.config_hash}, expected {expected_config_hash}"
        )
    if len(record.X) == 0 or any(x < 0.0 for x in record.X):
        raise CheckpointCorrupt(f"Checkpoint {path} holds a state outside the orthant: {record.X}")
    return record


def restore_state(record: CheckpointRecord) -> ChainState:
    stream = RngStream.from_state(record.stream)
    schedule = StepSchedule.from_state(record.schedule)
    return ChainState(np.array(record.X, dtype=float), stream, schedule, record.k, record.truncation_count)
