"""
Increments U_k of the scheme and the random streams they come from.

Streams are numpy Philox (4x64, 10 rounds) bit generators, keyed per
replication by SeedSequence(master_seed, spawn_key=(replication_index, ...)).
Every coordinate of every draw consumes exactly one raw 64-bit word; the top
53 bits give u in (0, 1) and each law is a deterministic transform of u, so
the stream position after k draws in dimension m is always k * m words.
"""
from typing import Any, Dict, List, NamedTuple, Optional, Sequence
import logging

import numpy as np
from scipy.special import ndtri

from rbm_stationary.models.config import NOISE_LAWS, NoiseSection
from rbm_stationary.numerics import Vector

__all__ = [
    "BIT_GENERATOR",
    "NoiseModel",
    "RngStream",
    "SubGaussianCheck",
    "draw_increment",
    "draw_uniform",
    "empirical_subgaussian_check",
]

logger = logging.getLogger(__name__)

BIT_GENERATOR = "Philox-4x64-10"
WORDS_PER_COORDINATE = 1
SQRT3 = float(np.sqrt(3.0))


class NoiseModel:
    """
    One of the shipped laws, all with mean 0 and unit variance per coordinate.
    `sub_gaussian_alpha` is a constant with E exp(l U) <= exp(alpha l^2).
    """

    def __init__(self, law: str = "standard_normal", p: float = 0.2):
        if law not in NOISE_LAWS:
            raise ValueError(f"Unknown noise law: {law}")
        if law == "two_point_asymmetric" and not 0.0 < p < 1.0:
            raise ValueError(f"two_point_asymmetric needs 0 < p < 1, got {p}")
        self.law = law
        self.p = p
        # two_point_asymmetric: U = a with probability p, -b otherwise
        self.a = float(np.sqrt((1.0 - p) / p))
        self.b = float(np.sqrt(p / (1.0 - p)))

    @staticmethod
    def create(section: NoiseSection) -> "NoiseModel":
        return NoiseModel(law=section.law, p=section.p)

    @property
    def sub_gaussian_alpha(self) -> float:
        bound = self.support_bound()
        if bound is None:
            return 0.5
        # Hoeffding: alpha = c^2 / 2 for a centered law supported in [-c, c]
        return bound ** 2 / 2.0

    @property
    def third_moment(self) -> float:
        if self.law == "two_point_asymmetric":
            return (1.0 - 2.0 * self.p) / np.sqrt(self.p * (1.0 - self.p))
        return 0.0

    @property
    def is_symmetric(self) -> bool:
        return self.law != "two_point_asymmetric" or self.p == 0.5

    def support_bound(self) -> Optional[float]:
        if self.law == "standard_normal":
            return None
        if self.law == "rademacher":
            return 1.0
        if self.law == "uniform_scaled":
            return SQRT3
        return max(self.a, self.b)

    def transform(self, u: np.ndarray) -> np.ndarray:
        if self.law == "standard_normal":
            return ndtri(u)
        if self.law == "rademacher":
            return np.where(u < 0.5, 1.0, -1.0)
        if self.law == "uniform_scaled":
            return SQRT3 * (2.0 * u - 1.0)
        return np.where(u < self.p, self.a, -self.b)

    def __repr__(self) -> str:
        if self.law == "two_point_asymmetric":
            return f"NoiseModel({self.law}, p={self.p})"
        return f"NoiseModel({self.law})"


class RngStream:
    """
    Counter-tracked random stream of one replication.

    `counter` counts raw 64-bit words consumed since creation; the full bit
    generator state is exported for checkpoints.
    """

    def __init__(self, master_seed: int, replication_index: int, substream: int = 0):
        self.master_seed = int(master_seed)
        self.replication_index = int(replication_index)
        self.substream = int(substream)
        spawn_key = (self.replication_index,) if substream == 0 else (self.replication_index, substream)
        seed_sequence = np.random.SeedSequence(entropy=self.master_seed, spawn_key=spawn_key)
        self.bit_generator = np.random.Philox(seed_sequence)
        self.counter = 0

    def raw(self, size: int) -> np.ndarray:
        words = self.bit_generator.random_raw(size)
        self.counter += size
        return np.asarray(words, dtype=np.uint64)

    def get_state(self) -> Dict[str, Any]:
        state = self.bit_generator.state
        return {
            "master_seed": self.master_seed,
            "replication_index": self.replication_index,
            "substream": self.substream,
            "counter": self.counter,
            "bit_generator": _to_jsonable(state),
        }

    def set_state(self, state: Dict[str, Any]) -> None:
        if (state["master_seed"], state["replication_index"], state.get("substream", 0)) != \
                (self.master_seed, self.replication_index, self.substream):
            raise ValueError("Stream state belongs to another (seed, replication, substream)")
        generator_state = state["bit_generator"]
        self.bit_generator.state = {
            "bit_generator": generator_state["bit_generator"],
            "state": {
                "counter": np.array(generator_state["state"]["counter"], dtype=np.uint64),
                "key": np.array(generator_state["state"]["key"], dtype=np.uint64),
            },
            "buffer": np.array(generator_state["buffer"], dtype=np.uint64),
            "buffer_pos": int(generator_state["buffer_pos"]),
            "has_uint32": int(generator_state["has_uint32"]),
            "uinteger": int(generator_state["uinteger"]),
        }
        self.counter = int(state["counter"])

    @staticmethod
    def from_state(state: Dict[str, Any]) -> "RngStream":
        stream = RngStream(state["master_seed"], state["replication_index"], state.get("substream", 0))
        stream.set_state(state)
        return stream


def _to_jsonable(value):
    if isinstance(value, dict):
        return {key: _to_jsonable(item) for key, item in value.items()}
    if isinstance(value, np.ndarray):
        return [int(item) for item in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    return value


def draw_uniform(stream: RngStream, size: int) -> np.ndarray:
    """
    u = ((w >> 11) + 0.5) * 2^-53 for raw words w; u lies strictly inside (0, 1)
    """
    words = stream.raw(size * WORDS_PER_COORDINATE)
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def draw_increment(model: NoiseModel, stream: RngStream, m: int) -> Vector:
    return model.transform(draw_uniform(stream, m))


class SubGaussianCheck(NamedTuple):
    lambdas: List[float]
    ratios: List[float]
    slack: List[float]
    max_ratio: float
    alpha: float
    passed: bool


def empirical_subgaussian_check(model: NoiseModel, lambdas: Sequence[float], sample_size: int,
                                seed: int = 0) -> SubGaussianCheck:
    """
    Estimates log E exp(l U) / l^2 on the grid from `sample_size` draws and
    compares it with the law's alpha. The slack at each l is three standard
    errors of the log-MGF estimate (delta method), divided by l^2.
    """
    stream = RngStream(seed, 0)
    samples = draw_increment(model, stream, sample_size)
    used, ratios, slack = [], [], []
    for lam in lambdas:
        if lam == 0.0:
            continue
        values = np.exp(lam * samples)
        mgf = float(np.mean(values))
        stderr = float(np.std(values, ddof=1) / np.sqrt(sample_size))
        used.append(float(lam))
        ratios.append(float(np.log(mgf) / lam ** 2))
        slack.append(3.0 * stderr / mgf / lam ** 2)
    if not used:
        raise ValueError("Sub-Gaussian check needs at least one non-zero lambda")
    alpha = model.sub_gaussian_alpha
    passed = all(ratio <= alpha + s for ratio, s in zip(ratios, slack))
    if not passed:
        logger.warning(f"{model} exceeds its sub-Gaussian constant {alpha} on the lambda grid")
    return SubGaussianCheck(used, ratios, slack, max(ratios), alpha, passed)
