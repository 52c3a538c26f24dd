"""
Streaming weighted empirical measures.

WeightedMeasure holds nu_n = (1/Lambda_n) sum_k lambda_k delta_{X_(k-1)}
through accumulators only: compensated power sums, weighted central moments,
fixed-grid histograms and exact streaming sinks sum_k lambda_k f(X_(k-1)) for
functions registered before the first atom. BoundaryMeasure holds the face
measures mu_n^i built from the per-step reflection breakdowns.
"""
from heapq import heappush, heappushpop
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union
import logging
import math

import numpy as np
from numpy.polynomial.legendre import leggauss

from rbm_stationary.exceptions import (
    ConfigMismatch,
    EmptyMeasure,
    MeasureError,
    UnregisteredFunctionInStreamingMode,
)
from rbm_stationary.models.config import HistogramSection
from rbm_stationary.noise import RngStream, draw_uniform
from rbm_stationary.numerics import KahanSum, Vector
from rbm_stationary.skorokhod import ReflectionBreakdown

__all__ = [
    "BoundaryMeasure",
    "MarginalStats",
    "QQ_LEVELS",
    "QUANTILE_LEVELS",
    "WeightedMeasure",
    "WeightedReservoir",
    "gauss_legendre_unit",
]

logger = logging.getLogger(__name__)

QUANTILE_LEVELS = (0.1, 0.25, 0.5, 0.75, 0.9)
QQ_LEVELS = tuple(k / 100.0 for k in range(1, 100))
RESERVOIR_SUBSTREAM = 1

TestFn = Callable[[Vector], float]
FaceFn = Callable[[int, Vector], float]


def gauss_legendre_unit(n_nodes: int = 3) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre nodes and weights mapped from [-1, 1] to [0, 1]
    """
    nodes, weights = leggauss(n_nodes)
    return (nodes + 1.0) / 2.0, weights / 2.0


class MarginalStats(NamedTuple):
    grid: np.ndarray
    cdf: np.ndarray
    quantiles: Dict[float, float]
    ks: Optional[float]


class WeightedReservoir:
    """
    Weighted sampling without replacement of a bounded number of atoms
    (A-Res: keep the `capacity` largest keys log(u) / w). Draws come from a
    dedicated substream of the replication so the chain's increments are not
    disturbed.
    """

    def __init__(self, capacity: int, stream: RngStream):
        self.capacity = capacity
        self.stream = stream
        self.heap: List[Tuple[float, int, Tuple[float, ...]]] = []
        self.seen = 0

    def offer(self, x: Vector, weight: float) -> None:
        u = float(draw_uniform(self.stream, 1)[0])
        key = math.log(u) / weight
        item = (key, self.seen, tuple(float(v) for v in x))
        self.seen += 1
        if len(self.heap) < self.capacity:
            heappush(self.heap, item)
        elif key > self.heap[0][0]:
            heappushpop(self.heap, item)

    def atoms(self) -> np.ndarray:
        if not self.heap:
            return np.zeros((0, 0))
        return np.array([item[2] for item in sorted(self.heap, key=lambda item: item[1])])

    def merged(self, other: "WeightedReservoir") -> "WeightedReservoir":
        result = WeightedReservoir(self.capacity, self.stream)
        result.seen = self.seen + other.seen
        for key, seq, x in self.heap + [(k, s + self.seen, x) for k, s, x in other.heap]:
            if len(result.heap) < result.capacity:
                heappush(result.heap, (key, seq, x))
            elif key > result.heap[0][0]:
                heappushpop(result.heap, (key, seq, x))
        return result

    def get_state(self) -> Dict[str, Any]:
        return {
            "capacity": self.capacity,
            "seen": self.seen,
            "heap": [[key, seq, list(x)] for key, seq, x in self.heap],
            "stream": self.stream.get_state(),
        }

    @staticmethod
    def from_state(state: Dict[str, Any]) -> "WeightedReservoir":
        reservoir = WeightedReservoir(state["capacity"], RngStream.from_state(state["stream"]))
        reservoir.seen = state["seen"]
        # stored in heap order, so the invariant survives the round trip
        reservoir.heap = [(key, seq, tuple(x)) for key, seq, x in state["heap"]]
        return reservoir


class WeightedMeasure:
    def __init__(self, m: int, histogram: HistogramSection = None, keep_atoms: bool = False,
                 reservoir: WeightedReservoir = None):
        self.m = m
        self.histogram = histogram or HistogramSection()
        self.edges = np.linspace(0.0, self.histogram.x_max, self.histogram.bins + 1)
        self.count = 0
        self.total_weight = KahanSum()
        # power sums sum lambda x_j^p for p = 1..4
        self.power_sums = KahanSum((4, m))
        self.cross_sums = KahanSum((m, m))
        # weighted running mean and sum of squared deviations (West)
        self.running_mean = np.zeros(m)
        self.running_m2 = np.zeros(m)
        # zero bin, `bins` regular bins, overflow bin
        self.counts = np.zeros((m, self.histogram.bins + 2))
        self.sinks: Dict[str, TestFn] = {}
        self.sink_sums: Dict[str, KahanSum] = {}
        self.keep_atoms = keep_atoms
        self.atom_log: List[Tuple[np.ndarray, float]] = []
        self.reservoir = reservoir

    def register_sink(self, name: str, f: TestFn) -> None:
        if self.count > 0:
            raise MeasureError(f"Sink '{name}' registered after {self.count} atoms, register sinks before the run")
        if name in self.sinks:
            raise MeasureError(f"Sink '{name}' is already registered")
        self.sinks[name] = f
        self.sink_sums[name] = KahanSum()

    def absorb(self, x: Vector, weight: float) -> None:
        x = np.asarray(x, dtype=float)
        if weight <= 0.0:
            raise ValueError(f"Atom weight must be positive, got {weight}")
        self.count += 1
        self.total_weight.add(weight)
        total = self.total_weight.value
        powers = np.vstack([x, x * x, x ** 3, x ** 4])
        self.power_sums.add(weight * powers)
        self.cross_sums.add(weight * np.outer(x, x))
        delta = x - self.running_mean
        self.running_mean = self.running_mean + delta * (weight / total)
        self.running_m2 = self.running_m2 + weight * delta * (x - self.running_mean)
        bins = np.searchsorted(self.edges, x, side="left")
        self.counts[np.arange(self.m), bins] += weight
        for name, f in self.sinks.items():
            self.sink_sums[name].add(weight * float(f(x)))
        if self.keep_atoms:
            self.atom_log.append((x.copy(), float(weight)))
        if self.reservoir is not None:
            self.reservoir.offer(x, weight)

    def absorb_many(self, xs: np.ndarray, weights: Sequence[float]) -> None:
        xs = np.asarray(xs, dtype=float).reshape(-1, self.m)
        if len(weights) != xs.shape[0]:
            raise ValueError(f"{xs.shape[0]} atoms but {len(weights)} weights")
        for x, weight in zip(xs, weights):
            self.absorb(x, float(weight))

    def mass(self) -> float:
        if self.count == 0:
            raise EmptyMeasure("Measure has no atoms")
        total = self.total_weight.value
        return total / total

    def integrate(self, f: Union[str, TestFn]) -> float:
        """
        nu_n(f). Exact for registered sinks (by name or by the registered
        callable) and for measures keeping their atom log; otherwise an
        approximation from the reservoir sample.
        """
        if self.count == 0:
            raise EmptyMeasure("Measure has no atoms")
        total = self.total_weight.value
        if isinstance(f, str):
            if f not in self.sink_sums:
                raise UnregisteredFunctionInStreamingMode(f"No sink named '{f}'")
            return self.sink_sums[f].value / total
        for name, registered in self.sinks.items():
            if registered is f:
                return self.sink_sums[name].value / total
        if self.keep_atoms:
            acc = KahanSum()
            for x, weight in self.atom_log:
                acc.add(weight * float(f(x)))
            return acc.value / total
        if self.reservoir is not None and self.reservoir.heap:
            atoms = self.reservoir.atoms()
            return float(np.mean([f(x) for x in atoms]))
        raise UnregisteredFunctionInStreamingMode(
            "Function was not registered as a sink before the run and no atoms are retained"
        )

    def mean(self) -> np.ndarray:
        if self.count == 0:
            raise EmptyMeasure("Measure has no atoms")
        return self.power_sums.value[0] / self.total_weight.value

    def raw_moment(self, order: int) -> np.ndarray:
        if not 1 <= order <= 4:
            raise ValueError(f"Raw moments are kept up to order 4, asked for {order}")
        if self.count == 0:
            raise EmptyMeasure("Measure has no atoms")
        return self.power_sums.value[order - 1] / self.total_weight.value

    def cross_moment(self) -> np.ndarray:
        if self.count == 0:
            raise EmptyMeasure("Measure has no atoms")
        return self.cross_sums.value / self.total_weight.value

    def variance(self) -> np.ndarray:
        if self.count == 0:
            raise EmptyMeasure("Measure has no atoms")
        return self.running_m2 / self.total_weight.value

    def cdf_grid(self, coord: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Right-continuous cdf of coordinate `coord` evaluated at the bin edges;
        the value at 0 is the mass sitting exactly on the face.
        """
        if self.count == 0:
            raise EmptyMeasure("Measure has no atoms")
        weights = self.counts[coord]
        cdf = np.cumsum(weights[:-1]) / np.sum(weights)
        return self.edges.copy(), np.minimum(cdf, 1.0)

    def density_grid(self, coord: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Histogram density of coordinate `coord` on the regular bins
        [x_(j-1), x_j]. Atoms on the face count toward the first bin, mass
        beyond x_max is left out.
        """
        if self.count == 0:
            raise EmptyMeasure("Measure has no atoms")
        weights = self.counts[coord, 1:-1].copy()
        weights[0] += self.counts[coord, 0]
        return self.edges.copy(), weights / (np.sum(self.counts[coord]) * np.diff(self.edges))

    def quantile(self, coord: int, level: float) -> float:
        """
        Lower quantile inf{x : F(x) >= level}, interpolated linearly inside the
        bin where F crosses the level. Mass beyond x_max is reported as x_max.
        """
        if not 0.0 < level < 1.0:
            raise ValueError(f"Quantile level must lie in (0, 1), got {level}")
        grid, cdf = self.cdf_grid(coord)
        index = int(np.searchsorted(cdf, level, side="left"))
        if index == 0:
            return 0.0
        if index >= len(grid):
            return float(grid[-1])
        low, high = cdf[index - 1], cdf[index]
        share = (level - low) / (high - low) if high > low else 1.0
        return float(grid[index - 1] + share * (grid[index] - grid[index - 1]))

    def marginal_stats(self, coord: int, reference_cdf: Callable[[np.ndarray], np.ndarray] = None,
                       levels: Sequence[float] = QUANTILE_LEVELS) -> MarginalStats:
        grid, cdf = self.cdf_grid(coord)
        quantiles = {level: self.quantile(coord, level) for level in levels}
        ks = None
        if reference_cdf is not None:
            ks = float(np.max(np.abs(cdf - reference_cdf(grid))))
        return MarginalStats(grid, cdf, quantiles, ks)

    def merge(self, other: "WeightedMeasure") -> "WeightedMeasure":
        """
        Accumulator-wise sum of two measures. Merging R replications of length
        n estimates the same stationary law but is not the single-chain
        nu_(Rn): the weight profiles differ.
        """
        if self.m != other.m or self.histogram != other.histogram:
            raise ConfigMismatch(
                f"Cannot merge m={self.m} {self.histogram} with m={other.m} {other.histogram}"
            )
        if set(self.sinks) != set(other.sinks):
            raise ConfigMismatch(f"Sinks differ: {sorted(self.sinks)} vs {sorted(other.sinks)}")
        if other.count == 0:
            return self.copy()
        if self.count == 0:
            return other.copy()
        result = WeightedMeasure(self.m, self.histogram, self.keep_atoms and other.keep_atoms)
        result.count = self.count + other.count
        result.total_weight = self.total_weight.merged(other.total_weight)
        result.power_sums = self.power_sums.merged(other.power_sums)
        result.cross_sums = self.cross_sums.merged(other.cross_sums)
        wa, wb = self.total_weight.value, other.total_weight.value
        delta = other.running_mean - self.running_mean
        result.running_mean = self.running_mean + delta * (wb / (wa + wb))
        result.running_m2 = self.running_m2 + other.running_m2 + delta * delta * (wa * wb / (wa + wb))
        result.counts = self.counts + other.counts
        result.sinks = dict(self.sinks)
        result.sink_sums = {name: self.sink_sums[name].merged(other.sink_sums[name]) for name in self.sinks}
        if result.keep_atoms:
            result.atom_log = self.atom_log + other.atom_log
        if self.reservoir is not None and other.reservoir is not None:
            result.reservoir = self.reservoir.merged(other.reservoir)
        return result

    def copy(self) -> "WeightedMeasure":
        result = WeightedMeasure.from_state(self.get_state(), self.sinks)
        result.keep_atoms = self.keep_atoms
        result.atom_log = list(self.atom_log)
        return result

    def get_state(self) -> Dict[str, Any]:
        return {
            "m": self.m,
            "histogram": self.histogram.dict(),
            "count": self.count,
            "total_weight": self.total_weight.get_state(),
            "power_sums": self.power_sums.get_state(),
            "cross_sums": self.cross_sums.get_state(),
            "running_mean": self.running_mean.tolist(),
            "running_m2": self.running_m2.tolist(),
            "counts": self.counts.tolist(),
            "sink_sums": {name: acc.get_state() for name, acc in self.sink_sums.items()},
            "reservoir": None if self.reservoir is None else self.reservoir.get_state(),
        }

    @staticmethod
    def from_state(state: Dict[str, Any], sinks: Dict[str, TestFn] = None) -> "WeightedMeasure":
        sinks = sinks or {}
        if set(sinks) != set(state["sink_sums"]):
            raise ConfigMismatch(
                f"Stored sinks {sorted(state['sink_sums'])} do not match {sorted(sinks)}"
            )
        measure = WeightedMeasure(state["m"], HistogramSection.parse_obj(state["histogram"]))
        measure.count = state["count"]
        measure.total_weight = KahanSum.from_state(state["total_weight"])
        measure.power_sums = KahanSum.from_state(state["power_sums"])
        measure.cross_sums = KahanSum.from_state(state["cross_sums"])
        measure.running_mean = np.array(state["running_mean"], dtype=float)
        measure.running_m2 = np.array(state["running_m2"], dtype=float)
        measure.counts = np.array(state["counts"], dtype=float)
        measure.sinks = dict(sinks)
        measure.sink_sums = {name: KahanSum.from_state(acc) for name, acc in state["sink_sums"].items()}
        if state.get("reservoir") is not None:
            measure.reservoir = WeightedReservoir.from_state(state["reservoir"])
        return measure


class BoundaryMeasure:
    """
    Face measures mu_n^i. For a step with push L^i > 0 on face i, the atoms
    are the points Pi^t = z(1) + t (x(1) - z(1)) at the quadrature nodes t,
    weighted by node weight * L^i. Values are normalized by Lambda_n of the
    matching WeightedMeasure at read time.
    """

    def __init__(self, m: int, n_nodes: int = 3, keep_atoms: bool = False):
        self.m = m
        self.nodes, self.node_weights = gauss_legendre_unit(n_nodes)
        self.mass = KahanSum((m,))
        self.sinks: Dict[str, FaceFn] = {}
        self.sink_sums: Dict[str, KahanSum] = {}
        self.keep_atoms = keep_atoms
        self.atoms: List[Tuple[int, np.ndarray, float]] = []
        # max over atoms of |Pi_i| / (lambda + sqrt(lambda) |U|)
        self.audit_ratio = np.zeros(m)
        self.steps_with_push = 0

    def register_sink(self, name: str, g: FaceFn) -> None:
        """
        g(i, x) is integrated against mu^i for every face i
        """
        if self.steps_with_push > 0:
            raise MeasureError(f"Boundary sink '{name}' registered after atoms were absorbed")
        if name in self.sinks:
            raise MeasureError(f"Boundary sink '{name}' is already registered")
        self.sinks[name] = g
        self.sink_sums[name] = KahanSum((self.m,))

    def absorb_boundary(self, breakdown: ReflectionBreakdown, step_size: float = None,
                        increment_norm: float = None) -> None:
        push = breakdown.face_push
        faces = np.flatnonzero(push > 0.0)
        if faces.size == 0:
            return
        self.steps_with_push += 1
        z_end = breakdown.z_end
        points = [z_end + t * (breakdown.endpoint - z_end) for t in self.nodes]
        face_mass = np.zeros(self.m)
        face_mass[faces] = push[faces]
        self.mass.add(face_mass)
        for name, g in self.sinks.items():
            contribution = np.zeros(self.m)
            for i in faces:
                contribution[i] = push[i] * sum(w * float(g(int(i), p)) for w, p in zip(self.node_weights, points))
            self.sink_sums[name].add(contribution)
        if self.keep_atoms:
            for i in faces:
                for w, p in zip(self.node_weights, points):
                    self.atoms.append((int(i), p.copy(), float(w * push[i])))
        if step_size is not None and increment_norm is not None:
            scale = step_size + np.sqrt(step_size) * increment_norm
            if scale > 0.0:
                for i in faces:
                    reach = max(abs(p[i]) for p in points)
                    self.audit_ratio[i] = max(self.audit_ratio[i], reach / scale)

    def face_masses(self, total_weight: float) -> np.ndarray:
        if total_weight <= 0.0:
            raise EmptyMeasure("Boundary masses need a positive Lambda_n")
        return self.mass.value / total_weight

    def integrate(self, name: str, total_weight: float) -> np.ndarray:
        """
        Per-face values mu_n^i(g) of a registered sink
        """
        if name not in self.sink_sums:
            raise UnregisteredFunctionInStreamingMode(f"No boundary sink named '{name}'")
        if total_weight <= 0.0:
            raise EmptyMeasure("Boundary integrals need a positive Lambda_n")
        return self.sink_sums[name].value / total_weight

    def merge(self, other: "BoundaryMeasure") -> "BoundaryMeasure":
        if self.m != other.m or not np.array_equal(self.nodes, other.nodes):
            raise ConfigMismatch("Boundary measures of different dimension or quadrature")
        if set(self.sinks) != set(other.sinks):
            raise ConfigMismatch(f"Boundary sinks differ: {sorted(self.sinks)} vs {sorted(other.sinks)}")
        result = BoundaryMeasure(self.m, len(self.nodes), self.keep_atoms and other.keep_atoms)
        result.mass = self.mass.merged(other.mass)
        result.sinks = dict(self.sinks)
        result.sink_sums = {name: self.sink_sums[name].merged(other.sink_sums[name]) for name in self.sinks}
        if result.keep_atoms:
            result.atoms = self.atoms + other.atoms
        result.audit_ratio = np.maximum(self.audit_ratio, other.audit_ratio)
        result.steps_with_push = self.steps_with_push + other.steps_with_push
        return result

    def get_state(self) -> Dict[str, Any]:
        return {
            "m": self.m,
            "n_nodes": len(self.nodes),
            "mass": self.mass.get_state(),
            "sink_sums": {name: acc.get_state() for name, acc in self.sink_sums.items()},
            "audit_ratio": self.audit_ratio.tolist(),
            "steps_with_push": self.steps_with_push,
        }

    @staticmethod
    def from_state(state: Dict[str, Any], sinks: Dict[str, FaceFn] = None) -> "BoundaryMeasure":
        sinks = sinks or {}
        if set(sinks) != set(state["sink_sums"]):
            raise ConfigMismatch(
                f"Stored boundary sinks {sorted(state['sink_sums'])} do not match {sorted(sinks)}"
            )
        measure = BoundaryMeasure(state["m"], state["n_nodes"])
        measure.mass = KahanSum.from_state(state["mass"])
        measure.sinks = dict(sinks)
        measure.sink_sums = {name: KahanSum.from_state(acc) for name, acc in state["sink_sums"].items()}
        measure.audit_ratio = np.array(state["audit_ratio"], dtype=float)
        measure.steps_with_push = state["steps_with_push"]
        return measure
