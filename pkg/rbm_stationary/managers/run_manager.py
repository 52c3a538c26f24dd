from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from functools import reduce
from os.path import dirname, join
from typing import Any, Dict, Iterator, List, NamedTuple, Optional, Tuple

import numpy as np

from rbm_stationary.cltlab import TestFunction, build_test_function, echeverria_residual, register_echeverria_sinks
from rbm_stationary.constants import RUNS_ROUTER
from rbm_stationary.exceptions import CheckpointCorrupt, ConfigError
from rbm_stationary.managers.resource_manager import ResourceManager
from rbm_stationary.measure import (
    QQ_LEVELS,
    RESERVOIR_SUBSTREAM,
    BoundaryMeasure,
    WeightedMeasure,
    WeightedReservoir,
)
from rbm_stationary.models.checkpoint import CheckpointRecord
from rbm_stationary.models.config import RunConfig
from rbm_stationary.models.discovery import HostInfo
from rbm_stationary.models.reports import MarginalSummary, ReplicationSummary, SummaryModel
from rbm_stationary.noise import NoiseModel, RngStream
from rbm_stationary.problem import ProblemSpec, spec_hash
from rbm_stationary.reference import ReferenceLaw, exponential_cdf, exponential_quantile, resolve_spec
from rbm_stationary.scheme import (
    ChainSinks,
    ChainState,
    StepSchedule,
    load_checkpoint,
    restore_state,
    run,
    save_checkpoint,
)
from rbm_stationary.utils import build_metadata, write_csv, write_json

MOMENTS_COLUMNS = ("coordinate", "mean", "second_moment", "third_moment", "fourth_moment",
                   "variance", "mean_stderr", "reference_mean")
CDF_COLUMNS = ("coordinate", "x", "cdf", "reference_cdf")
DENSITY_COLUMNS = ("coordinate", "x_left", "x_right", "density", "reference_density")
QQ_COLUMNS = ("coordinate", "level", "quantile", "reference_quantile")
TRACE_COLUMNS = ("exponent", "replication", "n", "total_weight", "quantity", "value")


class ReplicationTask(NamedTuple):
    config: RunConfig
    spec: ProblemSpec
    replication: int
    exponent: float
    run_dir: str
    n_steps: int
    checkpoint: Optional[Dict[str, Any]] = None
    sweep: bool = False


class ReplicationResult(NamedTuple):
    replication: int
    exponent: float
    k: int
    final_state: List[float]
    truncations: int
    total_weight: float
    measure: Dict[str, Any]
    boundary: Optional[Dict[str, Any]]
    trace: List[List[Any]]


@contextmanager
def replication_map(threads: int) -> Iterator:
    """
    `map` for one worker, an ordered process-pool map otherwise. Results come
    back in task order either way.
    """
    if threads <= 1:
        yield map
    else:
        with ProcessPoolExecutor(max_workers=threads) as executor:
            yield executor.map


def replication_tag(replication: int, exponent: float, sweep: bool) -> str:
    """
    File stem of a chain: rep<NNN>, prefixed by a<exponent> inside an alpha sweep
    """
    tag = f"rep{replication:03d}"
    return f"a{exponent:g}_{tag}" if sweep else tag


def trace_points(n_steps: int, count: int) -> frozenset:
    if count <= 0:
        return frozenset()
    points = np.unique(np.rint(np.logspace(0.0, np.log10(n_steps), count)).astype(int))
    return frozenset(int(k) for k in points) | {n_steps}


def build_sinks(config: RunConfig, spec: ProblemSpec, replication: int) -> Tuple[ChainSinks, List[TestFunction]]:
    functions = [build_test_function(section, spec.m) for section in config.sinks.test_functions]
    reservoir = None
    if config.sinks.reservoir:
        stream = RngStream(config.seed, replication, RESERVOIR_SUBSTREAM)
        reservoir = WeightedReservoir(config.sinks.reservoir_capacity, stream)
    measure = WeightedMeasure(spec.m, config.sinks.histogram, reservoir=reservoir)
    boundary = BoundaryMeasure(spec.m) if config.sinks.boundary else None
    for f in functions:
        measure.register_sink(f.name, f.value)
        if boundary is not None:
            register_echeverria_sinks(spec, f, measure, boundary)
    return ChainSinks(measure, boundary), functions


def _trace_rows(exponent: float, replication: int, state: ChainState, sinks: ChainSinks,
                coordinate: int, functions: List[TestFunction]) -> List[List[Any]]:
    total = state.schedule.total_weight
    rows = [[exponent, replication, state.k, total, f"mean_x{coordinate}",
             float(sinks.measure.mean()[coordinate])]]
    for f in functions:
        rows.append([exponent, replication, state.k, total, f.name, sinks.measure.integrate(f.name)])
    return rows


def _checkpoint_record(config: RunConfig, spec: ProblemSpec, replication: int, state: ChainState,
                       sinks: ChainSinks, trace: List[List[Any]], sweep: bool = False) -> CheckpointRecord:
    return CheckpointRecord(
        config_hash=config.config_hash(),
        spec_hash=spec_hash(spec),
        replication=replication,
        k=state.k,
        X=state.X.tolist(),
        stream=state.stream.get_state(),
        schedule=state.schedule.get_state(),
        truncation_count=state.truncation_count,
        measure=sinks.measure.get_state(),
        boundary=None if sinks.boundary is None else sinks.boundary.get_state(),
        trace=[list(row) for row in trace],
        sweep=sweep,
        config=config.dict(),
    )


def run_replication(task: ReplicationTask) -> ReplicationResult:
    """
    One chain from scratch or from a checkpoint record up to k = task.n_steps.
    Module-level and fed with picklable inputs only, so it can run in a
    worker process.
    """
    config, spec = task.config, task.spec
    if config.sinks.trace_coordinate >= spec.m:
        raise ConfigError(f"trace_coordinate {config.sinks.trace_coordinate} out of range for m={spec.m}")
    sinks, functions = build_sinks(config, spec, task.replication)
    if task.checkpoint is not None:
        record = CheckpointRecord.parse_obj(task.checkpoint)
        state = restore_state(record)
        measure = WeightedMeasure.from_state(record.measure, sinks.measure.sinks)
        boundary = None
        if record.boundary is not None:
            boundary = BoundaryMeasure.from_state(record.boundary, sinks.boundary.sinks if sinks.boundary else {})
        sinks = ChainSinks(measure, boundary)
        trace = [list(row) for row in record.trace]
    else:
        schedule = StepSchedule.create(config.schedule, exponent=task.exponent)
        state = ChainState.create(spec, schedule, config.seed, task.replication)
        trace = []
    if task.n_steps < state.k:
        raise ConfigError(f"Chain is already at k={state.k}, beyond the requested n_steps={task.n_steps}")

    def on_trace(current: ChainState) -> None:
        trace.extend(_trace_rows(task.exponent, task.replication, current, sinks,
                                 config.sinks.trace_coordinate, functions))

    def on_checkpoint(current: ChainState) -> None:
        tag = replication_tag(task.replication, task.exponent, task.sweep)
        path = join(task.run_dir, "checkpoints", f"{tag}_k{current.k}.json")
        save_checkpoint(path, _checkpoint_record(config, spec, task.replication, current, sinks, trace, task.sweep))

    run(spec, NoiseModel.create(config.noise), config.skorokhod, task.n_steps - state.k, sinks, state,
        checkpoint_every=config.checkpoint_every, on_checkpoint=on_checkpoint,
        trace_at=trace_points(task.n_steps, config.sinks.trace_points), on_trace=on_trace)
    if config.checkpoint_every and state.k % config.checkpoint_every != 0:
        on_checkpoint(state)

    return ReplicationResult(
        replication=task.replication,
        exponent=task.exponent,
        k=state.k,
        final_state=state.X.tolist(),
        truncations=state.truncation_count,
        total_weight=state.schedule.total_weight,
        measure=sinks.measure.get_state(),
        boundary=None if sinks.boundary is None else sinks.boundary.get_state(),
        trace=trace,
    )


class RunManager(ResourceManager):
    def __init__(self, log_level: str = "INFO", resources_base: str = None):
        kwargs = {} if resources_base is None else {"resources_base": resources_base}
        super().__init__(logger_label=__name__, log_level=log_level, resource_router=RUNS_ROUTER, **kwargs)
        self.host = HostInfo.discover()

    def prepare_run_dir(self, config: RunConfig) -> str:
        _, run_dir = self._create_resource_dir(config.config_hash(), config.output_dir)
        write_json(join(run_dir, "host.json"), self.host.dict())
        return run_dir

    def _workers(self, config: RunConfig, tasks: int) -> int:
        workers = min(config.threads, self.host.default_workers(tasks))
        if workers < config.threads:
            self.log.debug(f"Using {workers} workers instead of {config.threads}")
        return workers

    def _run_tasks(self, config: RunConfig, tasks: List[ReplicationTask]) -> List[ReplicationResult]:
        for task in tasks:
            self.log.info(f"Replication {task.replication} (exponent {task.exponent}) queued, "
                          f"n={task.n_steps}")
        with replication_map(self._workers(config, len(tasks))) as mapper:
            results = list(mapper(run_replication, tasks))
        for result in results:
            self.log.info(f"Replication {result.replication} (exponent {result.exponent}) finished at "
                          f"k={result.k}, Lambda={result.total_weight:.6g}, truncations={result.truncations}")
        return results

    def estimate(self, config: RunConfig) -> SummaryModel:
        spec, law = resolve_spec(config.spec)
        run_dir = self.prepare_run_dir(config)
        exponent = config.schedule.exponent
        tasks = [ReplicationTask(config, spec, index, exponent, run_dir, config.n_steps)
                 for index in range(config.replications)]
        results = self._run_tasks(config, tasks)
        summary = self._write_outputs(config, spec, law, results, run_dir, "estimate")
        self.log.info(f"Estimate of '{spec.label}' written to {run_dir}")
        return summary

    def alpha_sweep(self, config: RunConfig) -> Dict[str, Any]:
        """
        One set of replications per schedule exponent, all sharing the seeds.
        Writes the long-format traces.csv and alpha_sweep.json.
        """
        spec, law = resolve_spec(config.spec)
        run_dir = self.prepare_run_dir(config)
        tasks = [ReplicationTask(config, spec, index, alpha, run_dir, config.n_steps, sweep=True)
                 for alpha in config.alphas for index in range(config.replications)]
        results = self._run_tasks(config, tasks)
        metadata = build_metadata(config.config_hash(), config.seed)
        rows = [row for result in results for row in result.trace]
        write_csv(join(run_dir, "traces.csv"), TRACE_COLUMNS, rows, metadata)

        coordinate = config.sinks.trace_coordinate
        reference = law.m1() if law is not None and coordinate == 0 else None
        sweep = []
        for alpha in config.alphas:
            finals = [WeightedMeasure.from_state(result.measure, self._sink_functions(config, spec)).mean()[coordinate]
                      for result in results if result.exponent == alpha]
            terminal = float(np.mean(finals))
            sweep.append({
                "exponent": alpha,
                "terminal_mean": terminal,
                "terminal_error": None if reference is None else abs(terminal - reference),
                # error of a single chain, root mean square over the replications
                "terminal_rms_error": None if reference is None else
                float(np.sqrt(np.mean((np.array(finals) - reference) ** 2))),
            })
        document = {"label": spec.label, "coordinate": coordinate, "reference_mean": reference,
                    "n_steps": config.n_steps, "replications": config.replications, "sweep": sweep}
        write_json(join(run_dir, "alpha_sweep.json"), document, metadata)
        self.log.info(f"Alpha sweep of '{spec.label}' over {config.alphas} written to {run_dir}")
        return document

    def resume(self, checkpoint_path: str, n_steps: int = None) -> ReplicationSummary:
        record = load_checkpoint(checkpoint_path)
        config = RunConfig.parse_obj(record.config)
        spec, _ = resolve_spec(config.spec)
        if spec_hash(spec) != record.spec_hash:
            raise CheckpointCorrupt(f"Checkpoint {checkpoint_path} was written for different problem data")
        if n_steps is not None:
            config = RunConfig.parse_obj({**config.dict(), "n_steps": n_steps})
        run_dir = dirname(dirname(checkpoint_path))
        task = ReplicationTask(config, spec, record.replication, record.schedule["exponent"], run_dir,
                               config.n_steps, record.dict(), record.sweep)
        self.log.info(f"Resuming replication {record.replication} from k={record.k} to k={config.n_steps}")
        result = run_replication(task)
        measure = WeightedMeasure.from_state(result.measure, self._sink_functions(config, spec))
        replication = self._replication_summary(result, measure)
        tag = replication_tag(record.replication, task.exponent, record.sweep)
        write_json(join(run_dir, f"resume_{tag}.json"), replication.dict(),
                   build_metadata(config.config_hash(), config.seed))
        return replication

    @staticmethod
    def _sink_functions(config: RunConfig, spec: ProblemSpec) -> Dict[str, Any]:
        sinks, _ = build_sinks(config, spec, 0)
        return sinks.measure.sinks

    @staticmethod
    def _replication_summary(result: ReplicationResult, measure: WeightedMeasure) -> ReplicationSummary:
        return ReplicationSummary(
            replication=result.replication,
            n_steps=result.k,
            total_weight=result.total_weight,
            mean=measure.mean().tolist(),
            truncations=result.truncations,
            final_state=result.final_state,
        )

    def _write_outputs(self, config: RunConfig, spec: ProblemSpec, law: Optional[ReferenceLaw],
                       results: List[ReplicationResult], run_dir: str, command: str) -> SummaryModel:
        sink_functions = self._sink_functions(config, spec)
        measures = [WeightedMeasure.from_state(result.measure, sink_functions) for result in results]
        merged = reduce(lambda a, b: a.merge(b), measures)
        means = np.array([measure.mean() for measure in measures])
        replication_mean = means.mean(axis=0)
        stderr = means.std(axis=0, ddof=1) / np.sqrt(len(results)) if len(results) > 1 else None
        metadata = build_metadata(config.config_hash(), config.seed)
        rates = law.rates if law is not None and law.kind == "product_exponential" else None
        reference_m1 = law.m1() if law is not None else None

        moment_rows = []
        for j in range(spec.m):
            reference_mean = None
            if rates is not None:
                reference_mean = 1.0 / rates[j]
            elif j == 0:
                reference_mean = reference_m1
            moment_rows.append([
                j,
                float(replication_mean[j]),
                float(merged.raw_moment(2)[j]),
                float(merged.raw_moment(3)[j]),
                float(merged.raw_moment(4)[j]),
                float(merged.variance()[j]),
                "" if stderr is None else float(stderr[j]),
                "" if reference_mean is None else reference_mean,
            ])
        if config.sinks.moments:
            write_csv(join(run_dir, "moments.csv"), MOMENTS_COLUMNS, moment_rows, metadata)

        marginals = []
        cdf_rows = []
        density_rows = []
        qq_rows = []
        for j in range(spec.m):
            reference_cdf = None
            if rates is not None:
                rate = rates[j]
                reference_cdf = lambda x, rate=rate: exponential_cdf(rate, x)
            stats = merged.marginal_stats(j, reference_cdf)
            reference_values = reference_cdf(stats.grid) if reference_cdf is not None else None
            for index, (x, value) in enumerate(zip(stats.grid, stats.cdf)):
                cdf_rows.append([j, float(x), float(value),
                                 "" if reference_values is None else float(reference_values[index])])
            edges, density = merged.density_grid(j)
            # exact density averaged over each bin
            reference_density = None if reference_values is None else np.diff(reference_values) / np.diff(edges)
            for index, value in enumerate(density):
                density_rows.append([j, float(edges[index]), float(edges[index + 1]), float(value),
                                     "" if reference_density is None else float(reference_density[index])])
            for level in QQ_LEVELS:
                qq_rows.append([j, level, merged.quantile(j, level),
                                "" if rates is None else exponential_quantile(rates[j], level)])
            marginals.append(MarginalSummary(
                coordinate=j,
                mean=float(replication_mean[j]),
                second_moment=float(merged.raw_moment(2)[j]),
                variance=float(merged.variance()[j]),
                quantiles={repr(level): value for level, value in stats.quantiles.items()},
                ks_distance=stats.ks,
                reference_rate=None if rates is None else rates[j],
            ))
        write_csv(join(run_dir, "marginal_cdf.csv"), CDF_COLUMNS, cdf_rows, metadata)
        write_csv(join(run_dir, "marginal_density.csv"), DENSITY_COLUMNS, density_rows, metadata)
        write_csv(join(run_dir, "marginal_qq.csv"), QQ_COLUMNS, qq_rows, metadata)

        trace_rows = [row for result in results for row in result.trace]
        write_csv(join(run_dir, "traces.csv"), TRACE_COLUMNS, trace_rows, metadata)

        test_functions = {name: merged.integrate(name) for name in merged.sinks}
        if config.sinks.boundary:
            boundaries = [BoundaryMeasure.from_state(result.boundary, self._boundary_functions(config, spec))
                          for result in results]
            boundary = reduce(lambda a, b: a.merge(b), boundaries)
            for section in config.sinks.test_functions:
                f = build_test_function(section, spec.m)
                test_functions[f"echeverria[{f.name}]"] = echeverria_residual(merged, boundary, f).residual
            for i, mass in enumerate(boundary.face_masses(merged.total_weight.value)):
                test_functions[f"boundary_mass[{i}]"] = float(mass)

        truncations = sum(result.truncations for result in results)
        summary = SummaryModel(
            command=command,
            label=spec.label,
            n_steps=config.n_steps,
            replications=config.replications,
            schedule_exponent=config.schedule.exponent,
            noise_law=config.noise.law,
            mass=merged.mass(),
            total_weight=merged.total_weight.value,
            mean=replication_mean.tolist(),
            mean_stderr=[] if stderr is None else stderr.tolist(),
            truncation_rate=truncations / max(1, sum(result.k for result in results)),
            reference_m1=reference_m1,
            marginals=marginals,
            test_functions=test_functions,
            replication_details=[self._replication_summary(result, measure)
                                 for result, measure in zip(results, measures)],
        )
        write_json(join(run_dir, "summary.json"), summary.dict(), metadata)
        return summary

    @staticmethod
    def _boundary_functions(config: RunConfig, spec: ProblemSpec) -> Dict[str, Any]:
        sinks, _ = build_sinks(config, spec, 0)
        return sinks.boundary.sinks if sinks.boundary is not None else {}
