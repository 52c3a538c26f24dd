from os.path import join

from rbm_stationary.cltlab import CltReport, clt_study
from rbm_stationary.constants import STUDIES_ROUTER
from rbm_stationary.exceptions import ConfigError
from rbm_stationary.managers.resource_manager import ResourceManager
from rbm_stationary.managers.run_manager import replication_map
from rbm_stationary.models.config import RunConfig
from rbm_stationary.models.discovery import HostInfo
from rbm_stationary.noise import NoiseModel
from rbm_stationary.reference import resolve_spec
from rbm_stationary.scheme import StepSchedule
from rbm_stationary.utils import build_metadata, write_csv, write_json

REPLICATION_COLUMNS = ("replication", "total_weight", "total_weight_three_halves", "generator_mean",
                       "statistic", "plugin_variance", "third_term", "echeverria_residual", "truncations")


class StudyManager(ResourceManager):
    def __init__(self, log_level: str = "INFO", resources_base: str = None):
        kwargs = {} if resources_base is None else {"resources_base": resources_base}
        super().__init__(logger_label=__name__, log_level=log_level, resource_router=STUDIES_ROUTER, **kwargs)
        self.host = HostInfo.discover()

    def clt(self, config: RunConfig) -> CltReport:
        """
        CLT study of the config's `clt.test_function`: one row per replication
        in clt_replications.csv and the summary in clt_summary.json. The
        Echeverria residual is included when boundary sinks are on.
        """
        if config.clt is None:
            raise ConfigError("The clt command needs a `clt` section with a test function")
        if config.replications < 2:
            raise ConfigError(f"A CLT study needs at least 2 replications, got {config.replications}")
        spec, _ = resolve_spec(config.spec)
        _, study_dir = self._create_resource_dir(config.config_hash(), config.output_dir)
        write_json(join(study_dir, "host.json"), self.host.dict())

        schedule = StepSchedule.create(config.schedule)
        workers = min(config.threads, self.host.default_workers(config.replications))
        self.log.info(f"CLT study on '{spec.label}' with {config.replications} replications, "
                      f"n={config.n_steps}, {workers} workers")
        with replication_map(workers) as mapper:
            report = clt_study(
                spec,
                schedule,
                config.clt.test_function,
                config.replications,
                config.n_steps,
                noise=NoiseModel.create(config.noise),
                seed=config.seed,
                cfg=config.skorokhod,
                boundary=config.sinks.boundary,
                executor_map=mapper,
            )

        metadata = build_metadata(config.config_hash(), config.seed)
        rows = [
            [r.replication, r.total_weight, r.total_weight_three_halves, r.generator_mean, r.statistic,
             r.plugin_variance, r.third_term, "" if r.echeverria is None else r.echeverria, r.truncations]
            for r in report.replications
        ]
        write_csv(join(study_dir, "clt_replications.csv"), REPLICATION_COLUMNS, rows, metadata)
        write_json(join(study_dir, "clt_summary.json"), report.summary.dict(), metadata)
        self.log.info(f"CLT study written to {study_dir}")
        return report
