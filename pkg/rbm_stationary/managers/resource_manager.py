from os.path import exists, isdir, join
from pathlib import Path
from typing import Tuple, Union
import logging

from rbm_stationary.constants import BASE_DIR


class ResourceManager:
    """
    Owns the directory BASE_DIR/<resource_router> and the per-run
    directories below it, one per resource id (usually a config hash).
    """

    def __init__(
            self,
            logger_label: str,
            resource_router: str,
            resources_base: str = BASE_DIR,
            log_level: str = "INFO"
    ):
        # Logger label of this manager - passed from the child class
        self.log = logging.getLogger(logger_label)
        self.log.setLevel(logging.getLevelName(log_level))

        # Base directory for all resource managers
        self._resources_base = resources_base
        # Routing key of this manager - passed from the child class
        self._resource_router = resource_router
        # Base directory of this manager - BASE_DIR/resource_router
        self._resource_dir = join(self._resources_base, self._resource_router)

        log_msg = f"{self._resource_router} base directory: {self._resource_dir}"
        if not exists(self._resource_dir):
            Path(self._resource_dir).mkdir(parents=True, exist_ok=True)
            self.log.info(f"Created non-existing {log_msg}")
        else:
            self.log.debug(f"Using the existing {log_msg}")

    @property
    def resource_dir(self) -> str:
        return self._resource_dir

    def get_resource(self, resource_id: str) -> Union[str, None]:
        """
        Returns the local path of the dir identified with `resource_id` or None
        """
        return self._has_dir(resource_id)

    def _has_dir(self, resource_id: str) -> Union[str, None]:
        resource_dir = self._to_resource(resource_id)
        if exists(resource_dir) and isdir(resource_dir):
            return resource_dir
        return None

    def _to_resource(self, resource_id: str) -> str:
        """
        Returns the built local path of the `resource_id` without any checks
        """
        return join(self._resource_dir, resource_id)

    def _create_resource_dir(self, resource_id: str, output_dir: str = None) -> Tuple[str, str]:
        """
        Creates (or reuses) the directory of `resource_id`. An explicit
        `output_dir` replaces the managed location.
        """
        resource_dir = output_dir or self._to_resource(resource_id)
        if exists(resource_dir):
            self.log.info(f"Reusing the existing directory of {resource_id}: {resource_dir}")
        Path(resource_dir).mkdir(parents=True, exist_ok=True)
        return resource_id, resource_dir
