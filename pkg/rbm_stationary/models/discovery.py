from os import cpu_count
from platform import python_version

import numpy as np
from psutil import cpu_count as physical_cpu_count, virtual_memory
from pydantic import BaseModel, Field


class HostInfo(BaseModel):
    ram: float = Field(
        default=0.0,
        description='All available RAM in GiB'
    )
    cpu_cores: int = Field(
        default=1,
        description='Number of logical CPU cores'
    )
    physical_cores: int = Field(
        default=1,
        description='Number of physical CPU cores'
    )
    python_version: str = Field(
        default='Python version not detected',
        description='Version of the interpreter running the engine'
    )
    numpy_version: str = Field(
        default='Numpy version not detected',
        description='Version of numpy, pins the bit generator implementation'
    )

    @staticmethod
    def discover() -> "HostInfo":
        """
        Discovery of the capabilities of the machine running the engine
        """
        res = HostInfo()
        res.ram = virtual_memory().total / (1024.0 ** 3)
        res.cpu_cores = cpu_count() or 1
        res.physical_cores = physical_cpu_count(logical=False) or res.cpu_cores
        res.python_version = python_version()
        res.numpy_version = np.__version__
        return res

    def default_workers(self, replications: int) -> int:
        return max(1, min(self.physical_cores, replications))
