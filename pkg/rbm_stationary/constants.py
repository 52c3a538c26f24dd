from os import getenv
from dotenv import load_dotenv

__all__ = [
    'BASE_DIR',
    'CHECKPOINT_EVERY',
    'FORMAT_VERSION',
    'LOG_LEVEL',
    'RUNS_ROUTER',
    'STUDIES_ROUTER',
    'THREADS',
]

# variables for local runs are read from .env in the working dir with `load_dotenv()`
load_dotenv()

# Root of everything the engine writes: run directories, checkpoints, studies
BASE_DIR: str = getenv("RBM_BASE_DIR", "/tmp/rbm-stationary-data")

# Routers are the folder names placed under the BASE_DIR
RUNS_ROUTER: str = getenv("RBM_RUNS_ROUTER", "runs")
STUDIES_ROUTER: str = getenv("RBM_STUDIES_ROUTER", "studies")

LOG_LEVEL: str = getenv("RBM_LOG_LEVEL", "INFO")

# Defaults for RunConfig fields, overridden by the config file and then by CLI flags
CHECKPOINT_EVERY: int = int(getenv("RBM_CHECKPOINT_EVERY", "1000000"))
THREADS: int = int(getenv("RBM_THREADS", "1"))

# Frozen column sets and record layouts belong to this version
FORMAT_VERSION: int = 1
