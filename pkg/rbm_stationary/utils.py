from hashlib import sha256
from os.path import dirname
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence
import csv
import json
import logging

import numpy as np

from rbm_stationary.constants import FORMAT_VERSION, LOG_LEVEL

__all__ = [
    "build_metadata",
    "canonical_hash",
    "read_csv_metadata",
    "read_csv_rows",
    "safe_init_logging",
    "write_csv",
    "write_json",
]

LOG_FORMAT = "%(asctime)s.%(msecs)03d %(levelname)s %(name)s - %(message)s"
LOG_DATEFMT = "%H:%M:%S"

logging_initialized = False


def safe_init_logging(log_level: str = None) -> None:
    """
    wrapper around logging.basicConfig. It assures that the root logger is only configured
    once. This function may be called multiple times
    """
    global logging_initialized
    if not logging_initialized:
        logging_initialized = True
        logging.basicConfig(
            level=logging.getLevelName(log_level or LOG_LEVEL),
            format=LOG_FORMAT,
            datefmt=LOG_DATEFMT,
        )


def canonical_hash(payload: Dict[str, Any]) -> str:
    """
    First 16 hex chars of the SHA-256 of the canonical (sorted keys, compact) JSON dump
    """
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return sha256(text.encode("utf-8")).hexdigest()[:16]


def build_metadata(config_hash: str, seed: int) -> Dict[str, Any]:
    # Imported here, the package __init__ imports modules that import utils
    from rbm_stationary import __version__
    from rbm_stationary.noise import BIT_GENERATOR

    return {
        "format_version": FORMAT_VERSION,
        "config_hash": config_hash,
        "seed": seed,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "bit_generator": BIT_GENERATOR,
    }


def write_json(path: str, payload: Dict[str, Any], metadata: Dict[str, Any] = None) -> str:
    Path(dirname(path)).mkdir(parents=True, exist_ok=True)
    document = dict(payload)
    if metadata is not None:
        document = {"metadata": metadata, **document}
    with open(path, "w") as fout:
        json.dump(document, fout, indent=2, sort_keys=False)
        fout.write("\n")
    return path


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Sequence[Any]],
              metadata: Dict[str, Any] = None) -> str:
    """
    Writes a CSV file whose first lines are `# key: value` metadata comments.

    Floats are written with repr() so that re-reading reproduces them bitwise.
    """
    Path(dirname(path)).mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fout:
        for key, value in (metadata or {}).items():
            fout.write(f"# {key}: {value}\n")
        writer = csv.writer(fout)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def read_csv_metadata(path: str) -> Dict[str, str]:
    metadata = {}
    with open(path) as fin:
        for line in fin:
            if not line.startswith("# "):
                break
            key, _, value = line[2:].rstrip("\n").partition(": ")
            metadata[key] = value
    return metadata


def read_csv_rows(path: str) -> List[Dict[str, str]]:
    with open(path) as fin:
        lines = [line for line in fin if not line.startswith("#")]
    return list(csv.DictReader(lines))
