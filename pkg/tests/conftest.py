import os
import shutil
import pytest

from .constants import RUNS_DIR, STUDIES_DIR

pytest_plugins = [
    "tests.fixtures.fixtures_measure",
    "tests.fixtures.fixtures_problem",
    "tests.fixtures.fixtures_run",
]


@pytest.fixture(scope="session", autouse=True)
def do_before_all_tests():
    shutil.rmtree(RUNS_DIR, ignore_errors=True)
    os.makedirs(RUNS_DIR)
    shutil.rmtree(STUDIES_DIR, ignore_errors=True)
    os.makedirs(STUDIES_DIR)
