"""Shared fixtures.

NUMBA_NUM_THREADS is pinned to 8 before anything imports numba so the
thread-count determinism tests can call set_num_threads(1..8) even on a
single-CPU machine.
"""

import os

os.environ.setdefault("NUMBA_NUM_THREADS", "8")

import pytest

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")
GOLDEN_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "golden")


@pytest.fixture(scope="session")
def data_dir():
    return DATA_DIR


@pytest.fixture(scope="session")
def golden_dir():
    return GOLDEN_DIR


@pytest.fixture(scope="session")
def config_path():
    return os.path.join(DATA_DIR, "config.json")


@pytest.fixture(scope="session")
def golden_matrix(golden_dir):
    from innoscape.model import read_matrix

    return read_matrix(
        os.path.join(golden_dir, "matrix.tsv"),
        os.path.join(golden_dir, "matrix.mask.tsv"),
    )


@pytest.fixture(scope="session")
def pipeline_out(tmp_path_factory, config_path):
    """One full CLI run shared by the tests that inspect its outputs."""
    from innoscape import cli

    out = tmp_path_factory.mktemp("pipeline")
    env_before = os.environ.get("SOURCE_DATE_EPOCH")
    os.environ["SOURCE_DATE_EPOCH"] = "1471219200"
    try:
        rc = cli.main([
            "run", "--config", config_path, "--out", str(out),
        ])
    finally:
        if env_before is None:
            os.environ.pop("SOURCE_DATE_EPOCH", None)
        else:
            os.environ["SOURCE_DATE_EPOCH"] = env_before
    assert rc == 0
    return out
