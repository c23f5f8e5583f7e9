import os
import sys

import pytest

from paretonas import build_search_space, preset_chromosome

BRIDGE_SRC = os.path.join(os.path.dirname(__file__), os.pardir,
                          "bridge_client", "src")


@pytest.fixture(scope="session")
def space():
    return build_search_space()


@pytest.fixture(scope="session")
def baseline():
    return preset_chromosome("baseline")


@pytest.fixture(scope="session")
def nasc_net():
    return preset_chromosome("nasc-net")


@pytest.fixture
def bridge_env(monkeypatch):
    """Make the reference worker importable by spawned interpreters even when
    the bridge-client package is not installed."""
    path = os.path.abspath(BRIDGE_SRC)
    existing = os.environ.get("PYTHONPATH", "")
    combined = path + (os.pathsep + existing if existing else "")
    monkeypatch.setenv("PYTHONPATH", combined)
    return f"{sys.executable} -m paretonas_bridge_client"
