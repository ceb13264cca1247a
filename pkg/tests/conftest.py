from pathlib import Path

import pytest

from tmkit.cases import cases_root, load_case


@pytest.fixture(scope="session")
def corpus():
    return Path(cases_root())


@pytest.fixture(scope="session")
def case():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = load_case(name)
        return cache[name]

    return get


def pytest_configure(config):
    import sys

    sys.path.insert(0, str(Path(__file__).parent))
