from __future__ import annotations

import numpy as np
import pytest

from beltrami_lab.grid import GridSpec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def spec256():
    return GridSpec(0j, 4.0, 256)


@pytest.fixture(scope="session")
def spec128():
    return GridSpec(0j, 4.0, 128)


@pytest.fixture(scope="session")
def spec64():
    return GridSpec(0j, 4.0, 64)


@pytest.fixture(scope="session")
def standard256():
    from beltrami_lab.variation import standard_family

    return standard_family(256)


@pytest.fixture(scope="session")
def standard128():
    from beltrami_lab.variation import standard_family

    return standard_family(128)
