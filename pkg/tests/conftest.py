import os
import sys

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

from phaseshock.eos_core import HYDROGEN, REDUCED_VDW, critical_point, vdw_spec  # noqa: E402

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def reduced():
    return vdw_spec(REDUCED_VDW)


@pytest.fixture(scope="session")
def hydrogen():
    return vdw_spec(HYDROGEN)


@pytest.fixture(scope="session")
def hydrogen_cp(hydrogen):
    return critical_point(hydrogen)
