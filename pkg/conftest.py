import math
import os
import sys

import pytest

project_root = os.path.dirname(os.path.abspath(__file__))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from core.protocol import ProtocolConfig, TimeBinQubit


@pytest.fixture
def complex_qubit():
    return TimeBinQubit(0.6, 0.8j)


@pytest.fixture
def balanced_qubit():
    return TimeBinQubit(1 / math.sqrt(2), 1 / math.sqrt(2))


@pytest.fixture
def cfg3(complex_qubit):
    return ProtocolConfig(3, 0.25, 0.6, complex_qubit)
