from fractions import Fraction

import pytest

from etctest.estimator import OperatingCondition

# Operating conditions used for the exhaustive engine checks.
OC_GRID = [
    OperatingCondition(1, 1, "1/2"),
    OperatingCondition(1, 2, "1/2"),
    OperatingCondition(2, 1, "1/2"),
    OperatingCondition(1, 3, "3/10"),
    OperatingCondition(3, 1, "7/10"),
    OperatingCondition(1, 1, "1/4"),
]


@pytest.fixture
def sym_oc():
    return OperatingCondition(1, 1, Fraction(1, 2))


@pytest.fixture
def cost2_oc():
    return OperatingCondition(1, 2, Fraction(1, 2))
