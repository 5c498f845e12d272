import numpy as np
import pytest

from mudlink import qam16, qpsk


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)


@pytest.fixture(params=["qpsk", "16qam"])
def constellation(request):
    return qpsk() if request.param == "qpsk" else qam16()
