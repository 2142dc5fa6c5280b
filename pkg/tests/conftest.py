import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from spincorr.model import Couplings, EffectiveParams

settings.register_profile(
    "default", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

energies = st.floats(0.0, 5.0, allow_nan=False, allow_infinity=False)
signed = st.floats(-5.0, 5.0, allow_nan=False, allow_infinity=False)
# log-uniform temperature in [0.05, 50]
temps = st.floats(math.log(0.05), math.log(50.0)).map(math.exp)


@st.composite
def eff_params(draw, jz=signed):
    return EffectiveParams(draw(jz), draw(energies), draw(energies))


@st.composite
def couplings(draw):
    return Couplings(draw(signed), draw(signed), draw(signed), draw(signed), draw(signed))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one PASS/FAIL line per acceptance criterion, shown at the end of every run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
