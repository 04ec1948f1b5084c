import sys

import numpy as np
import pytest

from rhodec.mav import build_mav_domain


@pytest.fixture(scope="session")
def mav_model():
    return build_mav_domain()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def acceptance_report(criterion, passed, detail=""):
    """One visible pass/fail line per acceptance criterion, bypassing
    pytest's capture so the lines always show up in the run log."""
    status = "PASS" if passed else "FAIL"
    sys.__stdout__.write(f"[ACCEPTANCE] criterion {criterion}: {status} {detail}\n")
    sys.__stdout__.flush()
    assert passed, f"acceptance criterion {criterion} failed: {detail}"
