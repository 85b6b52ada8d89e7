import math

import pytest

from coupledcavity.geometry import CavityGeometry

# hand-evaluated reference values for R=1, r=0.2, l=0.5, a=1 mm
M_REF = 2.5 + math.sqrt(2.5 ** 2 - 1.0)
LAMBDA_T20 = 1.5052274702870685e-06

_acceptance = {}


def record_acceptance(criterion: int, ok: bool, detail: str):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    _acceptance[criterion] = line
    print(line)
    return ok


@pytest.fixture(scope="session")
def acceptance_log():
    return record_acceptance


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_acceptance):
        terminalreporter.write_line(_acceptance[k])


@pytest.fixture(scope="session")
def g0():
    return CavityGeometry(R=1.0, r=0.2, l=0.5, a=1e-3, lambda_=5e-7)


@pytest.fixture(scope="session")
def g20():
    """Same cavity with the wavelength tuned to t = 20."""
    return CavityGeometry(R=1.0, r=0.2, l=0.5, a=1e-3, lambda_=LAMBDA_T20)
