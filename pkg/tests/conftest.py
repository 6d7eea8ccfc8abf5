import sys

import pytest

from mesorealism.params import Flavor, MesonParams, get_params


@pytest.fixture(scope="session")
def kaon() -> MesonParams:
    return get_params("K0")


@pytest.fixture(scope="session")
def bs() -> MesonParams:
    return get_params("Bs")


@pytest.fixture(params=[Flavor.PARTICLE, Flavor.ANTIPARTICLE], ids=["particle", "antiparticle"])
def flavor(request) -> Flavor:
    return request.param


def pytest_terminal_summary(terminalreporter):
    lines = []
    for mod in list(sys.modules.values()):
        lines.extend(getattr(mod, "ACCEPTANCE_LINES", []))
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
