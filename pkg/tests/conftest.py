import pytest

from hardsum import make_avg_c, make_avg_sc, make_c, make_nc, make_one_d, make_sc


def small_instances():
    return {
        "SC": make_sc(100.0, 1.0, 5, 1.0, 1e-4),
        "AVG_SC": make_avg_sc(30.0, 1.0, 5, 1.0, 1e-5),
        "C": make_c(1.0, 1.0, 4, 1e-5),
        "AVG_C": make_avg_c(2.0, 1.0, 4, 2e-4),
        "ONE_D": make_one_d(1.0, 1.0, 6),
        "NC": make_nc(1.0, 0.5, 4, 15.0, 1e-3),
    }


@pytest.fixture(scope="session")
def instances():
    return small_instances()


@pytest.fixture(params=["SC", "AVG_SC", "C", "AVG_C", "ONE_D", "NC"])
def inst(request, instances):
    return instances[request.param]


@pytest.fixture(params=["SC", "AVG_SC", "C", "AVG_C", "ONE_D"])
def convex_inst(request, instances):
    return instances[request.param]


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
