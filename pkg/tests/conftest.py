import pytest

from gaugeline.potentials import SystemConfig, TimeGridSpec, build_time_grid, trajectory_scan, ALL_GAUGES

# Lines collected by the acceptance module, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def cfg():
    return SystemConfig()


@pytest.fixture(scope="session")
def default_scans(cfg):
    t = build_time_grid(cfg)
    return {g: trajectory_scan(g, cfg, t) for g in ALL_GAUGES}


@pytest.fixture(scope="session")
def coarse_time():
    return TimeGridSpec(coarse_points=801, refine_factor=20)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
