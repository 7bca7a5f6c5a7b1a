import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from aoi_lab.instance import Instance
from aoi_lab.scenario import EnvParams, GroundCluster, Scenario, UavParams, build_grids, generate_scenario

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture
def env():
    return EnvParams()


@pytest.fixture
def uav():
    return UavParams()


def small_instance(seed, m, l_sub=2, **kw):
    sc = generate_scenario(seed, m, **kw)
    return Instance(sc, build_grids(sc, l_sub=l_sub))


def hand_scenario(chs, counts, env=None):
    env = env or EnvParams()
    clusters = tuple(GroundCluster(tuple(map(float, c)), int(n)) for c, n in zip(chs, counts))
    return Scenario(start=(0.0, 0.0, env.altitude), clusters=clusters, env=env, uav=UavParams(), seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, with the recorded measurements."""
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py::test_criterion_" not in getattr(rep, "nodeid", "") or rep.when != "call":
                continue
            num = rep.nodeid.split("test_criterion_")[1].split("_")[0]
            detail = ", ".join(f"{k}={v}" for k, v in rep.user_properties)
            lines.append((int(num), f"criterion {num}: {outcome.upper()[:4]}  {detail}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
