import random

import pytest
from hypothesis import HealthCheck, settings

from cpn_sem.model import (CpnLink, CpnNode, CpnTopology, LogicalLink, ServiceEntity,
                           ServiceFunction)

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_topology(cpus, links):
    """cpus: list of capacities; links: (u, v, bw) triples."""
    return CpnTopology([CpnNode(i, c, c) for i, c in enumerate(cpus)],
                       [CpnLink(u, v, b, b) for u, v, b in links])


def make_entity(demands, lls, eid=0, arrival=0.0, lifetime=1.0):
    return ServiceEntity(eid, [ServiceFunction(i, d) for i, d in enumerate(demands)],
                         [LogicalLink(u, v, b) for u, v, b in lls], arrival, lifetime)


@pytest.fixture
def triangle():
    return make_topology([10, 10, 10], [(0, 1, 10), (1, 2, 10), (0, 2, 10)])


@pytest.fixture
def rng():
    return random.Random(1234)


# filled by test_acceptance.report, echoed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
