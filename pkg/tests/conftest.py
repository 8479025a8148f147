import sys

import numpy as np
import pytest

from gnevolt import (CommPartition, CostModel, Edge, FeederTopology, GridModel, Scenario,
                     VarLimits, load_bundled)
from gnevolt.solvers import solve_global_optimum, solve_reference_gne

DESK = ("chain2", "chain2_split", "chain5_bounds", "tree8", "radial12")


def chain2_topology(x=1.0):
    return FeederTopology(2, (Edge(0, 1, x), Edge(1, 2, x)))


def chain2_scenario(partition=None, c=1e-4, gamma=1.0, mu=1.0, v_base=(1.05, 1.08),
                    lo=-0.8, hi=0.8):
    topo = chain2_topology()
    model = GridModel.from_topology(topo, v_base=np.array(v_base))
    costs = CostModel.quadratic(gamma, mu * np.ones(2), c)
    part = CommPartition.single(2) if partition is None else partition
    return Scenario.build(topo, model, costs, VarLimits.uniform(2, lo, hi), part, name="chain2")


@pytest.fixture(scope="session")
def ieee13():
    return load_bundled("ieee13")


@pytest.fixture(scope="session")
def ieee13_ref(ieee13):
    return solve_reference_gne(ieee13)


@pytest.fixture(scope="session")
def ieee13_opt(ieee13):
    return solve_global_optimum(ieee13)


@pytest.fixture(scope="session")
def chain2():
    return load_bundled("chain2")


@pytest.fixture(scope="session", params=DESK)
def desk(request):
    sc = load_bundled(request.param)
    return sc, solve_reference_gne(sc)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
