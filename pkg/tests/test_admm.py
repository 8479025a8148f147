import numpy as np
import pytest
from scipy.optimize import brentq, minimize

from gnevolt import load_bundled
from gnevolt.comms import LocalityAudit, UpdateSchedule, exchange_round
from gnevolt.costs import CostModel, LogCoshCost, QuadraticCost, QuarticCost
from gnevolt.errors import DomainError
from gnevolt.game import CommPartition
from gnevolt.runner import solver_settings
from gnevolt.solvers import (AdmmConfig, admm_qupdate_per_bus, admm_residual_per_bus,
                             admm_thetaupdate_per_bus, admm_vupdate_per_bus, default_beta,
                             local_rows, run_admm, run_admm_compact, sol_scalar,
                             solve_global_optimum, solve_reference_gne, theorem2_parameters)

from conftest import chain2_scenario


def views_for(sc, **fields):
    return exchange_round(fields, sc.graph, LocalityAudit())


def tuned_config(sc, **kw):
    s = solver_settings(sc, "admm")
    return AdmmConfig(rho=s["rho"], beta=default_beta(sc, s["rho"], s.get("beta_factor", 1.0)), **kw)


# ---------------------------------------------------------------- v-step

def test_vupdate_stationary():
    sc = chain2_scenario()
    rows = local_rows(sc.decomp.btilde, sc.graph)
    cfg = AdmmConfig(rho=1.0, beta=7.0)
    views = views_for(sc, r=np.zeros(2), v=sc.costs.mu)
    for j in range(2):
        assert admm_vupdate_per_bus(j, views[j], rows, 1.0, sc.costs.mu[j], cfg) == sc.costs.mu[j]


def test_vupdate_large_beta_limit():
    sc = chain2_scenario()
    rows = local_rows(sc.decomp.btilde, sc.graph)
    v = np.array([0.93, 1.07])
    views = views_for(sc, r=np.array([0.4, -0.2]), v=v)
    cfg = AdmmConfig(rho=1.0, beta=1e12)
    for j in range(2):
        assert admm_vupdate_per_bus(j, views[j], rows, 1.0, 1.0, cfg) == pytest.approx(v[j], abs=1e-11)


def test_vupdate_matches_generic_minimizer():
    sc = chain2_scenario()
    Bt = sc.decomp.btilde
    rows = local_rows(Bt, sc.graph)
    gamma, beta, rho = 1.0, 7.0, 1.0
    cfg = AdmmConfig(rho=rho, beta=beta)
    v, q, th = np.array([0.97, 1.04]), np.array([0.1, -0.3]), np.array([0.05, 0.2])
    v_meas = sc.model.solve(q + sc.model.w)
    w_check = Bt @ v_meas - q

    # linearized v-subproblem: f(v) + rho g^T v + beta/2 ||v - v^t||^2
    g = Bt.T @ (Bt @ v - q - w_check + th / rho)
    obj = lambda x: 0.5 * gamma * np.sum((x - sc.costs.mu) ** 2) + rho * g @ x \
        + 0.5 * beta * np.sum((x - v) ** 2)       # noqa: E731
    v_star = minimize(obj, v, method="BFGS", options={"gtol": 1e-12}).x

    views = views_for(sc, dv=v - v_meas, theta=th)
    r = np.array([admm_residual_per_bus(j, views[j], rows, rho) for j in range(2)])
    views = views_for(sc, r=r, v=v)
    got = np.array([admm_vupdate_per_bus(j, views[j], rows, gamma, 1.0, cfg) for j in range(2)])
    np.testing.assert_allclose(got, v_star, atol=1e-8)


def test_printed_vupdate_differs():
    sc = chain2_scenario()
    rows = local_rows(sc.decomp.btilde, sc.graph)
    views = views_for(sc, r=np.array([0.4, -0.2]), v=np.array([0.9, 1.1]),
                      theta=np.array([0.3, 0.1]), theta_prev=np.array([0.1, -0.2]))
    exact = admm_vupdate_per_bus(0, views[0], rows, 2.0, 1.0, AdmmConfig(rho=1.0, beta=3.0))
    printed = admm_vupdate_per_bus(0, views[0], rows, 2.0, 1.0,
                                   AdmmConfig(rho=1.0, beta=3.0, v_update="printed"))
    assert exact != pytest.approx(printed)


# ---------------------------------------------------------------- q-step (Sol_j)

def test_sol_examples():
    assert sol_scalar(QuadraticCost(0.0), 1.0, 0.3, -0.8, 0.8) == 0.3
    assert sol_scalar(QuadraticCost(0.0), 1.0, 2.0, -0.8, 0.8) == 0.8
    assert sol_scalar(QuadraticCost(0.0), 1.0, -2.0, -0.8, 0.8) == -0.8
    assert sol_scalar(QuadraticCost(1e-4), 1.0, 0.5, -0.8, 0.8) == pytest.approx(0.5 / (1 + 1e-4),
                                                                                  rel=1e-15)
    assert 0.5 / (1 + 1e-4) == pytest.approx(0.49995, abs=1e-8)


@pytest.mark.parametrize("cost", [QuarticCost(0.1, 3.0), LogCoshCost(0.4, 0.02)], ids=["quartic", "logcosh"])
@pytest.mark.parametrize("a", [-3.0, -0.4, 0.0, 0.25, 5.0])
def test_sol_bisection_vs_brentq(cost, a):
    rho, lo, hi = 0.7, -0.8, 0.8
    f = lambda q: float(cost.derivative(q)) + rho * (q - a)   # noqa: E731
    root = brentq(f, -50, 50, xtol=1e-15)
    expect = min(max(root, lo), hi)
    assert sol_scalar(cost, rho, a, lo, hi, tol=1e-12) == pytest.approx(expect, abs=1e-11)


def test_sol_detects_nonmonotone():
    class Bad(QuarticCost):
        def derivative(self, q):
            return -5.0 * np.asarray(q)
    with pytest.raises(DomainError):
        sol_scalar(Bad(0.0, 0.0), 1.0, 0.0, -0.8, 0.8)


def test_qupdate_per_bus_returns_argument():
    sc = chain2_scenario(c=0.0)
    rows = local_rows(sc.decomp.btilde, sc.graph)
    cfg = AdmmConfig(rho=2.0, beta=1.0)
    views = views_for(sc, dv_half=np.array([0.01, -0.02]), q=np.array([0.1, 0.2]),
                      theta=np.array([0.2, 0.0]))
    qn, a = admm_qupdate_per_bus(0, views[0], rows, sc.costs.bus_costs[0], -0.8, 0.8, cfg)
    Bt = sc.decomp.btilde
    assert a == pytest.approx(0.1 + Bt[0] @ np.array([0.01, -0.02]) + 0.1, rel=1e-14)
    assert qn == pytest.approx(a)


# ---------------------------------------------------------------- theta-step

def test_theta_unchanged_when_decision_matches_physics():
    sc = chain2_scenario()
    rows = local_rows(sc.decomp.btilde, sc.graph)
    th = np.array([0.3, -0.1])
    views = views_for(sc, dv_new=np.zeros(2), theta=th)
    assert [admm_thetaupdate_per_bus(j, views[j], rows, 1.0) for j in range(2)] == list(th)


def test_theta_increment_linear_in_rho_and_matches_matrix():
    sc = chain2_scenario()
    Bt = sc.decomp.btilde
    rows = local_rows(Bt, sc.graph)
    th, dv = np.array([0.3, -0.1]), np.array([0.02, -0.05])
    views = views_for(sc, dv_new=dv, theta=th)
    inc1 = np.array([admm_thetaupdate_per_bus(j, views[j], rows, 1.0) for j in range(2)]) - th
    inc2 = np.array([admm_thetaupdate_per_bus(j, views[j], rows, 2.0) for j in range(2)]) - th
    np.testing.assert_allclose(inc2, 2 * inc1, rtol=1e-15)
    np.testing.assert_allclose(inc1, Bt @ dv, rtol=1e-15)


def test_theta_blockwise_on_split_chain():
    sc = chain2_scenario(partition=CommPartition(((1,), (2,))))
    Bt = sc.decomp.btilde
    rows = local_rows(Bt, sc.graph)
    th, dv = np.array([0.3, -0.1]), np.array([0.02, -0.05])
    views = views_for(sc, dv_new=dv, theta=th)
    got = np.array([admm_thetaupdate_per_bus(j, views[j], rows, 0.5) for j in range(2)])
    blockwise = np.concatenate([th[idx] + 0.5 * blk @ dv[idx]
                                for idx, blk in zip(sc.decomp.index, sc.decomp.blocks)])
    np.testing.assert_allclose(got, blockwise, rtol=1e-15)


# ---------------------------------------------------------------- full runs

def test_config_validation():
    with pytest.raises(DomainError):
        AdmmConfig(rho=0.0, beta=1.0)
    with pytest.raises(DomainError):
        AdmmConfig(rho=1.0, beta=1.0, stop="never")
    with pytest.raises(DomainError):
        AdmmConfig(rho=1.0, beta=1.0, v_update="guess")


def test_single_area_equals_optimum(chain2):
    opt = solve_global_optimum(chain2)
    tr = run_admm(chain2, tuned_config(chain2, tol=1e-13, theta_tol=1e-13))
    assert tr.converged
    assert np.linalg.norm(tr.q - opt.q) <= 1e-8


def test_split_chain_matches_oracle():
    sc = load_bundled("chain2_split")
    ref = solve_reference_gne(sc)
    tr = run_admm(sc, tuned_config(sc, stop="reference", target=1e-9), reference=ref)
    assert tr.converged and np.linalg.norm(tr.q - ref.q) <= 1e-8
    assert tr.audit["violations"] == 0


def test_ieee13_converges(ieee13, ieee13_ref):
    tr = run_admm(ieee13, tuned_config(ieee13, stop="reference", target=1e-8, record_every=100),
                  reference=ieee13_ref)
    assert tr.converged and tr.final.dist_to_ref <= 1e-8
    assert tr.audit["violations"] == 0
    assert tr.iterations <= 8440


@pytest.mark.parametrize("name", ["chain2", "tree8", "ieee13"])
def test_compact_equals_per_bus(name):
    sc = load_bundled(name)
    cfg = tuned_config(sc, stop="none", max_iter=100, keep_iterates=True)
    a = run_admm(sc, cfg)
    b = run_admm_compact(sc, cfg)
    diff = np.max(np.abs(np.array(a.iterates) - np.array(b.iterates)))
    assert diff <= 1e-10


def test_compact_first_step_dense_minimizer():
    sc = chain2_scenario()
    Bt, rho, beta, gamma = sc.decomp.btilde, 1.0, 7.0, 1.0
    cfg = AdmmConfig(rho=rho, beta=beta, stop="none", max_iter=1, keep_iterates=True)
    zero = np.zeros(2)

    class Init:
        v, q, theta = zero, zero, zero
    tr = run_admm_compact(sc, cfg, init=Init)
    Binv_w = sc.model.solve(sc.model.w)
    P = beta * np.eye(2) - rho * Bt.T @ Bt
    obj = lambda v: 0.5 * gamma * np.sum((v - sc.costs.mu) ** 2) \
        + 0.5 * rho * np.sum((Bt @ v - Bt @ Binv_w) ** 2) + 0.5 * v @ P @ v   # noqa: E731
    v_star = minimize(obj, np.ones(2), method="BFGS", options={"gtol": 1e-12}).x
    np.testing.assert_allclose(tr.iterates[1][:2], v_star, atol=1e-8)


@pytest.mark.parametrize("name", ["chain2", "radial12"])
def test_bookkeeping_identity(name):
    sc = load_bundled(name)
    cfg = tuned_config(sc, stop="none", max_iter=60, keep_iterates=True)
    tr = run_admm_compact(sc, cfg)
    rep = theorem2_parameters(sc.decomp, sc.model, cfg.rho, cfg.beta)
    for t, aux in enumerate(tr.aux_iterates):
        w_t, w_next = tr.iterates[t], tr.iterates[t + 1]
        pred = w_t - rep.M @ (w_t - aux)
        assert np.max(np.abs(pred - w_next)) <= 1e-12 * (1 + np.max(np.abs(w_next)))


def test_bus_order_does_not_matter(ieee13):
    cfg = tuned_config(ieee13, stop="none", max_iter=30, keep_iterates=True)
    order = np.random.default_rng(7).permutation(12)
    a = run_admm(ieee13, cfg)
    b = run_admm(ieee13, cfg, bus_order=order)
    np.testing.assert_array_equal(np.array(a.iterates), np.array(b.iterates))


def test_t1_schedule_matches_synchronous(ieee13):
    cfg = tuned_config(ieee13, stop="none", max_iter=50, keep_iterates=True)
    a = run_admm(ieee13, cfg, schedule=UpdateSchedule("synchronous"))
    b = run_admm(ieee13, cfg, schedule=UpdateSchedule("asynchronous", T=1, seed=5))
    np.testing.assert_array_equal(np.array(a.iterates), np.array(b.iterates))


def test_async_frozen_area_keeps_state(ieee13):
    sched = UpdateSchedule("asynchronous", T=5, seed=3)
    cfg = tuned_config(ieee13, stop="none", max_iter=20, keep_iterates=True)
    tr = run_admm(ieee13, cfg, schedule=sched)
    from gnevolt.comms import async_tick
    lab = ieee13.partition.labels(12)
    for t in range(20):
        active = async_tick(sched, t, 4)
        frozen = np.array([lab[j] not in active for j in range(12)])
        before, after = tr.iterates[t], tr.iterates[t + 1]
        for blk in range(3):
            sl = slice(12 * blk, 12 * blk + 12)
            np.testing.assert_array_equal(before[sl][frozen], after[sl][frozen])


def test_divergence_guard(ieee13):
    cfg = AdmmConfig(rho=10.0, beta=1e-3, max_iter=2000, stop="none")
    tr = run_admm_compact(ieee13, cfg)
    assert tr.status == "diverged" and not tr.converged


def test_stop_reference_needs_reference(chain2):
    with pytest.raises(DomainError):
        run_admm(chain2, AdmmConfig(rho=1.0, beta=7.0, stop="reference"))


def test_nonquadratic_admm_matches_fallback_reference():
    sc = chain2_scenario()
    costs = CostModel(1.0, np.ones(2), (QuarticCost(0.05, 1.0), LogCoshCost(0.02, 0.05)))
    from dataclasses import replace
    sc = replace(sc, costs=costs)
    ref = solve_reference_gne(sc)
    assert ref.method == "extragradient" and ref.residual <= 1e-10
    tr = run_admm(sc, AdmmConfig(rho=0.05, beta=default_beta(sc, 0.05), stop="reference",
                                 target=1e-8, max_iter=20000), reference=ref)
    assert tr.converged
