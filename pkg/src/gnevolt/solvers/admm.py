"""Distributed ADMM-based equilibrium learning.

Per-bus form
------------
Each iteration consists of four neighbor exchanges inside every active area:

1. ``dv = v - v_meas``           -> ``r_j = sum_i Bt_ji dv_i + theta_j / rho``
2. ``r``                         -> ``g_j = sum_i Bt_ij r_i`` and the v-step
3. ``v_new - v_meas``            -> ``a_j`` and the q-step (``Sol_j``)
4. ``v_new - v_meas_new``        -> theta-step, after the new q is injected

Phases 1-2 realize the ``Bt_kk^T Bt_kk`` product with one-hop messages;
phases 3-4 are the row sums inside the q- and theta-steps. The cross-area
coupling never travels over a link: it is read back from the voltage
measurement ``v_meas`` of the physical grid.

Compact form
------------
:func:`run_admm_compact` runs the same recursion in matrix form with exact
power flow and is used as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..comms import LocalityAudit, UpdateSchedule, async_tick, exchange_round
from ..errors import DomainError, LocalityViolation
from ..game import natural_residual
from ..trace import ConvergenceTrace
from .common import Monitor, divergence_bound, diverged, sol_scalar, sol_vector


@dataclass
class AdmmConfig:
    """Parameters of the ADMM learner.

    ``stop`` selects the termination rule: ``"residual"`` (natural residual
    below ``tol`` and theta increments below ``theta_tol``), ``"reference"``
    (``||q - q_ref|| <= target``) or ``"none"`` (run ``max_iter`` steps).
    ``v_update="printed"`` swaps the exact v-step minimizer for the
    closed-form recursion with denominator ``gamma (1 + beta)``; it exists
    to demonstrate that the two disagree.
    """

    rho: float
    beta: float
    max_iter: int = 20_000
    tol: float = 1e-10
    theta_tol: float = 1e-10
    root_find_tol: float = 1e-12
    stop: str = "residual"
    target: float = 1e-8
    v_update: str = "exact"
    record_every: int = 1
    track_ergodic: bool = False
    keep_iterates: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.rho > 0 or not self.beta > 0:
            raise DomainError("rho and beta must be positive")
        if not (self.tol > 0 and self.root_find_tol > 0 and self.theta_tol > 0):
            raise DomainError("tolerances must be positive")
        if self.stop not in ("residual", "reference", "none"):
            raise DomainError(f"unknown stop rule {self.stop!r}")
        if self.v_update not in ("exact", "printed"):
            raise DomainError(f"unknown v_update {self.v_update!r}")


def local_rows(btilde, graph) -> tuple:
    """Row ``j`` of ``Btilde`` as ``((i, Bt_ji), ...)`` over ``j``'s closed neighborhood.

    Raises ``LocalityViolation`` if ``Btilde`` couples buses that share no
    communication link.
    """
    if not graph.supports(btilde):
        raise LocalityViolation("Btilde has entries outside the communication graph")
    rows = []
    for j in range(graph.n):
        nb = sorted(graph.closed_neighborhood(j))
        rows.append(tuple((i, float(btilde[j, i])) for i in nb if btilde[j, i] != 0.0))
    return tuple(rows)


# ---------------------------------------------------------------- per-bus steps

def admm_residual_per_bus(j, view, rows, rho) -> float:
    """Phase 1: ``r_j = sum_i Bt_ji (v_i - v_meas_i) + theta_j / rho``."""
    return view.row_sum("dv", rows[j]) + view.get("theta", j) / rho


def admm_vupdate_per_bus(j, view, rows, gamma, mu_j, config: AdmmConfig) -> float:
    """Exact minimizer of the linearized v-step at bus ``j``.

    ``(gamma + beta) v_j = gamma mu_j - rho g_j + beta v_j^(t)`` with
    ``g_j = sum_i Bt_ij r_i`` taken from the phase-2 view.
    """
    rho, beta = config.rho, config.beta
    v_old = view.get("v", j)
    if config.v_update == "printed":
        s = sum(b * (2 * view.get("theta", i) - view.get("theta_prev", i)) for i, b in rows[j])
        return (gamma * mu_j - s + beta * v_old) / (gamma * (1 + beta))
    g = view.row_sum("r", rows[j])
    return (gamma * mu_j - rho * g + beta * v_old) / (gamma + beta)


def admm_qupdate_per_bus(j, view, rows, cost_j, lo, hi, config: AdmmConfig):
    """``Sol_j``: projected root of ``C_j'(q) + rho (q - a_j)``.

    ``a_j = q_j + sum_i Bt_ji (v_i^(t+1) - v_meas_i^(t)) + theta_j / rho``.

    Returns
    -------
    q_new, a_j
    """
    rho = config.rho
    a = view.get("q", j) + view.row_sum("dv_half", rows[j]) + view.get("theta", j) / rho
    return sol_scalar(cost_j, rho, a, lo, hi, config.root_find_tol), a


def admm_thetaupdate_per_bus(j, view, rows, rho) -> float:
    """``theta_j += rho sum_i Bt_ji (v_i^(t+1) - v_meas_i^(t+1))``."""
    return view.get("theta", j) + rho * view.row_sum("dv_new", rows[j])


# ------------------------------------------------------------------ drivers

def _initial_state(sc, init):
    if init is None:
        q = np.zeros(sc.N)
    else:
        q = np.asarray(getattr(init, "q", init), dtype=float)
    q = sc.limits.project(q)
    v = sc.model.solve(q + sc.model.w)
    theta = np.zeros(sc.N)
    if init is not None and hasattr(init, "v"):
        v = np.asarray(init.v, dtype=float).copy()
        theta = np.asarray(init.theta, dtype=float).copy()
    return v, q, theta


def _should_stop(config, mon, q, nat, dtheta):
    if config.stop == "reference":
        return mon.dist_ref(q) <= config.target
    if config.stop == "residual":
        return nat <= config.tol and dtheta <= config.theta_tol
    return False


def run_admm(scenario, config: AdmmConfig, schedule: UpdateSchedule | None = None,
             reference=None, optimum=None, init=None, bus_order=None) -> ConvergenceTrace:
    """Per-bus ADMM equilibrium learning over the scenario's comm graph.

    Parameters
    ----------
    scenario : Scenario
    config : AdmmConfig
    schedule : UpdateSchedule, optional
        Defaults to the scenario's schedule.
    reference, optimum : array or solution object, optional
        Used only by the monitor (distances in the trace) and by
        ``stop="reference"``.
    init : array or PrimalDualPoint, optional
        Initial ``q`` (cold start ``q = 0`` by default; ``v`` is then the
        measured voltage and ``theta = 0``).
    bus_order : sequence of int, optional
        Order in which buses compute within a phase. Results do not depend
        on it (snapshot semantics).
    """
    sc = scenario
    schedule = sc.schedule if schedule is None else schedule
    if config.stop == "reference" and reference is None:
        raise DomainError("stop='reference' requires a reference solution")
    graph = sc.graph
    rows = local_rows(sc.decomp.btilde, graph)
    audit = LocalityAudit()
    mon = Monitor(sc, reference, optimum, config.record_every)
    gamma, mu = sc.costs.gamma, sc.costs.mu
    lo, hi = sc.limits.lower, sc.limits.upper
    K = sc.partition.K
    labels = sc.partition.labels(sc.N)
    order = list(range(sc.N)) if bus_order is None else list(bus_order)
    bound = divergence_bound(sc.limits)

    v, q, theta = _initial_state(sc, init)
    theta_prev = theta.copy()
    trace = ConvergenceTrace("admm", {"rho": config.rho, "beta": config.beta,
                                      "schedule": schedule.mode, "T": schedule.T,
                                      "seed": schedule.seed, "v_update": config.v_update})
    trace.omega0 = np.concatenate([v, q, theta])
    ergo_sum = np.zeros(3 * sc.N)
    if config.keep_iterates:
        trace.iterates.append(trace.omega0.copy())
    trace.append(mon.record(0, q, 0))

    for t in range(config.max_iter):
        active_areas = async_tick(schedule, t, K)
        active = order if len(active_areas) == K else \
            [j for j in order if labels[j] in active_areas]
        v_meas = sc.model.solve(q + sc.model.w)

        views = exchange_round({"dv": v - v_meas, "theta": theta}, graph, audit, active)
        r = np.zeros(sc.N)
        for j in active:
            r[j] = admm_residual_per_bus(j, views[j], rows, config.rho)

        snap = {"r": r, "v": v}
        if config.v_update == "printed":
            snap.update(theta=theta, theta_prev=theta_prev)
        views = exchange_round(snap, graph, audit, active)
        v_new = v.copy()
        for j in active:
            v_new[j] = admm_vupdate_per_bus(j, views[j], rows, gamma, mu[j], config)

        views = exchange_round({"dv_half": v_new - v_meas, "q": q, "theta": theta},
                               graph, audit, active)
        q_new = q.copy()
        a = np.zeros(sc.N)
        for j in active:
            q_new[j], a[j] = admm_qupdate_per_bus(j, views[j], rows, sc.costs.bus_costs[j],
                                                  lo[j], hi[j], config)

        v_meas_new = sc.model.solve(q_new + sc.model.w)
        views = exchange_round({"dv_new": v_new - v_meas_new, "theta": theta},
                               graph, audit, active)
        theta_new = theta.copy()
        for j in active:
            theta_new[j] = admm_thetaupdate_per_bus(j, views[j], rows, config.rho)

        if config.track_ergodic or config.keep_iterates:
            theta_aux = config.rho * (a - q)   # equals theta + rho Bt (v_new - v_meas)
            omega_aux = np.concatenate([v_new, q_new, theta_aux])
            if config.track_ergodic:
                ergo_sum += omega_aux
                trace.ergodic.append((t, ergo_sum / (t + 1)))
            if config.keep_iterates:
                trace.aux_iterates.append(omega_aux)

        dtheta = float(np.max(np.abs(theta_new - theta)))
        theta_prev, theta = theta, theta_new
        v, q = v_new, q_new
        if config.keep_iterates:
            trace.iterates.append(np.concatenate([v, q, theta]))

        if diverged(bound, q, v - mu, theta):
            trace.status = "diverged"
            trace.iterations = t + 1
            trace.append(mon.record(t + 1, sc.limits.project(np.nan_to_num(q)),
                                    len(audit.violations)))
            break
        nat = None
        if config.stop == "residual":
            nat = natural_residual(q, sc.model, sc.costs, sc.limits, sc.decomp)
        done = _should_stop(config, mon, q, nat, dtheta)
        if mon.due(t + 1, final=done or t + 1 == config.max_iter):
            trace.append(mon.record(t + 1, q, len(audit.violations)))
        if done:
            trace.converged = True
            trace.status = "converged"
            trace.iterations = t + 1
            break
    else:
        trace.iterations = config.max_iter
    trace.v, trace.q, trace.theta = v, q, theta
    trace.audit = audit.summary()
    trace.notes["audit"] = audit
    return trace


def run_admm_compact(scenario, config: AdmmConfig, reference=None, optimum=None,
                     init=None) -> ConvergenceTrace:
    """Matrix-form recursion with exact power flow in place of measurements.

    Each primal step is solved as a generic quadratic program: the v-step
    by a dense linear solve of its stationarity system, the q-step (box
    constrained, separable) by ``Sol_j`` on each coordinate.
    """
    sc = scenario
    if config.stop == "reference" and reference is None:
        raise DomainError("stop='reference' requires a reference solution")
    n = sc.N
    Bt = np.asarray(sc.decomp.btilde)
    rho, beta, gamma, mu = config.rho, config.beta, sc.costs.gamma, sc.costs.mu
    I = np.eye(n)
    BtB = Bt.T @ Bt
    prox = beta * I - rho * BtB
    hess_v = gamma * I + prox + rho * BtB
    Binv_w = sc.model.solve(sc.model.w)
    mon = Monitor(sc, reference, optimum, config.record_every)
    bound = divergence_bound(sc.limits)

    v, q, theta = _initial_state(sc, init)
    trace = ConvergenceTrace("admm_compact", {"rho": rho, "beta": beta})
    trace.omega0 = np.concatenate([v, q, theta])
    if config.keep_iterates:
        trace.iterates.append(trace.omega0.copy())
    ergo_sum = np.zeros(3 * n)
    trace.append(mon.record(0, q, 0))

    for t in range(config.max_iter):
        Binv_q = sc.model.solve(q)
        # v-step: gamma (v - mu) + prox (v - v^t) + rho Bt^T (Bt v - Bt B^-1 q - Bt B^-1 w + theta/rho) = 0
        rhs = gamma * mu + prox @ v + rho * Bt.T @ (Bt @ Binv_q + Bt @ Binv_w - theta / rho)
        v_new = np.linalg.solve(hess_v, rhs)
        a = Bt @ v_new + (q - Bt @ Binv_q) - Bt @ Binv_w + theta / rho
        q_new = sol_vector(sc.costs, rho, a, sc.limits, config.root_find_tol)
        theta_aux = theta + rho * Bt @ (v_new - Binv_q - Binv_w)
        theta_new = theta + rho * Bt @ (v_new - sc.model.solve(q_new) - Binv_w)

        omega_aux = np.concatenate([v_new, q_new, theta_aux])
        if config.track_ergodic:
            ergo_sum += omega_aux
            trace.ergodic.append((t, ergo_sum / (t + 1)))
        if config.keep_iterates:
            trace.aux_iterates.append(omega_aux)
        dtheta = float(np.max(np.abs(theta_new - theta)))
        v, q, theta = v_new, q_new, theta_new
        if config.keep_iterates:
            trace.iterates.append(np.concatenate([v, q, theta]))
        if diverged(bound, q, v - mu, theta):
            trace.status = "diverged"
            trace.iterations = t + 1
            break
        nat = None
        if config.stop == "residual":
            nat = natural_residual(q, sc.model, sc.costs, sc.limits, sc.decomp)
        done = _should_stop(config, mon, q, nat, dtheta)
        if mon.due(t + 1, final=done or t + 1 == config.max_iter):
            trace.append(mon.record(t + 1, q, 0))
        if done:
            trace.converged = True
            trace.status = "converged"
            trace.iterations = t + 1
            break
    else:
        trace.iterations = config.max_iter
    trace.v, trace.q, trace.theta = v, q, theta
    return trace


def default_beta(scenario, rho: float, factor: float = 1.0) -> float:
    """``factor * rho * ||Btilde^T Btilde||_2``."""
    Bt = np.asarray(scenario.decomp.btilde)
    return factor * rho * float(np.linalg.norm(Bt.T @ Bt, 2))
