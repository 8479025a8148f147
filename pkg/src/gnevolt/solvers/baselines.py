"""Baselines: extra-gradient on the primal-dual VI, projected gradient-play on
the reduced VI, and the centralized optimum of the voltage control problem."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..comms import LocalityAudit
from ..errors import DomainError, LocalityViolation
from ..game import global_objective, natural_residual, phi, phi_jacobian
from ..trace import ConvergenceTrace
from .common import Monitor, divergence_bound, diverged


@dataclass
class IterConfig:
    """Shared knobs of the fixed-step baselines (see ``AdmmConfig`` for ``stop``)."""

    max_iter: int = 100_000
    tol: float = 1e-10
    stop: str = "residual"
    target: float = 1e-8
    record_every: int = 1
    rho: float = 1.0          # extra-gradient only: scaling of the theta block of F

    def __post_init__(self):
        if self.stop not in ("residual", "reference", "none"):
            raise DomainError(f"unknown stop rule {self.stop!r}")
        if not self.rho > 0:
            raise DomainError("rho must be positive")


def _stop(config, mon, q, nat):
    if config.stop == "reference":
        return mon.dist_ref(q) <= config.target
    if config.stop == "residual":
        return nat <= config.tol
    return False


def run_extragradient(scenario, alpha: float, config: IterConfig | None = None,
                      reference=None, optimum=None, init=None) -> ConvergenceTrace:
    """Korpelevich extra-gradient on ``VI(Omega, F)``.

    ``omega_hat = P[omega - alpha F(omega)]``, ``omega+ = P[omega - alpha F(omega_hat)]``,
    where the projection clamps the ``q`` block only. Every evaluation of
    ``F`` multiplies by ``Btilde`` (neighbor-only) and reads the grid
    measurement at the current ``q``; the locality audit verifies the
    sparsity once and counts one read per nonzero per product.
    """
    config = IterConfig() if config is None else config
    if not alpha > 0:
        raise DomainError("step alpha must be positive")
    if config.stop == "reference" and reference is None:
        raise DomainError("stop='reference' requires a reference solution")
    sc = scenario
    Bt = np.asarray(sc.decomp.btilde)
    audit = LocalityAudit()
    if not sc.graph.supports(Bt):
        audit.violation(-1, -1, "Btilde support")
        raise LocalityViolation("Btilde has entries outside the communication graph")
    nnz = int(np.count_nonzero(Bt))
    gamma, mu = sc.costs.gamma, sc.costs.mu
    rho = config.rho
    lo, hi = sc.limits.lower, sc.limits.upper
    solve, w = sc.model.solve, sc.model.w
    grad = sc.costs.gradient
    mon = Monitor(sc, reference, optimum, config.record_every)
    bound = divergence_bound(sc.limits)

    if init is not None and hasattr(init, "v"):
        v, q, th = (np.asarray(init.v, float).copy(), sc.limits.project(init.q),
                    np.asarray(init.theta, float).copy())
    else:
        q = sc.limits.project(np.zeros(sc.N) if init is None else np.asarray(init, float))
        v, th = solve(q + w), np.zeros(sc.N)

    def F(v, q, th):
        return (gamma * (v - mu) + Bt.T @ th,
                grad(q) - th,
                -rho * (Bt @ (v - solve(q + w))))

    trace = ConvergenceTrace("extragradient", {"alpha": alpha, "rho": rho})
    trace.omega0 = np.concatenate([v, q, th])
    trace.append(mon.record(0, q))
    q_ref = mon.q_ref
    err = np.seterr(over="ignore", invalid="ignore")
    for t in range(config.max_iter):
        fv, fq, ft = F(v, q, th)
        vh, qh, thh = v - alpha * fv, np.clip(q - alpha * fq, lo, hi), th - alpha * ft
        fv, fq, ft = F(vh, qh, thh)
        v, q, th = v - alpha * fv, np.clip(q - alpha * fq, lo, hi), th - alpha * ft
        if config.stop == "reference":
            done = float(np.linalg.norm(q - q_ref)) <= config.target
        elif config.stop == "residual":
            done = (t + 1) % 10 == 0 and \
                natural_residual(q, sc.model, sc.costs, sc.limits, sc.decomp) <= config.tol
        else:
            done = False
        if diverged(bound, q, v - mu, th):
            trace.status = "diverged"
            trace.iterations = t + 1
            break
        if mon.due(t + 1, final=done or t + 1 == config.max_iter):
            trace.append(mon.record(t + 1, q))
        if done:
            trace.converged, trace.status, trace.iterations = True, "converged", t + 1
            break
    else:
        trace.iterations = config.max_iter
    np.seterr(**err)
    if trace.status == "diverged" or not np.all(np.isfinite(v)):
        trace.status = "diverged"
    # 4 Btilde products per iteration (2 per F evaluation)
    audit.messages = 4 * nnz * trace.iterations
    audit.phases = 4 * trace.iterations
    trace.audit = {**audit.summary(), "reads": audit.messages}
    trace.v, trace.q, trace.theta = v, q, th
    return trace


def run_gradient_play(scenario, epsilon: float, config: IterConfig | None = None,
                      reference=None, optimum=None, init=None) -> ConvergenceTrace:
    """Projected gradient-play ``q <- P_Q[q - epsilon phi(q)]``.

    Evaluating ``phi`` needs ``Btilde^{-1}`` (dense inside each area), so
    this baseline is not neighbor-local and carries no locality audit.
    When a reference is given, the trace notes count the steps on which
    ``||q - q*||`` increased.
    """
    config = IterConfig() if config is None else config
    if not epsilon > 0:
        raise DomainError("step epsilon must be positive")
    if config.stop == "reference" and reference is None:
        raise DomainError("stop='reference' requires a reference solution")
    sc = scenario
    mon = Monitor(sc, reference, optimum, config.record_every)
    q = sc.limits.project(np.zeros(sc.N) if init is None else np.asarray(init, float))
    trace = ConvergenceTrace("gradient_play", {"epsilon": epsilon})
    trace.notes["dense_in_area_exchange"] = True
    trace.append(mon.record(0, q))
    bound = divergence_bound(sc.limits)
    increases = 0
    prev = mon.dist_ref(q)
    for t in range(config.max_iter):
        g = phi(q, sc.model, sc.costs, sc.decomp)
        q_new = sc.limits.project(q - epsilon * g)
        nat = float(np.linalg.norm(q - q_new)) / epsilon
        q = q_new
        d = mon.dist_ref(q)
        if d is not None:
            if d > prev * (1 + 1e-12) + 1e-15:
                increases += 1
            prev = d
        if diverged(bound, q):
            trace.status = "diverged"
            trace.iterations = t + 1
            break
        done = _stop(config, mon, q, nat)
        if mon.due(t + 1, final=done or t + 1 == config.max_iter):
            trace.append(mon.record(t + 1, q))
        if done:
            trace.converged, trace.status, trace.iterations = True, "converged", t + 1
            break
    else:
        trace.iterations = config.max_iter
    trace.q = q
    trace.v = sc.model.solve(q + sc.model.w)
    trace.notes["distance_increases"] = increases
    return trace


def gradient_play_step_bound(scenario) -> tuple[float, float, float]:
    """``(m, L, 2m/L^2)`` for affine ``phi``: steps below ``2m/L^2`` contract."""
    sc = scenario
    J = phi_jacobian(sc.model, sc.costs, sc.decomp)
    m = float(np.linalg.eigvalsh(0.5 * (J + J.T))[0])
    L = float(np.linalg.norm(J, 2))
    return m, L, 2 * m / L**2


def _power_iteration(apply, n, iters=200, seed=0):
    x = np.random.default_rng(seed).standard_normal(n)
    lam = 0.0
    for _ in range(iters):
        y = apply(x)
        lam_new = float(np.linalg.norm(y))
        if lam_new == 0:
            return 0.0
        x = y / lam_new
        if abs(lam_new - lam) <= 1e-12 * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return lam


@dataclass
class OptimumSolution:
    v: np.ndarray
    q: np.ndarray
    objective: float
    iterations: int
    residual: float


def solve_global_optimum(scenario, tol: float = 1e-14, max_iter: int = 1_000_000) -> OptimumSolution:
    """Centralized optimum over the VAR box.

    Eliminates ``v = B^{-1}(q + w)`` and runs projected gradient with step
    ``1/L`` on ``J(q) = gamma/2 ||B^{-1}(q + w) - mu||^2 + sum_j C_j(q_j)``,
    ``L = gamma lambda_max(B^-T B^-1) + max C''`` (power iteration). Stops
    when ``||q - P_Q[q - grad J(q)]|| <= tol``.
    """
    sc = scenario
    solve, w, mu, gamma = sc.model.solve, sc.model.w, sc.costs.mu, sc.costs.gamma
    lam = _power_iteration(lambda x: solve(solve(x)), sc.N)
    L = gamma * lam * (1 + 1e-6) + sc.costs.curvature_bound(sc.limits)
    if L <= 0:
        # gamma = 0 and linear-free costs: any feasible point minimizing C_j
        L = 1.0

    def grad(q):
        return gamma * solve(solve(q + w) - mu) + sc.costs.gradient(q)

    q = sc.limits.project(np.zeros(sc.N))
    res = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        g = grad(q)
        res = float(np.linalg.norm(q - sc.limits.project(q - g)))
        if res <= tol:
            break
        q = sc.limits.project(q - g / L)
    v = solve(q + w)
    return OptimumSolution(v, q, global_objective(v, q, sc.costs), it, res)
