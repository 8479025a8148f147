"""Pieces shared by the iterative solvers."""

from __future__ import annotations

import numpy as np

from ..costs import BusCost, QuadraticCost
from ..errors import DomainError
from ..game import area_payoffs, ec_residual, global_objective, natural_residual
from ..trace import TraceRecord


def sol_scalar(cost: BusCost, rho: float, a: float, lo: float, hi: float,
               tol: float = 1e-12, max_iter: int = 200) -> float:
    """Projected root of ``C'(q) + rho (q - a) = 0`` on ``[lo, hi]``.

    The map is strictly increasing under convex ``C``, so the projected
    root equals the minimizer of ``C(q) + rho/2 (q - a)^2`` over the box.
    Quadratic costs use the closed form ``rho a / (c + rho)``; anything else
    is bisected on ``[lo, hi]``.

    Raises
    ------
    DomainError
        If the map is observed to decrease (``C`` not convex).
    """
    if isinstance(cost, QuadraticCost):
        root = rho * a / (cost.c + rho)
        return min(max(root, lo), hi)

    def g(q):
        return float(cost.derivative(q)) + rho * (q - a)

    g_lo, g_hi = g(lo), g(hi)
    if g_lo > g_hi:
        raise DomainError("cost derivative is not monotone (convexity assumption violated)")
    if g_lo >= 0:
        return lo
    if g_hi <= 0:
        return hi
    left, right = lo, hi
    for _ in range(max_iter):
        mid = 0.5 * (left + right)
        gm = g(mid)
        if gm < g_lo or gm > g_hi:
            raise DomainError("cost derivative is not monotone (convexity assumption violated)")
        if gm > 0:
            right, g_hi = mid, gm
        else:
            left, g_lo = mid, gm
        if right - left <= tol:
            break
    return 0.5 * (left + right)


def sol_vector(costs, rho, a, limits, tol=1e-12) -> np.ndarray:
    """Vectorized ``sol_scalar`` over all buses."""
    if costs.is_quadratic:
        return np.clip(rho * a / (costs.coefficients + rho), limits.lower, limits.upper)
    return np.array([sol_scalar(b, rho, aj, lo, hi, tol) for b, aj, lo, hi in
                     zip(costs.bus_costs, a, limits.lower, limits.upper)])


class Monitor:
    """Centralized observer that evaluates certificates along a run.

    It is not part of any algorithm: it reads global state freely and does
    not touch the locality audit.
    """

    def __init__(self, scenario, reference=None, optimum=None, record_every=1):
        self.sc = scenario
        self.q_ref = None if reference is None else np.asarray(getattr(reference, "q", reference))
        self.q_opt = None if optimum is None else np.asarray(getattr(optimum, "q", optimum))
        self.record_every = max(1, int(record_every))

    def dist_ref(self, q):
        return None if self.q_ref is None else float(np.linalg.norm(q - self.q_ref))

    def due(self, t, final=False):
        return final or t % self.record_every == 0

    def record(self, t, q, violations=0, v=None) -> TraceRecord:
        sc = self.sc
        v_phys = sc.model.solve(q + sc.model.w)
        obj = global_objective(v_phys, q, sc.costs)
        nat = natural_residual(q, sc.model, sc.costs, sc.limits, sc.decomp)
        ec = ec_residual(q, sc.model, sc.costs, sc.limits, sc.decomp).residual
        return TraceRecord(
            t=t, objective=obj, nat_residual=nat, ec_residual=ec,
            dist_to_ref=self.dist_ref(q),
            dist_to_opt=None if self.q_opt is None else float(np.linalg.norm(q - self.q_opt)),
            audit_violations=violations,
            area_payoffs=area_payoffs(v_phys, q, sc.costs, sc.partition))


def divergence_bound(limits) -> float:
    return 1e3 * max(1.0, float(np.linalg.norm(np.maximum(np.abs(limits.lower),
                                                           np.abs(limits.upper)))))


def diverged(bound, *arrays) -> bool:
    for a in arrays:
        if not np.all(np.isfinite(a)) or np.linalg.norm(a) > bound:
            return True
    return False
