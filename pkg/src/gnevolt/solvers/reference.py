"""Exact reference equilibrium by active-set enumeration.

For quadratic costs ``phi(q) = J q + phi0`` is affine, and the equilibrium
conditions are a box-constrained linear complementarity problem. Each bus
gets a label (lower / free / upper); bound-labelled coordinates are fixed,
the free block solves ``J_FF q_F = -(phi0_F + J_FA q_A)``, and the labelling
is accepted when the free values lie inside the box and the rebuilt
multipliers are nonnegative.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, GneVoltError
from ..game import (KKTCertificate, ec_residual, natural_residual, phi, phi_jacobian,
                    phi_jacobian_symmetric_part_minimum)

log = logging.getLogger(__name__)

LOWER, FREE, UPPER = "lower", "free", "upper"


@dataclass
class ReferenceSolution:
    q: np.ndarray
    v: np.ndarray
    theta: np.ndarray
    eta_upper: np.ndarray
    eta_lower: np.ndarray
    labels: tuple
    certificate: KKTCertificate
    method: str
    unique: bool | None = True
    alternatives: list = field(default_factory=list)
    candidates_tried: int = 0

    @property
    def residual(self) -> float:
        return self.certificate.residual

    def omega(self) -> np.ndarray:
        return np.concatenate([self.v, self.q, self.theta])


def _candidate_labels(n, start):
    """All-free first, then labelings in increasing Hamming distance from ``start``."""
    free = (FREE,) * n
    yield free
    start = tuple(start)
    alts = {lab: [x for x in (LOWER, FREE, UPPER) if x != lab] for lab in (LOWER, FREE, UPPER)}
    for d in range(n + 1):
        for pos in itertools.combinations(range(n), d):
            for choice in itertools.product(*(alts[start[p]] for p in pos)):
                cand = list(start)
                for p, c in zip(pos, choice):
                    cand[p] = c
                cand = tuple(cand)
                if cand != free:
                    yield cand


def _clamp_labels(q, lo, hi):
    return tuple(UPPER if x > h else LOWER if x < l else FREE for x, l, h in zip(q, lo, hi))


def _complete(sc, q, labels, method, tried, bound_tol=1e-12):
    v = sc.model.solve(q + sc.model.w)
    # gamma (v - mu) + Btilde^T theta = 0
    theta = -sc.costs.gamma * sc.decomp.solve_btilde(v - sc.costs.mu)
    cert = ec_residual(q, sc.model, sc.costs, sc.limits, sc.decomp, bound_tol=bound_tol)
    return ReferenceSolution(q, v, theta, cert.eta_upper, cert.eta_lower, tuple(labels),
                             cert, method, candidates_tried=tried)


def solve_reference_gne(scenario, *, accept_tol: float = 1e-12,
                        exhaustive_limit: int = 3 ** 10, max_enumeration_n: int = 16,
                        fallback_tol: float = 1e-12) -> ReferenceSolution:
    """Reference equilibrium of the area game.

    Parameters
    ----------
    scenario : Scenario
    accept_tol : float
        Relative tolerance for the box and multiplier-sign tests.
    exhaustive_limit : int
        When ``phi`` is not certified strongly monotone, all ``3**N``
        labelings are checked if that count is at most this limit, so that
        several equilibria can be detected. Otherwise the first accepted
        labeling is returned with ``unique=None`` (not certified).
    max_enumeration_n : int
        Larger problems (or non-quadratic costs) use the iterative fallback.

    Returns
    -------
    ReferenceSolution
        ``unique`` is True when certified, False when distinct equilibria
        were found (all listed in ``alternatives``), None when unknown.

    Raises
    ------
    GneVoltError
        If no labeling is accepted.
    """
    sc = scenario
    n = sc.N
    if not sc.costs.is_quadratic or n > max_enumeration_n:
        return _fallback(sc, fallback_tol)

    J = phi_jacobian(sc.model, sc.costs, sc.decomp)
    phi0 = phi(np.zeros(n), sc.model, sc.costs, sc.decomp)
    lo, hi = sc.limits.lower, sc.limits.upper
    m = phi_jacobian_symmetric_part_minimum(sc.model, sc.costs, sc.decomp)
    strongly_monotone = m > 0
    exhaustive = not strongly_monotone and 3 ** n <= exhaustive_limit

    try:
        q_unc = np.linalg.solve(J, -phi0)
        start = _clamp_labels(q_unc, lo, hi)
    except np.linalg.LinAlgError:
        start = (FREE,) * n
    scale_q = 1.0 + np.maximum(np.abs(lo), np.abs(hi))
    scale_phi = 1.0e-300 + np.abs(phi0).max(initial=0.0) + np.abs(J).max() * scale_q.max()

    found = []
    tried = 0
    for labels in _candidate_labels(n, start):
        tried += 1
        lab = np.array(labels)
        F = lab == FREE
        q = np.where(lab == UPPER, hi, lo).astype(float)
        if F.any():
            A = ~F
            rhs = -(phi0[F] + J[np.ix_(F, A)] @ q[A])
            JFF = J[np.ix_(F, F)]
            try:
                if np.linalg.cond(JFF) > 1e14:
                    continue
                q[F] = np.linalg.solve(JFF, rhs)
            except np.linalg.LinAlgError:
                continue
            if np.any(q[F] < lo[F] - accept_tol * scale_q[F]) or \
                    np.any(q[F] > hi[F] + accept_tol * scale_q[F]):
                continue
            q[F] = np.clip(q[F], lo[F], hi[F])
        g = J @ q + phi0
        if np.any(g[lab == UPPER] > accept_tol * scale_phi) or \
                np.any(g[lab == LOWER] < -accept_tol * scale_phi):
            continue
        sol = _complete(sc, q, labels, "enumeration", tried)
        if not exhaustive:
            sol.unique = True if strongly_monotone else None
            log.debug("accepted labeling after %d candidates", tried)
            return sol
        if not any(np.linalg.norm(q - s.q) <= 1e-9 * (1 + np.linalg.norm(q)) for s in found):
            found.append(sol)
    if not found:
        raise GneVoltError("no active set satisfies the equilibrium conditions")
    best = found[0]
    best.candidates_tried = tried
    best.unique = len(found) == 1
    best.alternatives = found[1:]
    return best


def _fallback(sc, tol, max_iter=2_000_000):
    """Extra-gradient on ``VI(Q, phi)`` run to a natural residual of ``tol``."""
    n = sc.N
    J = phi_jacobian(sc.model, sc.costs, sc.decomp,
                     q=0.5 * (sc.limits.lower + sc.limits.upper))
    L = 1.5 * float(np.linalg.norm(J, 2)) + 1e-300
    step = 0.5 / L
    q = sc.limits.project(np.zeros(n))
    for it in range(max_iter):
        qh = sc.limits.project(q - step * phi(q, sc.model, sc.costs, sc.decomp))
        q = sc.limits.project(q - step * phi(qh, sc.model, sc.costs, sc.decomp))
        if it % 50 == 0 and natural_residual(q, sc.model, sc.costs, sc.limits, sc.decomp) <= tol:
            break
    else:
        raise GneVoltError("extra-gradient fallback did not reach the requested residual")
    lo, hi = sc.limits.lower, sc.limits.upper
    labels = tuple(UPPER if x >= h else LOWER if x <= l else FREE for x, l, h in zip(q, lo, hi))
    sol = _complete(sc, q, labels, "extragradient", it + 1)
    sol.unique = None
    return sol
