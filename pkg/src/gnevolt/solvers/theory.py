"""Convergence-condition matrices and the ergodic O(1/t) gap check."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..game import f_mapping


@dataclass
class ParameterReport:
    """Admissible parameter region and the proof matrices at ``(rho, beta)``.

    ``rho_max = 1 / ||B^-T Bt^T Bt B^-1||_2``; ``beta_min(rho) = rho * beta_factor``
    with ``beta_factor = ||Bt^T Bt||_2``.
    """

    rho_max: float
    beta_factor: float
    rho: float
    beta: float
    H: np.ndarray
    M: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    lam_min_H: float
    lam_min_R: float

    def beta_min(self, rho: float) -> float:
        return rho * self.beta_factor

    @property
    def admissible(self) -> bool:
        return self.rho <= self.rho_max * (1 + 1e-12) and \
            self.beta >= self.beta_min(self.rho) * (1 - 1e-12)


def _sym_min(A) -> float:
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])


def theorem2_parameters(decomp, model, rho: float | None = None,
                        beta: float | None = None) -> ParameterReport:
    """Step-size limits of the ADMM learner and the matrices ``H, M, Q, R``.

    Defaults: ``rho = rho_max`` and ``beta = beta_min(rho)``.

    ``R = 2 H M - M^T H M``; the reported eigenvalues are those of the
    symmetric parts of ``H`` and ``R``.
    """
    Bt = np.asarray(decomp.btilde)
    n = Bt.shape[0]
    I = np.eye(n)
    Z = np.zeros((n, n))
    Binv = model.solve(I)
    BtB = Bt.T @ Bt
    X = Binv.T @ BtB @ Binv
    rho_max = 1.0 / float(np.linalg.norm(X, 2))
    beta_factor = float(np.linalg.norm(BtB, 2))
    rho = rho_max if rho is None else float(rho)
    beta = rho * beta_factor if beta is None else float(beta)
    if not (rho > 0 and beta > 0):
        raise DomainError("rho and beta must be positive")
    C = -rho * (Bt @ Binv)
    Pv = beta * I - rho * BtB
    H = np.block([[Pv, Z, Z], [Z, rho * I, Z], [Z, Z, I]])
    M = np.block([[I, Z, Z], [Z, I, Z], [Z, C, I]])
    Q = np.block([[Pv, Z, Z], [Z, rho * I, Z], [Z, C, I]])
    R = 2 * H @ M - M.T @ H @ M
    return ParameterReport(rho_max, beta_factor, rho, beta, H, M, Q, R,
                           _sym_min(H), _sym_min(R))


@dataclass(frozen=True)
class GapProbeSet:
    """Test points ``omega = (v, q, theta)`` with ``q`` inside the VAR box."""

    points: tuple

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(np.asarray(p, dtype=float) for p in self.points))

    @classmethod
    def random(cls, count, limits, center=None, scale=1.0, seed=0) -> "GapProbeSet":
        n = limits.N
        rng = np.random.default_rng(seed)
        c = np.zeros(3 * n) if center is None else np.asarray(center, float)
        pts = []
        for _ in range(count):
            p = c + scale * rng.standard_normal(3 * n)
            p[n:2 * n] = rng.uniform(limits.lower, limits.upper)
            pts.append(p)
        return cls(tuple(pts))

    def validate(self, limits) -> None:
        n = limits.N
        for p in self.points:
            if p.size != 3 * n or not limits.contains(p[n:2 * n]):
                raise DomainError("probe lies outside Omega")


def ergodic_gap(trace, probes: GapProbeSet, omega0, H, *, rho, model, costs, decomp) -> np.ndarray:
    """Margins ``RHS - LHS`` of the ergodic bound.

    For each stored ergodic average ``avg_t`` and probe ``omega``:
    ``LHS = (avg_t - omega)^T F(omega)``, ``RHS = ||omega - omega0||_H^2 / (2 (t + 1))``.

    Returns
    -------
    ndarray, shape (len(trace.ergodic), len(probes.points))
    """
    if not trace.ergodic:
        raise DomainError("trace holds no ergodic averages (run with track_ergodic=True)")
    omega0 = np.asarray(omega0, dtype=float)
    F_at = [f_mapping(p, rho, model, costs, decomp) for p in probes.points]
    Hnorm = [float((p - omega0) @ H @ (p - omega0)) for p in probes.points]
    ts = np.array([t for t, _ in trace.ergodic], dtype=float)
    avgs = np.array([a for _, a in trace.ergodic])
    out = np.empty((len(ts), len(probes.points)))
    for k, (p, F, hn) in enumerate(zip(probes.points, F_at, Hnorm)):
        lhs = (avgs - p) @ F
        out[:, k] = hn / (2 * (ts + 1)) - lhs
    return out
