"""The area game: partition blocks, VI mappings and equilibrium certificates.

Two variational-inequality views of the same equilibrium are provided:

* ``phi`` on the VAR box ``Q`` (voltages eliminated through power flow);
* ``f_mapping`` on the primal-dual space ``R^N x Q x R^N``.

Buses are referred to by their 1-based feeder index in ``CommPartition``;
all arrays are 0-based (``bus - 1``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .costs import CostModel
from .errors import ConfigurationError, DomainError, UnsupportedFeatureError
from .grid import FeederTopology, GridModel


@dataclass(frozen=True)
class CommPartition:
    """Communication areas as tuples of 1-based bus ids."""

    areas: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "areas", tuple(tuple(int(b) for b in a) for a in self.areas))

    @classmethod
    def single(cls, n):
        return cls((tuple(range(1, n + 1)),))

    @classmethod
    def singletons(cls, n):
        return cls(tuple((j,) for j in range(1, n + 1)))

    @property
    def K(self) -> int:
        return len(self.areas)

    def validate(self, n: int, topology: FeederTopology | None = None) -> None:
        """Raise ``DomainError`` unless areas are nonempty, disjoint and cover 1..n.

        With a topology, also require each area to induce a connected subgraph.
        """
        seen = {}
        for k, area in enumerate(self.areas):
            if not area:
                raise DomainError(f"area {k} is empty")
            for b in area:
                if not 1 <= b <= n:
                    raise DomainError(f"bus {b} in area {k} does not exist")
                if b in seen:
                    raise DomainError(f"bus {b} listed in areas {seen[b]} and {k}")
                seen[b] = k
        missing = sorted(set(range(1, n + 1)) - set(seen))
        if missing:
            raise DomainError(f"buses {missing} belong to no area")
        if topology is not None:
            for k, area in enumerate(self.areas):
                if not _connected(area, topology):
                    raise ConfigurationError(
                        f"area {k} {list(area)} does not induce a connected feeder subgraph")

    def labels(self, n: int) -> np.ndarray:
        """Area index of every bus, 0-based bus order."""
        lab = np.empty(n, dtype=int)
        for k, area in enumerate(self.areas):
            lab[np.asarray(area) - 1] = k
        return lab

    def area_of(self, bus: int) -> int:
        for k, area in enumerate(self.areas):
            if bus in area:
                return k
        raise DomainError(f"bus {bus} belongs to no area")


def _connected(area, topology: FeederTopology) -> bool:
    members = set(area)
    adj = {b: [] for b in members}
    for e in topology.edges:
        if e.i in members and e.j in members:
            adj[e.i].append(e.j)
            adj[e.j].append(e.i)
    start = next(iter(members))
    stack, seen = [start], {start}
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return seen == members


@dataclass(frozen=True)
class BlockDecomposition:
    """Area blocks of ``B``.

    ``btilde`` keeps the natural bus order and zeros every cross-area
    entry, which is ``blockdiag{B_kk}`` conjugated by ``perm``.
    """

    partition: CommPartition
    index: tuple[np.ndarray, ...]      # 0-based bus indices of each area
    perm: np.ndarray                   # area-major order
    blocks: tuple[np.ndarray, ...]     # B_kk
    coupling: tuple[np.ndarray, ...]   # B_{k,-k}
    btilde: np.ndarray
    _chol: tuple = field(repr=False, compare=False)

    @property
    def K(self):
        return len(self.blocks)

    @property
    def N(self):
        return self.btilde.shape[0]

    def solve_btilde(self, x) -> np.ndarray:
        """``Btilde^{-1} x`` by per-area Cholesky solves."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        for idx, fac in zip(self.index, self._chol):
            out[idx] = sla.cho_solve(fac, x[idx], check_finite=False)
        return out

    def reassemble(self) -> np.ndarray:
        n = self.N
        B = np.zeros((n, n))
        for idx, Bkk, Bkc in zip(self.index, self.blocks, self.coupling):
            rest = np.setdiff1d(np.arange(n), idx)
            B[np.ix_(idx, idx)] = Bkk
            B[np.ix_(idx, rest)] = Bkc
        return B

    def blockdiag_permuted(self) -> np.ndarray:
        return sla.block_diag(*self.blocks) if self.blocks else np.zeros((0, 0))


def decompose(B, partition: CommPartition) -> BlockDecomposition:
    """Split ``B`` into area blocks ``B_kk``, couplings ``B_{k,-k}`` and ``Btilde``."""
    B = np.asarray(B, dtype=float)
    n = B.shape[0]
    partition.validate(n)
    index = tuple(np.sort(np.asarray(a, dtype=int) - 1) for a in partition.areas)
    perm = np.concatenate(index)
    blocks, coupling, chol = [], [], []
    btilde = np.zeros_like(B)
    for idx in index:
        rest = np.setdiff1d(np.arange(n), idx)
        Bkk = B[np.ix_(idx, idx)].copy()
        blocks.append(Bkk)
        coupling.append(B[np.ix_(idx, rest)].copy())
        btilde[np.ix_(idx, idx)] = Bkk
        try:
            chol.append(sla.cho_factor(Bkk, lower=True))
        except np.linalg.LinAlgError as exc:
            raise DomainError("area block of B is not positive definite") from exc
    btilde.setflags(write=False)
    return BlockDecomposition(partition, index, perm, tuple(blocks), tuple(coupling),
                              btilde, tuple(chol))


@dataclass(frozen=True)
class VarLimits:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float)
        hi = np.array(self.upper, dtype=float)
        if lo.shape != hi.shape:
            raise DomainError("lower and upper limits differ in shape")
        if np.any(lo > hi):
            raise DomainError("lower limit exceeds upper limit")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise DomainError("VAR limits must be finite")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def uniform(cls, n, lo, hi):
        return cls(np.full(n, float(lo)), np.full(n, float(hi)))

    @property
    def N(self):
        return self.lower.size

    def project(self, q) -> np.ndarray:
        return np.clip(q, self.lower, self.upper)

    def contains(self, q, tol=0.0) -> bool:
        q = np.asarray(q)
        return bool(np.all(q >= self.lower - tol) and np.all(q <= self.upper + tol))

    def violation(self, q) -> float:
        q = np.asarray(q, dtype=float)
        return float(np.max(np.maximum(0.0, np.maximum(self.lower - q, q - self.upper)),
                            initial=0.0))


@dataclass(frozen=True)
class PrimalDualPoint:
    """``omega = (v, q, theta)``; stacked layout is ``[v; q; theta]``."""

    v: np.ndarray
    q: np.ndarray
    theta: np.ndarray

    @classmethod
    def projected(cls, v, q, theta, limits: VarLimits):
        return cls(np.asarray(v, float).copy(), limits.project(q),
                   np.asarray(theta, float).copy())

    @classmethod
    def from_stack(cls, omega):
        omega = np.asarray(omega, dtype=float)
        n = omega.size // 3
        return cls(omega[:n].copy(), omega[n:2 * n].copy(), omega[2 * n:].copy())

    def stack(self) -> np.ndarray:
        return np.concatenate([self.v, self.q, self.theta])


@dataclass(frozen=True)
class KKTCertificate:
    eta_upper: np.ndarray
    eta_lower: np.ndarray
    stationarity: float
    complementarity: float
    feasibility: float
    stationarity_vector: np.ndarray = field(repr=False, default=None)

    @property
    def residual(self) -> float:
        return max(self.stationarity, self.complementarity, self.feasibility)

    def certifies(self, tol: float) -> bool:
        return self.residual <= tol


def mu_bar(model: GridModel, costs: CostModel) -> np.ndarray:
    """``B^{-1} w - mu``: voltage offset from target at zero injection."""
    return model.solve(model.w) - costs.mu


def phi(q, model: GridModel, costs: CostModel, decomp: BlockDecomposition) -> np.ndarray:
    """Reduced game mapping ``gamma Btilde^{-1}(B^{-1} q + mu_bar) + grad C(q)``."""
    q = np.asarray(q, dtype=float)
    volt_gap = model.solve(q + model.w) - costs.mu
    return costs.gamma * decomp.solve_btilde(volt_gap) + costs.gradient(q)


def phi_jacobian(model: GridModel, costs: CostModel, decomp: BlockDecomposition,
                 q=None, fd_step: float = 1e-6) -> np.ndarray:
    """Dense Jacobian of ``phi``; exact for quadratic costs, else central differences."""
    n = model.N
    net = costs.gamma * decomp.solve_btilde(model.solve(np.eye(n)))
    if costs.is_quadratic:
        return net + np.diag(costs.coefficients)
    q = np.zeros(n) if q is None else np.asarray(q, dtype=float)
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = fd_step
        J[:, j] = (phi(q + e, model, costs, decomp) - phi(q - e, model, costs, decomp)) / (2 * fd_step)
    return J


def phi_jacobian_symmetric_part_minimum(model: GridModel, costs: CostModel,
                                        decomp: BlockDecomposition) -> float:
    """``lambda_min((J + J^T)/2)``; positive means ``phi`` is strongly monotone.

    Only defined in closed form for quadratic costs (affine ``phi``); see
    :func:`sampled_strong_monotonicity` otherwise.
    """
    if not costs.is_quadratic:
        raise UnsupportedFeatureError(
            "closed-form Jacobian needs quadratic costs; use sampled_strong_monotonicity")
    J = phi_jacobian(model, costs, decomp)
    return float(np.linalg.eigvalsh(0.5 * (J + J.T))[0])


def sampled_strong_monotonicity(model, costs, decomp, limits, samples: int = 32,
                                seed: int = 0, fd_step: float = 1e-6) -> float:
    """Min over sampled ``q in Q`` of ``lambda_min`` of the finite-difference Jacobian's symmetric part."""
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(samples):
        q = rng.uniform(limits.lower, limits.upper)
        J = phi_jacobian(model, costs, decomp, q=q, fd_step=fd_step)
        worst = min(worst, float(np.linalg.eigvalsh(0.5 * (J + J.T))[0]))
    return worst


def f_mapping(omega, rho: float, model: GridModel, costs: CostModel,
              decomp: BlockDecomposition) -> np.ndarray:
    """Primal-dual mapping ``F(omega)`` stacked as ``[F_v; F_q; F_theta]``."""
    if not rho > 0:
        raise DomainError(f"rho must be positive, got {rho}")
    if isinstance(omega, PrimalDualPoint):
        v, q, th = omega.v, omega.q, omega.theta
    else:
        pt = PrimalDualPoint.from_stack(omega)
        v, q, th = pt.v, pt.q, pt.theta
    Bt = decomp.btilde
    Fv = costs.gamma * (v - costs.mu) + Bt.T @ th
    Fq = costs.gradient(q) - th
    Fth = -rho * (Bt @ (v - model.solve(q + model.w)))
    return np.concatenate([Fv, Fq, Fth])


def f_jacobian(rho: float, model: GridModel, costs: CostModel,
               decomp: BlockDecomposition, q=None) -> np.ndarray:
    """Dense ``grad F`` (3N x 3N); the cost Hessian is evaluated at ``q``."""
    n = model.N
    Bt = decomp.btilde
    I = np.eye(n)
    Hh = np.diag(costs.hessian_diag(np.zeros(n) if q is None else q))
    BtBinv = Bt @ model.solve(I)
    Z = np.zeros((n, n))
    return np.block([
        [costs.gamma * I, Z, Bt.T],
        [Z, Hh, -I],
        [-rho * Bt, rho * BtBinv, Z],
    ])


def f_monotonicity_minimum(rho, model, costs, decomp, q=None) -> float:
    """``lambda_min`` of the symmetric part of ``grad F`` (sign is scenario dependent)."""
    J = f_jacobian(rho, model, costs, decomp, q)
    return float(np.linalg.eigvalsh(0.5 * (J + J.T))[0])


def ec_residual(q, model: GridModel, costs: CostModel, limits: VarLimits,
                decomp: BlockDecomposition, *, bound_tol: float = 1e-12) -> KKTCertificate:
    """Equilibrium-condition certificate for ``q``.

    Multipliers are rebuilt from ``phi(q)``: a coordinate sitting on its
    upper bound gets ``eta_upper = max(0, -phi_j)``, on its lower bound
    ``eta_lower = max(0, phi_j)``, interior coordinates get neither. Sign
    convention: stationarity reads ``phi + eta_upper - eta_lower = 0``.
    """
    q = np.asarray(q, dtype=float)
    tol = bound_tol * (1.0 + np.maximum(np.abs(limits.lower), np.abs(limits.upper)))
    if not limits.contains(q, tol=tol.max()):
        raise DomainError(f"q violates the VAR limits by {limits.violation(q):.3e}")
    g = phi(q, model, costs, decomp)
    at_hi = q >= limits.upper - tol
    at_lo = q <= limits.lower + tol
    eta_hi = np.where(at_hi, np.maximum(0.0, -g), 0.0)
    eta_lo = np.where(at_lo, np.maximum(0.0, g), 0.0)
    # degenerate box: only one multiplier needed
    both = at_hi & at_lo
    eta_lo = np.where(both & (g < 0), 0.0, eta_lo)
    stat_vec = g + eta_hi - eta_lo
    comp = float(np.max(np.maximum(np.abs(eta_hi * (q - limits.upper)),
                                   np.abs(eta_lo * (q - limits.lower))), initial=0.0))
    return KKTCertificate(eta_hi, eta_lo, float(np.max(np.abs(stat_vec), initial=0.0)),
                          comp, limits.violation(q), stat_vec)


def natural_residual(q, model: GridModel, costs: CostModel, limits: VarLimits,
                     decomp: BlockDecomposition, step: float = 1.0) -> float:
    """``||q - P_Q[q - step * phi(q)]||_2``; zero exactly at VI solutions."""
    if not step > 0:
        raise DomainError("step must be positive")
    q = np.asarray(q, dtype=float)
    return float(np.linalg.norm(q - limits.project(q - step * phi(q, model, costs, decomp))))


def global_objective(v, q, costs: CostModel) -> float:
    v = np.asarray(v, dtype=float)
    return float(0.5 * costs.gamma * np.sum((v - costs.mu) ** 2) + np.sum(costs.cost_values(q)))


def area_payoff(k: int, v_k, q_k, costs: CostModel, partition: CommPartition) -> float:
    """Cost of area ``k`` given its own voltages and injections (area-local ordering)."""
    idx = np.sort(np.asarray(partition.areas[k], dtype=int) - 1)
    v_k = np.asarray(v_k, dtype=float)
    q_k = np.asarray(q_k, dtype=float)
    cost = sum(float(costs.bus_costs[j].value(qj)) for j, qj in zip(idx, q_k))
    return float(0.5 * costs.gamma * np.sum((v_k - costs.mu[idx]) ** 2) + cost)


def area_payoffs(v, q, costs: CostModel, partition: CommPartition) -> np.ndarray:
    v = np.asarray(v)
    q = np.asarray(q)
    out = []
    for k, area in enumerate(partition.areas):
        idx = np.sort(np.asarray(area, dtype=int) - 1)
        out.append(area_payoff(k, v[idx], q[idx], costs, partition))
    return np.array(out)
