"""Linearized physical layer of a radial feeder.

Bus 0 is the feeder head (PCC). The remaining buses ``1..N`` carry the
decision variables; every matrix and vector in this module is indexed by
``bus - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import linalg as sla
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DomainError, GneVoltError, TopologyError


class WeightConvention(str, Enum):
    """Edge weight used when assembling the reduced Laplacian."""

    INV_X = "inv_x"
    INV_2X = "inv_2x"


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    x: float
    r: float = 0.0  # informational, never enters B


@dataclass(frozen=True)
class FeederTopology:
    """Tree on buses ``0..bus_count`` with per-unit line reactances."""

    bus_count: int
    edges: tuple[Edge, ...]

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(
            e if isinstance(e, Edge) else Edge(*e) for e in self.edges))
        n = self.bus_count
        if n < 1:
            raise TopologyError(f"bus_count must be positive, got {n}")
        if len(self.edges) != n:
            raise TopologyError(
                f"a tree on {n + 1} buses needs {n} edges, got {len(self.edges)}")
        seen = set()
        for e in self.edges:
            if not (0 <= e.i <= n and 0 <= e.j <= n):
                raise TopologyError(f"edge ({e.i}, {e.j}) references unknown bus")
            if e.i == e.j:
                raise TopologyError(f"self-loop at bus {e.i}")
            key = frozenset((e.i, e.j))
            if key in seen:
                raise TopologyError(f"duplicate edge ({e.i}, {e.j})")
            seen.add(key)
            if not e.x > 0:
                raise DomainError(f"edge ({e.i}, {e.j}) has nonpositive reactance {e.x}")
        rows = [e.i for e in self.edges]
        cols = [e.j for e in self.edges]
        adj = coo_matrix((np.ones(n), (rows, cols)), shape=(n + 1, n + 1))
        ncomp, _ = connected_components(adj, directed=False)
        if ncomp != 1:
            raise TopologyError(f"edge set is not connected ({ncomp} components)")

    @property
    def N(self) -> int:
        return self.bus_count

    def neighbors(self, bus: int) -> list[int]:
        out = []
        for e in self.edges:
            if e.i == bus:
                out.append(e.j)
            elif e.j == bus:
                out.append(e.i)
        return sorted(out)


def ohms_to_pu(z_ohm: float, v_base_kv: float, s_base_kva: float) -> float:
    """Convert an impedance in ohms to per unit on the given bases."""
    return z_ohm * (s_base_kva * 1e3) / (v_base_kv * 1e3) ** 2


def build_reduced_laplacian(topology: FeederTopology,
                            weight_convention="inv_x") -> np.ndarray:
    """Reduced weighted Laplacian over buses ``1..N`` (bus 0 row/column removed).

    Parameters
    ----------
    topology : FeederTopology
    weight_convention : {"inv_x", "inv_2x"}
        Edge weight ``1/x`` or ``1/(2x)``.

    Returns
    -------
    B : ndarray, shape (N, N)
    """
    conv = WeightConvention(weight_convention)
    n = topology.N
    L = np.zeros((n + 1, n + 1))
    for e in topology.edges:
        if not e.x > 0:
            raise DomainError(f"edge ({e.i}, {e.j}) has nonpositive reactance {e.x}")
        wgt = 1.0 / e.x if conv is WeightConvention.INV_X else 1.0 / (2.0 * e.x)
        L[e.i, e.i] += wgt
        L[e.j, e.j] += wgt
        L[e.i, e.j] -= wgt
        L[e.j, e.i] -= wgt
    return L[1:, 1:].copy()


@dataclass(frozen=True)
class PDReport:
    min_eigenvalue: float
    is_pd: bool


def check_positive_definite(B, *, sym_tol: float = 1e-12) -> PDReport:
    """Smallest eigenvalue of a symmetric matrix and whether it is positive."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape[0] != B.shape[1]:
        raise DomainError(f"matrix must be square, got shape {B.shape}")
    scale = max(1.0, float(np.abs(B).max(initial=0.0)))
    if np.abs(B - B.T).max(initial=0.0) > sym_tol * scale:
        raise DomainError("matrix is not symmetric")
    lam = float(np.linalg.eigvalsh(B)[0])
    return PDReport(lam, lam > 0)


def default_operating_point(B, v_base) -> np.ndarray:
    """``w = B v_base`` so that zero injection reproduces ``v_base``."""
    B = np.asarray(B, dtype=float)
    v_base = np.asarray(v_base, dtype=float)
    if B.shape != (v_base.size, v_base.size):
        raise DomainError(f"dimension mismatch: B {B.shape}, v_base {v_base.shape}")
    return B @ v_base


@dataclass(frozen=True)
class GridModel:
    """``B v = q + w`` together with a cached Cholesky factor of ``B``."""

    B: np.ndarray
    w: np.ndarray
    v_base: np.ndarray | None = None
    _chol: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        B = np.array(self.B, dtype=float)
        w = np.array(self.w, dtype=float)
        if B.ndim != 2 or B.shape != (w.size, w.size):
            raise DomainError(f"dimension mismatch: B {B.shape}, w {w.shape}")
        B.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "w", w)
        if self.v_base is not None:
            vb = np.array(self.v_base, dtype=float)
            vb.setflags(write=False)
            object.__setattr__(self, "v_base", vb)
        try:
            chol = sla.cho_factor(B, lower=True)
        except np.linalg.LinAlgError as exc:
            raise DomainError("B is not positive definite") from exc
        object.__setattr__(self, "_chol", chol)

    @classmethod
    def from_topology(cls, topology: FeederTopology, v_base=None, w=None,
                      weight_convention="inv_x") -> "GridModel":
        B = build_reduced_laplacian(topology, weight_convention)
        if w is None:
            v_base = np.ones(topology.N) if v_base is None else np.asarray(v_base, float)
            w = default_operating_point(B, v_base)
        return cls(B, w, v_base)

    @property
    def N(self) -> int:
        return self.w.size

    def solve(self, rhs) -> np.ndarray:
        """``B^{-1} rhs`` via the cached factorization."""
        return sla.cho_solve(self._chol, rhs, check_finite=False)

    def measure(self, q) -> np.ndarray:
        return measure_voltage(q, self)


def measure_voltage(q, model: GridModel) -> np.ndarray:
    """Simulated voltage sensors: the unique ``v`` with ``B v = q + w``."""
    q = np.asarray(q, dtype=float)
    if q.shape != model.w.shape:
        raise DomainError(f"q has shape {q.shape}, expected {model.w.shape}")
    v = model.solve(q + model.w)
    if not np.all(np.isfinite(v)):
        raise GneVoltError("power-flow solve produced non-finite voltages")
    return v


def ieee13_scenario():
    """Bundled IEEE 13-bus case.

    Returns
    -------
    topology, model, costs, limits, partition
    """
    from .scenario import load_bundled

    sc = load_bundled("ieee13")
    return sc.topology, sc.model, sc.costs, sc.limits, sc.partition
