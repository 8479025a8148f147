"""Neighbor-only message passing inside communication areas.

Buses are addressed by 0-based array index throughout this module (feeder
bus ``b`` is index ``b - 1``). Bus 0 (the feeder head) takes no part in
any exchange.

Each exchange phase follows an exchange-then-commit contract: a snapshot of
the committed state is taken, every bus receives a :class:`NeighborView` of
that snapshot restricted to itself and its in-area feeder neighbors, and
new values are committed only after all buses have computed. Reads outside
a view are recorded in the :class:`LocalityAudit` and raise
:class:`~gnevolt.errors.LocalityViolation`.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, DomainError, LocalityViolation
from .game import CommPartition
from .grid import FeederTopology


@dataclass(frozen=True)
class CommGraph:
    """In-area feeder adjacency ``N_c^j`` for every bus (0-based)."""

    n: int
    neighbors: tuple[tuple[int, ...], ...]
    area: np.ndarray

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.n) for j in self.neighbors[i] if i < j]

    def closed_neighborhood(self, j: int) -> frozenset:
        return frozenset(self.neighbors[j]) | {j}

    def supports(self, A, atol: float = 0.0) -> bool:
        """True if every nonzero ``A[i, j]`` couples a bus to itself or a comm neighbor."""
        A = np.asarray(A)
        for i, j in zip(*np.nonzero(np.abs(A) > atol)):
            if i != j and j not in self.neighbors[i]:
                return False
        return True


def build_comm_graph(topology: FeederTopology, partition: CommPartition) -> CommGraph:
    """Feeder edges restricted to same-area pairs; each area must stay connected."""
    n = topology.N
    partition.validate(n, topology)
    lab = partition.labels(n)
    nbrs = [set() for _ in range(n)]
    for e in topology.edges:
        if e.i == 0 or e.j == 0:
            continue
        a, b = e.i - 1, e.j - 1
        if lab[a] == lab[b]:
            nbrs[a].add(b)
            nbrs[b].add(a)
    graph = CommGraph(n, tuple(tuple(sorted(s)) for s in nbrs), lab)
    for k, area in enumerate(partition.areas):
        members = {b - 1 for b in area}
        start = next(iter(members))
        seen, stack = {start}, [start]
        while stack:
            for nb in graph.neighbors[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if seen != members:
            raise ConfigurationError(f"area {k} is not connected over its comm links")
    return graph


@dataclass
class LocalityAudit:
    """Read counters grouped by (reader, source) plus any violations."""

    reads: Counter = field(default_factory=Counter)
    violations: list = field(default_factory=list)
    messages: int = 0
    phases: int = 0

    def record(self, reader: int, source: int) -> None:
        self.reads[(reader, source)] += 1

    def violation(self, reader: int, source: int, what: str) -> None:
        self.violations.append((reader, source, what))

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> dict:
        return {
            "reads": int(sum(self.reads.values())),
            "distinct_links": len(self.reads),
            "messages": self.messages,
            "phases": self.phases,
            "violations": len(self.violations),
        }


class NeighborView:
    """Read-only access to one bus's delivered snapshot."""

    __slots__ = ("reader", "allowed", "_data", "_audit")

    def __init__(self, reader, allowed, data, audit):
        self.reader = reader
        self.allowed = allowed
        self._data = data
        self._audit = audit

    def get(self, field_name: str, source: int) -> float:
        if source not in self.allowed:
            self._audit.violation(self.reader, source, field_name)
            raise LocalityViolation(
                f"bus {self.reader} read {field_name!r} of bus {source} outside its view")
        if field_name not in self._data:
            self._audit.violation(self.reader, source, field_name)
            raise LocalityViolation(f"field {field_name!r} was not exchanged in this phase")
        self._audit.record(self.reader, source)
        return float(self._data[field_name][source])

    def row_sum(self, field_name: str, coeffs) -> float:
        """``sum_i coeffs[i] * field[i]`` over an iterable of ``(i, coeff)`` pairs."""
        return sum(c * self.get(field_name, i) for i, c in coeffs)


def exchange_round(snapshot: dict, graph: CommGraph, audit: LocalityAudit,
                   buses=None) -> dict:
    """Deliver neighbor views of a committed snapshot.

    Parameters
    ----------
    snapshot : dict
        Field name -> length-N array. Copied, so later writes by the caller
        never leak into the delivered views.
    graph : CommGraph
    audit : LocalityAudit
    buses : iterable of int, optional
        Receiving buses (default all).

    Returns
    -------
    dict
        Bus index -> :class:`NeighborView`.
    """
    frozen = {k: np.array(v, dtype=float, copy=True) for k, v in snapshot.items()}
    for arr in frozen.values():
        arr.setflags(write=False)
    buses = range(graph.n) if buses is None else buses
    views = {}
    audit.phases += 1
    for j in buses:
        views[j] = NeighborView(j, graph.closed_neighborhood(j), frozen, audit)
        audit.messages += len(graph.neighbors[j]) * len(frozen)
    return views


@dataclass(frozen=True)
class UpdateSchedule:
    """Synchronous rounds, or seeded asynchronous activation with delay bound ``T``."""

    mode: str = "synchronous"
    T: int = 1
    seed: int = 0
    horizon: int = 10_000
    p_active: float = 0.5

    def __post_init__(self):
        if self.mode not in ("synchronous", "asynchronous"):
            raise DomainError(f"unknown schedule mode {self.mode!r}")
        if self.T < 1:
            raise DomainError("delay bound T must be >= 1")
        if not 0.0 < self.p_active <= 1.0:
            raise DomainError("p_active must lie in (0, 1]")


@lru_cache(maxsize=32)
def _activation_table(mode, T, seed, p_active, K, horizon) -> np.ndarray:
    if mode == "synchronous" or T == 1:
        return np.ones((horizon, K), dtype=bool)
    rng = np.random.default_rng(seed)
    idle = np.zeros(K, dtype=int)
    table = np.empty((horizon, K), dtype=bool)
    for t in range(horizon):
        act = (rng.random(K) < p_active) | (idle >= T - 1)
        table[t] = act
        idle = np.where(act, 0, idle + 1)
    table.setflags(write=False)
    return table


def activation_table(schedule: UpdateSchedule, K: int, horizon: int | None = None) -> np.ndarray:
    """Boolean ``(horizon, K)`` table of which areas update at each tick."""
    h = schedule.horizon if horizon is None else horizon
    return _activation_table(schedule.mode, schedule.T, schedule.seed,
                             schedule.p_active, K, h)


def async_tick(schedule: UpdateSchedule, tick: int, K: int) -> frozenset:
    """Areas active at ``tick``. An area idle for ``T - 1`` ticks is forced on."""
    if schedule.mode == "synchronous" or schedule.T == 1:
        return frozenset(range(K))
    horizon = max(schedule.horizon, tick + 1)
    row = activation_table(schedule, K, horizon)[tick]
    return frozenset(np.flatnonzero(row).tolist())


def max_idle_gap(table: np.ndarray) -> int:
    """Longest run of consecutive inactive ticks over all areas."""
    worst = 0
    for col in np.asarray(table).T:
        run = 0
        for a in col:
            run = 0 if a else run + 1
            worst = max(worst, run)
    return worst
