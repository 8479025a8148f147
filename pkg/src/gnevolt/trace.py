"""Per-iteration convergence records and their CSV serialization."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

CSV_COLUMNS = ("t", "objective", "nat_residual", "ec_residual",
               "dist_to_ref", "dist_to_opt", "audit_violations")


@dataclass
class TraceRecord:
    t: int
    objective: float
    nat_residual: float
    ec_residual: float
    dist_to_ref: float | None = None
    dist_to_opt: float | None = None
    audit_violations: int = 0
    area_payoffs: np.ndarray | None = None


@dataclass
class ConvergenceTrace:
    """Output of every iterative solver.

    ``records`` holds the sampled per-iteration metrics. ``ergodic`` holds
    ``(t, running mean of omega_tilde)`` pairs when tracking was requested,
    ``iterates``/``aux_iterates`` the raw ``omega^(t)``/``omega_tilde^(t)``
    stacks when ``keep_iterates`` was set.
    """

    algorithm: str
    params: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    converged: bool = False
    status: str = "max_iter"
    iterations: int = 0
    v: np.ndarray | None = None
    q: np.ndarray | None = None
    theta: np.ndarray | None = None
    omega0: np.ndarray | None = None
    ergodic: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    aux_iterates: list = field(default_factory=list)
    audit: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def append(self, rec: TraceRecord) -> None:
        if self.records and rec.t <= self.records[-1].t:
            raise ValueError("trace iteration indices must be strictly increasing")
        self.records.append(rec)

    @property
    def final(self) -> TraceRecord | None:
        return self.records[-1] if self.records else None

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name)
                         for r in self.records], dtype=float)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.records:
            writer.writerow([str(r.t), fmt(r.objective), fmt(r.nat_residual),
                             fmt(r.ec_residual), fmt(r.dist_to_ref), fmt(r.dist_to_opt),
                             str(int(r.audit_violations))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="ascii", newline="") as fh:
                fh.write(text)
        return text


def fmt(x) -> str:
    """Shortest round-trip decimal; empty for missing values."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="ascii") as fh:
        return list(csv.DictReader(fh))
