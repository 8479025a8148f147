"""Per-bus VAR provision costs and the aggregate cost model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


class BusCost:
    """Scalar convex, continuously differentiable cost ``C_j(q_j)``.

    Subclasses provide ``value``, ``derivative`` and ``curvature_bound``
    (an upper bound on ``C_j''`` over the feasible interval, used for
    step-size selection).
    """

    name = "generic"

    def value(self, q):
        raise NotImplementedError

    def derivative(self, q):
        raise NotImplementedError

    def second_derivative(self, q):
        h = 1e-6
        return (self.derivative(q + h) - self.derivative(q - h)) / (2 * h)

    def curvature_bound(self, lo, hi):
        grid = np.linspace(lo, hi, 65)
        return float(np.max(self.second_derivative(grid)))

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class QuadraticCost(BusCost):
    c: float

    name = "quadratic"

    def __post_init__(self):
        if self.c < 0:
            raise DomainError(f"quadratic cost coefficient must be >= 0, got {self.c}")

    def value(self, q):
        return 0.5 * self.c * np.square(q)

    def derivative(self, q):
        return self.c * np.asarray(q, dtype=float)

    def second_derivative(self, q):
        return np.full_like(np.asarray(q, dtype=float), self.c)

    def curvature_bound(self, lo, hi):
        return self.c

    def to_dict(self):
        return {"type": "quadratic", "c": self.c}


@dataclass(frozen=True)
class QuarticCost(BusCost):
    """``c/2 q^2 + d/4 q^4``."""

    c: float
    d: float

    name = "quartic"

    def __post_init__(self):
        if self.c < 0 or self.d < 0:
            raise DomainError("quartic cost coefficients must be >= 0")

    def value(self, q):
        q = np.asarray(q, dtype=float)
        return 0.5 * self.c * q**2 + 0.25 * self.d * q**4

    def derivative(self, q):
        q = np.asarray(q, dtype=float)
        return self.c * q + self.d * q**3

    def second_derivative(self, q):
        q = np.asarray(q, dtype=float)
        return self.c + 3 * self.d * q**2

    def curvature_bound(self, lo, hi):
        return self.c + 3 * self.d * max(lo * lo, hi * hi)

    def to_dict(self):
        return {"type": "quartic", "c": self.c, "d": self.d}


@dataclass(frozen=True)
class LogCoshCost(BusCost):
    """``a s log cosh(q / s)``: smooth approximation of ``a |q|``."""

    a: float
    s: float

    name = "logcosh"

    def __post_init__(self):
        if self.a < 0 or not self.s > 0:
            raise DomainError("logcosh cost needs a >= 0 and s > 0")

    def value(self, q):
        z = np.asarray(q, dtype=float) / self.s
        # log cosh z = |z| + log1p(exp(-2|z|)) - log 2, overflow-free
        az = np.abs(z)
        return self.a * self.s * (az + np.log1p(np.exp(-2 * az)) - np.log(2.0))

    def derivative(self, q):
        return self.a * np.tanh(np.asarray(q, dtype=float) / self.s)

    def second_derivative(self, q):
        return self.a / self.s / np.cosh(np.asarray(q, dtype=float) / self.s) ** 2

    def curvature_bound(self, lo, hi):
        return self.a / self.s

    def to_dict(self):
        return {"type": "logcosh", "a": self.a, "s": self.s}


_COST_TYPES = {"quadratic": QuadraticCost, "quartic": QuarticCost, "logcosh": LogCoshCost}


def cost_from_dict(entry) -> BusCost:
    entry = dict(entry)
    kind = entry.pop("type", "quadratic")
    try:
        cls = _COST_TYPES[kind]
    except KeyError:
        raise DomainError(f"unknown cost type {kind!r}") from None
    return cls(**{k: float(v) for k, v in entry.items()})


@dataclass(frozen=True)
class CostModel:
    """``gamma/2 ||v - mu||^2 + sum_j C_j(q_j)``."""

    gamma: float
    mu: np.ndarray
    bus_costs: tuple[BusCost, ...]
    _c: np.ndarray | None = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.gamma < 0:
            raise DomainError(f"gamma must be >= 0, got {self.gamma}")
        mu = np.array(self.mu, dtype=float)
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "bus_costs", tuple(self.bus_costs))
        if len(self.bus_costs) != mu.size:
            raise DomainError("one cost per bus required")
        if all(isinstance(b, QuadraticCost) for b in self.bus_costs):
            c = np.array([b.c for b in self.bus_costs])
            c.setflags(write=False)
            object.__setattr__(self, "_c", c)
        else:
            object.__setattr__(self, "_c", None)

    @classmethod
    def quadratic(cls, gamma, mu, c) -> "CostModel":
        mu = np.asarray(mu, dtype=float)
        c = np.broadcast_to(np.asarray(c, dtype=float), mu.shape)
        return cls(gamma, mu, tuple(QuadraticCost(float(ci)) for ci in c))

    def with_coefficients(self, c) -> "CostModel":
        return CostModel.quadratic(self.gamma, self.mu, c)

    @property
    def N(self):
        return self.mu.size

    @property
    def is_quadratic(self) -> bool:
        return self._c is not None

    @property
    def coefficients(self) -> np.ndarray:
        if self._c is None:
            raise DomainError("cost model is not quadratic")
        return self._c

    def cost_values(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self._c is not None:
            return 0.5 * self._c * q * q
        return np.array([b.value(qj) for b, qj in zip(self.bus_costs, q)], dtype=float)

    def gradient(self, q) -> np.ndarray:
        """``grad h(q) = [C_j'(q_j)]_j``."""
        q = np.asarray(q, dtype=float)
        if self._c is not None:
            return self._c * q
        return np.array([b.derivative(qj) for b, qj in zip(self.bus_costs, q)], dtype=float)

    def hessian_diag(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self._c is not None:
            return self._c.copy()
        return np.array([b.second_derivative(qj) for b, qj in zip(self.bus_costs, q)],
                        dtype=float)

    def curvature_bound(self, limits) -> float:
        return max(b.curvature_bound(lo, hi) for b, lo, hi in
                   zip(self.bus_costs, limits.lower, limits.upper))

    def check_convex(self, limits, samples: int = 33) -> bool:
        """Spot check: each ``C_j'`` is nondecreasing on a sample grid of ``Q_j``."""
        for b, lo, hi in zip(self.bus_costs, limits.lower, limits.upper):
            d = np.asarray(b.derivative(np.linspace(lo, hi, samples)))
            if np.any(np.diff(d) < -1e-12 * (1 + np.abs(d[:-1]))):
                return False
        return True
