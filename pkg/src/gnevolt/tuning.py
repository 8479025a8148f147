"""Grid-search helpers for the fixed step sizes of each solver.

Every candidate is run to ``||q - q*|| <= target``; the cheapest converged
candidate wins. ADMM candidates use the compact recursion, whose iterates
equal the per-bus ones.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

from .solvers.admm import AdmmConfig, default_beta, run_admm_compact
from .solvers.baselines import IterConfig, run_extragradient, run_gradient_play

log = logging.getLogger(__name__)


@dataclass
class TuningResult:
    best: dict | None
    iterations: int | None
    table: list = field(default_factory=list)   # (params, iterations or None)

    def to_dict(self) -> dict:
        return {**(self.best or {}), "iterations": self.iterations, "source": "grid search"}


def grid_search(run, grid: dict) -> TuningResult:
    """Evaluate ``run(**params)`` over the Cartesian product of ``grid``.

    ``run`` returns an iteration count or None when the candidate failed.
    """
    keys = list(grid)
    table = []
    for values in itertools.product(*(grid[k] for k in keys)):
        params = dict(zip(keys, values))
        it = run(**params)
        log.debug("%s -> %s", params, it)
        table.append((params, it))
    ok = [(it, p) for p, it in table if it is not None]
    if not ok:
        return TuningResult(None, None, table)
    it, best = min(ok, key=lambda x: x[0])
    return TuningResult(best, it, table)


def tune_admm(scenario, reference, rhos, beta_factors=(1.0,), target=1e-8,
              max_iter=20_000) -> TuningResult:
    def run(rho, beta_factor):
        cfg = AdmmConfig(rho=rho, beta=default_beta(scenario, rho, beta_factor),
                         stop="reference", target=target, max_iter=max_iter,
                         record_every=max_iter)
        tr = run_admm_compact(scenario, cfg, reference=reference)
        return tr.iterations if tr.converged else None
    return grid_search(run, {"rho": rhos, "beta_factor": beta_factors})


def tune_extragradient(scenario, reference, alphas, rhos=(1.0,), target=1e-8,
                       max_iter=500_000) -> TuningResult:
    def run(alpha, rho):
        cfg = IterConfig(max_iter=max_iter, stop="reference", target=target,
                         record_every=max_iter, rho=rho)
        tr = run_extragradient(scenario, alpha, cfg, reference=reference)
        return tr.iterations if tr.converged else None
    return grid_search(run, {"alpha": alphas, "rho": rhos})


def tune_gradient_play(scenario, reference, epsilons, target=1e-8,
                       max_iter=100_000) -> TuningResult:
    def run(epsilon):
        cfg = IterConfig(max_iter=max_iter, stop="reference", target=target,
                         record_every=max_iter)
        tr = run_gradient_play(scenario, epsilon, cfg, reference=reference)
        return tr.iterations if tr.converged else None
    return grid_search(run, {"epsilon": epsilons})
