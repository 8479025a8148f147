"""Experiment orchestration shared by the CLI and the acceptance suite."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .comms import UpdateSchedule
from .errors import ConfigurationError, NonUniqueEquilibrium
from .game import (f_monotonicity_minimum, global_objective, phi_jacobian_symmetric_part_minimum,
                   sampled_strong_monotonicity)
from .solvers import (AdmmConfig, IterConfig, default_beta, run_admm, run_admm_compact,
                      run_extragradient, run_gradient_play, solve_global_optimum,
                      solve_reference_gne, theorem2_parameters)

ALGORITHMS = ("admm", "admm_compact", "eg", "gp")
_ALIASES = {"extragradient": "eg", "gradient_play": "gp", "admm-compact": "admm_compact"}
DASH = "—"


def canonical_algorithm(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in ALGORITHMS:
        raise ConfigurationError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}")
    return name


@dataclass
class RunReport:
    scenario: str
    algorithm: str
    params: dict
    converged: bool
    status: str
    iterations: int
    nat_residual: float
    ec_residual: float
    objective: float
    dist_to_ref: float | None = None
    optimum_objective: float | None = None
    ratio: float | None = None
    reference_ratio: float | None = None
    reference_unique: bool | None = None
    parameter_conditions: dict = field(default_factory=dict)
    audit: dict = field(default_factory=dict)
    trace_path: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"not serializable: {type(x).__name__}")


def lookup_tuning(scenario, algorithm: str, cost: float | None = None) -> dict:
    """Stored step sizes: a per-cost cell when present, else the scenario default."""
    t = scenario.tunings
    if cost is not None:
        for key, cell in t.get("by_cost", {}).items():
            if math.isclose(float(key), cost, rel_tol=1e-9) and cell.get(algorithm):
                return dict(cell[algorithm])
    return dict(t.get(algorithm, {}))


def solver_settings(scenario, algorithm: str, cost: float | None = None) -> dict:
    """Merge the scenario's solver block with the stored tuning (tuning wins)."""
    s = {k: v for k, v in scenario.solver.items() if k != "algorithm"}
    s.update({k: v for k, v in lookup_tuning(scenario, algorithm, cost).items()
              if k not in ("iterations", "source")})
    return s


def execute(scenario, algorithm: str, settings: dict, *, reference=None, optimum=None,
            schedule: UpdateSchedule | None = None, record_every: int | None = None,
            max_iter: int | None = None, stop: str | None = None, target: float | None = None):
    """Run one solver with ``settings`` (rho, beta or beta_factor, alpha, epsilon, tol, ...)."""
    algorithm = canonical_algorithm(algorithm)
    s = dict(settings)
    if max_iter is not None:
        s["max_iter"] = max_iter
    if stop is not None:
        s["stop"] = stop
    if target is not None:
        s["target"] = target
    if record_every is not None:
        s["record_every"] = record_every
    common = {k: s[k] for k in ("max_iter", "tol", "stop", "target", "record_every") if k in s}
    if algorithm in ("admm", "admm_compact"):
        rho = float(s.get("rho") or theorem2_parameters(scenario.decomp, scenario.model).rho_max)
        beta = float(s["beta"]) if "beta" in s else default_beta(scenario, rho,
                                                                 float(s.get("beta_factor", 1.0)))
        cfg = AdmmConfig(rho=rho, beta=beta, **common,
                         **{k: s[k] for k in ("theta_tol", "root_find_tol", "v_update") if k in s})
        if algorithm == "admm":
            return run_admm(scenario, cfg, schedule=schedule, reference=reference, optimum=optimum)
        return run_admm_compact(scenario, cfg, reference=reference, optimum=optimum)
    if algorithm == "eg":
        cfg = IterConfig(**common, rho=float(s.get("rho", 1.0)))
        return run_extragradient(scenario, float(s.get("alpha", 1e-2)), cfg,
                                 reference=reference, optimum=optimum)
    cfg = IterConfig(**common)
    return run_gradient_play(scenario, float(s.get("epsilon", 1e-2)), cfg,
                             reference=reference, optimum=optimum)


def parameter_report(scenario, rho: float | None = None, beta: float | None = None) -> dict:
    """Step-size limits, eigenvalue checks, and the strong-monotonicity constant."""
    sc = scenario
    rep = theorem2_parameters(sc.decomp, sc.model, rho, beta)
    out = {
        "rho_max": rep.rho_max,
        "beta_factor": rep.beta_factor,
        "rho": rep.rho,
        "beta": rep.beta,
        "beta_min": rep.beta_min(rep.rho),
        "admissible": rep.admissible,
        "lambda_min_sym_H": rep.lam_min_H,
        "lambda_min_sym_R": rep.lam_min_R,
        "lambda_min_sym_gradF": f_monotonicity_minimum(rep.rho, sc.model, sc.costs, sc.decomp),
    }
    if sc.costs.is_quadratic:
        out["strong_monotonicity"] = phi_jacobian_symmetric_part_minimum(sc.model, sc.costs,
                                                                        sc.decomp)
        out["strong_monotonicity_method"] = "exact"
    else:
        out["strong_monotonicity"] = sampled_strong_monotonicity(sc.model, sc.costs, sc.decomp,
                                                                sc.limits)
        out["strong_monotonicity_method"] = "sampled"
    return out


def reference_pair(scenario, allow_multiple: bool = False):
    """Reference equilibrium and centralized optimum.

    Raises
    ------
    NonUniqueEquilibrium
        When several equilibria are found and ``allow_multiple`` is False.
    """
    ref = solve_reference_gne(scenario)
    if ref.unique is False and not allow_multiple:
        raise NonUniqueEquilibrium(
            f"{1 + len(ref.alternatives)} distinct equilibria found",
            [ref.q] + [a.q for a in ref.alternatives])
    return ref, solve_global_optimum(scenario)


def run_scenario(scenario, algorithm: str | None = None, *, with_reference: bool = False,
                 allow_multiple: bool = False, trace_path=None, record_every: int | None = None,
                 max_iter: int | None = None):
    """Run the configured solver and assemble a ``RunReport``."""
    sc = scenario
    algorithm = canonical_algorithm(algorithm or sc.solver.get("algorithm", "admm"))
    settings = solver_settings(sc, algorithm)
    ref = opt = None
    if with_reference or settings.get("stop") == "reference":
        ref, opt = reference_pair(sc, allow_multiple)
    trace = execute(sc, algorithm, settings, reference=ref, optimum=opt,
                    record_every=record_every, max_iter=max_iter)
    final = trace.final
    rho = trace.params.get("rho") if algorithm.startswith("admm") else None
    beta = trace.params.get("beta") if algorithm.startswith("admm") else None
    report = RunReport(
        scenario=sc.name, algorithm=algorithm, params=trace.params, converged=trace.converged,
        status=trace.status, iterations=trace.iterations, nat_residual=final.nat_residual,
        ec_residual=final.ec_residual, objective=final.objective, dist_to_ref=final.dist_to_ref,
        parameter_conditions=parameter_report(sc, rho, beta), audit=dict(trace.audit),
        trace_path=None if trace_path is None else str(trace_path))
    if opt is not None:
        report.optimum_objective = opt.objective
        report.ratio = _ratio(final.objective, opt.objective)
        report.reference_ratio = _ratio(_objective_at(sc, ref.q), opt.objective)
        report.reference_unique = ref.unique
    if trace_path is not None:
        trace.to_csv(trace_path)
    return trace, report


def _objective_at(sc, q):
    return global_objective(sc.model.solve(q + sc.model.w), q, sc.costs)


def _ratio(num, den):
    if den == 0:
        return 1.0 if abs(num) == 0 else math.inf
    return num / den


def _compare_cell(args):
    scenario, c, algorithm, max_iter, target = args
    sc = scenario.with_costs(c)
    ref = solve_reference_gne(sc)
    settings = solver_settings(sc, algorithm, c)
    tr = execute(sc, algorithm, settings, reference=ref, stop="reference", target=target,
                 max_iter=max_iter, record_every=max_iter)
    return {"c": c, "algorithm": algorithm, "iterations": tr.iterations if tr.converged else None,
            "status": tr.status, "dist_to_ref": tr.final.dist_to_ref,
            "violations": tr.audit.get("violations", 0),
            "params": {k: v for k, v in settings.items() if k in ("rho", "beta", "beta_factor",
                                                                "alpha", "epsilon")}}


def compare(scenario, costs, algorithms, *, max_iter: int = 500_000, target: float = 1e-8,
            parallel: bool = False) -> list[dict]:
    """Iterations to ``||q - q*|| <= target`` per (cost, algorithm) cell."""
    if not scenario.costs.is_quadratic:
        raise ConfigurationError("compare sweeps quadratic coefficients; costs must be quadratic")
    cells = [(scenario, float(c), canonical_algorithm(a), max_iter, target)
             for c in costs for a in algorithms]
    if parallel:
        with ProcessPoolExecutor() as pool:
            return list(pool.map(_compare_cell, cells))
    return [_compare_cell(cell) for cell in cells]


def format_compare(results, costs, algorithms) -> str:
    algorithms = [canonical_algorithm(a) for a in algorithms]
    by = {(r["c"], r["algorithm"]): r for r in results}
    head = ["c_j"] + algorithms
    rows = [head]
    for c in costs:
        row = [f"{float(c):g}"]
        for a in algorithms:
            it = by[(float(c), a)]["iterations"]
            row.append(DASH if it is None else str(it))
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
    return "\n".join("  ".join(cell.rjust(wd) for cell, wd in zip(r, widths)) for r in rows) + "\n"


def async_sweep(scenario, delays, *, max_iter: int | None = None, seed: int | None = None,
                record_every: int = 1, tol: float | None = None):
    """ADMM under asynchronous schedules with each delay bound ``T``.

    Returns ``(reference, [(T, trace), ...])``. Runs stop on the scenario's
    stopping rule; ``T = 1`` is the synchronous schedule.
    """
    ref, opt = reference_pair(scenario)
    settings = solver_settings(scenario, "admm")
    seed = scenario.schedule.seed if seed is None else seed
    out = []
    for T in delays:
        T = int(T)
        sched = UpdateSchedule("synchronous" if T == 1 else "asynchronous", T, seed)
        s = dict(settings)
        if tol is not None:
            s["tol"] = tol
        tr = execute(scenario, "admm", s, reference=ref, optimum=opt, schedule=sched,
                     max_iter=max_iter, record_every=record_every)
        out.append((T, tr))
    return ref, out
