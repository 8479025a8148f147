"""Command-line entry point ``gnevolt``.

Exit codes: 0 success, 1 other failure, 2 scenario/schema error,
3 divergence, 4 several equilibria found without ``--allow-multiple``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigurationError, GneVoltError, NonUniqueEquilibrium, ScenarioError
from .runner import (async_sweep, canonical_algorithm, compare, format_compare,
                     parameter_report, reference_pair, run_scenario,
                     solver_settings)
from .scenario import bundled_names, load_scenario

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_DIVERGED, EXIT_NONUNIQUE = 0, 1, 2, 3, 4

log = logging.getLogger("gnevolt")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _names(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _grid(text: str) -> dict:
    """``rho=1e-5,1e-4;beta_factor=1,2`` -> ``{"rho": [...], "beta_factor": [...]}``."""
    out = {}
    for part in text.split(";"):
        if not part.strip():
            continue
        key, _, vals = part.partition("=")
        out[key.strip()] = _floats(vals)
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gnevolt", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the configured solver on a scenario")
    r.add_argument("scenario", help="scenario file or bundled name")
    r.add_argument("--algorithm", help="admm, admm_compact, eg or gp (default: scenario)")
    r.add_argument("--trace", type=Path, help="write the CSV trace here")
    r.add_argument("--report", type=Path, help="write the JSON report here (default: stdout)")
    r.add_argument("--reference", action="store_true",
                   help="also solve the reference equilibrium and the centralized optimum")
    r.add_argument("--allow-multiple", action="store_true",
                   help="do not fail when several equilibria exist")
    r.add_argument("--record-every", type=int, help="trace subsampling (final row always kept)")
    r.add_argument("--max-iter", type=int)

    c = sub.add_parser("compare", help="iteration counts over a sweep of quadratic cost coefficients")
    c.add_argument("scenario")
    c.add_argument("--costs", type=_floats, default=[1e-4, 1e-2, 1e-1, 1.0])
    c.add_argument("--algorithms", type=_names, default=["admm", "eg"])
    c.add_argument("--max-iter", type=int, default=500_000)
    c.add_argument("--target", type=float, default=1e-8)
    c.add_argument("--json", type=Path, help="also write the cell results as JSON")
    c.add_argument("--parallel", action="store_true", help="run cells in worker processes")

    k = sub.add_parser("check-params", help="step-size conditions and monotonicity constants")
    k.add_argument("scenario")
    k.add_argument("--rho", type=float)
    k.add_argument("--beta", type=float)

    a = sub.add_parser("async-sweep", help="ADMM under bounded-delay asynchronous schedules")
    a.add_argument("scenario")
    a.add_argument("--delays", type=_ints, default=[1, 5, 10])
    a.add_argument("--trace-dir", type=Path, help="write trace_T<T>.csv files here")
    a.add_argument("--seed", type=int)
    a.add_argument("--max-iter", type=int)
    a.add_argument("--record-every", type=int, default=1)

    t = sub.add_parser("tune", help="grid-search fixed step sizes for one algorithm")
    t.add_argument("scenario")
    t.add_argument("--algorithm", required=True)
    t.add_argument("--grid", type=_grid, required=True,
                   help="e.g. 'rho=1e-5,1e-4;beta_factor=1,2' or 'alpha=1e-3,1e-2'")
    t.add_argument("--cost", type=float, help="override the quadratic coefficient first")
    t.add_argument("--max-iter", type=int, default=20_000)
    t.add_argument("--target", type=float, default=1e-8)

    sub.add_parser("list", help="list bundled scenarios")
    return p


def _cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    trace, report = run_scenario(sc, args.algorithm, with_reference=args.reference,
                                 allow_multiple=args.allow_multiple, trace_path=args.trace,
                                 record_every=args.record_every, max_iter=args.max_iter)
    _emit(report.to_json(), args.report)
    if trace.status == "diverged":
        print(f"error: {sc.name}: {report.algorithm} diverged at iteration {trace.iterations}",
              file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _cmd_compare(args) -> int:
    sc = load_scenario(args.scenario)
    try:
        results = compare(sc, args.costs, args.algorithms, max_iter=args.max_iter,
                          target=args.target, parallel=args.parallel)
    except GneVoltError as exc:
        raise GneVoltError(f"reference solve failed: {exc}") from exc
    sys.stdout.write(format_compare(results, args.costs, args.algorithms))
    if args.json:
        args.json.write_text(json.dumps(results, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _cmd_check(args) -> int:
    sc = load_scenario(args.scenario)
    rho, beta = args.rho, args.beta
    if rho is None:
        rho = solver_settings(sc, "admm").get("rho")
    rep = parameter_report(sc, rho, beta)
    width = max(len(k) for k in rep)
    for key, val in rep.items():
        print(f"{key.ljust(width)}  {val!r}" if isinstance(val, float) else f"{key.ljust(width)}  {val}")
    return EXIT_OK


def _cmd_async(args) -> int:
    sc = load_scenario(args.scenario)
    ref, runs = async_sweep(sc, args.delays, max_iter=args.max_iter, seed=args.seed,
                            record_every=args.record_every)
    if args.trace_dir:
        args.trace_dir.mkdir(parents=True, exist_ok=True)
    summary = []
    for T, tr in runs:
        path = None
        if args.trace_dir:
            path = args.trace_dir / f"trace_T{T}.csv"
            tr.to_csv(path)
        summary.append({"T": T, "status": tr.status, "iterations": tr.iterations,
                        "dist_to_ref": tr.final.dist_to_ref,
                        "violations": tr.audit.get("violations", 0),
                        "trace": None if path is None else str(path)})
    print(json.dumps(summary, indent=2))
    return EXIT_DIVERGED if any(s["status"] == "diverged" for s in summary) else EXIT_OK


def _cmd_tune(args) -> int:
    from .tuning import tune_admm, tune_extragradient, tune_gradient_play
    sc = load_scenario(args.scenario)
    if args.cost is not None:
        sc = sc.with_costs(args.cost)
    ref, _ = reference_pair(sc)
    alg = canonical_algorithm(args.algorithm)
    g = args.grid
    kw = {"target": args.target, "max_iter": args.max_iter}
    if alg in ("admm", "admm_compact"):
        res = tune_admm(sc, ref, g.get("rho", [1.0]), g.get("beta_factor", [1.0]), **kw)
    elif alg == "eg":
        res = tune_extragradient(sc, ref, g.get("alpha", [1e-2]), g.get("rho", [1.0]), **kw)
    else:
        res = tune_gradient_play(sc, ref, g.get("epsilon", [1e-2]), **kw)
    print(json.dumps({"best": res.to_dict() if res.best else None,
                      "table": [{**p, "iterations": it} for p, it in res.table]}, indent=2))
    return EXIT_OK if res.best else EXIT_FAIL


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": _cmd_run, "compare": _cmd_compare, "check-params": _cmd_check,
                "async-sweep": _cmd_async, "tune": _cmd_tune}
    try:
        if args.command == "list":
            print("\n".join(bundled_names()))
            return EXIT_OK
        return handlers[args.command](args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except NonUniqueEquilibrium as exc:
        print(f"error: {exc} (pass --allow-multiple to continue)", file=sys.stderr)
        return EXIT_NONUNIQUE
    except (GneVoltError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
