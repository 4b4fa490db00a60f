"""Command line front end.

    hybridopf validate pjm5_hybrid
    hybridopf solve pjm5_hybrid --out results.json
    hybridopf verify-exactness pjm5_hybrid --samples 100 --starts 20
    hybridopf plan-upgrade pjm5_ac
    hybridopf report results.json

Cases are looked up as a path, then as ``<name>.json`` in $HYBRIDOPF_CASE_DIR, then
among the bundled cases. Exit codes: 0 success, 2 validation, 3 solver, 4 exactness,
5 I/O.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from .cases import CaseError, load_case
from .exactness import verify_exactness
from .grid import validate_topology
from .opf import KAPPA_THRESHOLD, GridValidationError, solve_opf
from .oracle import check_feasibility, local_search_opf
from .planner import DcTemplate, TooManyTreesError, count_spanning_trees, plan_upgrade
from .solver import SolverSettings

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_EXACTNESS = 4
EXIT_IO = 5


def _print(*args):
    print(*args, file=sys.stdout)


def _err(*args):
    print(*args, file=sys.stderr)


def _settings(args) -> SolverSettings:
    return replace(SolverSettings(), gap_tol=args.gap_tol)


def _load(args):
    name = args.case_opt or args.case
    if not name:
        raise CaseError("no case given (positional argument or --case)")
    return load_case(name)


def _mark(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


# --- rendering ---------------------------------------------------------------------------------


def _tidy(data):
    # rounding -1e-9 to two decimals would print "-0.00"
    if isinstance(data, dict):
        return {k: _tidy(v) for k, v in data.items()}
    if isinstance(data, list):
        return [_tidy(v) for v in data]
    if isinstance(data, float) and abs(data) < 5e-4:
        return 0.0
    return data


def format_report(data: dict) -> str:
    """Text tables for a structured results dict (as written by ``solve --out``)."""
    data = _tidy(data)
    lines = []
    lines.append(f"{'Bus':>4} {'P_gen [MW]':>11} {'Q_gen [MVAr]':>13} {'|V| [p.u.]':>11} {'angle [deg]':>12}")
    for b in data["buses"]:
        lines.append(f"{b['id']:>4} {b['p_gen_mw']:>11.2f} {b['q_gen_mvar']:>13.2f} "
                     f"{b['v_mag_pu']:>11.3f} {b['v_angle_deg']:>12.3f}")
    if data["dc_branches"]:
        lines.append("")
        lines.append(f"{'DC':>4} {'P [MW]':>11}")
        for d in data["dc_branches"]:
            lines.append(f"{d['index']:>4} {d['p_mw']:>11.2f}")
    lines.append("")
    lines.append(f"{'AC':>4} {'S_from [MVA]':>13} {'pf_from':>8} {'S_to [MVA]':>11} {'pf_to':>8} "
                 f"{'drop [%]':>9} {'delta [deg]':>12}")
    for a in data["ac_branches"]:
        lines.append(f"{a['index']:>4} {a['s_from_mva']:>13.2f} {a['pf_from']:>8.3f} {a['s_to_mva']:>11.2f} "
                     f"{a['pf_to']:>8.3f} {a['drop_pct']:>9.2f} {a['angle_diff_deg']:>12.3f}")
    t = data["totals"]
    lines.append("")
    lines.append(f"generation cost: {t['cost_per_h']:.2f} $/h")
    lines.append(f"losses: {t['losses_mw']:.2f} MW (AC {t['ac_losses_mw']:.2f}, DC {t['dc_losses_mw']:.2f})")
    return "\n".join(lines)


# --- subcommands -------------------------------------------------------------------------------


def cmd_validate(args) -> int:
    case = _load(args)
    report = validate_topology(case.grid)
    if report.ok:
        _print(f"{case.grid.name or 'case'}: admissible ({case.grid.n_bus} buses, "
               f"{case.grid.n_ac} AC, {case.grid.n_dc} DC branches)")
        return EXIT_OK
    _print(str(report))
    return EXIT_VALIDATION


def cmd_solve(args) -> int:
    case = _load(args)
    res = solve_opf(case.grid, case.weights, _settings(args), args.kappa_threshold)
    sol = res.solution
    if not sol.optimal:
        _err(f"solver status: {sol.status} after {sol.iterations} iterations (gap {sol.gap:.3e})")
        return EXIT_SOLVER
    data = res.report().to_dict()
    data["solver"] = {"status": sol.status, "iterations": sol.iterations, "objective": sol.objective,
                      "gap": sol.gap, "kappa": res.state.kappa, "exact": res.state.exact}
    _print(format_report(data))
    _print(f"objective: {sol.objective:.2f} $/h   kappa: {res.state.kappa:.3e}")
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                json.dump(data, fh, indent=2)
        except OSError as exc:
            _err(f"cannot write {args.out}: {exc}")
            return EXIT_IO
    if not res.state.exact:
        _err(f"relaxation not exact: kappa {res.state.kappa:.3e} > {args.kappa_threshold:.1e}")
        return EXIT_EXACTNESS
    return EXIT_OK


def cmd_verify(args) -> int:
    case = _load(args)
    res = solve_opf(case.grid, case.weights, _settings(args), args.kappa_threshold)
    if not res.solution.optimal:
        _err(f"solver status: {res.solution.status}")
        return EXIT_SOLVER
    summary = verify_exactness(case.grid, res.qcqp, res.solution, args.samples, args.seed)
    k = summary.kkt
    checks = [
        ("cone half-spaces (all branches)", summary.halfspaces_ok),
        ("objective strictly inside (tree edges)", summary.interior_ok),
        (f"graph of Psi equals AC tree ({summary.psi_graph.samples} multipliers)", bool(summary.psi_graph)),
        (f"KKT certificate (rank Psi = {k.psi_rank}, tr(Psi V) = {k.trace_psi_v:.1e}, "
         f"cs = {k.comp_slack_max:.1e})", summary.kkt_ok()),
        (f"rank-1 recovery (kappa = {res.state.kappa:.2e})", res.state.exact),
    ]
    feas = check_feasibility(res.qcqp, res.state.v, res.state.p)
    checks.append((f"recovered state feasible (max violation {feas.max_violation:.1e})", feas.feasible))
    if args.starts > 0:
        ls = local_search_opf(res.qcqp, args.starts, args.seed)
        bound = res.solution.objective - 1e-4 * abs(res.solution.objective)
        ok = (not ls.found) or ls.objective >= bound
        best = f"{ls.objective:.2f}" if ls.found else "none"
        checks.append((f"local search never beats relaxation ({args.starts} starts, best {best})", ok))
    for label, ok in checks:
        _print(f"{_mark(ok)}  {label}")
    return EXIT_OK if all(ok for _, ok in checks) else EXIT_EXACTNESS


def cmd_plan(args) -> int:
    case = _load(args)
    grid = case.grid
    cfg = case.planner
    idx = {b.id: n for n, b in enumerate(grid.buses)}
    eta = args.eta / 100 if args.eta is not None else (cfg.eta if cfg else 0.035)
    directional = frozenset((idx[a], idx[b]) for a, b in (cfg.directional if cfg else []))
    ranked = plan_upgrade(grid, DcTemplate(eta, directional), case.weights, _settings(args))
    _print(f"{count_spanning_trees(grid)} spanning trees, DC loss factor {eta * 100:.2f}%")
    _print(f"{'rank':>4}  {'converted lines':<24} {'cost [$/h]':>11} {'kappa':>10}  status")

    def label(k):
        br = grid.ac_branches[k]
        return f"{grid.bus_label(br.from_bus)}-{grid.bus_label(br.to_bus)}"

    for r, cand in enumerate(ranked, 1):
        conv = ", ".join(label(k) for k in cand.converted_edges) or "(none)"
        if cand.result is None:
            _print(f"{r:>4}  {conv:<24} {'-':>11} {'-':>10}  failed: {cand.error.splitlines()[0]}")
        else:
            _print(f"{r:>4}  {conv:<24} {cand.result.cost:>11.2f} {cand.result.kappa:>10.2e}  {cand.result.status}")
    if args.out:
        rows = [{"converted": [label(k) for k in c.converted_edges],
                 "cost_per_h": c.result.cost if c.result else None,
                 "kappa": c.result.kappa if c.result else None,
                 "status": c.result.status if c.result else "failed"} for c in ranked]
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                json.dump({"eta": eta, "candidates": rows}, fh, indent=2)
        except OSError as exc:
            _err(f"cannot write {args.out}: {exc}")
            return EXIT_IO
    if not ranked or ranked[0].result is None or ranked[0].result.status != "optimal":
        return EXIT_SOLVER
    return EXIT_OK


def cmd_report(args) -> int:
    with open(args.results, encoding="utf-8") as fh:
        data = json.load(fh)
    try:
        _print(format_report(data))
    except (KeyError, TypeError) as exc:
        _err(f"{args.results}: not a results file (missing {exc})")
        return EXIT_IO
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridopf", description="OPF for hybrid AC/DC grids with a tree-shaped AC part")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_case(p):
        p.add_argument("case", nargs="?", help="case name or path")
        p.add_argument("--case", dest="case_opt", help="case name or path")
        return p

    def with_solver(p):
        p.add_argument("--gap-tol", type=float, default=SolverSettings().gap_tol)
        p.add_argument("--kappa-threshold", type=float, default=KAPPA_THRESHOLD)
        return p

    with_case(sub.add_parser("validate", help="check the grid requirements")).set_defaults(func=cmd_validate)

    p = with_solver(with_case(sub.add_parser("solve", help="solve the OPF and print the operating point")))
    p.add_argument("--out", help="write structured results (JSON)")
    p.set_defaults(func=cmd_solve)

    p = with_solver(with_case(sub.add_parser("verify-exactness", help="run the exactness certificates")))
    p.add_argument("--samples", type=int, default=100, help="random multiplier draws for the graph check")
    p.add_argument("--starts", type=int, default=20, help="local search starts (0 disables)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = with_solver(with_case(sub.add_parser("plan-upgrade", help="rank spanning-tree upgrade candidates")))
    p.add_argument("--eta", type=float, help="DC loss factor in percent (overrides the case)")
    p.add_argument("--out", help="write the ranking (JSON)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("report", help="print tables from a results file written by solve --out")
    p.add_argument("results")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CaseError, GridValidationError, TooManyTreesError) as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    except (OSError, json.JSONDecodeError) as exc:
        _err(f"I/O error: {exc}")
        return EXIT_IO
    except np.linalg.LinAlgError as exc:
        _err(f"solver failure: {exc}")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
