"""Batch entry points: generate instances, solve, evaluate, and run the
factor-grid report.

Exit codes: 0 success/optimal, 2 flag errors, 3 time-limit incumbent,
4 infeasible instance, 5 invalid plan. One machine-parseable summary line
per command on stdout; logs go to stderr (RHHC_LOG sets the level).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time

from . import bnp, evaluator, instance_gen
from .errors import InfeasibleInstance, InvalidPlan, ParseError, RhhcError, ValidationError
from .model import load_instance, save_instance
from .plan import STATUS_OPTIMAL, load_plan, save_plan

log = logging.getLogger("rhhc")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_TIME_LIMIT = 3
EXIT_INFEASIBLE = 4
EXIT_INVALID_PLAN = 5

GRID_HEADER = [
    "region",
    "discipline",
    "tw",
    "uncertainty",
    "status",
    "profit",
    "revenue",
    "wage_cost",
    "travel_cost",
    "accepted",
    "runtime_s",
]


def _setup_logging() -> None:
    level = os.environ.get("RHHC_LOG", "WARNING").upper()
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _add_generate_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--region", choices=["t20", "t60"], default="t20")
    p.add_argument("--discipline", choices=["nursing", "pt"], default="nursing")
    p.add_argument("--tw", choices=["wide", "narrow", "tight"], default="wide")
    p.add_argument(
        "--uncertainty", choices=["none", "low", "medium", "high"], default="none"
    )
    p.add_argument("--existing", type=int, default=10, metavar="N")
    p.add_argument("--new-per-day", type=int, default=3, metavar="M")
    p.add_argument("--caregivers", type=int, default=3, metavar="K")
    p.add_argument("--days", type=int, default=5, metavar="D")
    p.add_argument("--seed", type=int, default=0, metavar="S")


def cmd_generate(args) -> int:
    inst = instance_gen.generate(
        args.region,
        args.discipline,
        args.tw,
        args.uncertainty,
        n_existing=args.existing,
        n_new_per_day=args.new_per_day,
        seed=args.seed,
        n_caregivers=args.caregivers,
        n_days=args.days,
    )
    save_instance(inst, args.out)
    print(
        f"generated patients={inst.n} caregivers={len(inst.caregivers)} "
        f"days={len(inst.days)} budgets=({inst.budgets.gamma_p},{inst.budgets.gamma_t}) "
        f"out={args.out}"
    )
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    config = bnp.SolveConfig(
        time_limit=args.time_limit, threads=args.threads, seed=args.seed
    )
    try:
        plan, stats = bnp.solve(inst, config)
    except InfeasibleInstance as exc:
        log.error("infeasible: %s", exc)
        print(f"infeasible reason={exc}")
        return EXIT_INFEASIBLE
    if args.out:
        save_plan(plan, inst, args.out)
    print(
        f"status={plan.status} profit={plan.profit} revenue={plan.revenue} "
        f"wage={plan.wage_cost} travel={plan.travel_cost} accepted={len(plan.accepted)} "
        f"columns={stats.columns_level1}+{stats.columns_level2} "
        f"nodes={stats.nodes_level1}+{stats.nodes_level2} "
        f"wall={stats.wall_time:.2f}s"
    )
    return EXIT_OK if plan.status == STATUS_OPTIMAL else EXIT_TIME_LIMIT


def cmd_evaluate(args) -> int:
    inst = load_instance(args.instance)
    plan = load_plan(args.plan, inst)
    violations = evaluator.validate_plan(plan, inst)
    if violations:
        for cid, msg in violations:
            print(f"violation({cid}): {msg}")
        print(f"verdict=invalid violations={len(violations)}")
        return EXIT_INVALID_PLAN
    breakdown = evaluator.profit(plan, inst, validate=False)
    line = (
        f"verdict=valid profit={breakdown.profit} revenue={breakdown.revenue} "
        f"wage={breakdown.wage_cost} travel={breakdown.travel_cost}"
    )
    if args.samples:
        sim = evaluator.simulate(plan, inst, samples=args.samples, seed=args.seed)
        if args.sim_out:
            with open(args.sim_out, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(sim.CSV_HEADER.split(","))
                writer.writerows(sim.rows)
        line += (
            f" samples={sim.samples} late_visits={sim.late_visits} "
            f"max_lateness={sim.max_lateness} overtime_days={sim.overtime_days} "
            f"max_overtime={sim.max_overtime}"
        )
    print(line)
    return EXIT_OK


def cmd_grid(args) -> int:
    rows = []
    for region in ("t20", "t60"):
        for discipline in ("nursing", "pt"):
            for tw in ("wide", "narrow", "tight"):
                for uncertainty in ("none", "low", "medium", "high"):
                    t0 = time.perf_counter()
                    row = {
                        "region": region,
                        "discipline": discipline,
                        "tw": tw,
                        "uncertainty": uncertainty,
                    }
                    try:
                        inst = instance_gen.generate(
                            region,
                            discipline,
                            tw,
                            uncertainty,
                            n_existing=args.existing,
                            n_new_per_day=args.new_per_day,
                            seed=args.seed,
                            n_caregivers=args.caregivers,
                            n_days=args.days,
                        )
                        plan, _stats = bnp.solve(
                            inst, bnp.SolveConfig(time_limit=args.time_limit)
                        )
                        row.update(
                            status=plan.status,
                            profit=plan.profit,
                            revenue=plan.revenue,
                            wage_cost=plan.wage_cost,
                            travel_cost=plan.travel_cost,
                            accepted=len(plan.accepted),
                        )
                    except RhhcError as exc:
                        log.error("%s/%s/%s/%s failed: %s", region, discipline, tw, uncertainty, exc)
                        row.update(status=f"error:{type(exc).__name__}")
                    row["runtime_s"] = round(time.perf_counter() - t0, 2)
                    rows.append(row)
                    log.info("grid cell done: %s", row)
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=GRID_HEADER, restval="")
        writer.writeheader()
        writer.writerows(rows)
    solved = sum(1 for r in rows if str(r.get("status", "")).startswith(("optimal", "time")))
    print(f"grid cells={len(rows)} solved={solved} out={args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rhhc",
        description="Robust home-healthcare routing and scheduling: exact branch-and-price.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic instance file")
    _add_generate_flags(g)
    g.add_argument("--out", required=True, metavar="PATH")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve an instance to proven optimality")
    s.add_argument("--instance", required=True, metavar="PATH")
    s.add_argument("--out", metavar="PATH")
    s.add_argument("--time-limit", type=float, default=None, metavar="SECS")
    s.add_argument("--threads", type=int, default=1, metavar="T")
    s.add_argument("--seed", type=int, default=0, metavar="S")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("evaluate", help="validate a plan and report profit")
    e.add_argument("--instance", required=True, metavar="PATH")
    e.add_argument("--plan", required=True, metavar="PATH")
    e.add_argument("--samples", type=int, default=0, metavar="N")
    e.add_argument("--seed", type=int, default=0, metavar="S")
    e.add_argument("--sim-out", metavar="PATH", help="write per-scenario CSV here")
    e.set_defaults(func=cmd_evaluate)

    gr = sub.add_parser("grid", help="run the 2x2x3x4 factor grid and emit CSV")
    gr.add_argument("--existing", type=int, default=10, metavar="N")
    gr.add_argument("--new-per-day", type=int, default=2, metavar="M")
    gr.add_argument("--caregivers", type=int, default=3, metavar="K")
    gr.add_argument("--days", type=int, default=5, metavar="D")
    gr.add_argument("--seed", type=int, default=0, metavar="S")
    gr.add_argument("--time-limit", type=float, default=None, metavar="SECS")
    gr.add_argument("--out", required=True, metavar="PATH")
    gr.set_defaults(func=cmd_grid)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
