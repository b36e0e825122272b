"""Nested branch-and-price: column generation at two levels, branching of
patients onto caregivers (level 1) and onto day patterns (level 2), and
assembly of the optimal weekly plan.

Branching decisions are enforced purely by filtering column pools and by
fixing patients in or out of the day-level pricing, so the master duals keep
their meaning at every node. Column pools persist across nodes.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .errors import NoFractionalPatient, InvalidPattern, TooManyPatients
from .heuristics import greedy_plan, reject_all
from .master import (
    WeeklyColumn,
    rmp1_reduced_cost,
    rmp2_objective_coeff,
    rmp2_reduced_cost,
    solve_rmp1,
    solve_rmp2,
    weekly_column,
    empty_routed_day,
)
from .model import Instance, day_patterns
from .plan import Plan, STATUS_OPTIMAL, STATUS_TIME_LIMIT, plan_from_columns
from .pricing import DayFixings, price_day, workload
from .rtsptw import RouteCache, solve_rtsptw


@dataclass
class SolveConfig:
    time_limit: Optional[float] = None  # seconds; None = run to optimality
    threads: int = 1
    seed: int = 0  # recorded for reproducibility; the search is deterministic
    tolerance: float = 1e-6
    pattern_workload_filter: bool = False
    check_duals: bool = False  # verify reduced costs after every RMP solve


@dataclass
class SearchStats:
    nodes_level1: int = 0
    nodes_level2: int = 0
    cg_rounds: int = 0
    lp_solves: int = 0
    columns_level1: int = 0
    columns_level2: int = 0
    rtsptw_cache_hits: int = 0
    rtsptw_cache_size: int = 0
    max_dual_residual: float = 0.0
    wall_time: float = 0.0
    optimal: bool = True

    def absorb(self, other: "SearchStats") -> None:
        self.nodes_level2 += other.nodes_level2
        self.cg_rounds += other.cg_rounds
        self.lp_solves += other.lp_solves
        self.columns_level2 += other.columns_level2
        self.max_dual_residual = max(self.max_dual_residual, other.max_dual_residual)


@dataclass
class NodeState:
    level: int  # 1 or 2
    assign: dict = field(default_factory=dict)  # patient -> caregiver (level 1)
    rejected: frozenset = frozenset()
    patterns: dict = field(default_factory=dict)  # patient -> day tuple (level 2)
    rejected2: frozenset = frozenset()
    depth: int = 0
    bound: Optional[float] = None


_POOL_CAP = 512  # per-day column cap handed to each RMP2 solve


class _Timeout(Exception):
    pass


# -- day-pattern values -----------------------------------------------------


def val_day_pattern(pattern, pid: str, caregiver: str, inst: Instance) -> float:
    """Estimated value of serving ``pid`` on the given days: revenue minus
    wage and travel cost of slotting the visit between the two cheapest
    existing neighbors (depot legs when fewer than two exist)."""
    p = inst.patient(pid)
    days = tuple(sorted(pattern))
    if len(days) != p.visits_required or any(
        b - a < p.min_gap_days + 1 for a, b in zip(days, days[1:])
    ):
        raise InvalidPattern(f"{pattern} is not a valid pattern for {pid}")
    arr = inst.arrays
    k = inst.caregiver_index[caregiver]
    i = inst.patient_index[pid]
    total = 0.0
    for d in days:
        pairs = _neighbor_pairs(inst, caregiver, d)
        min_t = min(arr.tbar[j1, i] + arr.tbar[i, j2] for j1, j2 in pairs)
        min_c = min(arr.cost[d, j1, i] + arr.cost[d, i, j2] for j1, j2 in pairs)
        total += (
            float(arr.revenue[k, i])
            - float(arr.wage[k]) * (float(arr.pbar[i]) + 0.5 * min_t)
            - 0.5 * min_c
        )
    return total


def _neighbor_pairs(inst: Instance, caregiver: str, day: int):
    ex = [inst.patient_index[pid] for pid in inst.existing_by_kd[(caregiver, day)]]
    n1 = inst.n + 1
    if len(ex) >= 2:
        return [(a, b) for a in ex for b in ex if a != b]
    if len(ex) == 1:
        e = ex[0]
        return [(e, n1), (0, e)]
    return [(0, n1)]


def _patterns_ik(inst: Instance, pid: str, caregiver: str, config: SolveConfig):
    """Feasible day patterns of ``pid`` restricted to days where the
    caregiver works and is compatible; optionally workload-filtered."""
    p = inst.patient(pid)
    arr = inst.arrays
    k = inst.caregiver_index[caregiver]
    i = inst.patient_index[pid]
    ok = {
        d
        for d in range(len(inst.days))
        if arr.wlo[k, d] >= 0 and arr.compat[k, d, i]
    }
    out = []
    for pattern in day_patterns(p, len(inst.days)):
        if not set(pattern) <= ok:
            continue
        if config.pattern_workload_filter and not _pattern_fits_workload(
            inst, pid, caregiver, pattern
        ):
            continue
        out.append(pattern)
    return out


def _pattern_fits_workload(inst: Instance, pid: str, caregiver: str, pattern) -> bool:
    arr = inst.arrays
    k = inst.caregiver_index[caregiver]
    for d in pattern:
        span = int(arr.whi[k, d] - arr.wlo[k, d])
        load = workload(pid, k, inst) + sum(
            workload(e, k, inst) for e in inst.existing_by_kd[(caregiver, d)]
        )
        if load > span:
            return False
    return True


# -- branching --------------------------------------------------------------


def _is_integral(lam: dict, tol: float) -> bool:
    return all(v <= tol or v >= 1.0 - tol for v in lam.values())


def branch_level1(lam: dict, state: NodeState, inst: Instance, config: SolveConfig = None):
    """Pick the unbranched patient with the best day-pattern value estimate
    and produce one child per compatible caregiver plus a rejection child,
    ordered by descending estimated value."""
    config = config or SolveConfig()
    if _is_integral(lam, config.tolerance):
        raise NoFractionalPatient("solution is already integral")
    best_pid, best_ub, ubs = None, None, {}
    for p in inst.patients:
        if not p.is_new or p.id in state.assign or p.id in state.rejected:
            continue
        per_k = {}
        for c in inst.caregivers:
            pats = _patterns_ik(inst, p.id, c.id, config)
            if pats:
                per_k[c.id] = max(val_day_pattern(D, p.id, c.id, inst) for D in pats)
        ubs[p.id] = per_k
        top = max(per_k.values()) if per_k else float("-inf")
        if best_pid is None or top > best_ub:
            best_pid, best_ub = p.id, top
    if best_pid is None:
        raise NoFractionalPatient("no unbranched patient left")

    children = []
    for c in inst.caregivers:
        if c.id in ubs[best_pid]:
            child = NodeState(
                level=1,
                assign={**state.assign, best_pid: c.id},
                rejected=state.rejected,
                depth=state.depth + 1,
            )
            children.append((ubs[best_pid][c.id], 0, c.id, child))
    reject = NodeState(
        level=1,
        assign=dict(state.assign),
        rejected=state.rejected | {best_pid},
        depth=state.depth + 1,
    )
    children.append((0.0, 1, "", reject))
    children.sort(key=lambda t: (-t[0], t[1], t[2]))
    return best_pid, [c[-1] for c in children]


def branch_level2(
    lam: dict,
    state: NodeState,
    caregiver: str,
    inst: Instance,
    config: SolveConfig = None,
    candidates=None,
    allow_reject: bool = True,
):
    """Level-2 analogue: branch the most promising unbranched patient onto
    its feasible day patterns (plus rejection), ordered by pattern value."""
    config = config or SolveConfig()
    if lam is not None and _is_integral(lam, config.tolerance):
        raise NoFractionalPatient("solution is already integral")
    best_pid, best_ub, pattern_vals = None, None, {}
    for pid in candidates:
        if pid in state.patterns or pid in state.rejected2:
            continue
        vals = {
            D: val_day_pattern(D, pid, caregiver, inst)
            for D in _patterns_ik(inst, pid, caregiver, config)
        }
        pattern_vals[pid] = vals
        top = max(vals.values()) if vals else float("-inf")
        if best_pid is None or top > best_ub:
            best_pid, best_ub = pid, top
    if best_pid is None:
        raise NoFractionalPatient("no unbranched patient left")

    children = []
    for D, ub in pattern_vals[best_pid].items():
        child = NodeState(
            level=2,
            patterns={**state.patterns, best_pid: D},
            rejected2=state.rejected2,
            depth=state.depth + 1,
        )
        children.append((ub, 0, D, child))
    if allow_reject:
        reject = NodeState(
            level=2,
            patterns=dict(state.patterns),
            rejected2=state.rejected2 | {best_pid},
            depth=state.depth + 1,
        )
        children.append((0.0, 1, (), reject))
    children.sort(key=lambda t: (-t[0], t[1], t[2]))
    return best_pid, [c[-1] for c in children]


# -- driver -----------------------------------------------------------------


class _Driver:
    def __init__(self, inst: Instance, config: SolveConfig):
        self.inst = inst
        self.config = config
        self.cache = RouteCache()
        self.stats = SearchStats()
        self.pools1: dict = {c.id: [] for c in inst.caregivers}
        self.pool1_keys: set = set()
        self.pools2: dict = {
            (c.id, d): [] for c in inst.caregivers for d in range(len(inst.days))
        }
        self.pool2_keys: set = set()
        self.deadline: Optional[float] = None

    def check_time(self) -> None:
        if self.deadline is not None and time.perf_counter() > self.deadline:
            raise _Timeout()

    def add_weekly(self, col: WeeklyColumn) -> bool:
        key = (col.caregiver, tuple(r.route for r in col.routes))
        if key in self.pool1_keys:
            return False
        self.pool1_keys.add(key)
        self.pools1[col.caregiver].append(col)
        self.stats.columns_level1 += 1
        return True

    def add_route(self, caregiver: str, day: int, routed, stats: SearchStats) -> bool:
        key = (caregiver, day, routed.route)
        if key in self.pool2_keys:
            return False
        self.pool2_keys.add(key)
        self.pools2[(caregiver, day)].append(routed)
        stats.columns_level2 += 1
        return True


def _passes1(col: WeeklyColumn, must: set, excluded: set) -> bool:
    return must <= col.coverage and not (col.coverage & excluded)


def _passes2(routed, day: int, patterns: dict, excluded: set) -> bool:
    if routed.covered & excluded:
        return False
    for pid, D in patterns.items():
        if (day in D) != (pid in routed.covered):
            return False
    return True


def _level2_scope(inst: Instance, caregiver: str, excluded: set):
    arr = inst.arrays
    k = inst.caregiver_index[caregiver]
    scope = []
    for p in inst.patients:
        if not p.is_new or p.id in excluded:
            continue
        i = inst.patient_index[p.id]
        if any(arr.wlo[k, d] >= 0 and arr.compat[k, d, i] for d in range(len(inst.days))):
            scope.append(p.id)
    return scope


def _level2_node_columns(drv: _Driver, caregiver: str, node: NodeState, excluded: set, stats):
    """Filtered per-day pools, seeding each day with its mandatory route.
    Returns (columns, seeds) or None when some day's mandatory set cannot be
    routed; seeds name the mandatory-coverage column per day (a known
    feasible master basis)."""
    inst = drv.inst
    k = inst.caregiver_index[caregiver]
    banned = set(excluded) | set(node.rejected2)
    cols = {}
    seeds = {}
    for d in range(len(inst.days)):
        pool = [
            r for r in drv.pools2[(caregiver, d)] if _passes2(r, d, node.patterns, banned)
        ]
        if len(pool) > _POOL_CAP:
            # keep the most valuable columns; pricing regenerates anything
            # dropped that the master still needs, so this only trims the LPs
            pool.sort(key=lambda r: (-r.value, r.route))
            pool = pool[:_POOL_CAP]
        mandatory = frozenset(inst.existing_by_kd[(caregiver, d)]) | {
            pid for pid, D in node.patterns.items() if d in D
        }
        seed = next((r for r in pool if r.covered == mandatory), None)
        if seed is None:
            if inst.arrays.wlo[k, d] < 0:
                if mandatory:
                    return None
                seed = empty_routed_day(caregiver, d)
            else:
                try:
                    seed = solve_rtsptw(mandatory, d, caregiver, inst, drv.cache)
                except TooManyPatients:
                    return None
                if seed is None:
                    return None
            drv.add_route(caregiver, d, seed, stats)
            pool.append(seed)
        cols[d] = pool
        seeds[d] = seed
    return cols, seeds


def _level2_solve(
    drv: _Driver,
    caregiver: str,
    must: set,
    excluded: set,
    w_star: dict,
    threshold: float,
    stats: SearchStats,
    first_improving: bool = True,
):
    """Exact level-2 branch-and-price for one caregiver: an integral weekly
    plan (penalized by w*) strictly exceeding ``threshold``, or None (exact).

    With ``first_improving`` the search stops at the first qualifying plan;
    any improving column keeps the outer column generation exact, and the
    node ordering by pattern value reaches good plans early. Absent answers
    always exhaust the tree.
    """
    inst = drv.inst
    config = drv.config
    tol = config.tolerance
    scope = _level2_scope(inst, caregiver, excluded)
    best_col, best_pen = None, None

    stack = [NodeState(level=2)]
    while stack:
        drv.check_time()
        node = stack.pop()
        bar = threshold if best_pen is None else max(threshold, best_pen)
        if node.bound is not None and node.bound <= bar + tol:
            continue  # inherited parent bound already closes this subtree
        stats.nodes_level2 += 1
        built = _level2_node_columns(drv, caregiver, node, excluded, stats)
        if built is None:
            continue
        cols, seeds = built

        in_lp = {d: {r.route for r in cols[d]} for d in cols}
        lam = duals2 = None
        while True:
            lam, duals2, obj = solve_rmp2(caregiver, cols, w_star, inst, scope, seeds)
            stats.lp_solves += 1
            if config.check_duals:
                worst = max(
                    rmp2_reduced_cost(d, r, duals2, w_star, inst)
                    for d in cols
                    for r in cols[d]
                )
                stats.max_dual_residual = max(stats.max_dual_residual, worst)
            improved = False
            for d in range(len(inst.days)):
                if inst.arrays.wlo[inst.caregiver_index[caregiver], d] < 0:
                    continue
                include = frozenset(pid for pid, D in node.patterns.items() if d in D)
                exclude = frozenset(
                    set(excluded)
                    | node.rejected2
                    | {pid for pid, D in node.patterns.items() if d not in D}
                )
                routed = price_day(
                    caregiver, d, duals2, w_star, DayFixings(include, exclude), inst, drv.cache
                )
                # membership is checked against this node's LP, not the global
                # pool: a capped-out column is still an improvement here
                if routed is not None and routed.route not in in_lp[d]:
                    drv.add_route(caregiver, d, routed, stats)
                    cols[d].append(routed)
                    in_lp[d].add(routed.route)
                    improved = True
            if not improved:
                break

        bar = threshold if best_pen is None else max(threshold, best_pen)
        if obj <= bar + tol:
            continue
        node.bound = obj
        if _is_integral(lam, tol):
            selected = {d: r for (d, r), v in lam.items() if v > 0.5}
            col = weekly_column(inst, caregiver, selected)
            uncovered = sorted(must - col.coverage)
            if not uncovered:
                pen = sum(
                    rmp2_objective_coeff(r, w_star, inst) for r in selected.values()
                )
                if pen > bar + tol:
                    best_col, best_pen = col, pen
                    if first_improving:
                        return best_col, best_pen
                continue
            # integral but missing a patient this node must cover: branch it
            pid = max(
                uncovered,
                key=lambda q: (
                    max(
                        [
                            val_day_pattern(D, q, caregiver, inst)
                            for D in _patterns_ik(inst, q, caregiver, config)
                        ]
                        or [float("-inf")]
                    ),
                    q,
                ),
            )
            try:
                _, children = branch_level2(
                    None, node, caregiver, inst, config, candidates=[pid], allow_reject=False
                )
            except NoFractionalPatient:
                continue
        else:
            unbranched = [
                pid
                for pid in scope
                if pid not in node.patterns and pid not in node.rejected2
            ]
            if not unbranched:
                raise RuntimeError("fractional level-2 LP with every patient branched")
            pid, children = branch_level2(
                lam, node, caregiver, inst, config, candidates=unbranched, allow_reject=True
            )
            children = [
                c
                for c in children
                if not (pid in must and pid in c.rejected2)
            ]
        for child in reversed(children):
            child.bound = obj
            stack.append(child)

    if best_col is None:
        return None, None
    return best_col, best_pen


def _seed_column(drv: _Driver, caregiver: str, must: set, excluded: set, stats: SearchStats):
    """A weekly column satisfying the node fixings, proving node feasibility.
    First tries plans covering only the must-set; falls back to the full
    search if that restriction turns out infeasible."""
    new_pids = {p.id for p in drv.inst.patients if p.is_new}
    restricted = set(excluded) | (new_pids - set(must))
    col, _ = _level2_solve(drv, caregiver, must, restricted, {}, float("-inf"), stats)
    if col is None and restricted != set(excluded):
        col, _ = _level2_solve(drv, caregiver, must, set(excluded), {}, float("-inf"), stats)
    if col is not None:
        drv.add_weekly(col)
    return col


def _node_pools1(drv: _Driver, node: NodeState, stats: SearchStats):
    inst = drv.inst
    filtered = {}
    seeds = {}
    for c in inst.caregivers:
        must = {pid for pid, cid in node.assign.items() if cid == c.id}
        excluded = set(node.rejected) | {
            pid for pid, cid in node.assign.items() if cid != c.id
        }
        cols = [col for col in drv.pools1[c.id] if _passes1(col, must, excluded)]
        # a minimal column covering exactly the must-set keeps the RMP
        # feasible whatever the other caregivers' pools look like
        seed = next((col for col in cols if col.coverage == frozenset(must)), None)
        if seed is None:
            seed = _seed_column(drv, c.id, must, excluded, stats)
            if seed is None:
                return None
            if _passes1(seed, must, excluded) and seed not in cols:
                cols.append(seed)
        filtered[c.id] = cols
        seeds[c.id] = seed
    return filtered, seeds


def _process_level1(drv: _Driver, node: NodeState):
    """Column generation to convergence at a level-1 node.

    Returns (lp bound, lambda, duals) or None when the node is infeasible.
    """
    inst = drv.inst
    built = _node_pools1(drv, node, drv.stats)
    if built is None:
        return None
    filtered, seeds1 = built

    contexts = []
    for c in inst.caregivers:
        must = {pid for pid, cid in node.assign.items() if cid == c.id}
        excluded = set(node.rejected) | {
            pid for pid, cid in node.assign.items() if cid != c.id
        }
        contexts.append((c.id, must, excluded))

    while True:
        drv.check_time()
        lam, duals1, obj = solve_rmp1(filtered, inst, seeds1)
        drv.stats.lp_solves += 1
        drv.stats.cg_rounds += 1
        if drv.config.check_duals:
            worst = max(
                rmp1_reduced_cost(col, duals1)
                for cols in filtered.values()
                for col in cols
            )
            drv.stats.max_dual_residual = max(drv.stats.max_dual_residual, worst)

        results = []
        if drv.config.threads > 1:
            locals_ = [SearchStats() for _ in contexts]
            with ThreadPoolExecutor(max_workers=drv.config.threads) as ex:
                futs = [
                    ex.submit(
                        _level2_solve, drv, cid, must, excluded, duals1.w, duals1.v[cid], st
                    )
                    for (cid, must, excluded), st in zip(contexts, locals_)
                ]
                for (cid, _, _), fut, st in zip(contexts, futs, locals_):
                    col, pen = fut.result()
                    drv.stats.absorb(st)
                    results.append((cid, col, pen))
        else:
            for cid, must, excluded in contexts:
                col, pen = _level2_solve(
                    drv, cid, must, excluded, duals1.w, duals1.v[cid], drv.stats
                )
                results.append((cid, col, pen))

        improved = False
        for cid, col, pen in results:
            if col is None:
                continue
            if pen > duals1.v[cid] + drv.config.tolerance and drv.add_weekly(col):
                filtered[cid].append(col)
                improved = True
        if not improved:
            return obj, lam, duals1


def solve(inst: Instance, config: SolveConfig = None):
    """Solve to proven optimality (or to the time limit, flagged).

    Returns (Plan, SearchStats). Raises InfeasibleInstance when the
    pre-assigned visits admit no robust schedule at all.
    """
    from . import evaluator  # deferred: evaluator certifies incumbents

    config = config or SolveConfig()
    t0 = time.perf_counter()
    drv = _Driver(inst, config)
    tol = config.tolerance

    reject_cols = reject_all(inst, drv.cache)
    greedy_cols = greedy_plan(inst, drv.cache)
    for cols in (reject_cols, greedy_cols):
        for cid, col in cols.items():
            drv.add_weekly(col)
            for d, r in enumerate(col.routes):
                drv.add_route(cid, d, r, drv.stats)

    def certified(columns: dict) -> dict:
        plan = plan_from_columns(inst, columns)
        violations = evaluator.validate_plan(plan, inst)
        if violations:
            raise RuntimeError(f"incumbent failed certification: {violations}")
        return columns

    incumbent = certified(reject_cols)
    incumbent_value = sum(c.value for c in reject_cols.values())
    greedy_value = sum(c.value for c in greedy_cols.values())
    if greedy_value > incumbent_value:
        incumbent = certified(greedy_cols)
        incumbent_value = greedy_value

    if config.time_limit is not None:
        drv.deadline = t0 + config.time_limit

    status = STATUS_OPTIMAL
    stack = [NodeState(level=1)]
    try:
        while stack:
            drv.check_time()
            node = stack.pop()
            drv.stats.nodes_level1 += 1
            res = _process_level1(drv, node)
            if res is None:
                continue
            obj, lam, duals1 = res
            node.bound = obj
            # column values are integer cents, so beating the incumbent
            # requires a bound of at least incumbent + 1
            if obj <= incumbent_value + 1 - tol:
                continue
            if _is_integral(lam, tol):
                chosen = {}
                for col, v in lam.items():
                    if v > 0.5:
                        chosen[col.caregiver] = col
                value = sum(c.value for c in chosen.values())
                if value > incumbent_value:
                    incumbent = certified(chosen)
                    incumbent_value = value
                continue
            _, children = branch_level1(lam, node, inst, config)
            for child in reversed(children):
                stack.append(child)
    except _Timeout:
        status = STATUS_TIME_LIMIT
        drv.stats.optimal = False

    drv.stats.wall_time = time.perf_counter() - t0
    drv.stats.rtsptw_cache_hits = drv.cache.hits
    drv.stats.rtsptw_cache_size = len(drv.cache)
    plan = plan_from_columns(inst, incumbent, status)
    return plan, drv.stats
