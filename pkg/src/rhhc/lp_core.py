"""Dense two-phase revised simplex returning primal solutions and row duals.

Small by design: the restricted master problems here have at most a few
hundred columns, so robustness and determinism matter more than speed.
Pivoting uses Dantzig's rule and engages Bland's anti-cycling rule after a
run of degenerate pivots; both are index-deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NumericalFailure

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_RC_TOL = 1e-9
_FEAS_TOL = 1e-7
_DEGEN_STREAK = 12
_REFACTOR_EVERY = 64


@dataclass
class LinearProgram:
    """max objective @ x subject to rows, x >= 0 (optionally x <= ub)."""

    objective: np.ndarray
    rows: list  # (coefficients, '<=' | '=' | '>=', rhs)
    upper_bounds: Optional[np.ndarray] = None  # finite entries become extra rows

    def __post_init__(self) -> None:
        self.objective = np.asarray(self.objective, dtype=float)
        if not np.isfinite(self.objective).all():
            raise ValueError("objective coefficients must be finite")
        n = self.objective.shape[0]
        norm = []
        for coeffs, rel, rhs in self.rows:
            c = np.asarray(coeffs, dtype=float)
            if c.shape != (n,):
                raise ValueError("row dimension does not match objective")
            if not (np.isfinite(c).all() and np.isfinite(rhs)):
                raise ValueError("row coefficients must be finite")
            if rel not in ("<=", "=", ">="):
                raise ValueError(f"unknown relation {rel!r}")
            norm.append((c, rel, float(rhs)))
        self.rows = norm


@dataclass
class LpResult:
    status: str
    x: Optional[np.ndarray] = None
    duals: Optional[np.ndarray] = None  # one per input row, in input order
    objective: float = 0.0


def solve_lp(lp: LinearProgram, basis_hint=None) -> LpResult:
    """Solve the LP; ``basis_hint`` optionally names one structural column per
    row known to form a feasible starting basis (slack columns fill rows
    hinted as None), letting phase 1 be skipped. Invalid hints fall back to
    the ordinary two-phase path."""
    try:
        return _solve(lp, basis_hint)
    except NumericalFailure:
        raise
    except np.linalg.LinAlgError as exc:  # singular refactorization
        raise NumericalFailure(str(exc)) from exc


def _solve(lp: LinearProgram, basis_hint=None) -> LpResult:
    n = lp.objective.shape[0]
    rows = list(lp.rows)
    n_orig = len(rows)
    if lp.upper_bounds is not None:
        ub = np.asarray(lp.upper_bounds, dtype=float)
        for j in range(n):
            if np.isfinite(ub[j]):
                e = np.zeros(n)
                e[j] = 1.0
                rows.append((e, "<=", float(ub[j])))

    m = len(rows)
    if m == 0:
        # unconstrained: bounded only if no positive objective coefficient
        if (lp.objective > _RC_TOL).any():
            return LpResult(status=UNBOUNDED)
        return LpResult(status=OPTIMAL, x=np.zeros(n), duals=np.zeros(0), objective=0.0)

    # normalize to b >= 0, remembering sign flips for the duals
    A_rows, b, rels, flip = [], [], [], []
    for coeffs, rel, rhs in rows:
        if rhs < 0:
            coeffs, rhs = -coeffs, -rhs
            rel = {"<=": ">=", ">=": "<=", "=": "="}[rel]
            flip.append(-1.0)
        else:
            flip.append(1.0)
        A_rows.append(coeffs)
        b.append(rhs)
        rels.append(rel)
    b = np.asarray(b)
    flip = np.asarray(flip)

    # columns: structural | slack/surplus | artificial
    n_slack = sum(1 for r in rels if r != "=")
    cols = np.zeros((m, n + n_slack + m))
    cols[:, :n] = np.asarray(A_rows)
    slack_of = {}
    s = n
    art_rows = []
    basis = np.zeros(m, dtype=int)
    for i, rel in enumerate(rels):
        if rel == "<=":
            cols[i, s] = 1.0
            slack_of[i] = s
            basis[i] = s
            s += 1
        elif rel == ">=":
            cols[i, s] = -1.0
            slack_of[i] = s
            s += 1
            art_rows.append(i)
        else:
            art_rows.append(i)
    n_struct = s
    art_cols = []
    for i in art_rows:
        cols[i, s] = 1.0
        basis[i] = s
        art_cols.append(s)
        s += 1
    cols = cols[:, :s]
    is_artificial = np.zeros(s, dtype=bool)
    is_artificial[art_cols] = True

    c_phase1 = np.zeros(s)
    c_phase1[art_cols] = -1.0
    c_real = np.zeros(s)
    c_real[:n] = lp.objective

    binv = np.eye(m)
    xb = b.copy()

    hinted = False
    if basis_hint is not None and len(basis_hint) == m:
        trial = basis.copy()
        ok = True
        for i, j in enumerate(basis_hint):
            if j is None:
                if rels[i] == "=":
                    ok = False
                    break
                trial[i] = slack_of[i]
            else:
                trial[i] = int(j)
        if ok:
            try:
                binv_t = np.linalg.inv(cols[:, trial])
                xb_t = binv_t @ b
                if (xb_t >= -1e-9).all():
                    basis = trial
                    binv = binv_t
                    xb = np.maximum(xb_t, 0.0)
                    hinted = True
            except np.linalg.LinAlgError:
                pass

    def refactor() -> np.ndarray:
        nonlocal binv, xb
        binv = np.linalg.inv(cols[:, basis])
        xb = binv @ b
        return xb

    def pivot(row: int, col: int) -> None:
        nonlocal binv, xb
        d = binv @ cols[:, col]
        piv = d[row]
        if abs(piv) < 1e-11:
            raise NumericalFailure("pivot element vanished")
        binv[row] /= piv
        xb[row] /= piv
        d[row] = 0.0
        binv -= np.outer(d, binv[row])
        xb -= d * xb[row]
        basis[row] = col

    def run(c: np.ndarray, phase1: bool) -> str:
        nonlocal xb
        degen = 0
        it = 0
        max_iter = 20000 + 400 * (m + s)
        while True:
            it += 1
            if it > max_iter:
                raise NumericalFailure("iteration limit exceeded")
            if it % _REFACTOR_EVERY == 0:
                refactor()
            y = c[basis] @ binv
            rc = c - y @ cols
            rc[basis] = 0.0
            if not phase1:
                rc[is_artificial] = -np.inf
            if degen >= _DEGEN_STREAK:
                eligible = np.flatnonzero(rc > _RC_TOL)
                entering = int(eligible[0]) if eligible.size else -1
            else:
                entering = int(np.argmax(rc))
                if rc[entering] <= _RC_TOL:
                    entering = -1
            if entering < 0:
                return "done"
            d = binv @ cols[:, entering]
            leave = -1
            if not phase1:
                # force zero-valued artificials out rather than let them drift
                forced = np.flatnonzero(
                    is_artificial[basis] & (np.abs(d) > 1e-9) & (xb <= _FEAS_TOL)
                )
                if forced.size:
                    leave = int(forced[0])
                    ratio = 0.0
            if leave < 0:
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratios = np.where(d > 1e-9, xb / d, np.inf)
                rmin = ratios.min()
                if not np.isfinite(rmin):
                    return "unbounded"
                ties = np.flatnonzero(ratios <= rmin + 1e-12)
                leave = int(ties[np.argmin(basis[ties])])
                ratio = float(ratios[leave])
            degen = degen + 1 if ratio <= 1e-10 else 0
            pivot(leave, entering)

    # phase 1
    if art_cols and not hinted:
        status = run(c_phase1, phase1=True)
        if status == "unbounded":  # cannot happen: phase-1 objective is bounded by 0
            raise NumericalFailure("phase 1 unbounded")
        refactor()
        if -(c_phase1[basis] @ xb) > 1e-7 * (1.0 + abs(b).max()):
            return LpResult(status=INFEASIBLE)
        # drive remaining artificials out of the basis where possible
        for i in range(m):
            if is_artificial[basis[i]]:
                row = binv[i] @ cols
                cand = [j for j in range(n_struct) if abs(row[j]) > 1e-9]
                if cand:
                    pivot(i, cand[0])

    status = run(c_real, phase1=False)
    if status == "unbounded":
        return LpResult(status=UNBOUNDED)
    refactor()

    x_full = np.zeros(s)
    x_full[basis] = xb
    if (x_full[art_cols] > 1e-6).any():
        raise NumericalFailure("artificial variable stuck positive")
    x = x_full[:n]
    y = c_real[basis] @ binv
    duals = (y * flip)[:n_orig]
    obj = float(lp.objective @ x)

    resid = _primal_residual(lp, rows, x)
    if resid > 1e-6:
        raise NumericalFailure(f"primal residual {resid:.2e} after solve")
    return LpResult(status=OPTIMAL, x=x, duals=duals, objective=obj)


def _primal_residual(lp: LinearProgram, rows, x: np.ndarray) -> float:
    scale = 1.0 + float(np.abs([r[2] for r in rows]).max() if rows else 1.0)
    worst = 0.0
    for coeffs, rel, rhs in rows:
        v = float(coeffs @ x)
        if rel == "<=":
            worst = max(worst, (v - rhs) / scale)
        elif rel == ">=":
            worst = max(worst, (rhs - v) / scale)
        else:
            worst = max(worst, abs(v - rhs) / scale)
    worst = max(worst, float(-(x.min())) / scale if x.size else 0.0)
    return worst
