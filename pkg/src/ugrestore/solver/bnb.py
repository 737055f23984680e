"""Best-first branch-and-bound over the LP relaxation with lazy cone cuts.

Nodes store only their fixings and an inherited bound; the LP is solved at
pop time with the current cut pool, refined by a small outer-approximation
budget, and branched most-fractional-first (ties by catalog order, then by
the seeded tie-breaker).  Integral candidates get a full refinement loop and
are accepted as incumbents only after an independent replay of every linear
row, cone row and column bound.  The cut pool is shared across the tree and
capped per cone; any subset of valid cuts keeps node bounds valid, so both
the cap and the sharing are sound.

A caller-supplied diving heuristic (see the warm-start module) is invoked
periodically on the current relaxation point to pull the incumbent up
without waiting for the tree to reach integer depth.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ugrestore.model import LinearModel
from ugrestore.solver.cuts import cone_violations, soc_cut
from ugrestore.solver.lp import Cut, LpBackend, LpResult


@dataclass(frozen=True)
class SolverOptions:
    time_limit_s: float = 600.0
    rel_gap: float = 1e-3
    abs_gap: float = 1e-7
    max_oa_cuts_per_node: int = 80
    oa_rounds_fractional: int = 2
    oa_tol: float = 1e-9
    oa_search_tol: float = 1e-4
    int_tol: float = 1e-6
    seed: int = 0
    node_limit: int | None = None
    replay_tol: float = 1e-6
    dive_every: int = 20
    cuts_per_cone: int = 8

    def __post_init__(self) -> None:
        if self.time_limit_s <= 0:
            raise ValueError("time_limit_s must be positive")
        if self.rel_gap < 0:
            raise ValueError("rel_gap must be non-negative")


@dataclass
class Solution:
    status: str  # optimal | feasible | infeasible | time_limit
    x: np.ndarray | None
    objective: float
    bound: float
    gap: float
    node_count: int
    cut_count: int
    runtime_s: float
    kwh_factor: float = 1.0
    infeasible_hint: str = ""
    incumbent_source: str = ""

    @property
    def objective_kwh(self) -> float:
        return self.objective * self.kwh_factor

    def value(self, model: LinearModel, group: str, key) -> float:
        return float(self.x[model.catalog.col(group, key)])


@dataclass(order=True)
class _Node:
    neg_bound: float
    tie: int
    fixes: dict[int, float] = field(compare=False)


class _Search:
    def __init__(self, model: LinearModel, options: SolverOptions) -> None:
        self.model = model
        self.opts = options
        self.deadline: float | None = None
        self.backend = LpBackend(model)
        self.pool: list[Cut] = []
        self._cone_slots: dict[int, list[int]] = {}
        self._cone_next: dict[int, int] = {}
        self.lp_count = 0
        self.rng = np.random.default_rng(options.seed)
        self.inc_x: np.ndarray | None = None
        self.inc_val = -np.inf
        self.inc_src = ""

    # -- incumbent ------------------------------------------------------------

    def offer_incumbent(self, x: np.ndarray, source: str) -> bool:
        if self.model.check_solution(x, self.opts.replay_tol, self.opts.replay_tol):
            return False
        val = self.model.objective_value(x)
        if val > self.inc_val:
            self.inc_x, self.inc_val, self.inc_src = x.copy(), val, source
            return True
        return False

    def prune_tol(self) -> float:
        if self.inc_val == -np.inf:
            return 0.0
        return max(self.opts.abs_gap, self.opts.rel_gap * max(1.0, abs(self.inc_val)))

    # -- LP plumbing ------------------------------------------------------------

    def solve_lp(self, fixes: dict[int, float]) -> LpResult:
        lb = self.model.col_lb.copy()
        ub = self.model.col_ub.copy()
        for col, val in fixes.items():
            lb[col] = val
            ub[col] = val
        self.lp_count += 1
        return self.backend.solve(lb, ub, self.pool)

    def _add_cut(self, cone_idx: int, cut: Cut) -> None:
        cap = self.opts.cuts_per_cone
        slots = self._cone_slots.setdefault(cone_idx, [])
        if len(slots) < cap:
            slots.append(len(self.pool))
            self.pool.append(cut)
        else:
            pos = self._cone_next.get(cone_idx, 0) % cap
            self.pool[slots[pos]] = cut
            self._cone_next[cone_idx] = pos + 1

    def oa_refine(
        self, fixes: dict[int, float], res: LpResult, rounds: int, tol: float | None = None
    ) -> LpResult:
        done = 0
        tol = self.opts.oa_tol if tol is None else tol
        while res.ok and done < rounds:
            if self.deadline is not None and time.monotonic() > self.deadline:
                break
            viol = cone_violations(self.model, res.x, tol)
            if not viol:
                break
            for idx, _ in viol[:20]:
                cone = self.model.cones[idx]
                self._add_cut(
                    idx,
                    soc_cut(
                        (
                            float(res.x[cone.col_i]),
                            float(res.x[cone.col_v]),
                            float(res.x[cone.col_p]),
                            float(res.x[cone.col_q]),
                        ),
                        cone,
                    ),
                )
            done += 1
            res = self.solve_lp(fixes)
        return res

    def fractional_binaries(self, x: np.ndarray) -> list[int]:
        cols = self.model.free_binary_columns
        vals = x[cols]
        frac = np.abs(vals - np.round(vals))
        return [int(c) for c, f in zip(cols, frac) if f > self.opts.int_tol]

    def pick_branch(self, x: np.ndarray, cand: list[int]) -> int:
        dist = [abs(x[c] - round(x[c])) for c in cand]
        best = max(dist)
        tied = sorted(c for c, d in zip(cand, dist) if best - d <= 1e-12)
        if len(tied) > 1 and self.opts.seed:
            return int(tied[self.rng.integers(0, len(tied))])
        return int(tied[0])


def _infeasibility_hint(model: LinearModel) -> str:
    """Name row families whose removal restores LP feasibility."""
    if model.nrows > 60000:
        return ""
    fams = sorted(set(model.families))
    fam_idx = {f: i for i, f in enumerate(fams)}
    fam_arr = np.array([fam_idx[f] for f in model.families])
    hints = []
    for fi, fam in enumerate(fams):
        keep = fam_arr != fi
        sub = LinearModel(
            catalog=model.catalog,
            col_lb=model.col_lb,
            col_ub=model.col_ub,
            col_binary=model.col_binary,
            obj=model.obj,
            coo_r=None,
            coo_c=None,
            coo_v=None,
            sense=model.sense[keep],
            rhs=model.rhs[keep],
            families=[f for f in model.families if f != fam],
            locs=[],
            cones=[],
            meta=model.meta,
        )
        sub._matrix = model.matrix()[keep]
        res = LpBackend(sub).solve(model.col_lb, model.col_ub)
        if res.ok:
            hints.append(fam)
        if len(hints) >= 3:
            break
    if hints:
        return "relaxing any of these families restores feasibility: " + ", ".join(hints)
    return "no single row family explains the infeasibility"


def _no_incumbent(search: _Search, status: str, t0: float, kwh: float, nodes: int) -> Solution:
    return Solution(
        status=status,
        x=None,
        objective=-np.inf,
        bound=-np.inf,
        gap=np.inf,
        node_count=nodes,
        cut_count=len(search.pool),
        runtime_s=time.monotonic() - t0,
        kwh_factor=kwh,
        infeasible_hint=_infeasibility_hint(search.model) if status == "infeasible" else "",
    )


def solve(
    model: LinearModel,
    options: SolverOptions | None = None,
    warm_start: np.ndarray | None = None,
    warm_start_source: str = "caller",
    diver: Callable[[np.ndarray], np.ndarray | None] | None = None,
) -> Solution:
    """Maximize the model; returns the best incumbent with a proven gap.

    ``warm_start`` must be a fully feasible point (it is replayed before
    acceptance).  ``diver`` maps a relaxation point to a feasible full
    vector, or None; it is consulted periodically for incumbents.
    """
    opts = options or SolverOptions()
    t0 = time.monotonic()
    search = _Search(model, opts)
    search.deadline = t0 + opts.time_limit_s
    kwh = float(model.meta.get("kw_base", 1.0))
    nodes = 0

    if warm_start is not None:
        search.offer_incumbent(warm_start, warm_start_source)

    root = search.solve_lp({})
    nodes += 1
    if root.status == "infeasible":
        return _no_incumbent(search, "infeasible", t0, kwh, nodes)
    root = search.oa_refine({}, root, opts.max_oa_cuts_per_node, tol=opts.oa_search_tol)
    if root.status == "infeasible":
        return _no_incumbent(search, "infeasible", t0, kwh, nodes)

    tie = itertools.count()
    heap: list[_Node] = []
    proven_bound = root.objective
    timed_out = False
    first = True
    pending_root = root

    heapq.heappush(heap, _Node(-root.objective, next(tie), {}))

    while heap:
        if time.monotonic() - t0 > opts.time_limit_s:
            timed_out = True
            break
        if opts.node_limit is not None and nodes >= opts.node_limit:
            timed_out = True
            break
        node = heapq.heappop(heap)
        bound = -node.neg_bound
        proven_bound = bound  # best-first: no open node exceeds this
        if search.inc_x is not None and bound <= search.inc_val + search.prune_tol():
            proven_bound = max(bound, search.inc_val)
            break

        if first:
            res, first = pending_root, False
        else:
            nodes += 1
            res = search.solve_lp(node.fixes)
            if not res.ok:
                continue
            res = search.oa_refine(
                node.fixes, res, opts.oa_rounds_fractional, tol=opts.oa_search_tol
            )
            if not res.ok:
                continue
        bound = min(bound, res.objective)
        if search.inc_x is not None and bound <= search.inc_val + search.prune_tol():
            continue

        frac = search.fractional_binaries(res.x)
        if not frac:
            res = search.oa_refine(node.fixes, res, opts.max_oa_cuts_per_node)
            if not res.ok:
                continue
            bound = min(bound, res.objective)
            frac = search.fractional_binaries(res.x)
            if not frac:
                search.offer_incumbent(res.x, "branch-and-bound")
                continue
            if search.inc_x is not None and bound <= search.inc_val + search.prune_tol():
                continue

        if (
            diver is not None
            and nodes % opts.dive_every == 1
            and time.monotonic() - t0 < 0.8 * opts.time_limit_s
        ):
            dived = diver(res.x)
            if dived is not None:
                search.offer_incumbent(dived, "dive")

        col = search.pick_branch(res.x, frac)
        for val in (0.0, 1.0):
            fixes = dict(node.fixes)
            fixes[col] = val
            heapq.heappush(heap, _Node(-bound, next(tie), fixes))

    runtime = time.monotonic() - t0
    if search.inc_x is None:
        status = "time_limit" if timed_out else "infeasible"
        return _no_incumbent(search, status, t0, kwh, nodes)

    if not heap and not timed_out:
        proven_bound = search.inc_val
    gap = max(0.0, (proven_bound - search.inc_val) / max(1.0, abs(search.inc_val)))
    if timed_out and gap > opts.rel_gap:
        status = "time_limit"
    elif gap <= opts.rel_gap + 1e-15:
        status = "optimal"
    else:
        status = "feasible"
    return Solution(
        status=status,
        x=search.inc_x,
        objective=search.inc_val,
        bound=proven_bound,
        gap=gap,
        node_count=nodes,
        cut_count=len(search.pool),
        runtime_s=runtime,
        kwh_factor=kwh,
        incumbent_source=search.inc_src,
    )
