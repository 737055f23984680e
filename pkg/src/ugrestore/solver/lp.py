"""LP relaxation backend on top of scipy's HiGHS interface.

The model rows are converted once into inequality/equality sparse matrices;
every node solve then only swaps column bounds and appends the current
outer-approximation cut pool.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ugrestore.model import SENSE_EQ, SENSE_GE, SENSE_LE, LinearModel

# cone refinement needs row residuals well below the default 1e-7
_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-9,
}


@dataclass(frozen=True)
class Cut:
    """Linear cut ``coefs . x[cols] <= rhs``, valid for the full model."""

    cols: tuple[int, ...]
    coefs: tuple[float, ...]
    rhs: float


@dataclass
class LpResult:
    status: str  # optimal | infeasible | unbounded | error
    x: np.ndarray | None
    objective: float  # maximization value; -inf when not optimal

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


class LpBackend:
    def __init__(self, model: LinearModel) -> None:
        self.model = model
        m = model.matrix().tocsr()
        le = np.flatnonzero(model.sense == SENSE_LE)
        ge = np.flatnonzero(model.sense == SENSE_GE)
        eq = np.flatnonzero(model.sense == SENSE_EQ)
        blocks = []
        rhs_parts = []
        if le.size:
            blocks.append(m[le])
            rhs_parts.append(model.rhs[le])
        if ge.size:
            blocks.append(-m[ge])
            rhs_parts.append(-model.rhs[ge])
        if blocks:
            self.a_ub = sp.vstack(blocks, format="csr")
            self.b_ub = np.concatenate(rhs_parts)
        else:
            self.a_ub = None
            self.b_ub = None
        if eq.size:
            self.a_eq = m[eq].tocsr()
            self.b_eq = model.rhs[eq]
        else:
            self.a_eq = None
            self.b_eq = None
        self.c = -model.obj  # linprog minimizes

    def solve(self, lb: np.ndarray, ub: np.ndarray, cuts: list[Cut] | None = None) -> LpResult:
        a_ub, b_ub = self.a_ub, self.b_ub
        if cuts:
            rows, cols, vals = [], [], []
            for i, cut in enumerate(cuts):
                rows.extend([i] * len(cut.cols))
                cols.extend(cut.cols)
                vals.extend(cut.coefs)
            cm = sp.coo_matrix((vals, (rows, cols)), shape=(len(cuts), self.model.ncols)).tocsr()
            cb = np.array([c.rhs for c in cuts])
            if a_ub is None:
                a_ub, b_ub = cm, cb
            else:
                a_ub = sp.vstack([a_ub, cm], format="csr")
                b_ub = np.concatenate([b_ub, cb])
        res = linprog(
            c=self.c,
            A_ub=a_ub,
            b_ub=b_ub,
            A_eq=self.a_eq,
            b_eq=self.b_eq,
            bounds=np.column_stack((lb, ub)),
            method="highs",
            options=_HIGHS_OPTIONS,
        )
        if res.status == 0:
            return LpResult(status="optimal", x=res.x, objective=float(-res.fun))
        if res.status == 2:
            return LpResult(status="infeasible", x=None, objective=-np.inf)
        if res.status == 3:
            return LpResult(status="unbounded", x=None, objective=np.inf)
        return LpResult(status="error", x=None, objective=-np.inf)


def lp_relax_solve(
    model: LinearModel,
    fixed: dict[int, float] | None = None,
    cuts: list[Cut] | None = None,
    backend: LpBackend | None = None,
) -> LpResult:
    """Solve the LP relaxation with a partial assignment of columns.

    ``fixed`` maps column indices to pinned values; inconsistent fixings
    (outside the column bounds) make the relaxation infeasible, which is the
    prune signal for search.
    """
    backend = backend or LpBackend(model)
    lb = model.col_lb.copy()
    ub = model.col_ub.copy()
    if fixed:
        for col, val in fixed.items():
            if val < lb[col] - 1e-9 or val > ub[col] + 1e-9:
                return LpResult(status="infeasible", x=None, objective=-np.inf)
            lb[col] = val
            ub[col] = val
    return backend.solve(lb, ub, cuts)
