"""Outer-approximation cuts for the rotated cone rows.

A rotated cone ``I*V >= P^2 + Q^2`` (I, V >= 0) is equivalent to the
standard cone ``||(2P, 2Q, I-V)|| <= I + V``; its violation function

    f(I, V, P, Q) = sqrt(4P^2 + 4Q^2 + (I-V)^2) - (I + V)

is convex, so a subgradient at any violating point yields a supporting
hyperplane that separates the point from the cone.
"""

from __future__ import annotations

import math

import numpy as np

from ugrestore.model import ConeRow, LinearModel
from ugrestore.solver.lp import Cut


class NoCutError(ValueError):
    """The point does not violate the cone, no cut exists."""


def _violation(i: float, v: float, p: float, q: float) -> float:
    return math.sqrt(4.0 * p * p + 4.0 * q * q + (i - v) ** 2) - (i + v)


def soc_cut(point: tuple[float, float, float, float], cone: ConeRow, tol: float = 1e-12) -> Cut:
    """Supporting-hyperplane cut separating a cone-violating point.

    The tangent is taken at the boundary point directly above the violating
    point along the squared-current axis (the point a loss-pressured optimum
    converges to), which cuts far deeper than the subgradient at the point
    itself.  Every tangent plane of the homogeneous cone passes through the
    apex, so the apex always satisfies the cut with equality.
    """
    i0, v0, p0, q0 = point
    f0 = _violation(i0, v0, p0, q0)
    if f0 <= tol:
        raise NoCutError(f"point violates the cone by {f0:.3e} <= {tol:.0e}")
    if v0 > 1e-9:
        i_b, v_b, p_b, q_b = (p0 * p0 + q0 * q0) / v0, v0, p0, q0
    else:
        i_b, v_b, p_b, q_b = i0, v0, p0, q0
    n = math.sqrt(4.0 * p_b * p_b + 4.0 * q_b * q_b + (i_b - v_b) ** 2)
    if n <= 0.0:
        # apex neighborhood: separate with the face i + v >= 0 complement
        n = 1.0
        i_b = v_b = 0.5
    gi = (i_b - v_b) / n - 1.0
    gv = -(i_b - v_b) / n - 1.0
    gp = 4.0 * p_b / n
    gq = 4.0 * q_b / n
    f_b = _violation(i_b, v_b, p_b, q_b)
    rhs = gi * i_b + gv * v_b + gp * p_b + gq * q_b - f_b
    return Cut(
        cols=(cone.col_i, cone.col_v, cone.col_p, cone.col_q),
        coefs=(gi, gv, gp, gq),
        rhs=rhs,
    )


def cone_violations(model: LinearModel, x: np.ndarray, tol: float) -> list[tuple[int, float]]:
    """Indices and magnitudes of cone rows violated beyond ``tol``, worst first."""
    slack = model.cone_values(x)
    bad = np.flatnonzero(slack < -tol)
    out = [(int(i), float(-slack[i])) for i in bad]
    out.sort(key=lambda pair: -pair[1])
    return out


def initial_cone_cuts(model: LinearModel, n_angles: int = 8) -> list[Cut]:
    """Deterministic tangent planes seeding a polyhedral cone approximation.

    Tangents are taken at unit-voltage points with flow direction swept over
    ``n_angles`` angles; they are supporting planes (violation zero), built
    directly from the subgradient formula.
    """
    cuts: list[Cut] = []
    for cone in model.cones:
        for m in range(n_angles):
            ang = 2.0 * math.pi * m / n_angles
            p0, q0 = math.cos(ang), math.sin(ang)
            i0 = v0 = 1.0
            n = math.sqrt(4.0 * p0 * p0 + 4.0 * q0 * q0 + (i0 - v0) ** 2)
            gi = (i0 - v0) / n - 1.0
            gv = -(i0 - v0) / n - 1.0
            gp = 4.0 * p0 / n
            gq = 4.0 * q0 / n
            rhs = gi * i0 + gv * v0 + gp * p0 + gq * q0
            cuts.append(
                Cut(
                    cols=(cone.col_i, cone.col_v, cone.col_p, cone.col_q),
                    coefs=(gi, gv, gp, gq),
                    rhs=rhs,
                )
            )
    return cuts
