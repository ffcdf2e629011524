"""Closed-form identity checks for a single linear map.

Each check compares two independently computed quantities: the segment
evaluation of the curve against the min-envelope (converse) form and the
covariance-based MMSE of the optimal response, the allocation against its
caps, and the curve of a randomly rotated map against the original.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import ortho_group

from .alloc import allocate, attenuation_pair
from .curve import build_curve, privacy
from .estimator import closed_form_privacy, converse_certificate, mmse_estimator_for_mechanism
from .linmap import LinearMap, svd_ascending
from .mechanism import mechanism_from_svd

__all__ = ["Check", "rho_grid_for", "random_rotation_pair", "run_identity_suite"]

IDENTITY_TOL = 1e-10
BUDGET_TOL = 1e-12
INVARIANCE_TOL = 1e-8


@dataclass
class Check:
    name: str
    passed: bool
    worst: float
    tolerance: float


def rho_grid_for(s_squared: np.ndarray, points: int = 41) -> np.ndarray:
    """Uniform grid over ``[0, 1.5 * sum(s**2)]`` merged with the breakpoints."""
    total = float(np.sum(s_squared))
    grid = np.linspace(0.0, 1.5 * total if total > 0 else 1.0, points)
    return np.unique(np.concatenate([grid, np.cumsum(s_squared)]))


def random_rotation_pair(m: int, n: int, rng: np.random.Generator):
    """Haar-distributed orthonormal ``m x m`` and ``n x n`` matrices."""
    U = ortho_group.rvs(m, random_state=rng) if m > 1 else np.array([[1.0]])
    V = ortho_group.rvs(n, random_state=rng) if n > 1 else np.array([[1.0]])
    return U, V


def run_identity_suite(linear_map: LinearMap, seed: int = 42,
                       rank_tolerance: float = 0.0) -> list[Check]:
    A = linear_map.entries
    m, n = A.shape
    svd = svd_ascending(linear_map, rank_tolerance)
    curve = build_curve(svd, n)
    grid = rho_grid_for(svd.s_squared)
    scale = max(1.0, float(svd.s[-1]) if svd.rank else 1.0)
    checks = []

    ortho = max(np.max(np.abs(svd.U.T @ svd.U - np.eye(m))),
                np.max(np.abs(svd.V.T @ svd.V - np.eye(n))))
    checks.append(Check("svd orthonormality", ortho <= 1e-10, ortho, 1e-10))
    recon = float(np.max(np.abs(A - svd.reconstruct())))
    checks.append(Check("svd reconstruction", recon <= 1e-8 * scale, recon, 1e-8 * scale))

    conv_gap = eq24_gap = cov_gap = 0.0
    cap_excess = budget_gap = appc_gap = 0.0
    s2 = svd.s_squared
    for rho in grid:
        pi = privacy(curve, rho)
        conv_gap = max(conv_gap, abs(converse_certificate(svd, n, rho) - pi))
        mech = mechanism_from_svd(linear_map, svd, rho)
        eq24_gap = max(eq24_gap, abs(closed_form_privacy(mech) - pi))
        cov_gap = max(cov_gap, abs(mmse_estimator_for_mechanism(mech).mmse_closed_form - pi))

        alloc = allocate(svd, rho)
        per = alloc.per_component
        if per.size:
            cap_excess = max(cap_excess, float(np.max(per - s2)), float(-np.min(per)))
        budget_gap = max(budget_gap, abs(float(np.sum(per)) - min(rho, float(np.sum(s2)))))
        pair = attenuation_pair(alloc, svd)
        if per.size:
            appc = s2 * (1 - pair.d_a) ** 2 + pair.d_no ** 2
            appc_gap = max(appc_gap, float(np.max(np.abs(appc - per))))

    rel = BUDGET_TOL * max(1.0, float(np.sum(s2)))
    checks += [
        Check("converse equals segment form", conv_gap <= IDENTITY_TOL, conv_gap, IDENTITY_TOL),
        Check("achieved privacy equals curve", eq24_gap <= IDENTITY_TOL, eq24_gap, IDENTITY_TOL),
        Check("estimator mmse equals curve", cov_gap <= IDENTITY_TOL, cov_gap, IDENTITY_TOL),
        Check("allocation within caps", cap_excess <= 0.0, cap_excess, 0.0),
        Check("allocation spends budget", budget_gap <= rel, budget_gap, rel),
        Check("component distortion identity", appc_gap <= rel, appc_gap, rel),
    ]

    rng = np.random.default_rng(seed)
    Up, Vp = random_rotation_pair(m, n, rng)
    rotated = build_curve(svd_ascending(LinearMap(Up @ A @ Vp.T), rank_tolerance), n)
    if rotated.r == curve.r:
        inv_gap = float(np.max(np.abs(privacy(rotated, grid) - privacy(curve, grid))))
    else:
        inv_gap = float("inf")
    checks.append(Check("orthogonal invariance", inv_gap <= INVARIANCE_TOL, inv_gap, INVARIANCE_TOL))
    return checks
