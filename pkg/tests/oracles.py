"""Brute-force references that share no code with the library."""

import numpy as np


def grid_search_allocation(s_squared, rho, points=201, near=None):
    """Maximize sum(rho_i / s_i^2) over a grid with sum(rho_i) <= rho, 0 <= rho_i <= s_i^2.

    Returns ``(best_value, best_point, steps)``. The maximizer is rarely
    unique on the grid; with ``near`` given, ``best_point`` is the maximizer
    closest to it (in steps, sup norm).
    """
    s_squared = np.asarray(s_squared, dtype=float)
    axes = [np.linspace(0.0, c, points) for c in s_squared]
    mesh = np.meshgrid(*axes, indexing="ij")
    total = sum(mesh)
    value = sum(g / c for g, c in zip(mesh, s_squared))
    value = np.where(total <= rho * (1 + 1e-12) + 1e-15, value, -np.inf)
    steps = s_squared / (points - 1)
    top = np.max(value)
    if near is None:
        idx = np.unravel_index(np.argmax(value), value.shape)
    else:
        dist = np.max([np.abs(g - p) / st for g, p, st in zip(mesh, near, steps)], axis=0)
        dist = np.where(value >= top - 1e-12, dist, np.inf)
        idx = np.unravel_index(np.argmin(dist), dist.shape)
    best = np.array([axes[i][j] for i, j in enumerate(idx)])
    return float(top), best, steps


def piecewise_by_cases(s, n, rho):
    """Direct case analysis of the segment table, one interval at a time."""
    s2 = [float(v) ** 2 for v in s]
    r = len(s2)
    lo = 0.0
    for k in range(r):
        hi = lo + s2[k]
        if lo <= rho <= hi:
            return n - r + k + (rho - lo) / s2[k]
        lo = hi
    return float(n)


def all_envelope_terms(s, rho):
    s2 = [float(v) ** 2 for v in s]
    terms = []
    for t in range(len(s2) + 1):
        if t == len(s2):
            terms.append(float(t))
        else:
            terms.append(t + (rho - sum(s2[:t])) / s2[t])
    return terms


def projector_onto_row_space(A):
    """Orthogonal projector via least squares on each basis vector."""
    n = A.shape[1]
    cols = []
    for e in np.eye(n):
        coef, *_ = np.linalg.lstsq(A.T, e, rcond=None)
        cols.append(A.T @ coef)
    return np.column_stack(cols)
