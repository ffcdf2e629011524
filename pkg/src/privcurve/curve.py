"""The privacy curve: maximum querier MMSE as a function of the distortion budget.

The curve is piecewise affine and concave.  It starts at ``n - r`` for a zero
budget, gains one unit per component as each squared singular value (smallest
first) is used up, and saturates at ``n`` once the budget reaches
``sum(s_i**2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .linmap import SvdFactorization

__all__ = [
    "PrivacyCurve",
    "build_curve",
    "curve_from_singular_values",
    "privacy",
    "min_envelope_terms",
    "inverse_privacy",
    "tabulate",
]

ArrayLike = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class PrivacyCurve:
    n: int
    s_squared: np.ndarray
    # cumulative budgets: cum_rho[k] = s_1^2 + ... + s_k^2, cum_rho[0] = 0
    cum_rho: np.ndarray

    @property
    def r(self) -> int:
        return self.s_squared.size

    @property
    def breakpoints(self) -> np.ndarray:
        """``(r + 1) x 2`` array of ``(rho_k, pi_k)`` with ``pi_k = n - r + k``."""
        k = np.arange(self.r + 1)
        return np.column_stack([self.cum_rho, self.n - self.r + k]).astype(float)

    @property
    def slopes(self) -> np.ndarray:
        return 1.0 / self.s_squared

    @property
    def saturation_rho(self) -> float:
        return float(self.cum_rho[-1])

    @property
    def saturation_value(self) -> float:
        return float(self.n)

    def __call__(self, rho: ArrayLike):
        return privacy(self, rho)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "r": self.r,
            "s_squared": self.s_squared.tolist(),
            "breakpoints": self.breakpoints.tolist(),
            "saturation_rho": self.saturation_rho,
        }


def curve_from_singular_values(s: ArrayLike, n: int) -> PrivacyCurve:
    """Build a curve straight from singular values (sorted here)."""
    s = np.sort(np.abs(np.atleast_1d(np.asarray(s, dtype=float))))
    if np.any(s <= 0):
        raise ValueError("singular values must be strictly positive")
    if s.size > n:
        raise ValueError(f"rank {s.size} exceeds n={n}")
    s2 = s ** 2
    s2.setflags(write=False)
    cum = np.concatenate([[0.0], np.cumsum(s2)])
    cum.setflags(write=False)
    return PrivacyCurve(n=int(n), s_squared=s2, cum_rho=cum)


def build_curve(svd: SvdFactorization, n: int) -> PrivacyCurve:
    if n != svd.n:
        raise ValueError(f"n={n} does not match the factored map (n={svd.n})")
    return curve_from_singular_values(svd.s, n)


def _check_rho(rho: np.ndarray) -> None:
    if np.any(np.isnan(rho)) or np.any(rho < 0):
        raise ValueError("rho must be nonnegative")


def privacy(curve: PrivacyCurve, rho: ArrayLike):
    """Evaluate the curve segment-wise; scalar in, float out.

    The segment containing ``rho`` is located by binary search over the
    cumulative budgets.
    """
    rho_arr = np.asarray(rho, dtype=float)
    _check_rho(rho_arr)
    n, r, cum, s2 = curve.n, curve.r, curve.cum_rho, curve.s_squared
    if r == 0:
        out = np.full(rho_arr.shape, float(n))
    else:
        # cum[j-1] <= rho < cum[j]  ->  segment j (1-based)
        j = np.searchsorted(cum, rho_arr, side="right")
        saturated = j > r
        jj = np.clip(j, 1, r)
        out = n - r + (jj - 1) + (rho_arr - cum[jj - 1]) / s2[jj - 1]
        out = np.where(saturated, float(n), out)
    if out.ndim == 0:
        return float(out)
    return out


def min_envelope_terms(curve: PrivacyCurve, rho: float) -> np.ndarray:
    """Candidate terms ``t_k = k + (rho - cum_k) / s_{k+1}^2`` and ``t_r = r``.

    ``privacy(rho) == n - r + min(terms)``; kept as an independent path for
    cross-checking the segment evaluation.
    """
    rho = float(rho)
    _check_rho(np.asarray(rho))
    r = curve.r
    k = np.arange(r)
    terms = k + (rho - curve.cum_rho[:r]) / curve.s_squared
    return np.append(terms, float(r))


def inverse_privacy(curve: PrivacyCurve, target: float) -> float:
    """Smallest budget ``rho`` with ``privacy(rho) >= target``."""
    n, r = curve.n, curve.r
    if not (n - r <= target <= n):
        raise ValueError(f"target {target} outside [{n - r}, {n}]")
    excess = target - (n - r)
    if excess >= r:
        return curve.saturation_rho
    j = int(np.floor(excess))
    return float(curve.cum_rho[j] + (excess - j) * curve.s_squared[j])


def tabulate(curve: PrivacyCurve, rho_grid: ArrayLike = ()) -> np.ndarray:
    """Evaluate on a grid merged with every breakpoint.

    Returns a ``k x 2`` array of ``(rho, pi)`` rows sorted by ``rho``, so that
    plots show the kinks exactly whatever the grid.
    """
    grid = np.asarray(rho_grid, dtype=float).ravel()
    _check_rho(grid)
    if np.any(np.diff(grid) < 0):
        raise ValueError("rho grid must be ascending")
    rhos = np.unique(np.concatenate([grid, curve.cum_rho]))
    return np.column_stack([rhos, privacy(curve, rhos)])
