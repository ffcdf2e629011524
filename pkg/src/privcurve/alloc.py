"""Per-component distortion budgets for the optimal query response.

The budget is poured into the components in ascending singular-value order,
each capped at its own variance ``s_i**2``.  A component that receives its
full cap is suppressed completely; the one partially filled component is
attenuated and mixed with independent Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linmap import SvdFactorization

__all__ = ["NoiseAllocation", "AttenuationPair", "allocate", "greedy_fill", "attenuation_pair"]

CLAMP_SLACK = 1e-12


@dataclass(frozen=True)
class NoiseAllocation:
    per_component: np.ndarray
    total_requested: float
    total_effective: float
    saturated: bool

    @property
    def r(self) -> int:
        return self.per_component.size


@dataclass(frozen=True)
class AttenuationPair:
    """Diagonals of the attenuation and noise-gain matrices."""

    d_a: np.ndarray
    d_no: np.ndarray


def greedy_fill(caps: np.ndarray, rho: float) -> np.ndarray:
    """Fill ``caps`` in order with total ``rho``; excess is discarded."""
    caps = np.asarray(caps, dtype=float)
    before = np.concatenate([[0.0], np.cumsum(caps)[:-1]])
    return np.clip(rho - before, 0.0, caps)


def allocate(svd: SvdFactorization, rho: float) -> NoiseAllocation:
    """Optimal distortion budgets ``rho_1..rho_r`` for a total budget ``rho``.

    Examples
    --------
    With ``s = (2, 3, 4)`` and ``rho = 7`` the first component is fully
    suppressed and the second gets the rest: ``(4, 3, 0)``.
    """
    if not rho >= 0:
        raise ValueError("rho must be nonnegative")
    caps = svd.s_squared
    total = float(np.sum(caps))
    per = greedy_fill(caps, float(rho))
    per.setflags(write=False)
    return NoiseAllocation(
        per_component=per,
        total_requested=float(rho),
        total_effective=min(float(rho), total),
        saturated=bool(rho >= total),
    )


def attenuation_pair(allocation: NoiseAllocation, svd: SvdFactorization) -> AttenuationPair:
    if allocation.r != svd.rank:
        raise ValueError(
            f"allocation has {allocation.r} components but the map has rank {svd.rank}")
    rho_i = allocation.per_component
    s2 = svd.s_squared
    d_a = 1.0 - rho_i / s2
    # rho_i - rho_i**2 / s_i**2, factored so it is exactly 0 at both caps
    noise_var = rho_i * d_a
    if np.any(noise_var < -CLAMP_SLACK):
        raise ValueError("allocation exceeds the per-component caps")
    d_no = np.sqrt(np.maximum(noise_var, 0.0))
    d_a.setflags(write=False)
    d_no.setflags(write=False)
    return AttenuationPair(d_a=d_a, d_no=d_no)
