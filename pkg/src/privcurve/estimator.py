"""The querier's MMSE estimator and closed-form privacy values.

``(X, Z)`` is jointly Gaussian for every mechanism here, so the best
estimator of ``X`` from ``Z`` is linear, ``x_hat = W (z - offset)``, with
``W = E[X Z^T] pinv(E[Z Z^T])``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .curve import build_curve, min_envelope_terms
from .linmap import EPS, SvdFactorization
from .mechanism import CoordinateMode, LinearGaussianMechanism, Mechanism

__all__ = [
    "LinearEstimator",
    "psd_pinv",
    "mmse_estimator_for_mechanism",
    "estimator_for_linear_gaussian",
    "estimate",
    "closed_form_privacy",
    "converse_certificate",
]


@dataclass(frozen=True)
class LinearEstimator:
    W: np.ndarray
    mmse_closed_form: float
    z_offset: Optional[np.ndarray] = None
    x_offset: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def k(self) -> int:
        return self.W.shape[1]

    def __call__(self, z):
        return estimate(self, z)

    def to_dict(self) -> dict:
        return {"W": self.W.tolist(), "mmse_closed_form": self.mmse_closed_form}


def psd_pinv(C: np.ndarray, rtol: Optional[float] = None) -> np.ndarray:
    """Pseudo-inverse of a symmetric PSD matrix.

    Eigenvalues at or below ``max|C_ij| * k * eps`` (or ``rtol * max|C_ij|``)
    are treated as zero, which drops components with no variance.
    """
    C = np.asarray(C, dtype=float)
    k = C.shape[0]
    if k == 0:
        return np.zeros((0, 0))
    scale = np.max(np.abs(C))
    if scale == 0:
        return np.zeros_like(C)
    cutoff = scale * (k * EPS if rtol is None else rtol)
    if np.count_nonzero(C - np.diag(np.diagonal(C))) == 0:
        d = np.diagonal(C)
        inv = np.where(d > cutoff, 1.0 / np.where(d > cutoff, d, 1.0), 0.0)
        return np.diag(inv)
    w, Q = np.linalg.eigh((C + C.T) / 2)
    keep = w > cutoff
    return (Q[:, keep] / w[keep]) @ Q[:, keep].T


def mmse_estimator_for_mechanism(mech: Mechanism) -> LinearEstimator:
    """Estimator from the analytic covariances of the optimal response.

    In reduced coordinates ``E[X Z^T] = V~ S~^T D_a`` and ``E[Z Z^T]`` is the
    diagonal ``D_a^2 S~^2 + D_no^2``; the original-coordinate estimator is the
    reduced one composed with ``U~^T`` after removing the offset.
    """
    svd, atten = mech.svd, mech.atten
    cov_xz = svd.V_tilde * (svd.s * atten.d_a)
    cov_zz = np.diag((atten.d_a * svd.s) ** 2 + atten.d_no ** 2)
    W = cov_xz @ psd_pinv(cov_zz)
    mmse = mech.n - float(np.trace(W @ cov_xz.T))
    if mech.mode is CoordinateMode.ORIGINAL:
        W = W @ svd.U_tilde.T
    return LinearEstimator(W=W, mmse_closed_form=mmse, z_offset=np.array(mech.offset))


def estimator_for_linear_gaussian(mech: LinearGaussianMechanism,
                                  rtol: Optional[float] = None) -> LinearEstimator:
    G, H = mech.gain, mech.noise_gain
    cov_xz = G.T
    cov_zz = G @ G.T + H @ H.T
    W = cov_xz @ psd_pinv(cov_zz, rtol)
    mmse = mech.n - float(np.trace(W @ cov_xz.T))
    return LinearEstimator(W=W, mmse_closed_form=mmse, z_offset=np.array(mech.offset))


def estimate(est: LinearEstimator, z) -> np.ndarray:
    """``x_hat = x_offset + W (z - z_offset)``; rows of a batch are handled too."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != est.k:
        raise ValueError(f"z has length {z.shape[-1]}, expected {est.k}")
    if est.z_offset is not None:
        z = z - est.z_offset
    out = z @ est.W.T
    if est.x_offset is not None:
        out = out + est.x_offset
    return out


def closed_form_privacy(mech: Mechanism) -> float:
    """``n - r + sum(rho_i / s_i**2)`` for the optimal response."""
    return mech.n - mech.r + float(np.sum(mech.allocation.per_component / mech.svd.s_squared))


def converse_certificate(svd: SvdFactorization, n: int, rho: float) -> float:
    """Upper bound on the privacy of any response within budget ``rho``."""
    terms = min_envelope_terms(build_curve(svd, n), rho)
    return n - svd.rank + float(np.min(terms))
