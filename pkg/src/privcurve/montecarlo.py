"""Monte Carlo checks of recoverability and privacy.

Everything here is estimated from seeded joint samples of data and response,
independently of the closed forms it is compared against.  Pass/fail flags
allow a slack of three standard errors.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .curve import build_curve, privacy
from .estimator import (
    LinearEstimator,
    closed_form_privacy,
    estimate,
    estimator_for_linear_gaussian,
    mmse_estimator_for_mechanism,
    psd_pinv,
)
from .linmap import LinearMap, SvdFactorization, svd_ascending
from .mechanism import (
    CoordinateMode,
    LinearGaussianMechanism,
    Mechanism,
    SampleBatch,
    mechanism_from_svd,
    sample_joint,
)

__all__ = [
    "SLACK_SE",
    "SimulationReport",
    "CandidateRow",
    "shard_count",
    "mean_and_se",
    "simulate",
    "refit_estimator",
    "baseline_mechanisms",
    "compare_mechanisms",
]

SLACK_SE = 3.0
# relative eigenvalue cutoff for sample covariances
REFIT_RTOL = 1e-10


def shard_count(default: int = 1) -> int:
    """Shard count from ``PRIVCURVE_SHARDS`` (falls back to ``default``)."""
    raw = os.environ.get("PRIVCURVE_SHARDS")
    if not raw:
        return default
    value = int(raw)
    if value < 1:
        raise ValueError("PRIVCURVE_SHARDS must be a positive integer")
    return value


def mean_and_se(values: np.ndarray) -> tuple[float, float]:
    """Sample mean and its standard error ``std / sqrt(N)`` along axis 0."""
    values = np.asarray(values, dtype=float)
    count = values.shape[0]
    mean = np.sum(values, axis=0) / count  # numpy sums pairwise
    std = np.sqrt(np.sum((values - mean) ** 2, axis=0) / (count - 1))
    se = std / math.sqrt(count)
    if np.ndim(mean) == 0:
        return float(mean), float(se)
    return mean, se


@dataclass
class SimulationReport:
    trials: int
    seed: int
    shards: int
    rng_id: str
    rho: float
    empirical_distortion: float
    empirical_distortion_se: float
    empirical_component_distortions: list
    empirical_component_distortions_se: list
    empirical_mmse: float
    empirical_mmse_se: float
    empirical_mmse_refit: float
    empirical_mmse_refit_se: float
    closed_form_distortion: float
    closed_form_privacy: float
    component_caps: list
    constraint_pass: list
    empirical_var_ax: float = field(default=float("nan"))

    @property
    def all_pass(self) -> bool:
        return all(self.constraint_pass)

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_row(self) -> list:
        return [self.rho, self.closed_form_privacy, self.empirical_mmse,
                self.empirical_mmse_se, self.empirical_distortion,
                self.empirical_distortion_se, self.all_pass]


SWEEP_HEADER = ["rho", "pi_closed", "mmse_emp", "mmse_se", "dist_emp", "dist_se", "pass"]


def _reduced_residual(mech: Mechanism, batch: SampleBatch) -> np.ndarray:
    """Per-component errors in reduced coordinates."""
    resid = batch.target - batch.Z
    if mech.mode is CoordinateMode.ORIGINAL:
        resid = resid @ mech.svd.U_tilde
    return resid


def refit_estimator(batch: SampleBatch) -> LinearEstimator:
    """Linear estimator fitted from the sample covariances of a batch."""
    count, n = batch.X.shape
    k = batch.Z.shape[1]
    if count < 10 * (n + k):
        raise ValueError(f"need at least {10 * (n + k)} samples to refit, got {count}")
    x_mean = batch.X.mean(axis=0)
    z_mean = batch.Z.mean(axis=0)
    Xc = batch.X - x_mean
    Zc = batch.Z - z_mean
    cov_xz = Xc.T @ Zc / (count - 1)
    cov_zz = Zc.T @ Zc / (count - 1)
    W = cov_xz @ psd_pinv(cov_zz, REFIT_RTOL)
    cov_xx_trace = float(np.sum(Xc ** 2) / (count - 1))
    mmse = cov_xx_trace - float(np.trace(W @ cov_xz.T))
    return LinearEstimator(W=W, mmse_closed_form=mmse, z_offset=z_mean, x_offset=x_mean)


def simulate(mech: Mechanism, trials: int, seed: int,
             shards: Optional[int] = None) -> SimulationReport:
    """Empirical distortion and privacy of the optimal response."""
    if trials < 2:
        raise ValueError("trials must be >= 2")
    shards = shard_count() if shards is None else shards
    batch = sample_joint(mech, trials, seed, shards)

    dist, dist_se = mean_and_se(np.sum((batch.target - batch.Z) ** 2, axis=1))
    resid = _reduced_residual(mech, batch)
    if mech.r:
        comp, comp_se = mean_and_se(resid ** 2)
    else:
        comp, comp_se = np.zeros(0), np.zeros(0)

    est = mmse_estimator_for_mechanism(mech)
    mmse, mmse_se = mean_and_se(np.sum((batch.X - estimate(est, batch.Z)) ** 2, axis=1))
    refit = refit_estimator(batch) if trials >= 10 * (mech.n + mech.out_dim) else None
    if refit is not None:
        mmse_r, mmse_r_se = mean_and_se(np.sum((batch.X - estimate(refit, batch.Z)) ** 2, axis=1))
    else:
        mmse_r, mmse_r_se = float("nan"), float("nan")

    caps = mech.svd.s_squared
    passes = [bool(c <= cap + SLACK_SE * se) for c, cap, se in zip(comp, caps, comp_se)]
    var_ax, _ = mean_and_se(np.sum(batch.AX ** 2, axis=1))
    return SimulationReport(
        trials=trials,
        seed=int(seed),
        shards=shards,
        rng_id=batch.rng_id,
        rho=mech.rho,
        empirical_distortion=dist,
        empirical_distortion_se=dist_se,
        empirical_component_distortions=np.asarray(comp).tolist(),
        empirical_component_distortions_se=np.asarray(comp_se).tolist(),
        empirical_mmse=mmse,
        empirical_mmse_se=mmse_se,
        empirical_mmse_refit=mmse_r,
        empirical_mmse_refit_se=mmse_r_se,
        closed_form_distortion=mech.allocation.total_effective,
        closed_form_privacy=closed_form_privacy(mech),
        component_caps=caps.tolist(),
        constraint_pass=passes,
        empirical_var_ax=var_ax,
    )


def baseline_mechanisms(linear_map: LinearMap, rho: float,
                        svd: Optional[SvdFactorization] = None) -> list[LinearGaussianMechanism]:
    """Isotropic noise, pure attenuation and the optimal response, all at budget ``rho``."""
    if not rho >= 0:
        raise ValueError("rho must be nonnegative")
    svd = svd_ascending(linear_map) if svd is None else svd
    A, b, m = linear_map.entries, linear_map.b, linear_map.m
    sigma = math.sqrt(rho / m)
    isotropic = LinearGaussianMechanism("isotropic", linear_map, A, sigma * np.eye(m), b)

    total = float(np.sum(svd.s_squared))
    c = 1.0 - math.sqrt(min(rho / total, 1.0)) if total > 0 else 1.0
    attenuation = LinearGaussianMechanism("attenuation", linear_map, c * A, np.zeros((m, 0)), b)

    optimal = mechanism_from_svd(linear_map, svd, rho, CoordinateMode.ORIGINAL)
    return [isotropic, attenuation, optimal.as_linear_gaussian("optimal")]


@dataclass
class CandidateRow:
    name: str
    empirical_distortion: float
    distortion_se: float
    empirical_mmse: float
    mmse_se: float
    closed_form_mmse: float
    pi_closed: float
    feasible: bool
    converse_ok: bool

    def to_dict(self) -> dict:
        return asdict(self)


COMPARE_HEADER = ["name", "dist_emp", "dist_se", "mmse_emp", "mmse_se",
                  "mmse_closed", "pi_closed", "feasible", "converse_ok"]


def compare_mechanisms(linear_map: LinearMap, rho: float,
                       candidates: Optional[Sequence[LinearGaussianMechanism]] = None,
                       trials: int = 100_000, seed: int = 42,
                       shards: Optional[int] = None) -> list[CandidateRow]:
    """Simulate each candidate on common random numbers and check the converse.

    A candidate is ``feasible`` when its empirical distortion is at most
    ``rho`` up to statistical slack; every feasible candidate must have
    empirical MMSE no larger than ``pi(rho) + 3 SE``.
    """
    if trials < 2:
        raise ValueError("trials must be >= 2")
    svd = svd_ascending(linear_map)
    if candidates is None:
        candidates = baseline_mechanisms(linear_map, rho, svd)
    shards = shard_count() if shards is None else shards
    pi = privacy(build_curve(svd, linear_map.n), rho)
    rows = []
    for cand in candidates:
        if cand.n != linear_map.n or cand.out_dim != linear_map.m:
            raise ValueError(f"candidate {cand.name!r} has mismatched dimensions")
        batch = sample_joint(cand, trials, seed, shards)
        dist, dist_se = mean_and_se(np.sum((batch.target - batch.Z) ** 2, axis=1))
        est = estimator_for_linear_gaussian(cand)
        mmse, mmse_se = mean_and_se(np.sum((batch.X - estimate(est, batch.Z)) ** 2, axis=1))
        feasible = dist <= rho + SLACK_SE * dist_se
        rows.append(CandidateRow(
            name=cand.name,
            empirical_distortion=dist,
            distortion_se=dist_se,
            empirical_mmse=mmse,
            mmse_se=mmse_se,
            closed_form_mmse=est.mmse_closed_form,
            pi_closed=pi,
            feasible=bool(feasible),
            converse_ok=bool(not feasible or mmse <= pi + SLACK_SE * mmse_se),
        ))
    return rows
