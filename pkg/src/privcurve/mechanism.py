"""The optimal attenuate-and-add-noise query response and its sampler.

In reduced coordinates the response is ``D_a S~ V^T x + D_no noise`` (one
output per nonzero singular value).  In original coordinates it is rotated
back by ``U~`` and shifted by the offset, giving an ``m``-dimensional
response to the affine query ``A x + b``.
"""

from __future__ import annotations

import enum
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import numpy as np

from .alloc import AttenuationPair, NoiseAllocation, allocate, attenuation_pair
from .linmap import LinearMap, SvdFactorization, svd_ascending

__all__ = [
    "CoordinateMode",
    "Mechanism",
    "LinearGaussianMechanism",
    "SampleBatch",
    "RNG_ID",
    "build_mechanism",
    "mechanism_from_svd",
    "respond",
    "sample_joint",
    "draw_standard_normals",
    "component_distortions_closed_form",
    "write_batch_csv",
    "write_batch_binary",
    "read_batch_binary",
]

RNG_ID = "numpy-PCG64-SeedSequence/ziggurat"
BATCH_MAGIC = b"PRIVBAT1"
MAX_SEED = 2 ** 64 - 1


class CoordinateMode(str, enum.Enum):
    REDUCED = "reduced"
    ORIGINAL = "original"


@dataclass(frozen=True)
class Mechanism:
    map: LinearMap
    svd: SvdFactorization
    allocation: NoiseAllocation
    atten: AttenuationPair
    mode: CoordinateMode = CoordinateMode.ORIGINAL

    @property
    def n(self) -> int:
        return self.map.n

    @property
    def m(self) -> int:
        return self.map.m

    @property
    def r(self) -> int:
        return self.svd.rank

    @property
    def rho(self) -> float:
        return self.allocation.total_requested

    @property
    def out_dim(self) -> int:
        return self.r if self.mode is CoordinateMode.REDUCED else self.m

    @property
    def noise_dim(self) -> int:
        return self.r

    @property
    def offset(self) -> np.ndarray:
        """Shift of the response; the map offset in original mode."""
        if self.mode is CoordinateMode.REDUCED:
            return np.zeros(self.r)
        return self.map.b

    @property
    def is_passthrough(self) -> bool:
        return not np.any(self.allocation.per_component)

    def target(self, x: np.ndarray) -> np.ndarray:
        """The value the response must recover: ``S~ V^T x`` or ``A x + b``."""
        x = np.asarray(x, dtype=float)
        if self.mode is CoordinateMode.REDUCED:
            return x @ self.svd.reduced_map.T
        return x @ self.map.entries.T + self.map.b

    def respond(self, x, noise) -> np.ndarray:
        return respond(self, x, noise)

    def gains(self) -> tuple[np.ndarray, np.ndarray]:
        """``(G, H)`` with response ``G x + H noise + offset``."""
        d_a, d_no = self.atten.d_a, self.atten.d_no
        G = d_a[:, None] * self.svd.reduced_map
        H = np.diag(d_no)
        if self.mode is CoordinateMode.ORIGINAL:
            Ut = self.svd.U_tilde
            G, H = Ut @ G, Ut @ H
        return G, H

    def as_linear_gaussian(self, name: str = "optimal") -> "LinearGaussianMechanism":
        if self.mode is CoordinateMode.REDUCED:
            raise ValueError("only original-mode mechanisms are comparable to baselines")
        G, H = self.gains()
        return LinearGaussianMechanism(name, self.map, G, H, self.map.b)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "r": self.r,
            "rho": self.rho,
            "saturated": self.allocation.saturated,
            "allocation": self.allocation.per_component.tolist(),
            "d_a": self.atten.d_a.tolist(),
            "d_no": self.atten.d_no.tolist(),
            "U_tilde": self.svd.U_tilde.tolist(),
            "V_tilde": self.svd.V_tilde.tolist(),
            "b": self.map.b.tolist(),
            "mode": self.mode.value,
        }


def mechanism_from_svd(linear_map: LinearMap, svd: SvdFactorization, rho: float,
                       mode: CoordinateMode = CoordinateMode.ORIGINAL) -> Mechanism:
    allocation = allocate(svd, rho)
    return Mechanism(linear_map, svd, allocation, attenuation_pair(allocation, svd),
                     CoordinateMode(mode))


def build_mechanism(linear_map: LinearMap, rho: float, rank_tolerance: float = 0.0,
                    mode: CoordinateMode = CoordinateMode.ORIGINAL) -> Mechanism:
    """Assemble the optimal response for budget ``rho``."""
    return mechanism_from_svd(linear_map, svd_ascending(linear_map, rank_tolerance), rho, mode)


def _check_dim(arr: np.ndarray, dim: int, what: str) -> None:
    if arr.shape[-1] != dim:
        raise ValueError(f"{what} has length {arr.shape[-1]}, expected {dim}")


def respond(mech: Mechanism, x, noise) -> np.ndarray:
    """Deterministic response to data ``x`` and standard-normal ``noise``.

    Accepts single vectors or row-stacked batches.
    """
    x = np.asarray(x, dtype=float)
    noise = np.asarray(noise, dtype=float)
    _check_dim(x, mech.n, "x")
    if noise.size == 0 and mech.r == 0:
        noise = np.zeros(x.shape[:-1] + (0,))
    _check_dim(noise, mech.r, "noise")
    if x.shape[:-1] != noise.shape[:-1]:
        raise ValueError("x and noise batch shapes differ")

    if mech.is_passthrough:
        return mech.target(x)
    reduced = mech.atten.d_a * (x @ mech.svd.reduced_map.T) + mech.atten.d_no * noise
    if mech.mode is CoordinateMode.REDUCED:
        return reduced
    return reduced @ mech.svd.U_tilde.T + mech.map.b


@dataclass(frozen=True)
class LinearGaussianMechanism:
    """Generic response ``G x + H noise + offset`` to the query ``A x + b``."""

    name: str
    map: LinearMap
    gain: np.ndarray
    noise_gain: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.gain, dtype=float))
        H = np.asarray(self.noise_gain, dtype=float).reshape(G.shape[0], -1)
        if G.shape[1] != self.map.n:
            raise ValueError(f"{self.name}: gain has {G.shape[1]} columns, expected n={self.map.n}")
        if G.shape[0] != self.map.m:
            raise ValueError(f"{self.name}: output dimension {G.shape[0]}, expected m={self.map.m}")
        object.__setattr__(self, "gain", G)
        object.__setattr__(self, "noise_gain", H)
        object.__setattr__(self, "offset", np.broadcast_to(
            np.asarray(self.offset, dtype=float), (G.shape[0],)).copy())

    @property
    def n(self) -> int:
        return self.map.n

    @property
    def out_dim(self) -> int:
        return self.gain.shape[0]

    @property
    def noise_dim(self) -> int:
        return self.noise_gain.shape[1]

    def target(self, x):
        return np.asarray(x, dtype=float) @ self.map.entries.T + self.map.b

    def respond(self, x, noise):
        return np.asarray(x) @ self.gain.T + np.asarray(noise) @ self.noise_gain.T + self.offset


@dataclass(frozen=True)
class SampleBatch:
    X: np.ndarray
    Z: np.ndarray
    AX: np.ndarray
    target: np.ndarray
    seed: int
    shards: int = 1
    rng_id: str = RNG_ID

    @property
    def count(self) -> int:
        return self.X.shape[0]


def _shard_sizes(count: int, shards: int) -> list[int]:
    base, extra = divmod(count, shards)
    return [base + (i < extra) for i in range(shards)]


def _validate_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def draw_standard_normals(count: int, dims: tuple[int, ...], seed: int,
                          shards: int = 1) -> list[np.ndarray]:
    """Independent ``count x d`` standard-normal blocks for each ``d`` in ``dims``.

    Each shard owns a child stream spawned from ``SeedSequence(seed)``, so the
    result is deterministic given ``(seed, shards)`` and shards may be drawn
    concurrently.
    """
    if count < 1:
        raise ValueError("count must be positive")
    if shards < 1:
        raise ValueError("shards must be positive")
    seed = _validate_seed(seed)
    children = np.random.SeedSequence(seed).spawn(shards)
    sizes = _shard_sizes(count, shards)

    def draw(i):
        gen = np.random.Generator(np.random.PCG64(children[i]))
        return [gen.standard_normal((sizes[i], d)) for d in dims]

    if shards == 1:
        parts = [draw(0)]
    else:
        with ThreadPoolExecutor(max_workers=min(shards, 8)) as pool:
            parts = list(pool.map(draw, range(shards)))
    return [np.concatenate([p[j] for p in parts], axis=0) for j in range(len(dims))]


def sample_joint(mech, count: int, seed: int, shards: int = 1) -> SampleBatch:
    """Draw ``X ~ N(0, I_n)`` and independent noise, then respond row-wise."""
    X, N = draw_standard_normals(count, (mech.n, mech.noise_dim), seed, shards)
    Z = mech.respond(X, N)
    AX = X @ mech.map.entries.T
    return SampleBatch(X=X, Z=Z, AX=AX, target=mech.target(X), seed=int(seed), shards=shards)


def component_distortions_closed_form(mech: Mechanism) -> np.ndarray:
    """Expected squared error of each reduced component; equals the allocation."""
    return np.array(mech.allocation.per_component, dtype=float)


def write_batch_csv(batch: SampleBatch, fh) -> None:
    n, k = batch.X.shape[1], batch.Z.shape[1]
    header = [f"x_{i + 1}" for i in range(n)] + [f"z_{j + 1}" for j in range(k)]
    fh.write(",".join(header) + "\n")
    rows = np.hstack([batch.X, batch.Z])
    for row in rows:
        fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def write_batch_binary(batch: SampleBatch, fh) -> None:
    """Magic, then ``count, n, k`` as little-endian u64, then f64 rows ``[x | z]``."""
    n, k = batch.X.shape[1], batch.Z.shape[1]
    fh.write(BATCH_MAGIC)
    fh.write(struct.pack("<QQQ", batch.count, n, k))
    rows = np.ascontiguousarray(np.hstack([batch.X, batch.Z]), dtype="<f8")
    fh.write(rows.tobytes(order="C"))


def read_batch_binary(fh) -> tuple[np.ndarray, np.ndarray]:
    magic = fh.read(8)
    if magic != BATCH_MAGIC:
        raise ValueError("not a sample batch file")
    count, n, k = struct.unpack("<QQQ", fh.read(24))
    data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != count * (n + k):
        raise ValueError("truncated sample batch")
    rows = data.reshape(count, n + k)
    return rows[:, :n].copy(), rows[:, n:].copy()
