"""Linear maps and their ascending singular value decomposition.

A querier wants ``A @ x`` (optionally ``A @ x + b``) for Gaussian data
``x ~ N(0, I_n)``.  Everything downstream depends on ``A`` only through
``n``, the numerical rank ``r`` and the nonzero singular values, which are
kept here in ascending order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional, Union

import numpy as np

__all__ = [
    "LinearMap",
    "MatrixFormatError",
    "SvdFactorization",
    "parse_linear_map",
    "load_linear_map",
    "svd_ascending",
    "var_ax",
    "mmse_x_given_ax",
]

EPS = np.finfo(float).eps


class MatrixFormatError(ValueError):
    """Raised when a matrix document is malformed."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LinearMap:
    """Dense real ``m x n`` matrix with an optional offset of length ``m``."""

    entries: np.ndarray
    offset: Optional[np.ndarray] = None

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] < 1 or entries.shape[1] < 1:
            raise MatrixFormatError(
                f"entries must be a nonempty 2-D matrix, got shape {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise MatrixFormatError("matrix entries must be finite")
        object.__setattr__(self, "entries", _frozen(entries))
        if self.offset is not None:
            b = np.asarray(self.offset, dtype=float)
            if b.ndim != 1 or b.shape[0] != entries.shape[0]:
                raise MatrixFormatError(
                    f"offset length {b.size} does not match m={entries.shape[0]}")
            if not np.all(np.isfinite(b)):
                raise MatrixFormatError("offset entries must be finite")
            object.__setattr__(self, "offset", _frozen(b))

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    @property
    def b(self) -> np.ndarray:
        """Offset vector; zeros when the map is purely linear."""
        if self.offset is None:
            return np.zeros(self.m)
        return self.offset

    def without_offset(self) -> "LinearMap":
        return LinearMap(self.entries)

    def to_dict(self) -> dict:
        doc: dict[str, Any] = {
            "m": self.m,
            "n": self.n,
            "entries": self.entries.tolist(),
        }
        if self.offset is not None:
            doc["b"] = self.offset.tolist()
        return doc

    def to_json(self) -> str:
        # repr-based float serialization round-trips exactly
        return json.dumps(self.to_dict())


def _as_int(doc: dict, key: str) -> int:
    val = doc.get(key)
    if isinstance(val, bool) or not isinstance(val, int) or val < 1:
        raise MatrixFormatError(f'"{key}" must be a positive integer, got {val!r}')
    return val


def _as_row(row: Any, what: str) -> list:
    if not isinstance(row, list):
        raise MatrixFormatError(f"{what} must be an array of numbers")
    for v in row:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise MatrixFormatError(f"{what} contains a non-numeric value {v!r}")
    return row


def parse_linear_map(document: Union[str, bytes, dict]) -> LinearMap:
    """Parse a matrix JSON document into a validated :class:`LinearMap`.

    The document is an object with keys ``"m"``, ``"n"``, ``"entries"`` (an
    array of ``m`` rows of ``n`` numbers) and an optional ``"b"``.
    """
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise MatrixFormatError(f"invalid JSON: {exc}") from exc
    else:
        doc = document
    if not isinstance(doc, dict):
        raise MatrixFormatError("matrix document must be a JSON object")

    m = _as_int(doc, "m")
    n = _as_int(doc, "n")
    rows = doc.get("entries")
    if not isinstance(rows, list):
        raise MatrixFormatError('"entries" must be an array of rows')
    if len(rows) != m:
        raise MatrixFormatError(f"expected {m} rows, got {len(rows)}")
    for i, row in enumerate(rows):
        _as_row(row, f"row {i}")
        if len(row) != n:
            raise MatrixFormatError(
                f"ragged matrix: row {i} has {len(row)} entries, expected {n}")
    entries = np.array(rows, dtype=float).reshape(m, n)

    b = doc.get("b")
    if b is not None:
        _as_row(b, '"b"')
        if len(b) != m:
            raise MatrixFormatError(f'offset length mismatch: "b" has {len(b)} entries, expected {m}')
        b = np.array(b, dtype=float)
    return LinearMap(entries, b)


def load_linear_map(path) -> LinearMap:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_linear_map(fh.read())


@dataclass(frozen=True)
class SvdFactorization:
    """``A = U S V^T`` with the nonzero singular values first and ascending.

    Attributes
    ----------
    U, V : np.ndarray
        Square orthonormal factors, ``m x m`` and ``n x n``.
    s : np.ndarray
        The ``r`` singular values above ``rank_tolerance``, ascending.
    rank_tolerance : float
        Threshold actually used to decide the numerical rank.
    """

    U: np.ndarray
    V: np.ndarray
    s: np.ndarray
    rank_tolerance: float
    m: int = field(init=False)
    n: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "U", _frozen(self.U))
        object.__setattr__(self, "V", _frozen(self.V))
        object.__setattr__(self, "s", _frozen(self.s))
        object.__setattr__(self, "m", self.U.shape[0])
        object.__setattr__(self, "n", self.V.shape[0])

    @property
    def rank(self) -> int:
        return self.s.size

    r = rank

    @property
    def s_squared(self) -> np.ndarray:
        return self.s ** 2

    @property
    def U_tilde(self) -> np.ndarray:
        return self.U[:, : self.rank]

    @property
    def V_tilde(self) -> np.ndarray:
        return self.V[:, : self.rank]

    @property
    def S(self) -> np.ndarray:
        S = np.zeros((self.m, self.n))
        idx = np.arange(self.rank)
        S[idx, idx] = self.s
        return S

    @property
    def reduced_map(self) -> np.ndarray:
        """The ``r x n`` matrix ``S~ V^T``: first ``r`` rows of ``S V^T``."""
        return self.s[:, None] * self.V_tilde.T

    def reconstruct(self) -> np.ndarray:
        return (self.U_tilde * self.s) @ self.V_tilde.T


def default_rank_tolerance(entries: np.ndarray, s_max: float) -> float:
    return s_max * max(entries.shape) * EPS


def svd_ascending(linear_map: LinearMap, rank_tolerance: float = 0.0) -> SvdFactorization:
    """Factor ``A`` with the nonzero singular values in ascending order.

    Singular values ``<= rank_tolerance`` are dropped. A tolerance of 0
    selects ``s_max * max(m, n) * eps``. The zero map yields ``r = 0``.
    """
    if not rank_tolerance >= 0:
        raise ValueError(f"rank_tolerance must be nonnegative, got {rank_tolerance}")
    A = linear_map.entries
    m, n = A.shape
    U, s_desc, Vt = np.linalg.svd(A, full_matrices=True)
    s_max = s_desc[0] if s_desc.size else 0.0
    tol = rank_tolerance if rank_tolerance > 0 else default_rank_tolerance(A, s_max)
    r = int(np.count_nonzero(s_desc > tol))

    # nonzero block reversed to ascending, the rest kept as is
    perm_u = np.concatenate([np.arange(r - 1, -1, -1), np.arange(r, m)]).astype(int)
    perm_v = np.concatenate([np.arange(r - 1, -1, -1), np.arange(r, n)]).astype(int)
    return SvdFactorization(
        U=U[:, perm_u],
        V=Vt.T[:, perm_v],
        s=s_desc[:r][::-1],
        rank_tolerance=float(tol),
    )


def var_ax(svd: SvdFactorization) -> float:
    """Total variance of ``AX``: ``tr(A A^T) = sum(s_i**2)``."""
    return float(np.sum(svd.s_squared))


def mmse_x_given_ax(svd: SvdFactorization, n: int) -> float:
    """MMSE of ``X`` given the exact value ``AX``, which is ``n - r``."""
    if n != svd.n:
        raise ValueError(f"n={n} does not match the factored map (n={svd.n})")
    return float(n - svd.rank)
