"""Behavioral and score distance kernels and pairwise matrix construction."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, FreedomError, InputError, NTooSmall, ZeroVector
from .records import OutputKind, OutputPayload


class DistanceKind(enum.Enum):
    JACCARD_SET = "jaccard"
    INDICATOR = "indicator"
    TOKEN_JACCARD = "token-jaccard"
    COSINE = "cosine"
    ABS_SCORE = "abs"


@dataclass(frozen=True)
class DistanceSpec:
    kind: DistanceKind
    alpha: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")


class DistanceMatrix:
    """Dense symmetric n x n matrix with zero diagonal."""

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = np.array(data, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("distance matrix must be square")
        if arr.shape[0] < 2:
            raise NTooSmall(f"distance matrix needs n >= 2, got {arr.shape[0]}")
        if not np.all(np.diag(arr) == 0):
            raise ValueError("distance matrix diagonal must be zero")
        if not np.array_equal(arr, arr.T):
            raise ValueError("distance matrix must be symmetric")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("distance entries must be finite and non-negative")
        arr.setflags(write=False)
        self._data = arr

    @classmethod
    def from_upper(cls, upper: Sequence[float], n: int) -> "DistanceMatrix":
        """Build from the row-major upper triangle (i < j)."""
        m = np.zeros((n, n))
        iu = np.triu_indices(n, 1)
        m[iu] = upper
        m.T[iu] = upper
        return cls(m)

    @property
    def n(self) -> int:
        return self._data.shape[0]

    @property
    def data(self) -> np.ndarray:
        return self._data

    def upper(self) -> np.ndarray:
        return self._data[np.triu_indices(self.n, 1)]

    def permuted(self, order) -> "DistanceMatrix":
        """Relabel rows and columns jointly."""
        order = np.asarray(order)
        return DistanceMatrix(self._data[np.ix_(order, order)])

    def __array__(self, dtype=None, copy=None):
        return self._data if dtype is None else self._data.astype(dtype)

    def __repr__(self):
        return f"DistanceMatrix(n={self.n})"


def _as_set(x) -> frozenset:
    if isinstance(x, OutputPayload):
        return frozenset(x.value)
    return frozenset(x)


def jaccard_distance(a, b) -> float:
    """1 - |a & b| / |a | b|; two empty sets are at distance 0."""
    sa, sb = _as_set(a), _as_set(b)
    union = len(sa | sb)
    if union == 0:
        return 0.0
    return 1.0 - len(sa & sb) / union


def indicator_distance(a, b) -> float:
    la = a.value if isinstance(a, OutputPayload) else a
    lb = b.value if isinstance(b, OutputPayload) else b
    return 0.0 if la == lb else 1.0


def token_jaccard(a, b) -> float:
    # set semantics: repeated tokens collapse
    return jaccard_distance(a, b)


def cosine_distance(u, v) -> float:
    """1 - cos(u, v), clamped to [0, 2]. Raw values, no halving."""
    u = np.asarray(u.value if isinstance(u, OutputPayload) else u, dtype=float)
    v = np.asarray(v.value if isinstance(v, OutputPayload) else v, dtype=float)
    if u.shape != v.shape:
        raise DimensionMismatch(f"cosine_distance: dimensions {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ZeroVector("cosine_distance: zero vector")
    d = 1.0 - float(np.dot(u, v)) / (nu * nv)
    return min(2.0, max(0.0, d))


def _scalar(x) -> float:
    if isinstance(x, OutputPayload):
        if x.kind is not OutputKind.SCALAR_VEC or len(x.value) != 1:
            raise InputError("abs distance needs scalar outputs (1-element vectors)")
        return x.value[0]
    return float(x)


def score_distance(s_i, s_j) -> float:
    """|s_i - s_j|; also accepts 1-element vector payloads."""
    return abs(_scalar(s_i) - _scalar(s_j))


_KERNELS: dict[DistanceKind, Callable] = {
    DistanceKind.JACCARD_SET: jaccard_distance,
    DistanceKind.INDICATOR: indicator_distance,
    DistanceKind.TOKEN_JACCARD: token_jaccard,
    DistanceKind.COSINE: cosine_distance,
    DistanceKind.ABS_SCORE: score_distance,
}

# payload kind each output kernel accepts
_PAYLOAD_FOR = {
    DistanceKind.JACCARD_SET: OutputKind.SET,
    DistanceKind.INDICATOR: OutputKind.CATEGORY,
    DistanceKind.TOKEN_JACCARD: OutputKind.TOKENS,
}


def kernel_for(kind: DistanceKind) -> Callable:
    return _KERNELS[kind]


def check_payloads(items: Sequence, kind: DistanceKind) -> None:
    want = _PAYLOAD_FOR.get(kind)
    if want is None:
        return
    for i, it in enumerate(items):
        if isinstance(it, OutputPayload) and it.kind is not want:
            raise InputError(
                f"item {i}: {kind.value} distance needs {want.value} outputs, got {it.kind.value}"
            )


def build_distance_matrix(items: Sequence, spec: DistanceSpec) -> DistanceMatrix:
    """Pairwise kernel values raised entry-wise to ``spec.alpha``."""
    n = len(items)
    if n < 2:
        raise NTooSmall(f"need at least 2 items, got {n}")
    check_payloads(items, spec.kind)
    kernel = _KERNELS[spec.kind]
    m = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            try:
                d = kernel(items[i], items[j])
            except FreedomError as exc:
                raise type(exc)(f"pair ({i}, {j}): {exc}") from exc
            if spec.alpha != 1.0:
                d = math.pow(d, spec.alpha)
            m[i, j] = m[j, i] = d
    return DistanceMatrix(m)


def score_matrix(scores: Sequence[float]) -> DistanceMatrix:
    return build_distance_matrix(list(scores), DistanceSpec(DistanceKind.ABS_SCORE))
