"""Structured linear algebra for the banded chain matrix ``B(m, omega)``.

``B(m, omega)`` is the ``m x m`` matrix whose ``l``-th row ``b_l`` is

* ``-e_{m-l} + e_{m-l+1}`` for ``l < m``,
* ``omega * e_1`` for ``l = m``,

so that ``B^T B`` is the classical tridiagonal chain matrix with ``omega**2 + 1``
in its top-left corner and ``1`` in its bottom-right corner.  The rows are split
into ``n`` groups such that rows sharing a group never touch a common
coordinate; this makes every group Gram matrix ``B_i B_i^T`` diagonal.

Index conventions
-----------------
Row indices ``l`` and group indices ``i`` are 1-based everywhere in the public
API, matching the usual mathematical notation.  Vectors are ordinary 0-based
numpy arrays: the 1-based coordinate ``j`` lives at ``x[j - 1]``.
"""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "BandSpec",
    "Orientation",
    "RowPartition",
    "row_vector",
    "partition_rows",
    "apply_group_gram",
    "solve_shifted_group_gram",
    "subspace_index",
    "dense_band",
    "dense_group_gram",
]


class Orientation(str, Enum):
    """Which end of the coordinate chain the reachable subspaces grow from.

    ``TAIL`` subspaces are ``span{e_m, ..., e_{m-k+1}}``; ``HEAD`` subspaces are
    ``span{e_1, ..., e_k}``.
    """

    TAIL = "tail"
    HEAD = "head"


@dataclass(frozen=True)
class BandSpec:
    m: int
    omega: float
    n: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"dimension m must be an integer >= 2, got {self.m}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"group count n must be an integer >= 2, got {self.n}")
        if not self.omega >= 0:
            raise ValueError(f"omega must be nonnegative, got {self.omega}")


@dataclass(frozen=True)
class RowPartition:
    """Rows of ``B(m, omega)`` split into ``n`` groups.

    ``groups[i - 1]`` holds the sorted 1-based row indices of group ``i``.
    The remaining fields are precomputed 0-based coordinate arrays used by the
    structured products: for every non-corner row in the group, ``lo`` is the
    coordinate carrying ``-1`` and ``lo + 1`` the one carrying ``+1``.
    """

    m: int
    n: int
    orientation: Orientation
    groups: tuple
    _lo: tuple = field(repr=False, compare=False)
    _corner: tuple = field(repr=False, compare=False)

    def rows(self, i):
        return self.groups[_check_group(self, i)]

    def group_of(self, l):
        """Group index (1-based) that owns row ``l``."""
        for gi, rows in enumerate(self.groups):
            if l in rows:
                return gi + 1
        raise ValueError(f"row {l} is outside 1..{self.m}")


def _check_group(partition, i):
    if not 1 <= i <= partition.n:
        raise IndexError(f"group index {i} out of range 1..{partition.n}")
    return i - 1


def row_vector(spec, l):
    """Dense row ``b_l`` of ``B(m, omega)``.  Tests only."""
    m = spec.m
    if not 1 <= l <= m:
        raise IndexError(f"row index {l} out of range 1..{m}")
    b = np.zeros(m)
    if l == m:
        b[0] = spec.omega
    else:
        b[m - l - 1] = -1.0
        b[m - l] = 1.0
    return b


def partition_rows(spec, orientation=Orientation.TAIL):
    """Split the rows of ``B(m, omega)`` into ``n`` non-overlapping groups.

    With tail orientation, row ``l`` belongs to group ``i`` iff
    ``l = i - 1 (mod n)``.  The row that links coordinates ``m - k`` and
    ``m - k + 1`` is row ``k``, so the group owning it is the only one able to
    grow ``span{e_m, ..., e_{m-k+1}}`` by one coordinate.

    With head orientation the chain is read from the other end: row ``l`` links
    coordinates ``s = m - l`` and ``s + 1`` and is assigned by
    ``s = i - 1 (mod n)``; the corner row (``s = 0``) lands in group 1.
    """
    orientation = Orientation(orientation)
    m, n = spec.m, spec.n
    ls = np.arange(1, m + 1)
    key = ls if orientation is Orientation.TAIL else m - ls
    owner = key % n  # == i - 1
    groups, lo, corner = [], [], []
    for gi in range(n):
        rows = ls[owner == gi]
        groups.append(tuple(int(l) for l in rows))
        regular = rows[rows < m]
        lo.append(np.asarray(m - regular - 1, dtype=np.intp))
        corner.append(bool(np.any(rows == m)))
    return RowPartition(m, n, orientation, tuple(groups), tuple(lo), tuple(corner))


def apply_group_gram(spec, partition, i, x):
    """Return ``B_i^T B_i x = sum_{l in L_i} (b_l^T x) b_l`` in ``O(|L_i|)``."""
    gi = _check_group(partition, i)
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    lo = partition._lo[gi]
    d = x[lo + 1] - x[lo]
    # rows in one group have disjoint supports, so plain assignment is safe
    out[lo + 1] = d
    out[lo] = -d
    if partition._corner[gi]:
        out[0] += spec.omega ** 2 * x[0]
    return out


def solve_shifted_group_gram(spec, partition, i, c2, y):
    """Return ``(I + c2 B_i^T B_i)^{-1} y`` through the Woodbury identity.

    ``B_i B_i^T`` is diagonal (``2`` for a chain row, ``omega**2`` for the corner
    row), so the inverse reduces to one scalar division per row.
    """
    if not c2 > 0:
        raise ValueError(f"c2 must be positive, got {c2}")
    gi = _check_group(partition, i)
    y = np.asarray(y, dtype=float)
    out = y.copy()
    lo = partition._lo[gi]
    t = (y[lo + 1] - y[lo]) / (1.0 / c2 + 2.0)
    out[lo + 1] -= t
    out[lo] += t
    if partition._corner[gi]:
        w = spec.omega
        out[0] -= w * (w * y[0]) / (1.0 / c2 + w * w)
    return out


def subspace_index(x, orientation=Orientation.TAIL, tol=1e-12):
    """Smallest ``k`` such that ``x`` lies (up to ``tol``) in the k-th subspace.

    Coordinates count as zero when ``|x_j| <= tol * (1 + max|x|)``.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0
    a = np.abs(x)
    nz = np.flatnonzero(a > tol * (1.0 + a.max()))
    if nz.size == 0:
        return 0
    if Orientation(orientation) is Orientation.TAIL:
        return int(x.size - nz[0])
    return int(nz[-1] + 1)


def dense_band(spec):
    """Dense ``B(m, omega)``; a brute-force oracle for verification."""
    return np.vstack([row_vector(spec, l) for l in range(1, spec.m + 1)])


def dense_group_gram(spec, partition, i):
    """Dense ``B_i^T B_i``; a brute-force oracle for verification."""
    B = dense_band(spec)
    rows = [l - 1 for l in partition.rows(i)]
    Bi = B[rows]
    return Bi.T @ Bi
