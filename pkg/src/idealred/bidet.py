"""Products of minors and principal Pfaffians indexed by (bi)tableaux.

A bideterminant ref pairs a bitableau with the ambient matrix dimensions:
row k of the S side selects rows of the generic matrix, row k of the T side
selects columns, and the ref denotes the product over k of those minors.
The Pfaffian analogue takes a single tableau with even row lengths, each row
selecting a principal submatrix of the generic alternating matrix.

`eij_expansion_check` numerically validates how an elementary transform acts
on these products: the result expands over all ways of substituting i -> j
in the rows that contain i but not j, with one lambda per substituted row
and a sign fixed by the parity of re-sorting the substituted row.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import ParameterError
from .field import PrimeField
from .matrices import (
    PolyMatrix,
    batch_det,
    batch_matmul,
    batch_pfaff,
    det_mod,
    pfaff_mod,
    sym_det,
    sym_pfaff,
)
from .poly import MultiDegree, SparsePolynomial, skew_entry, xvar
from .tableau import Bitableau, Partition, Tableau


class BideterminantRef:
    """A bitableau read as a product of minors of an n x m generic matrix."""

    __slots__ = ("bitableau", "n", "m")

    def __init__(self, bitableau: Bitableau, n: int, m: int):
        for row in bitableau.S.rows:
            _check_index_row(row, n, "row")
        for row in bitableau.T.rows:
            _check_index_row(row, m, "column")
        self.bitableau = bitableau
        self.n = n
        self.m = m

    @property
    def shape(self) -> Partition:
        return self.bitableau.shape

    def __eq__(self, other):
        return (
            isinstance(other, BideterminantRef)
            and (other.bitableau, other.n, other.m) == (self.bitableau, self.n, self.m)
        )

    def __hash__(self):
        return hash((self.bitableau, self.n, self.m))

    def __repr__(self):
        return f"BideterminantRef(S={self.bitableau.S.rows}, T={self.bitableau.T.rows})"


class BipfaffianRef:
    """A tableau with even rows read as a product of principal Pfaffians."""

    __slots__ = ("tableau", "dim")

    def __init__(self, tableau: Tableau, dim: int):
        if dim % 2:
            raise ParameterError("alternating ambient dimension must be even")
        for row in tableau.rows:
            if len(row) % 2:
                raise ParameterError(f"odd row length {len(row)} in Pfaffian tableau")
            _check_index_row(row, dim, "index")
        self.tableau = tableau
        self.dim = dim

    @property
    def shape(self) -> Partition:
        return self.tableau.shape

    def __eq__(self, other):
        return isinstance(other, BipfaffianRef) and (other.tableau, other.dim) == (
            self.tableau,
            self.dim,
        )

    def __hash__(self):
        return hash((self.tableau, self.dim))

    def __repr__(self):
        return f"BipfaffianRef({self.tableau.rows})"


def _check_index_row(row, bound: int, what: str):
    for a, b in zip(row, row[1:]):
        if not a < b:
            raise ParameterError(f"{what} index set {row} is not strictly increasing")
    if row and (row[0] < 1 or row[-1] > bound):
        raise ParameterError(f"{what} index {row} outside [1, {bound}]")


# ----------------------------------------------------------------------
# Symbolic expansion
# ----------------------------------------------------------------------


def _generic_minor(field: PrimeField, rows, cols) -> PolyMatrix:
    return PolyMatrix(
        field,
        [[SparsePolynomial.variable(field, xvar(r, c)) for c in cols] for r in rows],
    )


def _generic_principal_skew(field: PrimeField, idx) -> PolyMatrix:
    grid = []
    for a in idx:
        row = []
        for b in idx:
            sign, var = skew_entry(a, b)
            row.append(
                SparsePolynomial.zero(field)
                if var is None
                else SparsePolynomial.variable(field, var, coeff=sign)
            )
        grid.append(row)
    return PolyMatrix(field, grid)


def expand_bideterminant(field: PrimeField, ref: BideterminantRef) -> SparsePolynomial:
    out = SparsePolynomial.const(field, 1)
    for srow, trow in zip(ref.bitableau.S.rows, ref.bitableau.T.rows):
        out = out * sym_det(_generic_minor(field, srow, trow))
    return out


def expand_bipfaffian(field: PrimeField, ref: BipfaffianRef) -> SparsePolynomial:
    out = SparsePolynomial.const(field, 1)
    for row in ref.tableau.rows:
        out = out * sym_pfaff(_generic_principal_skew(field, row))
    return out


# ----------------------------------------------------------------------
# Numeric evaluation
# ----------------------------------------------------------------------


def eval_bideterminant(field: PrimeField, ref: BideterminantRef, point) -> int:
    point = np.asarray(point, dtype=np.int64)
    if point.shape != (ref.n, ref.m):
        raise ParameterError(
            f"point shape {point.shape} != ambient ({ref.n}, {ref.m})"
        )
    out = 1
    for srow, trow in zip(ref.bitableau.S.rows, ref.bitableau.T.rows):
        sel = point[np.ix_([r - 1 for r in srow], [c - 1 for c in trow])]
        out = out * det_mod(field, sel.tolist()) % field.p
    return out


def eval_bipfaffian(field: PrimeField, ref: BipfaffianRef, point) -> int:
    point = np.asarray(point, dtype=np.int64)
    if point.shape != (ref.dim, ref.dim):
        raise ParameterError(f"point shape {point.shape} != ambient {ref.dim}")
    if np.any((point + point.T) % field.p):
        raise ParameterError("Pfaffian point is not skew-symmetric")
    out = 1
    for row in ref.tableau.rows:
        idx = [a - 1 for a in row]
        sel = point[np.ix_(idx, idx)]
        out = out * pfaff_mod(field, sel.tolist()) % field.p
    return out


def eval_bideterminant_batch(
    field: PrimeField, ref: BideterminantRef, points: np.ndarray
) -> np.ndarray:
    """points: (B, n, m) stack; returns the (B,) value vector."""
    points = np.asarray(points, dtype=np.int64)
    out = np.ones(points.shape[0], dtype=np.int64)
    for srow, trow in zip(ref.bitableau.S.rows, ref.bitableau.T.rows):
        sel = points[:, [r - 1 for r in srow], :][:, :, [c - 1 for c in trow]]
        out = out * batch_det(field, sel) % field.p
    return out


def eval_bipfaffian_batch(
    field: PrimeField, ref: BipfaffianRef, points: np.ndarray
) -> np.ndarray:
    points = np.asarray(points, dtype=np.int64)
    out = np.ones(points.shape[0], dtype=np.int64)
    for row in ref.tableau.rows:
        idx = [a - 1 for a in row]
        sel = points[:, idx, :][:, :, idx]
        out = out * batch_pfaff(field, sel) % field.p
    return out


# ----------------------------------------------------------------------
# Multidegree bookkeeping
# ----------------------------------------------------------------------


def _value_counts(tab: Tableau, bound: int) -> tuple:
    counts = [0] * bound
    for row in tab.rows:
        for e in row:
            counts[e - 1] += 1
    return tuple(counts)


def bideterminant_multidegree(ref: BideterminantRef) -> MultiDegree:
    return MultiDegree(
        _value_counts(ref.bitableau.S, ref.n),
        _value_counts(ref.bitableau.T, ref.m),
    )


def bipfaffian_multidegree(ref: BipfaffianRef) -> MultiDegree:
    return MultiDegree(_value_counts(ref.tableau, ref.dim), None)


# ----------------------------------------------------------------------
# Row substitution with signs, and the expansion check
# ----------------------------------------------------------------------


def substitute_row_signed(row: tuple, i: int, j: int):
    """Replace i by j in a sorted index row and re-sort.

    Returns (new_row, sign) with sign the parity of the re-sorting
    permutation, or None when the row does not contain i or already
    contains j (no substitution happens)."""
    if i not in row or j in row:
        return None
    seq = [j if e == i else e for e in row]
    sign = 1
    # bubble the changed element into place, counting swaps
    arr = list(seq)
    for a in range(len(arr)):
        for b in range(len(arr) - 1 - a):
            if arr[b] > arr[b + 1]:
                arr[b], arr[b + 1] = arr[b + 1], arr[b]
                sign = -sign
    return tuple(arr), sign


def _substitution_expansion(tab: Tableau, i: int, j: int):
    """All (tableau, sign, h) obtained by substituting i -> j in a subset of
    the eligible rows; h is the subset size."""
    eligible = [
        k for k, row in enumerate(tab.rows) if i in row and j not in row
    ]
    out = []
    for h in range(len(eligible) + 1):
        for subset in itertools.combinations(eligible, h):
            rows = list(tab.rows)
            sign = 1
            for k in subset:
                new_row, s = substitute_row_signed(rows[k], i, j)
                rows[k] = new_row
                sign *= s
            out.append((Tableau(rows), sign, h))
    return out


def eij_expansion_check(
    field: PrimeField,
    ref,
    i: int,
    j: int,
    side: str,
    lam_value: int,
    point,
) -> bool:
    """Numerically verify the elementary-transform expansion at one point.

    side "left": transform multiplies the generic matrix on the left and the
    substitutions run over the S side.  side "right": the transposed
    transform multiplies on the right and substitutions run over T.  side
    "conjugate": alternating case, both sides at once, substitutions on the
    single tableau.  Returns True when the identity holds at the point.
    """
    p = field.p
    lam_value %= p
    point = np.asarray(point, dtype=np.int64) % p

    if side == "left":
        if not isinstance(ref, BideterminantRef):
            raise ParameterError("left side needs a bideterminant ref")
        E = np.eye(ref.n, dtype=np.int64)
        E[i - 1, j - 1] = lam_value
        moved = batch_matmul(field, E, point)
        lhs = eval_bideterminant(field, ref, moved)
        total = 0
        for tab, sign, h in _substitution_expansion(ref.bitableau.S, i, j):
            piece = eval_bideterminant(
                field, BideterminantRef(Bitableau(tab, ref.bitableau.T), ref.n, ref.m), point
            )
            term = piece * pow(lam_value, h, p) % p
            total = (total + (term if sign == 1 else p - term)) % p
        return lhs == total

    if side == "right":
        if not isinstance(ref, BideterminantRef):
            raise ParameterError("right side needs a bideterminant ref")
        E = np.eye(ref.m, dtype=np.int64)
        E[i - 1, j - 1] = lam_value
        moved = batch_matmul(field, point, E.T.copy())
        lhs = eval_bideterminant(field, ref, moved)
        total = 0
        for tab, sign, h in _substitution_expansion(ref.bitableau.T, i, j):
            piece = eval_bideterminant(
                field, BideterminantRef(Bitableau(ref.bitableau.S, tab), ref.n, ref.m), point
            )
            term = piece * pow(lam_value, h, p) % p
            total = (total + (term if sign == 1 else p - term)) % p
        return lhs == total

    if side == "conjugate":
        if not isinstance(ref, BipfaffianRef):
            raise ParameterError("conjugate side needs a bipfaffian ref")
        E = np.eye(ref.dim, dtype=np.int64)
        E[i - 1, j - 1] = lam_value
        moved = batch_matmul(field, batch_matmul(field, E, point), E.T.copy())
        lhs = eval_bipfaffian(field, ref, moved)
        total = 0
        for tab, sign, h in _substitution_expansion(ref.tableau, i, j):
            piece = eval_bipfaffian(field, BipfaffianRef(tab, ref.dim), point)
            term = piece * pow(lam_value, h, p) % p
            total = (total + (term if sign == 1 else p - term)) % p
        return lhs == total

    raise ParameterError(f"unknown side {side!r}")
