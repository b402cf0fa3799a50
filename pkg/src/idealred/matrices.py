"""Matrices over the polynomial ring plus batched numeric linear algebra.

Symbolic side: dense PolyMatrix of SparsePolynomial entries, elementary
matrices, the upper-unitriangular transform products held in factored form,
anti-diagonal and scaled-diagonal matrices, and small symbolic
determinants/Pfaffians.  Numeric side: vectorized mod-p matrix products,
determinants and Pfaffians over int64 arrays.

Public matrix indices are 1-based to line up with variable names such as
lam(i, j); internal storage is 0-based.
"""

from __future__ import annotations

import numpy as np

from .errors import DeskCapError, ParameterError
from .field import PrimeField
from .poly import (
    SparsePolynomial,
    V,
    lam,
    mono,
    xi,
    yvar,
    zvar,
)

SYM_DET_CAP = 8
SYM_PFAFF_CAP = 12


class PolyMatrix:
    """Dense rectangular matrix of polynomials over one field."""

    __slots__ = ("field", "entries")

    def __init__(self, field: PrimeField, entries):
        self.field = field
        rows = tuple(tuple(row) for row in entries)
        if rows:
            width = len(rows[0])
            for row in rows:
                if len(row) != width:
                    raise ParameterError("ragged matrix rows")
        self.entries = rows

    @property
    def nrows(self) -> int:
        return len(self.entries)

    @property
    def ncols(self) -> int:
        return len(self.entries[0]) if self.entries else 0

    def entry(self, i: int, j: int) -> SparsePolynomial:
        return self.entries[i - 1][j - 1]

    @classmethod
    def identity(cls, field: PrimeField, n: int) -> "PolyMatrix":
        one = SparsePolynomial.const(field, 1)
        zero = SparsePolynomial.zero(field)
        return cls(
            field,
            [[one if i == j else zero for j in range(n)] for i in range(n)],
        )

    @classmethod
    def zeros(cls, field: PrimeField, r: int, c: int) -> "PolyMatrix":
        zero = SparsePolynomial.zero(field)
        return cls(field, [[zero] * c for _ in range(r)])

    @classmethod
    def from_scalars(cls, field: PrimeField, grid) -> "PolyMatrix":
        return cls(
            field,
            [[SparsePolynomial.const(field, v) for v in row] for row in grid],
        )

    def matmul(self, other: "PolyMatrix") -> "PolyMatrix":
        if self.ncols != other.nrows:
            raise ParameterError(
                f"cannot multiply {self.nrows}x{self.ncols} by "
                f"{other.nrows}x{other.ncols}"
            )
        self.field.require_same(other.field)
        out = []
        for i in range(self.nrows):
            row = []
            for j in range(other.ncols):
                acc = SparsePolynomial.zero(self.field)
                for k in range(self.ncols):
                    a = self.entries[i][k]
                    b = other.entries[k][j]
                    if a.is_zero() or b.is_zero():
                        continue
                    acc = acc + a * b
                row.append(acc)
            out.append(row)
        return PolyMatrix(self.field, out)

    def __matmul__(self, other):
        return self.matmul(other)

    def add(self, other: "PolyMatrix") -> "PolyMatrix":
        if (self.nrows, self.ncols) != (other.nrows, other.ncols):
            raise ParameterError("matrix shape mismatch in add")
        return PolyMatrix(
            self.field,
            [
                [a + b for a, b in zip(r1, r2)]
                for r1, r2 in zip(self.entries, other.entries)
            ],
        )

    def sub(self, other: "PolyMatrix") -> "PolyMatrix":
        if (self.nrows, self.ncols) != (other.nrows, other.ncols):
            raise ParameterError("matrix shape mismatch in sub")
        return PolyMatrix(
            self.field,
            [
                [a - b for a, b in zip(r1, r2)]
                for r1, r2 in zip(self.entries, other.entries)
            ],
        )

    def transpose(self) -> "PolyMatrix":
        return PolyMatrix(self.field, list(zip(*self.entries)))

    def scale(self, c: int) -> "PolyMatrix":
        return PolyMatrix(self.field, [[e.scale(c) for e in row] for row in self.entries])

    def map(self, fn) -> "PolyMatrix":
        return PolyMatrix(self.field, [[fn(e) for e in row] for row in self.entries])

    def substitute(self, mapping: dict) -> "PolyMatrix":
        return self.map(lambda e: e.substitute(mapping))

    def is_skew_symmetric(self) -> bool:
        if self.nrows != self.ncols:
            return False
        for i in range(self.nrows):
            if not self.entries[i][i].is_zero():
                return False
            for j in range(i + 1, self.ncols):
                if not (self.entries[i][j] + self.entries[j][i]).is_zero():
                    return False
        return True

    def eval_at(self, assignment: dict) -> list:
        return [[e.eval(assignment) for e in row] for row in self.entries]

    def eval_arr_at(self, assignment: dict) -> np.ndarray:
        """Batched evaluation: assignment maps vars to (B,) arrays; returns
        an int64 array of shape (B, nrows, ncols)."""
        shape = None
        for arr in assignment.values():
            shape = np.shape(arr)
            break
        if shape is None:
            shape = ()
        out = np.zeros(shape + (self.nrows, self.ncols), dtype=np.int64)
        for i in range(self.nrows):
            for j in range(self.ncols):
                e = self.entries[i][j]
                if e.is_zero():
                    continue
                out[..., i, j] = e.eval_arr(assignment) if e.variables() else e.constant_term()
        return out

    def __eq__(self, other):
        return (
            isinstance(other, PolyMatrix)
            and self.field.p == other.field.p
            and self.entries == other.entries
        )

    def __repr__(self):
        return f"PolyMatrix({self.nrows}x{self.ncols})"


def elementary(field: PrimeField, n: int, i: int, j: int, z) -> PolyMatrix:
    """Identity with z added at position (i, j); unit determinant."""
    if i == j:
        raise ParameterError("elementary matrix needs i != j")
    if not (1 <= i <= n and 1 <= j <= n):
        raise ParameterError(f"indices ({i}, {j}) outside [1, {n}]")
    if isinstance(z, int):
        z = SparsePolynomial.const(field, z)
    mat = [
        [
            SparsePolynomial.const(field, 1 if a == b else 0)
            for b in range(1, n + 1)
        ]
        for a in range(1, n + 1)
    ]
    mat[i - 1][j - 1] = mat[i - 1][j - 1] + z
    return PolyMatrix(field, mat)


class FactoredTransform:
    """Ordered product of elementary factors I + var * e(row, col).

    The expanded symbolic product is built once on demand; numeric
    evaluation replays the factors as row operations, costing
    O(#factors * dim) per point instead of touching the expanded entries.
    """

    __slots__ = ("field", "dim", "factors", "_expanded")

    def __init__(self, field: PrimeField, dim: int, factors):
        self.field = field
        self.dim = dim
        self.factors = tuple(factors)  # (row, col, var), leftmost first
        self._expanded = None

    def expanded(self) -> PolyMatrix:
        if self._expanded is None:
            acc = PolyMatrix.identity(self.field, self.dim)
            for row, col, var in reversed(self.factors):
                # multiplying by I + var*e(row,col) on the left adds
                # var * (row `col`) to row `row`
                new_entries = [list(r) for r in acc.entries]
                vpoly = SparsePolynomial.variable(self.field, var)
                for c in range(self.dim):
                    src = acc.entries[col - 1][c]
                    if not src.is_zero():
                        new_entries[row - 1][c] = new_entries[row - 1][c] + vpoly * src
                acc = PolyMatrix(self.field, new_entries)
            self._expanded = acc
        return self._expanded

    def eval_at(self, assignment: dict) -> np.ndarray:
        p = self.field.p
        out = np.eye(self.dim, dtype=np.int64)
        for row, col, var in reversed(self.factors):
            c = assignment[var] % p
            if c:
                out[row - 1] = (out[row - 1] + c * out[col - 1]) % p
        return out

    def eval_batch(self, assignment: dict) -> np.ndarray:
        """assignment maps each factor var to a (B,) array; returns (B, dim, dim)."""
        p = self.field.p
        some = next(iter(assignment.values()))
        B = np.shape(some)[0]
        out = np.broadcast_to(np.eye(self.dim, dtype=np.int64), (B, self.dim, self.dim)).copy()
        for row, col, var in reversed(self.factors):
            c = np.asarray(assignment[var], dtype=np.int64) % p
            out[:, row - 1, :] = (out[:, row - 1, :] + c[:, None] * out[:, col - 1, :]) % p
        return out

    def variables(self) -> list:
        return [var for _, _, var in self.factors]


def build_M_det(field: PrimeField, n: int) -> FactoredTransform:
    """Left row-transform: product of E(i, j) with multiplier lam(i, j) over
    all pairs i < j in increasing pair order, leftmost first."""
    factors = [
        (i, j, lam(i, j)) for i in range(1, n + 1) for j in range(i + 1, n + 1)
    ]
    return FactoredTransform(field, n, factors)


def build_N_det(field: PrimeField, m: int) -> FactoredTransform:
    """Right column-transform: transposed elementary factors with multipliers
    xi(i, j), in decreasing pair order."""
    pairs = [(i, j) for i in range(1, m + 1) for j in range(i + 1, m + 1)]
    factors = [(j, i, xi(i, j)) for i, j in reversed(pairs)]
    return FactoredTransform(field, m, factors)


def build_M_pfaff(field: PrimeField, dim: int) -> FactoredTransform:
    if dim % 2:
        raise ParameterError("alternating ambient dimension must be even")
    return build_M_det(field, dim)


def anti_diagonal(field: PrimeField, k: int) -> PolyMatrix:
    if k < 1:
        raise ParameterError("anti_diagonal needs k >= 1")
    return PolyMatrix(
        field,
        [
            [
                SparsePolynomial.const(field, 1 if i + j == k - 1 else 0)
                for j in range(k)
            ]
            for i in range(k)
        ],
    )


def scaled_diag(field: PrimeField, k: int, family: str, vexp_var=V) -> PolyMatrix:
    """diag(u_1 v, u_2 v^2, ..., u_k v^k) for the chosen scalar family."""
    ctor = {"y": yvar, "z": zvar}.get(family)
    if ctor is None:
        raise ParameterError(f"unknown diagonal family {family!r}")
    zero = SparsePolynomial.zero(field)
    out = [[zero] * k for _ in range(k)]
    for i in range(1, k + 1):
        out[i - 1][i - 1] = SparsePolynomial(
            field, {mono([(ctor(i), 1), (vexp_var, i)]): 1}
        )
    return PolyMatrix(field, out)


# ----------------------------------------------------------------------
# Small symbolic determinants and Pfaffians
# ----------------------------------------------------------------------


def sym_det(mat: PolyMatrix) -> SparsePolynomial:
    """Exact symbolic determinant by cofactor expansion (desk scale)."""
    n = mat.nrows
    if n != mat.ncols:
        raise ParameterError("determinant of a non-square matrix")
    if n > SYM_DET_CAP:
        raise DeskCapError(f"symbolic determinant capped at {SYM_DET_CAP}, got {n}")
    rows = mat.entries

    def rec(row_idx: int, cols: tuple) -> SparsePolynomial:
        if not cols:
            return SparsePolynomial.const(mat.field, 1)
        acc = SparsePolynomial.zero(mat.field)
        for pos, c in enumerate(cols):
            e = rows[row_idx][c]
            if e.is_zero():
                continue
            rest = cols[:pos] + cols[pos + 1 :]
            term = e * rec(row_idx + 1, rest)
            acc = acc + (term if pos % 2 == 0 else -term)
        return acc

    return rec(0, tuple(range(n)))


def _perm_parity(seq) -> int:
    inv = 0
    for a in range(len(seq)):
        for b in range(a + 1, len(seq)):
            if seq[a] > seq[b]:
                inv += 1
    return -1 if inv % 2 else 1


def perfect_matchings(indices: tuple) -> list:
    """All pairings of the index list, each with the sign of the flattened
    pairing as a permutation of the sorted list."""
    base = tuple(sorted(indices))
    out = []

    def rec(remaining: tuple, acc: list):
        if not remaining:
            flat = [x for pair in acc for x in pair]
            order = [base.index(x) for x in flat]
            out.append((tuple(acc), _perm_parity(order)))
            return
        first = remaining[0]
        for t, second in enumerate(remaining[1:], start=1):
            rec(remaining[1:t] + remaining[t + 1 :], acc + [(first, second)])

    if len(indices) % 2:
        raise ParameterError("perfect matchings need an even index count")
    rec(base, [])
    return out


def sym_pfaff(mat: PolyMatrix) -> SparsePolynomial:
    """Exact symbolic Pfaffian as a signed perfect-matching sum."""
    n = mat.nrows
    if n != mat.ncols or n % 2:
        raise ParameterError("Pfaffian needs an even-dimensional square matrix")
    if n > SYM_PFAFF_CAP:
        raise DeskCapError(f"symbolic Pfaffian capped at {SYM_PFAFF_CAP}, got {n}")
    if not mat.is_skew_symmetric():
        raise ParameterError("Pfaffian of a non-skew-symmetric matrix")
    if n == 0:
        return SparsePolynomial.const(mat.field, 1)
    acc = SparsePolynomial.zero(mat.field)
    for pairs, sign in perfect_matchings(tuple(range(1, n + 1))):
        term = SparsePolynomial.const(mat.field, sign)
        for i, j in pairs:
            term = term * mat.entry(i, j)
        acc = acc + term
    return acc


# ----------------------------------------------------------------------
# Batched numeric kernels (int64 arrays of residues)
# ----------------------------------------------------------------------


def batch_matmul(field: PrimeField, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """(…, n, k) @ (…, k, m) mod p with per-index reduction so that int64
    never overflows: each partial product is reduced before accumulation."""
    field._check_array_modulus()
    p = field.p
    k = A.shape[-1]
    if B.shape[-2] != k:
        raise ParameterError("batch_matmul inner dimensions differ")
    out = np.zeros(A.shape[:-1] + (B.shape[-1],), dtype=np.int64)
    for t in range(k):
        out = (out + (A[..., :, t : t + 1] * B[..., t : t + 1, :]) % p) % p
    return out


def batch_mat_chain(field: PrimeField, mats) -> np.ndarray:
    out = mats[0]
    for mat in mats[1:]:
        out = batch_matmul(field, out, mat)
    return out


def det_mod(field: PrimeField, mat) -> int:
    """Exact determinant of one numeric matrix by modular elimination."""
    p = field.p
    a = [[int(v) % p for v in row] for row in mat]
    n = len(a)
    if any(len(row) != n for row in a):
        raise ParameterError("determinant of a non-square matrix")
    det = 1
    for col in range(n):
        pivot = None
        for r in range(col, n):
            if a[r][col]:
                pivot = r
                break
        if pivot is None:
            return 0
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            det = p - det
        det = det * a[col][col] % p
        inv = pow(a[col][col], p - 2, p)
        for r in range(col + 1, n):
            if a[r][col]:
                factor = a[r][col] * inv % p
                a[r] = [(x - factor * y) % p for x, y in zip(a[r], a[col])]
    return det


def batch_det(field: PrimeField, mats: np.ndarray) -> np.ndarray:
    """Determinants of a (B, n, n) stack by vectorized pivoted elimination."""
    field._check_array_modulus()
    p = field.p
    a = np.asarray(mats, dtype=np.int64) % p
    B, n, n2 = a.shape
    if n != n2:
        raise ParameterError("batch_det needs square matrices")
    det = np.ones(B, dtype=np.int64)
    alive = np.ones(B, dtype=bool)
    for col in range(n):
        # choose, per matrix, the first row >= col with a nonzero pivot
        window = a[:, col:, col] != 0
        has = window.any(axis=1)
        alive &= has
        det[~has] = 0
        pick = np.argmax(window, axis=1) + col
        pick[~alive] = col
        swap = alive & (pick != col)
        idx = np.nonzero(swap)[0]
        if idx.size:
            rows_new = a[idx, pick[idx], :].copy()
            a[idx, pick[idx], :] = a[idx, col, :]
            a[idx, col, :] = rows_new
            det[idx] = (p - det[idx]) % p
        piv = a[:, col, col]
        det[alive] = det[alive] * piv[alive] % p
        safe_piv = np.where(piv == 0, 1, piv)
        inv = _pow_arr(safe_piv, p - 2, p)
        below = a[:, col + 1 :, col]
        factor = below * inv[:, None] % p
        a[:, col + 1 :, :] = (
            a[:, col + 1 :, :] - factor[:, :, None] * a[:, col, :][:, None, :]
        ) % p
    return det % p


def _pow_arr(base: np.ndarray, e: int, p: int) -> np.ndarray:
    out = np.ones_like(base)
    b = base % p
    while e:
        if e & 1:
            out = out * b % p
        b = b * b % p
        e >>= 1
    return out


_MATCHING_CACHE: dict = {}


def _matchings_for(n: int):
    if n not in _MATCHING_CACHE:
        _MATCHING_CACHE[n] = perfect_matchings(tuple(range(1, n + 1)))
    return _MATCHING_CACHE[n]


def pfaff_mod(field: PrimeField, mat) -> int:
    """Exact Pfaffian of one numeric skew matrix via the matching sum."""
    p = field.p
    n = len(mat)
    if n % 2:
        raise ParameterError("Pfaffian needs even dimension")
    if n > SYM_PFAFF_CAP:
        raise DeskCapError(f"numeric Pfaffian capped at {SYM_PFAFF_CAP}, got {n}")
    if n == 0:
        return 1
    total = 0
    for pairs, sign in _matchings_for(n):
        term = 1 if sign == 1 else p - 1
        for i, j in pairs:
            term = term * (int(mat[i - 1][j - 1]) % p) % p
        total = (total + term) % p
    return total


def batch_pfaff(field: PrimeField, mats: np.ndarray) -> np.ndarray:
    """Pfaffians of a (B, 2k, 2k) stack via the precomputed matching list."""
    field._check_array_modulus()
    p = field.p
    a = np.asarray(mats, dtype=np.int64) % p
    B, n, n2 = a.shape
    if n != n2 or n % 2:
        raise ParameterError("batch_pfaff needs even-dimensional square matrices")
    if n > SYM_PFAFF_CAP:
        raise DeskCapError(f"batched Pfaffian capped at {SYM_PFAFF_CAP}, got {n}")
    if n == 0:
        return np.ones(B, dtype=np.int64)
    total = np.zeros(B, dtype=np.int64)
    for pairs, sign in _matchings_for(n):
        term = np.full(B, 1 if sign == 1 else p - 1, dtype=np.int64)
        for i, j in pairs:
            term = term * a[:, i - 1, j - 1] % p
        total = (total + term) % p
    return total


def batch_pfaff_elim(field: PrimeField, mats: np.ndarray) -> np.ndarray:
    """Pfaffians of a (B, 2k, 2k) stack by vectorized congruence elimination.

    Cubic per matrix instead of the matching sum's factorial growth, and no
    dimension cap, so this is the kernel for wide stacks of larger skew
    matrices.  A congruence E A E^T with unit-determinant E preserves the
    Pfaffian; a transposition of both a row pair and the matching column
    pair flips its sign.  After column 2i is cleared below row 2i+1, the
    Pfaffian factors as the (2i, 2i+1) entry times the Pfaffian of the
    trailing block.
    """
    field._check_array_modulus()
    p = field.p
    a = np.asarray(mats, dtype=np.int64).copy() % p
    B, n, n2 = a.shape
    if n != n2 or n % 2:
        raise ParameterError("batch_pfaff_elim needs even-dimensional square matrices")
    if n == 0:
        return np.ones(B, dtype=np.int64)
    pf = np.ones(B, dtype=np.int64)
    alive = np.ones(B, dtype=bool)
    for k in range(0, n - 1, 2):
        # choose, per matrix, the first row > k with a nonzero entry in column k
        window = a[:, k + 1 :, k] != 0
        has = window.any(axis=1)
        alive &= has
        pf[~has] = 0
        pick = np.argmax(window, axis=1) + k + 1
        pick[~alive] = k + 1
        swap = alive & (pick != k + 1)
        idx = np.nonzero(swap)[0]
        if idx.size:
            pi = pick[idx]
            rows_new = a[idx, pi, :].copy()
            a[idx, pi, :] = a[idx, k + 1, :]
            a[idx, k + 1, :] = rows_new
            cols_new = a[idx, :, pi].copy()
            a[idx, :, pi] = a[idx, :, k + 1]
            a[idx, :, k + 1] = cols_new
            pf[idx] = (p - pf[idx]) % p
        piv = a[:, k + 1, k]
        pf[alive] = pf[alive] * a[alive, k, k + 1] % p
        if k + 2 < n:
            safe_piv = np.where(piv == 0, 1, piv)
            inv = _pow_arr(safe_piv, p - 2, p)
            factor = a[:, k + 2 :, k] * inv[:, None] % p
            a[:, k + 2 :, k:] = (
                a[:, k + 2 :, k:] - factor[:, :, None] * a[:, k + 1, k:][:, None, :]
            ) % p
            a[:, k:, k + 2 :] = (
                a[:, k:, k + 2 :] - factor[:, None, :] * a[:, k:, k + 1][:, :, None]
            ) % p
    return pf % p
