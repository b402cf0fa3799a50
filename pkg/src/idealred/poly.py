"""Sparse multivariate polynomials over a prime field.

Variables are structured tuples: ("X", i, j) for generic matrix entries,
("lam", i, j) / ("xi", i, j) for the row/column transform scalars,
("y", i) / ("z", i) for diagonal scalars, and the single-letter scalars
("v",), ("w",), ("t",), ("delta",).  Target inputs of the final circuits use
their own families, e.g. ("y", i, j) for a generic matrix.  A monomial is a
tuple of (variable, exponent) pairs sorted by variable with all exponents
positive; a polynomial is a dict monomial -> nonzero canonical residue.

Skew-symmetric convention: for the alternating matrix case only the entries
X(i, j) with i < j are ever stored; `skew_entry` resolves (j, i) to the
negated mirror entry and (i, i) to zero.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import (
    FieldMismatchError,
    MissingAssignmentError,
    ZeroPolynomialError,
)
from .field import PrimeField

Var = tuple
Monomial = tuple

# ----------------------------------------------------------------------
# Variable constructors and naming
# ----------------------------------------------------------------------


def xvar(i: int, j: int) -> Var:
    return ("X", i, j)


def lam(i: int, j: int) -> Var:
    if not i < j:
        raise ValueError("lam(i, j) needs i < j")
    return ("lam", i, j)


def xi(i: int, j: int) -> Var:
    if not i < j:
        raise ValueError("xi(i, j) needs i < j")
    return ("xi", i, j)


def yvar(i: int) -> Var:
    return ("y", i)


def zvar(i: int) -> Var:
    return ("z", i)


V = ("v",)
W = ("w",)
T = ("t",)
DELTA = ("delta",)


def skew_entry(i: int, j: int) -> tuple[int, Var | None]:
    """Resolve an alternating-matrix position to (sign, stored variable)."""
    if i == j:
        return 0, None
    if i < j:
        return 1, xvar(i, j)
    return -1, xvar(j, i)


def var_name(var: Var) -> str:
    return "_".join(str(part) for part in var)


def var_from_name(name: str) -> Var:
    parts = name.split("_")
    out = [parts[0]]
    for part in parts[1:]:
        out.append(int(part))
    return tuple(out)


# ----------------------------------------------------------------------
# Monomials
# ----------------------------------------------------------------------

ONE_MONO: Monomial = ()


def mono(pairs) -> Monomial:
    """Canonical monomial from (var, exp) pairs; drops zero exponents."""
    acc: dict = {}
    for var, exp in pairs:
        if exp:
            acc[var] = acc.get(var, 0) + exp
    for var, exp in acc.items():
        if exp < 0:
            raise ValueError(f"negative exponent for {var}")
    return tuple(sorted((v, e) for v, e in acc.items() if e))


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    acc = dict(a)
    for var, exp in b:
        acc[var] = acc.get(var, 0) + exp
    return tuple(sorted(acc.items()))


def mono_degree(m: Monomial) -> int:
    return sum(e for _, e in m)


# ----------------------------------------------------------------------
# Polynomials
# ----------------------------------------------------------------------


class SparsePolynomial:
    __slots__ = ("field", "terms")

    def __init__(self, field: PrimeField, terms: dict | None = None):
        self.field = field
        self.terms = {}
        if terms:
            for m, c in terms.items():
                c %= field.p
                if c:
                    self.terms[m] = c

    # -- constructors ---------------------------------------------------

    @classmethod
    def zero(cls, field: PrimeField) -> "SparsePolynomial":
        return cls(field)

    @classmethod
    def const(cls, field: PrimeField, c: int) -> "SparsePolynomial":
        return cls(field, {ONE_MONO: c})

    @classmethod
    def variable(cls, field: PrimeField, var: Var, exp: int = 1, coeff: int = 1):
        return cls(field, {mono([(var, exp)]): coeff})

    # -- basic queries ---------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int | None:
        """Total degree; None for the zero polynomial (not an integer)."""
        if not self.terms:
            return None
        return max(mono_degree(m) for m in self.terms)

    def deg_in(self, var: Var) -> int | None:
        if not self.terms:
            return None
        best = 0
        for m in self.terms:
            for v, e in m:
                if v == var and e > best:
                    best = e
        return best

    def variables(self) -> set:
        out = set()
        for m in self.terms:
            for v, _ in m:
                out.add(v)
        return out

    def constant_term(self) -> int:
        return self.terms.get(ONE_MONO, 0)

    def num_terms(self) -> int:
        return len(self.terms)

    # -- ring operations ---------------------------------------------------

    def _same_field(self, other: "SparsePolynomial"):
        if self.field.p != other.field.p:
            raise FieldMismatchError(
                f"polynomials over different moduli: {self.field.p} vs {other.field.p}"
            )

    def __add__(self, other):
        if isinstance(other, int):
            other = SparsePolynomial.const(self.field, other)
        self._same_field(other)
        p = self.field.p
        acc = dict(self.terms)
        for m, c in other.terms.items():
            s = (acc.get(m, 0) + c) % p
            if s:
                acc[m] = s
            elif m in acc:
                del acc[m]
        out = SparsePolynomial(self.field)
        out.terms = acc
        return out

    def __neg__(self):
        p = self.field.p
        out = SparsePolynomial(self.field)
        out.terms = {m: p - c for m, c in self.terms.items()}
        return out

    def __sub__(self, other):
        if isinstance(other, int):
            other = SparsePolynomial.const(self.field, other)
        return self + (-other)

    def scale(self, c: int) -> "SparsePolynomial":
        c %= self.field.p
        out = SparsePolynomial(self.field)
        if c:
            out.terms = {m: coef * c % self.field.p for m, coef in self.terms.items()}
        return out

    def __mul__(self, other):
        if isinstance(other, int):
            return self.scale(other)
        self._same_field(other)
        p = self.field.p
        acc: dict = {}
        # iterate over the smaller operand outside for fewer dict rebuilds
        a, b = (self.terms, other.terms)
        if len(a) > len(b):
            a, b = b, a
        for ma, ca in a.items():
            for mb, cb in b.items():
                m = mono_mul(ma, mb)
                s = (acc.get(m, 0) + ca * cb) % p
                if s:
                    acc[m] = s
                elif m in acc:
                    del acc[m]
        out = SparsePolynomial(self.field)
        out.terms = acc
        return out

    __rmul__ = __mul__

    def __pow__(self, e: int):
        if e < 0:
            raise ValueError("negative polynomial power")
        out = SparsePolynomial.const(self.field, 1)
        base = self
        while e:
            if e & 1:
                out = out * base
            base = base * base if e > 1 else base
            e >>= 1
        return out

    def __eq__(self, other):
        return (
            isinstance(other, SparsePolynomial)
            and self.field.p == other.field.p
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.field.p, tuple(sorted(self.terms.items()))))

    # -- coefficient access --------------------------------------------------

    def coeff_of(self, var: Var, k: int) -> "SparsePolynomial":
        """Coefficient of var**k, as a polynomial in the remaining variables."""
        out = SparsePolynomial(self.field)
        acc = {}
        for m, c in self.terms.items():
            e = 0
            rest = []
            for v, ve in m:
                if v == var:
                    e = ve
                else:
                    rest.append((v, ve))
            if e == k:
                acc[tuple(rest)] = (acc.get(tuple(rest), 0) + c) % self.field.p
        out.terms = {m: c for m, c in acc.items() if c}
        return out

    def coeff_map(self, var: Var) -> dict:
        """All coefficients of powers of var: exponent -> polynomial."""
        buckets: dict[int, dict] = {}
        for m, c in self.terms.items():
            e = 0
            rest = []
            for v, ve in m:
                if v == var:
                    e = ve
                else:
                    rest.append((v, ve))
            buckets.setdefault(e, {})[tuple(rest)] = c
        out = {}
        for e, terms in buckets.items():
            poly = SparsePolynomial(self.field)
            poly.terms = terms
            out[e] = poly
        return out

    # -- substitution / evaluation -----------------------------------------

    def substitute(self, mapping: dict) -> "SparsePolynomial":
        """Replace variables by polynomials; unmapped variables pass through."""
        field = self.field
        out = SparsePolynomial.zero(field)
        for m, c in self.terms.items():
            untouched = []
            factor = None
            for v, e in m:
                if v in mapping:
                    rep = mapping[v]
                    if isinstance(rep, int):
                        rep = SparsePolynomial.const(field, rep)
                    piece = rep ** e
                    factor = piece if factor is None else factor * piece
                else:
                    untouched.append((v, e))
            term = SparsePolynomial(field, {tuple(untouched): c})
            out = out + (term if factor is None else term * factor)
        return out

    def eval(self, assignment: dict) -> int:
        p = self.field.p
        total = 0
        for m, c in self.terms.items():
            prod = c
            for v, e in m:
                if v not in assignment:
                    raise MissingAssignmentError(
                        f"no value for variable {var_name(v)}"
                    )
                prod = prod * pow(assignment[v] % p, e, p) % p
            total = (total + prod) % p
        return total

    def eval_arr(self, assignment: dict) -> np.ndarray:
        """Vectorized evaluation; every assignment value is a same-shape array."""
        field = self.field
        p = field.p
        shape = None
        for arr in assignment.values():
            shape = np.shape(arr)
            break
        total = np.zeros(shape, dtype=np.int64)
        pow_cache: dict = {}
        for m, c in self.terms.items():
            prod = np.full(shape, c, dtype=np.int64)
            for v, e in m:
                if v not in assignment:
                    raise MissingAssignmentError(
                        f"no value for variable {var_name(v)}"
                    )
                key = (v, e)
                if key not in pow_cache:
                    pow_cache[key] = field.pow_arr(assignment[v], e)
                prod = prod * pow_cache[key] % p
            total = (total + prod) % p
        return total

    # -- display ---------------------------------------------------------

    def __repr__(self):
        if not self.terms:
            return "0"
        bits = []
        for m, c in sorted(self.terms.items()):
            factors = [str(c)] if c != 1 or not m else []
            for v, e in m:
                factors.append(var_name(v) + (f"^{e}" if e > 1 else ""))
            bits.append("*".join(factors) if factors else "1")
        return " + ".join(bits)


# ----------------------------------------------------------------------
# Multidegree with respect to the X-matrix grading
# ----------------------------------------------------------------------


class MultiDegree:
    """Row/column exponent counts of an X-multihomogeneous polynomial."""

    __slots__ = ("rows", "cols")

    def __init__(self, rows: tuple, cols: tuple | None):
        self.rows = tuple(rows)
        self.cols = tuple(cols) if cols is not None else None

    def __eq__(self, other):
        return (
            isinstance(other, MultiDegree)
            and other.rows == self.rows
            and other.cols == self.cols
        )

    def __hash__(self):
        return hash((self.rows, self.cols))

    def __repr__(self):
        return f"MultiDegree(rows={self.rows}, cols={self.cols})"


def _mono_multidegree(m: Monomial, mode: str, n: int, mcols: int):
    if mode == "det":
        rows = [0] * n
        cols = [0] * mcols
        for v, e in m:
            if v[0] == "X":
                rows[v[1] - 1] += e
                cols[v[2] - 1] += e
        return tuple(rows), tuple(cols)
    rows = [0] * n
    for v, e in m:
        if v[0] == "X":
            rows[v[1] - 1] += e
            rows[v[2] - 1] += e
    return tuple(rows), None


def multidegree(
    f: SparsePolynomial, mode: str, n: int, m: int | None = None
) -> MultiDegree | None:
    """Common X-multidegree of all terms, or None if not multihomogeneous.

    mode "det": counts per row index and per column index of X(i, j).
    mode "pfaff": a position X(i, j) counts toward both indices i and j.
    Raises on the zero polynomial, whose multidegree is undefined.
    """
    if mode not in ("det", "pfaff"):
        raise ValueError(f"unknown mode {mode!r}")
    if f.is_zero():
        raise ZeroPolynomialError("multidegree of the zero polynomial")
    if mode == "det" and m is None:
        raise ValueError("det mode needs the column count")
    seen = None
    for monomial in f.terms:
        deg = _mono_multidegree(monomial, mode, n, m if m is not None else 0)
        if seen is None:
            seen = deg
        elif deg != seen:
            return None
    return MultiDegree(seen[0], seen[1])


def split_multihomogeneous(
    f: SparsePolynomial, mode: str, n: int, m: int | None = None
) -> dict:
    """Group the terms of f by X-multidegree: MultiDegree -> polynomial."""
    buckets: dict = {}
    for monomial, c in f.terms.items():
        rows, cols = _mono_multidegree(monomial, mode, n, m if m is not None else 0)
        buckets.setdefault(MultiDegree(rows, cols), {})[monomial] = c
    out = {}
    for key, terms in buckets.items():
        poly = SparsePolynomial(f.field)
        poly.terms = terms
        out[key] = poly
    return out


# ----------------------------------------------------------------------
# JSON serialization (canonical, bit-exact round-trip)
# ----------------------------------------------------------------------


def poly_to_json(f: SparsePolynomial) -> str:
    names = sorted(var_name(v) for v in f.variables())
    terms = []
    for m, c in sorted(f.terms.items()):
        exps = {var_name(v): e for v, e in m}
        terms.append({"exps": dict(sorted(exps.items())), "coef": str(c)})
    doc = {"vars": names, "terms": terms, "prime": str(f.field.p)}
    return json.dumps(doc, separators=(",", ":"), sort_keys=True)


def poly_from_json(text: str, field: PrimeField | None = None) -> SparsePolynomial:
    doc = json.loads(text)
    p = int(doc["prime"])
    if field is None:
        field = PrimeField(p)
    elif field.p != p:
        raise FieldMismatchError(f"document prime {p} != field prime {field.p}")
    terms = {}
    for entry in doc["terms"]:
        m = mono(
            (var_from_name(name), int(e)) for name, e in entry["exps"].items()
        )
        c = int(entry["coef"]) % p
        if c:
            terms[m] = (terms.get(m, 0) + c) % p
    return SparsePolynomial(field, terms)
