"""Algebraic branching programs and their determinant/Pfaffian embeddings.

An ABP is a layered DAG with one source, one sink, and affine edge labels;
it computes the sum over source-to-sink paths of the products of the labels.
This module builds the standard source programs (determinant via clow
sequences, iterated matrix multiplication, Pfaffian via perfect matchings),
homogenizes programs, embeds them into matrices whose determinant is
``1 + g`` with all smaller leading principal minors equal to 1, and
skew-symmetrizes such matrices for the Pfaffian pipeline.
"""

import random

import numpy as np

from .errors import DeskCapError, MissingAssignmentError, ParameterError
from .field import PrimeField
from .matrices import PolyMatrix, det_mod, perfect_matchings, pfaff_mod
from .poly import SparsePolynomial, var_from_name, var_name

PFAFF_ABP_CAP = 6


class AffineForm:
    """Constant plus a linear combination of variables (degree <= 1)."""

    __slots__ = ("field", "constant", "terms")

    def __init__(self, field: PrimeField, constant: int = 0, terms=None):
        self.field = field
        self.constant = constant % field.p
        self.terms = {}
        if terms:
            for v, c in terms.items():
                c %= field.p
                if c:
                    self.terms[v] = c

    @classmethod
    def const(cls, field, value: int) -> "AffineForm":
        return cls(field, value)

    @classmethod
    def variable(cls, field, var, coeff: int = 1) -> "AffineForm":
        return cls(field, 0, {var: coeff})

    def eval(self, point) -> int:
        acc = self.constant
        for v, c in self.terms.items():
            if v not in point:
                raise MissingAssignmentError(
                    f"no value for variable {var_name(v)}"
                )
            acc += c * (point[v] % self.field.p)
        return acc % self.field.p

    def scale(self, s: int) -> "AffineForm":
        s %= self.field.p
        return AffineForm(
            self.field,
            self.constant * s,
            {v: c * s for v, c in self.terms.items()},
        )

    def shift_constant_to(self, z) -> "AffineForm":
        """Move the constant onto a fresh variable (homogenization step)."""
        if z in self.terms:
            raise ParameterError(f"variable {var_name(z)} already occurs")
        terms = dict(self.terms)
        if self.constant:
            terms[z] = self.constant
        return AffineForm(self.field, 0, terms)

    def variables(self):
        return set(self.terms)

    def to_polynomial(self) -> SparsePolynomial:
        poly = SparsePolynomial.const(self.field, self.constant)
        for v, c in self.terms.items():
            poly = poly + SparsePolynomial.variable(self.field, v).scale(c)
        return poly

    def to_jsonable(self):
        return {
            "const": str(self.constant),
            "terms": {var_name(v): str(c) for v, c in sorted(self.terms.items())},
        }

    @classmethod
    def from_jsonable(cls, field, doc) -> "AffineForm":
        return cls(
            field,
            int(doc["const"]),
            {var_from_name(name): int(c) for name, c in doc["terms"].items()},
        )

    def __eq__(self, other):
        return (
            isinstance(other, AffineForm)
            and self.field == other.field
            and self.constant == other.constant
            and self.terms == other.terms
        )

    def __repr__(self):
        parts = [str(self.constant)] if self.constant else []
        parts += [f"{c}*{var_name(v)}" for v, c in sorted(self.terms.items())]
        return "AffineForm(" + (" + ".join(parts) or "0") + ")"


class ABP:
    """Layered branching program with affine edge labels."""

    __slots__ = ("field", "layer_sizes", "edges")

    def __init__(self, field: PrimeField, layer_sizes, edges):
        self.field = field
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        if len(self.layer_sizes) < 2:
            raise ParameterError("an ABP needs at least two layers")
        if any(s < 1 for s in self.layer_sizes):
            raise ParameterError("layer sizes must be positive")
        if self.layer_sizes[0] != 1 or self.layer_sizes[-1] != 1:
            raise ParameterError("need exactly one source and one sink")
        edges = [dict(layer) for layer in edges]
        if len(edges) != len(self.layer_sizes) - 1:
            raise ParameterError("edge layer count must be layer count - 1")
        for i, layer in enumerate(edges):
            for (u, v), label in layer.items():
                if not (0 <= u < self.layer_sizes[i]):
                    raise ParameterError(f"bad edge tail in layer {i}")
                if not (0 <= v < self.layer_sizes[i + 1]):
                    raise ParameterError(f"bad edge head in layer {i}")
                if not isinstance(label, AffineForm):
                    raise ParameterError("edge labels must be affine forms")
        self.edges = tuple(edges)

    @property
    def vertex_count(self) -> int:
        return sum(self.layer_sizes)

    @property
    def num_edge_layers(self) -> int:
        return len(self.edges)

    def variables(self):
        out = set()
        for layer in self.edges:
            for label in layer.values():
                out |= label.variables()
        return out

    def eval(self, point) -> int:
        p = self.field.p
        vec = [1]
        for i, layer in enumerate(self.edges):
            nxt = [0] * self.layer_sizes[i + 1]
            for (u, v), label in layer.items():
                if vec[u]:
                    nxt[v] = (nxt[v] + vec[u] * label.eval(point)) % p
            vec = nxt
        return vec[0]

    def homogenize(self, z) -> "ABP":
        """Push every edge constant onto the fresh variable ``z``.

        The result computes a homogeneous polynomial of degree equal to the
        number of edge layers, and substituting ``z = 1`` recovers the
        original polynomial.
        """
        if any(z in label.terms for layer in self.edges for label in layer.values()):
            raise ParameterError(f"variable {var_name(z)} already occurs")
        new_edges = [
            {pair: label.shift_constant_to(z) for pair, label in layer.items()}
            for layer in self.edges
        ]
        return ABP(self.field, self.layer_sizes, new_edges)

    def to_jsonable(self):
        return {
            "kind": "abp",
            "prime": str(self.field.p),
            "layers": list(self.layer_sizes),
            "edges": [
                [
                    {"from": u, "to": v, "label": label.to_jsonable()}
                    for (u, v), label in sorted(layer.items())
                ]
                for layer in self.edges
            ],
        }

    @classmethod
    def from_jsonable(cls, doc) -> "ABP":
        if doc.get("kind") != "abp":
            raise ParameterError("not an ABP document")
        field = PrimeField(int(doc["prime"]))
        edges = [
            {
                (e["from"], e["to"]): AffineForm.from_jsonable(field, e["label"])
                for e in layer
            }
            for layer in doc["edges"]
        ]
        return cls(field, doc["layers"], edges)


def eval_abp(a: ABP, point) -> int:
    return a.eval(point)


def homogenize_abp(a: ABP, z) -> ABP:
    return a.homogenize(z)


def valiant_embed(a: ABP, r: int | None = None) -> PolyMatrix:
    """Embed the ABP into an r x r matrix A with det(A) = 1 + g.

    Vertices are ordered source first, internal layers in order, isolated
    padding vertices, sink last; A is the identity, minus the adjacency
    labels above the diagonal, plus a single 1 in the bottom-left corner.
    Every leading principal minor of order below r equals 1.
    """
    field = a.field
    n_real = a.vertex_count
    if r is None:
        r = n_real
    if r < n_real:
        raise ParameterError(
            f"target size {r} below the vertex count {n_real}"
        )
    index = {}
    pos = 0
    for layer in range(len(a.layer_sizes) - 1):
        for u in range(a.layer_sizes[layer]):
            index[(layer, u)] = pos
            pos += 1
    sink_layer = len(a.layer_sizes) - 1
    index[(sink_layer, 0)] = r - 1
    zero = SparsePolynomial.zero(field)
    one = SparsePolynomial.const(field, 1)
    grid = [[zero for _ in range(r)] for _ in range(r)]
    for i in range(r):
        grid[i][i] = one
    for layer_i, layer in enumerate(a.edges):
        for (u, v), label in layer.items():
            i = index[(layer_i, u)]
            j = index[(layer_i + 1, v)]
            grid[i][j] = grid[i][j] - label.to_polynomial()
    grid[r - 1][0] = grid[r - 1][0] + one
    return PolyMatrix(field, grid)


def extend_to_ambient(A: PolyMatrix, n: int, m: int) -> PolyMatrix:
    """Pad an r x r matrix to n x m with 1s on the rest of the diagonal."""
    if A.nrows != A.ncols:
        raise ParameterError("only square matrices can be extended")
    r = A.nrows
    if r > min(n, m):
        raise ParameterError(f"size {r} exceeds ambient {n}x{m}")
    field = A.field
    zero = SparsePolynomial.zero(field)
    one = SparsePolynomial.const(field, 1)
    grid = [[zero for _ in range(m)] for _ in range(n)]
    for i in range(r):
        for j in range(r):
            grid[i][j] = A.entry(i + 1, j + 1)
    for i in range(r, min(n, m)):
        grid[i][i] = one
    return PolyMatrix(field, grid)


def _yvar(i, j):
    return ("y", i, j)


def mv_det_abp(field: PrimeField, t: int) -> ABP:
    """ABP computing the determinant of a generic t x t matrix y_{i,j}.

    Small sizes use direct minimal programs; larger sizes enumerate clow
    sequences layer by layer.  Vertex counts are whatever the construction
    yields and are reported via ``vertex_count``.
    """
    if t < 1:
        raise ParameterError("dimension must be positive")
    if t == 1:
        return ABP(
            field, (1, 1), [{(0, 0): AffineForm.variable(field, _yvar(1, 1))}]
        )
    if t == 2:
        lab = lambda i, j, c=1: AffineForm.variable(field, _yvar(i, j), c)
        return ABP(
            field,
            (1, 2, 1),
            [
                {(0, 0): lab(1, 1), (0, 1): lab(1, 2)},
                {(0, 0): lab(2, 2), (1, 0): lab(2, 1, -1)},
            ],
        )
    return _clow_det_abp(field, t)


def _clow_det_abp(field: PrimeField, t: int) -> ABP:
    """Clow-sequence determinant program.

    Middle-layer states are (head, position) pairs with position >= head;
    position == head marks a freshly opened closed walk.  Each edge consumes
    one matrix entry: continue the walk, or close it (factor -1) and reopen
    at a larger head.  The final closing edge carries the global (-1)^t.
    """
    p = field.p
    states = [(h, u) for h in range(1, t + 1) for u in range(h, t + 1)]
    state_id = {s: i for i, s in enumerate(states)}
    ns = len(states)
    var = lambda i, j, c=1: AffineForm.variable(field, _yvar(i, j), c)

    def add(layer, key, i, j, coeff):
        if key in layer:
            merged = dict(layer[key].terms)
            merged[_yvar(i, j)] = (merged.get(_yvar(i, j), 0) + coeff) % p
            layer[key] = AffineForm(field, 0, merged)
        else:
            layer[key] = var(i, j, coeff)

    first: dict = {}
    for h in range(1, t + 1):
        for v in range(h + 1, t + 1):
            add(first, (0, state_id[(h, v)]), h, v, 1)
        for h2 in range(h + 1, t + 1):
            add(first, (0, state_id[(h2, h2)]), h, h, -1)
    middle: dict = {}
    for h, u in states:
        su = state_id[(h, u)]
        for v in range(h + 1, t + 1):
            add(middle, (su, state_id[(h, v)]), u, v, 1)
        for h2 in range(h + 1, t + 1):
            add(middle, (su, state_id[(h2, h2)]), u, h, -1)
    sign = -1 if t % 2 else 1
    last: dict = {}
    for h, u in states:
        add(last, (state_id[(h, u)], 0), u, h, -sign)
    layers = [1] + [ns] * (t - 1) + [1]
    return ABP(field, layers, [first] + [middle] * (t - 2) + [last])


def imm_abp(field: PrimeField, W: int, D: int) -> ABP:
    """ABP for the (1,1) entry of a product of D generic W x W matrices."""
    if W < 1 or D < 1:
        raise ParameterError("width and depth must be positive")
    var = lambda k, i, j: AffineForm.variable(field, ("y", k, i, j))
    sizes = [1] + [W] * (D - 1) + [1]
    edges = []
    for k in range(1, D + 1):
        rows = range(1, 2) if k == 1 else range(1, W + 1)
        cols = range(1, 2) if k == D else range(1, W + 1)
        layer = {
            (i - 1 if k > 1 else 0, j - 1 if k < D else 0): var(k, i, j)
            for i in rows
            for j in cols
        }
        edges.append(layer)
    return ABP(field, sizes, edges)


def pfaff_abp(field: PrimeField, t: int) -> ABP:
    """ABP for the Pfaffian of a generic skew t x t matrix, one path per
    perfect matching; desk-scale only (t <= 6)."""
    if t < 2 or t % 2:
        raise ParameterError("dimension must be even and at least 2")
    if t > PFAFF_ABP_CAP:
        raise DeskCapError(
            f"matching-enumeration Pfaffian program capped at {PFAFF_ABP_CAP}"
        )
    var = lambda pair, c=1: AffineForm.variable(field, _yvar(*pair), c)
    if t == 2:
        return ABP(field, (1, 1), [{(0, 0): var((1, 2))}])
    matchings = perfect_matchings(tuple(range(1, t + 1)))
    half = t // 2
    nm = len(matchings)
    sizes = [1] + [nm] * (half - 1) + [1]
    edges = [dict() for _ in range(half)]
    for mi, (pairs, sign) in enumerate(matchings):
        for step in range(half):
            u = 0 if step == 0 else mi
            v = 0 if step == half - 1 else mi
            coeff = sign if step == 0 else 1
            edges[step][(u, v)] = var(pairs[step], coeff)
    return ABP(field, sizes, edges)


def skew_symmetrize(A: PolyMatrix):
    """Interleave an n x n matrix into a 2n x 2n skew-symmetric one.

    Row i of A becomes node 2i-1, column j becomes node 2j; the Pfaffian of
    every leading principal 2k x 2k block equals sign_k times the k x k
    leading minor of A.  Returns (matrix, signs) with the per-k signs
    determined by a nonzero numeric probe.
    """
    if A.nrows != A.ncols:
        raise ParameterError("only square matrices can be skew-symmetrized")
    n = A.nrows
    field = A.field
    zero = SparsePolynomial.zero(field)
    grid = [[zero for _ in range(2 * n)] for _ in range(2 * n)]
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            e = A.entry(i, j)
            grid[2 * i - 2][2 * j - 1] = grid[2 * i - 2][2 * j - 1] + e
            grid[2 * j - 1][2 * i - 2] = grid[2 * j - 1][2 * i - 2] - e
    M = PolyMatrix(field, grid)
    signs = _skew_signs(A, M)
    return M, signs


def _skew_signs(A: PolyMatrix, M: PolyMatrix) -> list[int]:
    """Per-k sign relating leading Pfaffians of M to leading minors of A."""
    field = A.field
    n = A.nrows
    variables = set()
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            variables |= A.entry(i, j).variables()
    rng = random.Random(20240911)
    signs = []
    for k in range(1, n + 1):
        for _ in range(64):
            point = {v: rng.randrange(field.p) for v in variables}
            av = np.array(
                [
                    [A.entry(i, j).eval(point) for j in range(1, k + 1)]
                    for i in range(1, k + 1)
                ],
                dtype=np.int64,
            )
            d = det_mod(field, av)
            if d == 0:
                continue
            mv = np.array(
                [
                    [M.entry(i, j).eval(point) for j in range(1, 2 * k + 1)]
                    for i in range(1, 2 * k + 1)
                ],
                dtype=np.int64,
            )
            pf = pfaff_mod(field, mv)
            ratio = pf * field.inv(d) % field.p
            if ratio == 1:
                signs.append(1)
            elif ratio == field.p - 1:
                signs.append(-1)
            else:
                raise ParameterError(
                    "skew symmetrization probe found a non-sign ratio"
                )
            break
        else:
            raise ParameterError(
                "could not find a nonsingular probe for sign detection"
            )
    return signs


def matrix_affine_tensor(mat: PolyMatrix, var_order) -> np.ndarray:
    """Coefficients of affine matrix entries: (rows, cols, len(vars)+1).

    The last slot holds the constant term.  Raises if any entry has degree
    above 1 or uses a variable outside ``var_order``.
    """
    order = {v: i for i, v in enumerate(var_order)}
    out = np.zeros((mat.nrows, mat.ncols, len(order) + 1), dtype=np.int64)
    for i in range(1, mat.nrows + 1):
        for j in range(1, mat.ncols + 1):
            e = mat.entry(i, j)
            for m, c in e.terms.items():
                if m == ():
                    out[i - 1, j - 1, -1] = c
                elif len(m) == 1 and m[0][1] == 1 and m[0][0] in order:
                    out[i - 1, j - 1, order[m[0][0]]] = c
                else:
                    raise ParameterError(
                        f"entry ({i},{j}) is not affine over the given variables"
                    )
    return out
