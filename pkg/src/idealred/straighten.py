"""Ground-truth engine: expansion in the standard (bi)tableau basis.

`straighten` writes any desk-scale polynomial in the X variables as the
unique linear combination of standard bideterminants (or bipfaffians in the
alternating case) by exact modular linear algebra, one multidegree block at
a time.  `certify_membership` reads ideal membership off the shapes of that
expansion: a polynomial lies in the ideal of r x r minors exactly when every
shape has first part >= r, and in the ideal of the sub-Pfaffians of order 2r
exactly when every first part is >= 2r.

`symbolic_pipeline_check` fully expands the transformed polynomials used by
the reduction pipeline on tiny instances and asserts the structural facts
the pipeline relies on: which aux-variable exponent leads, what its
coefficient is, and that the lowest v-slice is supported purely on canonical
terms with pairwise distinct aux exponent tuples.
"""

from __future__ import annotations

from .bidet import (
    BideterminantRef,
    BipfaffianRef,
    bideterminant_multidegree,
    bipfaffian_multidegree,
    expand_bideterminant,
    expand_bipfaffian,
    substitute_row_signed,
)
from .errors import DeskCapError, ParameterError
from .field import PrimeField
from .matrices import (
    PolyMatrix,
    anti_diagonal,
    build_M_det,
    build_M_pfaff,
    build_N_det,
    scaled_diag,
    sym_det,
)
from .poly import (
    SparsePolynomial,
    V,
    skew_entry,
    split_multihomogeneous,
    var_name,
    xvar,
)
from .tableau import (
    Bitableau,
    Partition,
    Tableau,
    anti_canonical,
    canonical,
    canonical_weight,
    enumerate_css,
    enumerate_partitions,
    pair_order,
    sub_hypothesis_ok,
    tableau_to_list,
)

DEGREE_CAP = 6
DET_AMBIENT_CAP = 4
PFAFF_AMBIENT_CAP = 6

# tiny-instance caps for the full symbolic stage checks
CHECK_AMBIENT_CAP = 3  # per side for det; 2n <= 4 for pfaff
CHECK_DEGREE_CAP = 3


class StandardExpansion:
    """Expansion of a polynomial over standard refs with nonzero coeffs."""

    __slots__ = ("mode", "terms")

    def __init__(self, mode: str, terms):
        self.mode = mode
        self.terms = tuple(terms)

    def shapes(self) -> list:
        return [ref.shape for ref, _ in self.terms]

    def coefficient_of(self, ref):
        for r, c in self.terms:
            if r == ref:
                return c
        return 0

    def reexpand(self, field: PrimeField) -> SparsePolynomial:
        out = SparsePolynomial.zero(field)
        for ref, c in self.terms:
            piece = (
                expand_bideterminant(field, ref)
                if self.mode == "det"
                else expand_bipfaffian(field, ref)
            )
            out = out + piece.scale(c)
        return out

    def to_jsonable(self) -> list:
        out = []
        for ref, c in self.terms:
            if self.mode == "det":
                entry = {
                    "S": tableau_to_list(ref.bitableau.S),
                    "T": tableau_to_list(ref.bitableau.T),
                }
            else:
                entry = {"T": tableau_to_list(ref.tableau)}
            entry["coef"] = str(c)
            out.append(entry)
        return out

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        return f"StandardExpansion({self.mode}, {len(self.terms)} terms)"


_EXPANSION_CACHE: dict = {}


def _expand_ref(field: PrimeField, ref, mode: str) -> SparsePolynomial:
    key = (field.p, mode, ref)
    if key not in _EXPANSION_CACHE:
        _EXPANSION_CACHE[key] = (
            expand_bideterminant(field, ref)
            if mode == "det"
            else expand_bipfaffian(field, ref)
        )
    return _EXPANSION_CACHE[key]


def _value_counts(tab: Tableau, bound: int) -> tuple:
    counts = [0] * bound
    for row in tab.rows:
        for e in row:
            counts[e - 1] += 1
    return tuple(counts)


def _candidate_refs_det(md, n: int, m: int) -> list:
    degree = sum(md.rows)
    out = []
    for sigma in enumerate_partitions(degree, min(n, m)):
        s_tabs = [t for t in enumerate_css(sigma, n) if _value_counts(t, n) == md.rows]
        if not s_tabs:
            continue
        t_tabs = [t for t in enumerate_css(sigma, m) if _value_counts(t, m) == md.cols]
        for S in s_tabs:
            for T in t_tabs:
                out.append(BideterminantRef(Bitableau(S, T), n, m))
    return out


def _candidate_refs_pfaff(md, dim: int) -> list:
    size = sum(md.rows)  # each Pfaffian factor of 2k indices has degree k
    out = []
    for sigma in enumerate_partitions(size, dim, even_rows=True):
        for T in enumerate_css(sigma, dim):
            if _value_counts(T, dim) == md.rows:
                out.append(BipfaffianRef(T, dim))
    return out


def _solve_block(field: PrimeField, columns: list, target: dict) -> list:
    """Solve the exact linear system sum_j x_j * col_j = target over F_p.

    Columns are monomial->coefficient dicts of linearly independent
    polynomials; raises if the target is outside their span."""
    p = field.p
    monos = sorted(set(target) | {m for col in columns for m in col})
    ncols = len(columns)
    grid = [
        [col.get(mo, 0) for col in columns] + [target.get(mo, 0)] for mo in monos
    ]
    nrows = len(grid)
    pivots = []
    row_at = 0
    for c in range(ncols):
        pivot = None
        for r in range(row_at, nrows):
            if grid[r][c]:
                pivot = r
                break
        if pivot is None:
            pivots.append(None)
            continue
        grid[row_at], grid[pivot] = grid[pivot], grid[row_at]
        inv = pow(grid[row_at][c], p - 2, p)
        grid[row_at] = [v * inv % p for v in grid[row_at]]
        for r in range(nrows):
            if r != row_at and grid[r][c]:
                factor = grid[r][c]
                grid[r] = [
                    (a - factor * b) % p for a, b in zip(grid[r], grid[row_at])
                ]
        pivots.append(row_at)
        row_at += 1
    solution = [0] * ncols
    for c, pr in enumerate(pivots):
        if pr is not None:
            solution[c] = grid[pr][ncols]
    # residual must vanish: the standard refs form a basis, so a nonzero
    # residual means the enumeration missed a ref
    residual = dict(target)
    for c, x in enumerate(solution):
        if not x:
            continue
        for mo, v in columns[c].items():
            residual[mo] = (residual.get(mo, 0) - x * v) % p
    assert all(v % p == 0 for v in residual.values()), (
        "straightening system is inconsistent; candidate basis incomplete"
    )
    return solution


def straighten(
    field: PrimeField,
    f: SparsePolynomial,
    mode: str,
    n: int,
    m: int | None = None,
    degree_cap: int = DEGREE_CAP,
) -> StandardExpansion:
    """Unique expansion of f over standard refs, one multidegree block at a
    time; the re-expansion of the result reproduces f exactly."""
    if mode not in ("det", "pfaff"):
        raise ParameterError(f"unknown mode {mode!r}")
    if mode == "det":
        if m is None:
            raise ParameterError("det mode needs both ambient dimensions")
        if n > DET_AMBIENT_CAP or m > DET_AMBIENT_CAP:
            raise DeskCapError(
                f"straighten ambient capped at {DET_AMBIENT_CAP}, got {n}x{m}"
            )
    else:
        if n % 2 or n > PFAFF_AMBIENT_CAP:
            raise DeskCapError(
                f"straighten alternating ambient must be even and <= {PFAFF_AMBIENT_CAP}"
            )
    if f.is_zero():
        return StandardExpansion(mode, ())
    deg = f.degree()
    if deg > degree_cap:
        raise DeskCapError(f"straighten degree capped at {degree_cap}, got {deg}")
    for var in f.variables():
        if var[0] != "X":
            raise ParameterError(f"straighten input uses non-matrix variable {var_name(var)}")
        if mode == "pfaff" and not var[1] < var[2]:
            raise ParameterError("alternating matrix variables must have i < j")

    terms = []
    blocks = split_multihomogeneous(f, mode, n, m)
    for md in sorted(blocks, key=lambda k: (k.rows, k.cols or ())):
        block = blocks[md]
        refs = (
            _candidate_refs_det(md, n, m)
            if mode == "det"
            else _candidate_refs_pfaff(md, n)
        )
        assert refs, f"no standard candidates for multidegree {md}"
        columns = [_expand_ref(field, ref, mode).terms for ref in refs]
        solution = _solve_block(field, columns, block.terms)
        for ref, c in zip(refs, solution):
            if c:
                terms.append((ref, c))
    return StandardExpansion(mode, terms)


def certify_membership(
    field: PrimeField,
    f: SparsePolynomial,
    r: int,
    mode: str,
    n: int,
    m: int | None = None,
) -> tuple[bool, list]:
    """Membership in the ideal of r x r minors (det) or of the order-2r
    sub-Pfaffians (pfaff), with the witness shapes."""
    expansion = straighten(field, f, mode, n, m)
    shapes = expansion.shapes()
    need = r if mode == "det" else 2 * r
    verdict = all(sigma.parts[0] >= need for sigma in shapes)
    return verdict, shapes


# ----------------------------------------------------------------------
# Signed substitution chains (predicting leading aux exponents and signs)
# ----------------------------------------------------------------------


def sub_chain_signed(tab: Tableau, n: int) -> tuple[Tableau, dict, int]:
    """Full substitution chain with the accumulated re-sorting sign of the
    extremal path: at each pair every eligible row is substituted and each
    contributes its sorting parity."""
    current = tab
    counts = {}
    sign = 1
    for i, j in pair_order(n):
        assert sub_hypothesis_ok(current, i, j)
        rows = list(current.rows)
        h = 0
        for k, row in enumerate(rows):
            res = substitute_row_signed(row, i, j)
            if res is not None:
                rows[k], s = res
                sign *= s
                h += 1
        counts[(i, j)] = h
        current = Tableau(rows)
    return current, counts, sign


def _chain_vector(counts: dict, n: int) -> tuple:
    return tuple(counts[(i, j)] for i, j in pair_order(n))


# ----------------------------------------------------------------------
# Full symbolic checks of the pipeline stages (tiny instances)
# ----------------------------------------------------------------------


def _generic_matrix(field: PrimeField, n: int, m: int) -> PolyMatrix:
    return PolyMatrix(
        field,
        [[SparsePolynomial.variable(field, xvar(i, j)) for j in range(1, m + 1)] for i in range(1, n + 1)],
    )


def _generic_skew_matrix(field: PrimeField, dim: int) -> PolyMatrix:
    rows = []
    for i in range(1, dim + 1):
        row = []
        for j in range(1, dim + 1):
            sign, var = skew_entry(i, j)
            row.append(
                SparsePolynomial.zero(field)
                if var is None
                else SparsePolynomial.variable(field, var, coeff=sign)
            )
        rows.append(row)
    return PolyMatrix(field, rows)


def _substitute_matrix(f: SparsePolynomial, W: PolyMatrix) -> SparsePolynomial:
    mapping = {}
    for var in f.variables():
        _, i, j = var
        mapping[var] = W.entry(i, j)
    return f.substitute(mapping)


def _aux_groups(g: SparsePolynomial, field: PrimeField) -> dict:
    """Split each term into its non-X part (key) and X part (value poly)."""
    buckets: dict = {}
    for mo, c in g.terms.items():
        aux = tuple((v, e) for v, e in mo if v[0] != "X")
        xpart = tuple((v, e) for v, e in mo if v[0] == "X")
        buckets.setdefault(aux, {})[xpart] = c
    out = {}
    for aux, terms in buckets.items():
        poly = SparsePolynomial(field)
        poly.terms = terms
        out[aux] = poly
    return out


def _family_vector(aux: tuple, family: str, order: list) -> tuple:
    exps = {v: e for v, e in aux if v[0] == family}
    if family in ("lam", "xi"):
        return tuple(exps.get((family, i, j), 0) for i, j in order)
    return tuple(exps.get((family, i), 0) for i in order)


def _partition_from_counts(counts: tuple) -> Partition:
    """Invert s_i = #{rows of sigma with part >= i}: conjugate of the
    nonzero prefix."""
    trimmed = []
    for c in counts:
        if c == 0:
            break
        trimmed.append(c)
    if any(counts[len(trimmed) :]):
        raise ParameterError(f"counts {counts} are not a conjugate vector")
    return Partition(tuple(trimmed)).conjugate() if trimmed else Partition(())


_REVERSAL_CACHE: dict = {}


def _reversal_factor(field: PrimeField, sigma: Partition, n: int, m: int | None, mode: str) -> int:
    """Sign relating the anti-canonical ref evaluated at the index-reversed
    matrix to the canonical ref: fixed by explicit symbolic comparison."""
    key = (field.p, sigma, n, m, mode)
    if key in _REVERSAL_CACHE:
        return _REVERSAL_CACHE[key]
    if mode == "det":
        ref_bar = BideterminantRef(
            Bitableau(anti_canonical(sigma, n), anti_canonical(sigma, m)), n, m
        )
        ref_can = BideterminantRef(
            Bitableau(canonical(sigma, n), canonical(sigma, m)), n, m
        )
        mapping = {
            xvar(i, j): SparsePolynomial.variable(field, xvar(n + 1 - i, m + 1 - j))
            for i in range(1, n + 1)
            for j in range(1, m + 1)
        }
        moved = _expand_ref(field, ref_bar, "det").substitute(mapping)
        target = _expand_ref(field, ref_can, "det")
    else:
        dim = n
        ref_bar = BipfaffianRef(anti_canonical(sigma, dim), dim)
        ref_can = BipfaffianRef(canonical(sigma, dim), dim)
        mapping = {}
        for i in range(1, dim + 1):
            for j in range(i + 1, dim + 1):
                sign, var = skew_entry(dim + 1 - i, dim + 1 - j)
                mapping[xvar(i, j)] = SparsePolynomial.variable(field, var, coeff=sign)
        moved = _expand_ref(field, ref_bar, "pfaff").substitute(mapping)
        target = _expand_ref(field, ref_can, "pfaff")
    if moved == target:
        out = 1
    elif moved == -target:
        out = -1
    else:
        raise AssertionError(f"index reversal did not map refs for {sigma}")
    _REVERSAL_CACHE[key] = out
    return out


def _check_caps_for_stage(f: SparsePolynomial, mode: str, n: int, m: int | None):
    if mode == "det":
        if n > CHECK_AMBIENT_CAP or (m or 0) > CHECK_AMBIENT_CAP:
            raise DeskCapError("symbolic stage checks capped at 3x3 ambient")
    else:
        if n > 4:
            raise DeskCapError("symbolic stage checks capped at alternating 4x4")
    if (f.degree() or 0) > CHECK_DEGREE_CAP:
        raise DeskCapError("symbolic stage checks capped at degree 3")


def symbolic_pipeline_check(
    field: PrimeField,
    f: SparsePolynomial,
    mode: str,
    stage: str,
    n: int,
    m: int | None = None,
    r: int = 1,
) -> dict:
    """Expand one pipeline intermediate in full and assert its structure.

    det stages: "mx" (left transform only), "mxn" (both transforms),
    "reformulated" (index reversal folded in), "key" (scaled diagonals; the
    lowest v-slice).  pfaff stages: "conj", "reformulated", "key".
    Returns a report dict with ok=True on success; structural violations
    raise AssertionError.
    """
    _check_caps_for_stage(f, mode, n, m)
    report = {"stage": stage, "mode": mode, "ok": False}
    expansion = straighten(field, f, mode, n, m)
    assert expansion.terms, "stage checks need a nonzero polynomial"
    d = f.degree()

    if mode == "det":
        M = build_M_det(field, n).expanded()
        N = build_N_det(field, m).expanded()
        Jn = anti_diagonal(field, n)
        Jm = anti_diagonal(field, m)
        X = _generic_matrix(field, n, m)
        Dn = scaled_diag(field, n, "y")
        Dm = scaled_diag(field, m, "z")
        if stage == "mx":
            W = M @ X
        elif stage == "mxn":
            W = M @ X @ N
        elif stage == "reformulated":
            W = M @ Jn @ X @ Jm @ N
        elif stage == "key":
            W = M @ Jn @ Dn @ X @ Dm @ Jm @ N
        else:
            raise ParameterError(f"unknown det stage {stage!r}")
        g = _substitute_matrix(f, W)
        if stage == "key":
            return _check_key_stage(field, f, g, expansion, report, mode, n, m, r, d)
        return _check_leading_stage(field, g, expansion, report, mode, stage, n, m, r)

    dim = n
    M = build_M_pfaff(field, dim).expanded()
    Mt = M.transpose()
    J = anti_diagonal(field, dim)
    X = _generic_skew_matrix(field, dim)
    D = scaled_diag(field, dim, "y")
    if stage == "conj":
        W = M @ X @ Mt
    elif stage == "reformulated":
        W = M @ J @ X @ J @ Mt
    elif stage == "key":
        W = M @ J @ D @ X @ D @ J @ Mt
    else:
        raise ParameterError(f"unknown pfaff stage {stage!r}")
    g = _substitute_matrix(f, W)
    if stage == "key":
        return _check_key_stage(field, f, g, expansion, report, mode, dim, None, r, d)
    return _check_leading_stage(field, g, expansion, report, mode, stage, dim, None, r)


def _predicted_leading(field, expansion, mode, stage, n, m):
    """Bucket the straightened terms by predicted leading aux exponent; the
    bucket value is the predicted leading polynomial."""
    buckets: dict = {}
    for ref, c in expansion.terms:
        sigma = ref.shape
        if mode == "det":
            S, T = ref.bitableau.S, ref.bitableau.T
            termS, countS, signS = sub_chain_signed(S, n)
            assert termS == anti_canonical(sigma, n)
            evec = _chain_vector(countS, n)
            if stage == "mx":
                key = evec
                lead_ref = BideterminantRef(Bitableau(anti_canonical(sigma, n), T), n, m)
                coeff = signS * c
            else:
                termT, countT, signT = sub_chain_signed(T, m)
                assert termT == anti_canonical(sigma, m)
                key = evec + _chain_vector(countT, m)
                coeff = signS * signT * c
                if stage == "mxn":
                    lead_ref = BideterminantRef(
                        Bitableau(anti_canonical(sigma, n), anti_canonical(sigma, m)), n, m
                    )
                else:  # reformulated
                    lead_ref = BideterminantRef(
                        Bitableau(canonical(sigma, n), canonical(sigma, m)), n, m
                    )
                    coeff *= _reversal_factor(field, sigma, n, m, "det")
        else:
            T = ref.tableau
            termT, countT, signT = sub_chain_signed(T, n)
            assert termT == anti_canonical(sigma, n)
            key = _chain_vector(countT, n)
            coeff = signT * c
            if stage == "conj":
                lead_ref = BipfaffianRef(anti_canonical(sigma, n), n)
            else:  # reformulated
                lead_ref = BipfaffianRef(canonical(sigma, n), n)
                coeff *= _reversal_factor(field, sigma, n, None, "pfaff")
        buckets.setdefault(key, []).append((lead_ref, coeff % field.p))
    return buckets


def _check_leading_stage(field, g, expansion, report, mode, stage, n, m, r):
    buckets = _predicted_leading(field, expansion, mode, stage, n, m)
    top = max(buckets)
    predicted = SparsePolynomial.zero(field)
    for lead_ref, coeff in buckets[top]:
        predicted = predicted + _expand_ref(field, lead_ref, mode).scale(coeff)
    assert not predicted.is_zero(), "leading set must be nonempty"

    groups = _aux_groups(g, field)
    if mode == "det":
        if stage == "mx":
            keys = {
                aux: _family_vector(aux, "lam", pair_order(n)) for aux in groups
            }
        else:
            keys = {
                aux: _family_vector(aux, "lam", pair_order(n))
                + _family_vector(aux, "xi", pair_order(m))
                for aux in groups
            }
    else:
        keys = {aux: _family_vector(aux, "lam", pair_order(n)) for aux in groups}

    top_seen = max(keys.values())
    assert top_seen == top, f"leading aux exponent {top_seen} != predicted {top}"
    got = SparsePolynomial.zero(field)
    for aux, key in keys.items():
        if key == top:
            got = got + groups[aux]
    assert got == predicted, "leading coefficient does not match prediction"

    need = r if mode == "det" else 2 * r
    for aux, piece in groups.items():
        verdict, shapes = certify_membership(field, piece, r, mode, n, m)
        assert verdict, f"aux group {aux} leaves the ideal: shapes {shapes}"

    report.update(
        ok=True,
        leading_exponent=top,
        leading_terms=len(buckets[top]),
        groups=len(groups),
        min_first_part=need,
    )
    return report


def _check_key_stage(field, f, g, expansion, report, mode, n, m, r, d):
    factor = 2 if mode == "det" else 1
    want_dmin = factor * min(canonical_weight(s) for s in expansion.shapes())
    cmap = g.coeff_map(V)
    d_min = min(cmap)
    assert d_min == want_dmin, f"lowest v-degree {d_min} != {want_dmin}"
    slice_poly = cmap[d_min]
    groups = _aux_groups(slice_poly, field)
    need = r if mode == "det" else 2 * r
    shapes_seen = []
    for aux, piece in groups.items():
        svec = _family_vector(aux, "y", range(1, n + 1))
        sigma = _partition_from_counts(svec)
        if mode == "det":
            tvec = _family_vector(aux, "z", range(1, m + 1))
            assert _partition_from_counts(tvec) == sigma, (
                "row and column degree vectors disagree on the shape"
            )
            ref = BideterminantRef(
                Bitableau(canonical(sigma, n), canonical(sigma, m)), n, m
            )
        else:
            ref = BipfaffianRef(canonical(sigma, n), n)
        expected = _expand_ref(field, ref, mode)
        anchor = next(iter(expected.terms))
        assert anchor in piece.terms, f"aux group {aux} is not canonical for {sigma}"
        c = piece.terms[anchor] * pow(expected.terms[anchor], field.p - 2, field.p) % field.p
        assert piece == expected.scale(c), (
            f"aux group {aux} is not proportional to the canonical ref of {sigma}"
        )
        assert c != 0
        assert sigma.parts[0] >= need, f"isolated shape {sigma} below first-part bound"
        assert sigma.size <= (d if mode == "det" else 2 * d)
        shapes_seen.append(sigma)
    assert groups, "lowest v-slice is empty"
    report.update(
        ok=True,
        d_min=d_min,
        groups=len(groups),
        shapes=[s.parts for s in shapes_seen],
    )
    return report
