"""Shared engine behind the minor-family and Pfaffian-family reductions.

Both public pipelines take oracle access to one nonzero polynomial f that
lies in the span of products of top-justified minors (ordinary or
Pfaffian) whose largest block meets a size threshold, and return a
depth-three circuit: affine argument maps at the bottom, a middle layer of
f-oracle calls, and a single weighted sum on top.  The circuit computes
either one canonical member of the spanning family (the extraction stage)
or, composed with a branching-program embedding, a chosen target such as a
small determinant, Pfaffian, or iterated matrix product (the program
stage).

Extraction works by conjugating the generic matrix argument:

* random triangular transforms concentrate every family member onto its
  canonical representative with a nonzero scalar, with high probability;
* grading the transform columns by powers of a fresh variable v sorts the
  family members by a shape-dependent valuation, so the smallest surviving
  v-coefficient of the pulled-back oracle is spanned by members of one
  valuation class;
* integer weights on a second grading variable w make the smallest
  w-coefficient inside that class a single member, with probability at
  least 1 - epsilon per attempt;
* two rounds of exact univariate interpolation over a (v, w) product grid
  pull that coefficient out as a fixed linear combination of oracle values
  at affine arguments -- which is exactly a depth-three oracle circuit.

The identity of the extracted member and its scalar are recovered by a
ratio test against candidate canonical representatives at the scan probes,
then certified at fresh random points; any failed stage retries with fresh
randomness up to the configured cap.

The program stage embeds a homogenized branching program into the matrix
argument so that every canonical block of qualifying size evaluates to
1 + z^e * g, where g is the program polynomial and e its layer count.
Restricting z to scalars delta and interpolating the composed circuit in
delta^(e * p^k) -- where p^k is the largest prime-power divisor of the
number of qualifying blocks -- leaves a scalar multiple of g^(p^k).  A
single normalization probe fixes the scalar, and fresh probes certify the
result.
"""

from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np

from .abp import (
    ABP,
    extend_to_ambient,
    matrix_affine_tensor,
    skew_symmetrize,
    valiant_embed,
)
from .bidet import (
    BideterminantRef,
    BipfaffianRef,
    eval_bideterminant_batch,
    eval_bipfaffian_batch,
    expand_bideterminant,
    expand_bipfaffian,
)
from .circuits import AffineOracleSum, OracleSpec
from .errors import (
    FieldTooSmallError,
    IsolationFailure,
    ParameterError,
    VerificationError,
    ZeroPolynomialError,
)
from .field import PrimeField
from .interp import build_plan, interpolate_all
from .isolate import fold_v, sample_weights, weight_bound
from .matrices import batch_matmul, build_M_det, build_M_pfaff, build_N_det
from .poly import SparsePolynomial, lam, var_name, xi, xvar, yvar, zvar
from .tableau import Bitableau, Partition, Tableau, canonical, canonical_weight, enumerate_partitions

# Expansion caps for the shortcut proportionality test and the symbolic
# audit; oversize candidates simply fall back to the numeric route.
FAST_EXPANSION_TERM_CAP = 8192
AUDIT_CALL_CAP = 64
AUDIT_ARITY_CAP = 40
AUDIT_TERM_CAP = 512

_NORMALIZATION_TRIES = 256


# ----------------------------------------------------------------------
# Geometry adapters
# ----------------------------------------------------------------------


class DetGeometry:
    """Rectangular matrix argument conjugated on both sides."""

    mode = "det"
    even_rows = False
    valuation_factor = 2  # v-degree of a shape is twice its canonical weight

    def __init__(self, field: PrimeField, n: int, m: int):
        self.field = field
        self.n = n
        self.m = m
        self.var_order = tuple(
            xvar(i, j) for i in range(1, n + 1) for j in range(1, m + 1)
        )
        self.arity = n * m
        self.weight_vars = tuple(yvar(a) for a in range(1, n + 1)) + tuple(
            zvar(b) for b in range(1, m + 1)
        )
        self.ell = n + m
        self.max_part = min(n, m)

    def isolation_K(self, d: int) -> int:
        return d

    def min_first_part(self, r: int) -> int:
        return r

    def shape_sizes(self, d: int, r: int):
        return range(r, d + 1)

    def v_degree_bound(self, d: int) -> int:
        return d * (self.n + self.m)

    def base_valuation(self, r: int) -> int:
        return r * (r + 1)

    def w_degree_bound(self, d: int, exponents) -> int:
        wy = exponents[: self.n]
        wz = exponents[self.n :]
        return d * (int(max(wy)) + int(max(wz)))

    def w_degree_bound_worst(self, d: int, M: int) -> int:
        return d * 2 * M

    def sample_alpha_values(self, rng) -> dict:
        # left factors use lam-variables on n, right factors xi on m
        field = self.field
        values = {}
        for i in range(1, self.n + 1):
            for j in range(i + 1, self.n + 1):
                values[lam(i, j)] = int(rng.integers(0, field.p))
        for i in range(1, self.m + 1):
            for j in range(i + 1, self.m + 1):
                values[xi(i, j)] = int(rng.integers(0, field.p))
        return values

    def outer_factors(self, alphas: dict):
        """Constant matrices FL, FR with X' = FL ((dl x dr) . X) FR.

        Multiplying by the reversal matrix is a column (resp. row) flip.
        """
        field = self.field
        ML = build_M_det(field, self.n).eval_at(alphas)
        NR = build_N_det(field, self.m).eval_at(alphas)
        FL = np.ascontiguousarray(np.fliplr(np.asarray(ML, dtype=np.int64)))
        FR = np.ascontiguousarray(np.flipud(np.asarray(NR, dtype=np.int64)))
        return FL, FR

    def axis_exponents(self):
        """(left column v-exponents, left weight slots), same for right."""
        left = (np.arange(1, self.n + 1), np.arange(self.n))
        right = (np.arange(1, self.m + 1), np.arange(self.n, self.n + self.m))
        return left, right

    def random_arg_matrices(self, rng, count: int) -> np.ndarray:
        return rng.integers(0, self.field.p, size=(count, self.n, self.m))

    def args_from_matrices(self, mats: np.ndarray) -> np.ndarray:
        return np.asarray(mats).reshape(mats.shape[:-2] + (self.arity,))

    def linear_maps(self, TL: np.ndarray, TR: np.ndarray) -> np.ndarray:
        """Coefficient of each argument slot in each transformed slot."""
        p = self.field.p
        lin = np.einsum("cia,cbj->cijab", TL, TR) % p
        c = TL.shape[0]
        return lin.reshape(c, self.arity, self.arity)

    def ref_for(self, sigma: Partition):
        tab = canonical(sigma, self.max_part)
        return BideterminantRef(Bitableau(tab, tab), self.n, self.m)

    def ref_values(self, sigma: Partition, mats: np.ndarray) -> np.ndarray:
        return eval_bideterminant_batch(self.field, self.ref_for(sigma), mats)

    def ref_polynomial(self, sigma: Partition) -> SparsePolynomial:
        return expand_bideterminant(self.field, self.ref_for(sigma))

    def ref_term_estimate(self, sigma: Partition) -> int:
        total = 1
        for part in sigma.parts:
            for k in range(2, part + 1):
                total *= k
            if total > FAST_EXPANSION_TERM_CAP:
                return total
        return total

    def shape_size_of_degree(self, deg: int) -> int:
        return deg

    def program_argument_tensor(self, embedded, var_order) -> np.ndarray:
        """(arity, L+2) affine maps from (program vars, z, 1) to arguments."""
        amb = extend_to_ambient(embedded, self.n, self.m)
        tensor = matrix_affine_tensor(amb, var_order)
        return tensor.reshape(self.arity, tensor.shape[-1])


class PfaffGeometry:
    """Alternating matrix argument conjugated by a single congruence."""

    mode = "pfaff"
    even_rows = True
    valuation_factor = 1

    def __init__(self, field: PrimeField, n: int):
        self.field = field
        self.n = n  # half-dimension; the matrix argument is 2n x 2n
        self.dim = 2 * n
        pairs = [
            (i, j)
            for i in range(1, self.dim + 1)
            for j in range(i + 1, self.dim + 1)
        ]
        self.var_order = tuple(xvar(i, j) for i, j in pairs)
        self.arity = len(pairs)
        self._iu = np.array([i - 1 for i, _ in pairs])
        self._ju = np.array([j - 1 for _, j in pairs])
        self.weight_vars = tuple(yvar(a) for a in range(1, self.dim + 1))
        self.ell = self.dim
        self.max_part = self.dim

    def isolation_K(self, d: int) -> int:
        return 2 * d

    def min_first_part(self, r: int) -> int:
        return 2 * r

    def shape_sizes(self, d: int, r: int):
        return range(2 * r, 2 * d + 1, 2)

    def v_degree_bound(self, d: int) -> int:
        return d * (4 * self.n - 1)

    def base_valuation(self, r: int) -> int:
        return r * (2 * r + 1)

    def w_degree_bound(self, d: int, exponents) -> int:
        top_two = np.sort(np.asarray(exponents))[-2:]
        return d * int(top_two.sum())

    def w_degree_bound_worst(self, d: int, M: int) -> int:
        return d * 2 * M

    def sample_alpha_values(self, rng) -> dict:
        field = self.field
        values = {}
        for i in range(1, self.dim + 1):
            for j in range(i + 1, self.dim + 1):
                values[lam(i, j)] = int(rng.integers(0, field.p))
        return values

    def outer_factors(self, alphas: dict):
        field = self.field
        ML = build_M_pfaff(field, self.dim).eval_at(alphas)
        FL = np.ascontiguousarray(np.fliplr(np.asarray(ML, dtype=np.int64)))
        return FL, FL.T.copy()

    def axis_exponents(self):
        left = (np.arange(1, self.dim + 1), np.arange(self.dim))
        return left, left

    def random_arg_matrices(self, rng, count: int) -> np.ndarray:
        p = self.field.p
        raw = rng.integers(0, p, size=(count, self.dim, self.dim))
        upper = np.triu(raw, 1)
        return (upper - upper.transpose(0, 2, 1)) % p

    def args_from_matrices(self, mats: np.ndarray) -> np.ndarray:
        return np.asarray(mats)[..., self._iu, self._ju]

    def linear_maps(self, TL: np.ndarray, TR: np.ndarray) -> np.ndarray:
        p = self.field.p
        iu, ju = self._iu, self._ju
        a_row = iu[None, :]
        b_row = ju[None, :]
        direct = (
            TL[:, iu[:, None], a_row] * TR[:, b_row, ju[:, None]]
        ) % p
        crossed = (
            TL[:, iu[:, None], b_row] * TR[:, a_row, ju[:, None]]
        ) % p
        return (direct - crossed) % p

    def ref_for(self, sigma: Partition):
        tab = canonical(sigma, self.dim)
        return BipfaffianRef(tab, self.dim)

    def ref_values(self, sigma: Partition, mats: np.ndarray) -> np.ndarray:
        return eval_bipfaffian_batch(self.field, self.ref_for(sigma), mats)

    def ref_polynomial(self, sigma: Partition) -> SparsePolynomial:
        return expand_bipfaffian(self.field, self.ref_for(sigma))

    def ref_term_estimate(self, sigma: Partition) -> int:
        total = 1
        for part in sigma.parts:
            for k in range(part - 1, 0, -2):
                total *= k
            if total > FAST_EXPANSION_TERM_CAP:
                return total
        return total

    def shape_size_of_degree(self, deg: int) -> int:
        return 2 * deg

    def program_argument_tensor(self, embedded, var_order) -> np.ndarray:
        amb = extend_to_ambient(embedded, self.n, self.n)
        skew, _signs = skew_symmetrize(amb)
        tensor = matrix_affine_tensor(skew, var_order)
        return tensor[self._iu, self._ju, :]


# ----------------------------------------------------------------------
# Planning and reporting
# ----------------------------------------------------------------------


def planned_counts(geom, params) -> dict:
    """Static per-attempt grid bounds and feasibility, from parameters only."""
    field = params.field
    K = geom.isolation_K(params.d)
    M = weight_bound(K, geom.ell, params.epsilon)
    A = geom.v_degree_bound(params.d)
    a0 = geom.base_valuation(params.r)
    v_points = A - a0 + 1
    B_worst = geom.w_degree_bound_worst(params.d, M)
    grid_worst = v_points * (B_worst + 1)
    notes = []
    feasible = True
    if v_points > field.p - 1:
        feasible = False
        notes.append(
            f"needs {v_points} distinct nonzero v-points but the field has "
            f"{field.p - 1}"
        )
    if B_worst + 1 > field.p:
        notes.append(
            f"worst-case w-axis needs {B_worst + 1} points but the field has "
            f"{field.p}; the per-attempt bound may still fit"
        )
    return {
        "ell": geom.ell,
        "K": K,
        "M": M,
        "v_degree_bound": A,
        "base_valuation": a0,
        "v_points": v_points,
        "w_degree_bound_worst": B_worst,
        "grid_worst": grid_worst,
        "grid_feasible": feasible,
        "notes": notes,
    }


@dataclass
class AttemptLog:
    index: int
    weights: dict | None = None
    alphas: dict | None = None
    w_degree_bound: int | None = None
    grid_points: int | None = None
    v_index: int | None = None
    w_index: int | None = None
    folded_index: int | None = None
    candidates: int | None = None
    matches: int | None = None
    outcome: str = ""

    def to_jsonable(self) -> dict:
        return {
            "index": self.index,
            "weights": self.weights,
            "alphas": self.alphas,
            "w_degree_bound": self.w_degree_bound,
            "grid_points": self.grid_points,
            "v_index": self.v_index,
            "w_index": self.w_index,
            "folded_index": self.folded_index,
            "candidates": self.candidates,
            "matches": self.matches,
            "outcome": self.outcome,
        }


@dataclass
class ReductionReport:
    mode: str
    stage: str
    params: dict
    plan: dict
    fast_path: bool = False
    attempts: list = dc_field(default_factory=list)
    shape: tuple | None = None
    scalar: int | None = None
    chosen_index: int | None = None
    membership: str | None = None
    outer: dict | None = None
    normalization: dict | None = None
    verification: dict = dc_field(default_factory=dict)
    metrics: dict | None = None

    @property
    def attempt_count(self) -> int:
        return len(self.attempts)

    def to_jsonable(self) -> dict:
        return _json_safe(
            {
                "mode": self.mode,
                "stage": self.stage,
                "params": self.params,
                "plan": self.plan,
                "fast_path": self.fast_path,
                "attempt_count": self.attempt_count,
                "attempts": [a.to_jsonable() for a in self.attempts],
                "shape": list(self.shape) if self.shape is not None else None,
                "scalar": self.scalar,
                "chosen_index": self.chosen_index,
                "membership": self.membership,
                "outer": self.outer,
                "normalization": self.normalization,
                "verification": self.verification,
                "metrics": self.metrics,
            }
        )


def _json_safe(value):
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_json_safe(v) for v in value.tolist()]
    return value


# ----------------------------------------------------------------------
# Shortcut for oracles given in explicit form
# ----------------------------------------------------------------------


def _monomial_degrees(f: SparsePolynomial):
    return {sum(e for _, e in monomial) for monomial in f.terms}


def fast_path_match(geom, params):
    """If f is visibly one canonical member times a scalar, say which."""
    f = params.f_poly
    if f is None or f.is_zero():
        return None
    degrees = _monomial_degrees(f)
    if len(degrees) != 1:
        return None
    deg = degrees.pop()
    size = geom.shape_size_of_degree(deg)
    if size > geom.shape_size_of_degree(params.d) or size <= 0:
        return None
    anchor = max(f.terms)
    c_f = f.terms[anchor]
    for sigma in enumerate_partitions(size, geom.max_part, geom.even_rows):
        if sigma.parts[0] < geom.min_first_part(params.r):
            continue
        if geom.ref_term_estimate(sigma) > FAST_EXPANSION_TERM_CAP:
            continue
        ref = geom.ref_polynomial(sigma)
        coeff = ref.terms.get(anchor)
        if not coeff:
            continue
        c = params.field.div(c_f, coeff)
        if f == ref.scale(c):
            return sigma, c
    return None


def identity_circuit(geom, params) -> AffineOracleSum:
    """One oracle call on unchanged arguments with unit weight."""
    maps = np.zeros((1, geom.arity, geom.arity + 1), dtype=np.int64)
    maps[0, :, :-1] = np.eye(geom.arity, dtype=np.int64)
    return AffineOracleSum.from_maps(
        params.field, params.f_spec, geom.var_order, (1,), maps
    )


# ----------------------------------------------------------------------
# Grid machinery
# ----------------------------------------------------------------------


def _power_table(field: PrimeField, bases: np.ndarray, exps: np.ndarray) -> np.ndarray:
    """table[s, a] = bases[s] ** exps[a] mod p."""
    out = np.empty((len(bases), len(exps)), dtype=np.int64)
    for a, e in enumerate(exps):
        out[:, a] = field.pow_arr(bases, int(e))
    return out


class _GridFrame:
    """One attempt's transforms, gradings, and point sets."""

    def __init__(self, geom, params, weights, alphas):
        field = params.field
        self.geom = geom
        self.field = field
        A = geom.v_degree_bound(params.d)
        a0 = geom.base_valuation(params.r)
        self.v_count = A - a0 + 1
        self.a0 = a0
        self.B = geom.w_degree_bound(params.d, weights.exponents)
        if self.v_count > field.p - 1:
            raise FieldTooSmallError(
                f"the v-axis needs {self.v_count} distinct nonzero points "
                f"but the field has only {field.p - 1}",
                required_points=self.v_count + 1,
            )
        if self.B + 1 > field.p:
            raise FieldTooSmallError(
                f"the w-axis needs {self.B + 1} distinct points but the "
                f"field has only {field.p}",
                required_points=self.B + 1,
            )
        self.gammas = np.arange(1, self.v_count + 1, dtype=np.int64)
        self.etas = np.arange(0, self.B + 1, dtype=np.int64)
        self.FL, self.FR = geom.outer_factors(alphas)
        (lcol, lw), (rcol, rw) = geom.axis_exponents()
        exps = np.asarray(weights.exponents, dtype=np.int64)
        self.GL = _power_table(field, self.gammas, lcol)
        self.GR = _power_table(field, self.gammas, rcol)
        self.HL = _power_table(field, self.etas, exps[lw])
        self.HR = _power_table(field, self.etas, exps[rw])
        self.inv_ga0 = field.inv_arr(field.pow_arr(self.gammas, a0))

    @property
    def grid_points(self) -> int:
        return self.v_count * (self.B + 1)

    def transformed_args(self, u_slice, X: np.ndarray) -> np.ndarray:
        """Oracle arguments over (v-axis, u_slice, probes): (.., .., Q, arity)."""
        field, geom = self.field, self.geom
        p = field.p
        dl = (self.GL[:, None, :] * self.HL[None, u_slice, :]) % p
        dr = (self.GR[:, None, :] * self.HR[None, u_slice, :]) % p
        scale = (dl[:, :, :, None] * dr[:, :, None, :]) % p
        SX = (scale[:, :, None, :, :] * X[None, None, :, :, :]) % p
        FL = np.broadcast_to(self.FL, SX.shape[:-2] + self.FL.shape)
        left = batch_matmul(field, FL, SX)
        FR = np.broadcast_to(self.FR, left.shape[:-2] + self.FR.shape)
        full = batch_matmul(field, left, FR)
        return geom.args_from_matrices(full)

    def grid_values(self, spec: OracleSpec, X: np.ndarray, chunk_cols: int) -> np.ndarray:
        """Oracle values over the whole grid: (v_count, B+1, Q)."""
        Q = X.shape[0]
        out = np.empty((self.v_count, self.B + 1, Q), dtype=np.int64)
        for lo in range(0, self.B + 1, chunk_cols):
            hi = min(lo + chunk_cols, self.B + 1)
            args = self.transformed_args(slice(lo, hi), X)
            flat = args.reshape(-1, self.geom.arity)
            out[:, lo:hi, :] = (
                np.asarray(spec.call_batch(flat), dtype=np.int64) % self.field.p
            ).reshape(self.v_count, hi - lo, Q)
        return out

    def chunk_columns(self, probe_count: int) -> int:
        d1 = self.FL.shape[0]
        d2 = self.FR.shape[1]
        per_col = self.v_count * probe_count * d1 * d2 * 8 * 3
        budget = 96 << 20
        return max(1, min(self.B + 1, budget // max(per_col, 1)))

    def extraction_rows(self, j_star: int, b_star: int):
        field = self.field
        row_v = build_plan(field, self.v_count - 1, j_star, points=self.gammas).row
        rho_v = row_v * self.inv_ga0 % field.p
        rho_w = build_plan(field, self.B, b_star, points=self.etas).row
        return rho_v, rho_w

    def map_provider(self):
        geom, field = self.geom, self.field
        p = field.p
        Bw = self.B + 1
        FL, FR, GL, GR, HL, HR = self.FL, self.FR, self.GL, self.GR, self.HL, self.HR

        def provider(lo: int, hi: int) -> np.ndarray:
            ks = np.arange(lo, hi)
            s = ks // Bw
            u = ks % Bw
            dl = (GL[s] * HL[u]) % p
            dr = (GR[s] * HR[u]) % p
            TL = FL[None, :, :] * dl[:, None, :] % p
            TR = FR[None, :, :] * dr[:, :, None] % p
            lin = geom.linear_maps(TL, TR)
            out = np.zeros((hi - lo, geom.arity, geom.arity + 1), dtype=np.int64)
            out[:, :, :-1] = lin
            return out

        return provider


def _first_nonzero_slice(coeffs: np.ndarray, axes) -> int | None:
    mask = (coeffs != 0).any(axis=axes)
    if not mask.any():
        return None
    return int(np.argmax(mask))


def _scan(frame: _GridFrame, H: np.ndarray):
    """Locate the minimal (v, w) coefficient; return indices and probe values."""
    field = frame.field
    Hn = H * frame.inv_ga0[:, None, None] % field.p
    v_coeffs = interpolate_all(field, np.moveaxis(Hn, 0, -1), frame.gammas)
    j_star = _first_nonzero_slice(v_coeffs, (0, 1))
    if j_star is None:
        return None
    w_values = v_coeffs[:, :, j_star]  # (B+1, Q)
    w_coeffs = interpolate_all(field, w_values.T, frame.etas)  # (Q, B+1)
    b_star = _first_nonzero_slice(w_coeffs, (0,))
    return j_star, b_star, w_coeffs[:, b_star]


def _identify(geom, params, a_star: int, X: np.ndarray, extracted: np.ndarray):
    """Match the extracted values against candidate canonical members."""
    field = params.field
    p = field.p
    candidates = 0
    matches = []
    for size in geom.shape_sizes(params.d, params.r):
        for sigma in enumerate_partitions(size, geom.max_part, geom.even_rows):
            if sigma.parts[0] < geom.min_first_part(params.r):
                continue
            if geom.valuation_factor * canonical_weight(sigma) != a_star:
                continue
            candidates += 1
            ref_vals = geom.ref_values(sigma, X)
            c = None
            for q in range(len(extracted)):
                if ref_vals[q]:
                    c = field.div(int(extracted[q]), int(ref_vals[q]))
                    break
            if c is None:
                continue
            if np.all((extracted - c * ref_vals) % p == 0):
                matches.append((sigma, c))
    return candidates, matches


# ----------------------------------------------------------------------
# Extraction stage
# ----------------------------------------------------------------------


def extract_canonical_core(geom, params):
    """Return (circuit, report) for one canonical member of f's span."""
    field = params.field
    plan = planned_counts(geom, params)
    report = ReductionReport(
        mode=geom.mode,
        stage="canonical",
        params=params.describe(),
        plan=plan,
    )
    _membership_note(geom, params, report)

    fast = None
    if params.allow_fast_path:
        fast = fast_path_match(geom, params)
    if fast is not None:
        sigma, c = fast
        circuit = identity_circuit(geom, params)
        report.fast_path = True
        report.shape = sigma.parts
        report.scalar = c
        _verify_extraction_direct(geom, params, circuit, sigma, c, report)
        report.metrics = circuit.metrics().to_dict()
        return circuit, report

    if not plan["grid_feasible"]:
        raise FieldTooSmallError(
            "the scan grid does not fit in the field: " + "; ".join(plan["notes"]),
            required_points=plan["v_points"] + 1,
        )
    if (
        params.max_oracle_calls is not None
        and plan["grid_worst"] > params.max_oracle_calls
    ):
        raise ParameterError(
            f"worst-case grid of {plan['grid_worst']} oracle calls "
            f"({plan['v_points']} v-points x {plan['w_degree_bound_worst'] + 1} "
            f"w-points) exceeds the budget of {params.max_oracle_calls}"
        )

    for attempt in range(params.retries):
        log = AttemptLog(index=attempt)
        report.attempts.append(log)
        weights = sample_weights(
            geom.isolation_K(params.d),
            geom.ell,
            params.epsilon,
            params.seed,
            variables=geom.weight_vars,
            counter=attempt,
        )
        alphas = geom.sample_alpha_values(
            np.random.default_rng([params.seed, 2, attempt])
        )
        log.weights = weights.to_jsonable()
        log.alphas = {var_name(v): int(c) for v, c in sorted(alphas.items())}
        frame = _GridFrame(geom, params, weights, alphas)
        log.w_degree_bound = frame.B
        log.grid_points = frame.grid_points
        X = geom.random_arg_matrices(
            np.random.default_rng([params.seed, 3, attempt]), params.scan_probes
        )
        H = frame.grid_values(
            params.f_spec, X, frame.chunk_columns(params.scan_probes)
        )
        found = _scan(frame, H)
        if found is None:
            log.outcome = "pullback vanished at every grid point"
            continue
        j_star, b_star, extracted = found
        a_star = frame.a0 + j_star
        log.v_index = a_star
        log.w_index = b_star
        log.folded_index = a_star * (frame.B + 1) + b_star
        candidates, matched = _identify(geom, params, a_star, X, extracted)
        log.candidates = candidates
        log.matches = len(matched)
        if len(matched) != 1:
            log.outcome = (
                "no canonical member matched the extracted values"
                if not matched
                else "several canonical members matched; weights not isolating"
            )
            continue
        sigma, c = matched[0]
        rho_v, rho_w = frame.extraction_rows(j_star, b_star)
        flat_weights = (rho_v[:, None] * rho_w[None, :] % field.p).reshape(-1)
        circuit = AffineOracleSum(
            field,
            params.f_spec,
            geom.var_order,
            flat_weights,
            frame.map_provider(),
            0,
            chunk=params.chunk,
        )
        ok = _verify_extraction_grid(
            geom, params, frame, circuit, rho_v, rho_w, sigma, c, report, attempt
        )
        if not ok:
            log.outcome = "verification probes disagreed"
            report.verification = {}
            continue
        log.outcome = "success"
        report.shape = sigma.parts
        report.scalar = c
        report.chosen_index = log.folded_index
        folded = fold_v(weights, frame.v_count - 1 + frame.a0, frame.B)
        report.verification.setdefault("fold", folded.to_jsonable())
        report.metrics = circuit.metrics().to_dict()
        return circuit, report

    hint = ""
    if any(a.matches == 0 and a.candidates == 0 for a in report.attempts):
        hint = (
            "; no candidate shape has the observed valuation -- membership "
            "of f in the stated span is suspect"
        )
    raise IsolationFailure(
        f"no attempt out of {params.retries} produced a verified extraction"
        + hint,
        attempts=[a.to_jsonable() for a in report.attempts],
    )


def _membership_note(geom, params, report: ReductionReport) -> None:
    """Desk-scale membership certificate when the oracle is explicit."""
    f = params.f_poly
    if f is None:
        report.membership = "not checked (oracle access only)"
        return
    if f.is_zero():
        raise ZeroPolynomialError("the supplied oracle polynomial is zero")
    try:
        from .straighten import certify_membership

        verdict, shapes = certify_membership(
            params.field,
            f,
            params.r,
            geom.mode,
            geom.n if geom.mode == "det" else geom.dim,
            m=geom.m if geom.mode == "det" else None,
        )
        report.membership = (
            f"certified ({len(shapes)} shapes)" if verdict else "membership suspect"
        )
    except Exception as exc:  # desk caps and oversized inputs fall back
        report.membership = f"not certified at this size ({type(exc).__name__})"


def _verify_extraction_direct(geom, params, circuit, sigma, c, report) -> None:
    """Probe a one-call circuit directly against c times the canonical member."""
    field = params.field
    rng = np.random.default_rng([params.seed, 4, 0])
    mats = geom.random_arg_matrices(rng, params.probes)
    got = circuit.eval_many(geom.args_from_matrices(mats))
    want = c * geom.ref_values(sigma, mats) % field.p
    agreements = int(np.count_nonzero(got == want))
    report.verification = {
        "probes": params.probes,
        "agreements": agreements,
        "passed": agreements == params.probes,
    }
    if agreements != params.probes:
        raise VerificationError(
            f"shortcut circuit disagreed with its canonical member at "
            f"{params.probes - agreements} of {params.probes} probes"
        )


def _verify_extraction_grid(
    geom, params, frame, circuit, rho_v, rho_w, sigma, c, report, attempt
) -> bool:
    """Fresh-point check of the extracted combination and the circuit object."""
    field = params.field
    p = field.p
    rng = np.random.default_rng([params.seed, 4, attempt])
    mats = geom.random_arg_matrices(rng, params.probes)
    H = frame.grid_values(params.f_spec, mats, frame.chunk_columns(params.probes))
    partial = (H * rho_w[None, :, None] % p).sum(axis=1) % p
    got = (partial * rho_v[:, None] % p).sum(axis=0) % p
    want = c * geom.ref_values(sigma, mats) % p
    agreements = int(np.count_nonzero(got == want))
    spot = min(3, params.probes)
    spot_vals = circuit.eval_many(geom.args_from_matrices(mats[:spot]))
    spot_ok = bool(np.array_equal(spot_vals, got[:spot]))
    report.verification = {
        "probes": params.probes,
        "agreements": agreements,
        "circuit_spot_checks": spot,
        "circuit_spot_passed": spot_ok,
        "passed": agreements == params.probes and spot_ok,
    }
    return agreements == params.probes and spot_ok


# ----------------------------------------------------------------------
# Program stage
# ----------------------------------------------------------------------


def abp_polynomial(program: ABP) -> SparsePolynomial:
    """The polynomial an ABP computes, as an explicit sparse polynomial."""
    field = program.field
    cur = [SparsePolynomial.const(field, 1)]
    for li, layer in enumerate(program.edges):
        nxt = [SparsePolynomial.zero(field) for _ in range(program.layer_sizes[li + 1])]
        for (u, v), label in layer.items():
            nxt[v] = nxt[v] + cur[u] * label.to_polynomial()
        cur = nxt
    return cur[0]


def _prime_power_split(t: int, p: int):
    k = 0
    b = t
    while b % p == 0:
        b //= p
        k += 1
    return k, b


def _collect_outer_points(field: PrimeField, exponent: int, count: int):
    deltas, w_values, seen = [], [], set()
    for delta in range(field.p):
        w = field.pow(delta, exponent)
        if w not in seen:
            seen.add(w)
            deltas.append(delta)
            w_values.append(w)
            if len(deltas) == count:
                return deltas, w_values
    raise FieldTooSmallError(
        f"outer interpolation needs {count} distinct values of "
        f"delta^{exponent} but the field provides only {len(deltas)}",
        required_points=count,
    )


def program_circuit_core(geom, params, program: ABP, stage: str):
    """Compose the extraction with an embedded branching program."""
    field = params.field
    p = field.p
    if program.field.p != p:
        raise ParameterError("program and pipeline use different fields")
    inner, report = extract_canonical_core(geom, params)
    report.stage = stage
    sigma = Partition(report.shape)
    t_pow = sum(1 for part in sigma.parts if part >= geom.min_first_part(params.r))

    y_vars = tuple(sorted(program.variables()))
    z = zvar(0)
    if z in y_vars:
        raise ParameterError("the program may not use the reserved variable z_0")
    ghat = program.homogenize(z)
    e_hom = program.num_edge_layers
    embedded = valiant_embed(ghat, params.r)
    tensor = geom.program_argument_tensor(embedded, y_vars + (z,))

    k_adic, b = _prime_power_split(t_pow, p)
    deltas, w_values = _collect_outer_points(field, e_hom * p**k_adic, b + 1)
    outer_row = build_plan(field, b, 1, points=w_values).row

    L = len(y_vars)
    arg_maps = np.empty((b + 1, geom.arity, L + 1), dtype=np.int64)
    for o, delta in enumerate(deltas):
        arg_maps[o, :, :L] = tensor[:, :L] * delta % p
        arg_maps[o, :, L] = (tensor[:, L + 1] + delta * tensor[:, L]) % p

    inner_provider = inner.provider
    inner_calls = inner.call_count

    def provider(lo: int, hi: int) -> np.ndarray:
        blocks = []
        k = lo
        while k < hi:
            o, q = divmod(k, inner_calls)
            take = min(hi - k, inner_calls - q)
            inner_maps = np.asarray(inner_provider(q, q + take), dtype=np.int64) % p
            stage_map = np.broadcast_to(arg_maps[o], (take,) + arg_maps[o].shape)
            comp = batch_matmul(field, inner_maps[:, :, :-1], stage_map)
            comp[:, :, -1] = (comp[:, :, -1] + inner_maps[:, :, -1]) % p
            blocks.append(comp)
            k += take
        return np.concatenate(blocks, axis=0)

    weights = np.kron(outer_row % p, inner.weights) % p
    constant = inner.constant * int(np.sum(outer_row) % p) % p
    composed = AffineOracleSum(
        field, params.f_spec, y_vars, weights, provider, constant, chunk=params.chunk
    )

    report.outer = {
        "qualifying_blocks": t_pow,
        "p_adic_k": k_adic,
        "binomial_degree": b,
        "edge_layers": e_hom,
        "deltas": deltas,
        "w_values": w_values,
        "program_vertices": program.vertex_count,
        "embedded_size": params.r,
    }

    normalized = _normalize_and_verify(
        field, params, program, composed, k_adic, report
    )
    _maybe_audit(geom, params, program, normalized, k_adic, report)
    report.metrics = normalized.metrics().to_dict()
    return normalized, report


def _normalize_and_verify(field, params, program, composed, k_adic, report):
    p = field.p
    y_vars = composed.inputs
    rng = np.random.default_rng([params.seed, 7])
    point = None
    g_val = 0
    for _ in range(_NORMALIZATION_TRIES):
        trial = {v: int(rng.integers(0, p)) for v in y_vars}
        g_val = program.eval(trial)
        if g_val:
            point = trial
            break
    if point is None:
        raise VerificationError(
            f"normalization point search exhausted after "
            f"{_NORMALIZATION_TRIES} tries: the program evaluates to zero "
            "at every probe"
        )
    raw = composed.eval(point)
    if raw == 0:
        raise VerificationError(
            "the composed circuit vanished at the normalization point where "
            "the program does not"
        )
    target_val = field.pow(g_val, p**k_adic)
    scalar = field.div(target_val, raw)
    normalized = composed.rescale(scalar)
    report.normalization = {
        "point": {var_name(v): c for v, c in point.items()},
        "program_value": g_val,
        "raw_value": raw,
        "scalar": scalar,
    }

    rng = np.random.default_rng([params.seed, 8])
    pts = rng.integers(0, p, size=(params.probes, len(y_vars)))
    got = normalized.eval_many(pts)
    want = np.empty(params.probes, dtype=np.int64)
    for i in range(params.probes):
        g = program.eval({v: int(pts[i, j]) for j, v in enumerate(y_vars)})
        want[i] = field.pow(g, p**k_adic)
    agreements = int(np.count_nonzero(got == want))
    report.verification = dict(report.verification)
    report.verification.update(
        {
            "final_probes": params.probes,
            "final_agreements": agreements,
            "final_passed": agreements == params.probes,
        }
    )
    if agreements != params.probes:
        raise VerificationError(
            f"final circuit disagreed with the target power at "
            f"{params.probes - agreements} of {params.probes} probes"
        )
    return normalized


def _maybe_audit(geom, params, program, circuit, k_adic, report):
    """Full symbolic equality on desk-scale instances."""
    mode = params.symbolic_audit
    if mode == "off":
        return
    f = params.f_poly
    auto_ok = (
        f is not None
        and circuit.call_count <= AUDIT_CALL_CAP
        and geom.arity <= AUDIT_ARITY_CAP
        and f.num_terms() <= AUDIT_TERM_CAP
    )
    if mode != "force" and not auto_ok:
        return
    if f is None:
        raise ParameterError("symbolic audit requires an explicit oracle polynomial")
    circuit_poly = sum_polynomial(circuit, f, geom.var_order)
    target = abp_polynomial(program) ** (params.field.p**k_adic)
    ok = circuit_poly == target
    report.verification["symbolic"] = "equal" if ok else "MISMATCH"
    if not ok:
        raise VerificationError(
            "symbolic audit: the circuit polynomial differs from the target"
        )


def sum_polynomial(circuit: AffineOracleSum, f: SparsePolynomial, f_vars) -> SparsePolynomial:
    """Expand a weighted oracle sum symbolically (desk scale only)."""
    field = circuit.field
    p = field.p
    total = SparsePolynomial.const(field, circuit.constant)
    inputs = circuit.inputs
    maps = np.asarray(circuit.provider(0, circuit.call_count), dtype=np.int64) % p
    for k in range(circuit.call_count):
        mapping = {}
        for slot, var in enumerate(f_vars):
            form = SparsePolynomial.const(field, int(maps[k, slot, -1]))
            for j, in_var in enumerate(inputs):
                coeff = int(maps[k, slot, j])
                if coeff:
                    form = form + SparsePolynomial.variable(
                        field, in_var, coeff=coeff
                    )
            mapping[var] = form
        total = total + f.substitute(mapping).scale(int(circuit.weights[k]))
    return total
