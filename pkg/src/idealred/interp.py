"""Exact coefficient extraction from point evaluations over F_p.

Everything here is exact finite-field linear algebra: interpolation plans
carry one row of the inverse Vandermonde matrix (verified against the unit
vector at build time, always), Newton's divided differences recover full
coefficient vectors, and circuit-level extraction wires a family of
evaluation circuits into one weighted sum.  All routines are vectorized so
that degree bounds in the tens of thousands stay in the seconds range.
"""

import numpy as np

from .circuits import CircuitBuilder, OracleCircuit, merge_top_sums
from .errors import CoefficientNotFound, FieldTooSmallError, ParameterError
from .field import PrimeField


def _as_points(field: PrimeField, D: int, points) -> np.ndarray:
    if points is None:
        if field.p < D + 1:
            raise FieldTooSmallError(
                f"interpolation at degree {D} needs at least {D + 1} field "
                f"elements, but p = {field.p}"
            )
        return np.arange(D + 1, dtype=np.int64)
    pts = np.asarray(points, dtype=np.int64) % field.p
    if pts.shape != (D + 1,):
        raise ParameterError(f"need exactly {D + 1} points for degree {D}")
    if len(set(pts.tolist())) != D + 1:
        raise FieldTooSmallError(
            f"interpolation points must be distinct mod {field.p}"
        )
    return pts


def _master_coeffs(field: PrimeField, pts: np.ndarray) -> np.ndarray:
    """Coefficients of prod_j (t - alpha_j), lowest degree first."""
    p = field.p
    coeffs = np.zeros(len(pts) + 1, dtype=np.int64)
    coeffs[0] = 1
    deg = 0
    for a in pts.tolist():
        shifted = np.zeros_like(coeffs)
        shifted[1 : deg + 2] = coeffs[: deg + 1]
        coeffs = (shifted - a * coeffs) % p
        deg += 1
    return coeffs


def _eval_poly_at(field: PrimeField, coeffs: np.ndarray, pts: np.ndarray):
    """Horner evaluation of one coefficient vector at many points."""
    p = field.p
    acc = np.zeros_like(pts)
    for c in coeffs[::-1].tolist():
        acc = (acc * pts + c) % p
    return acc


def lagrange_row(field: PrimeField, D: int, i: int, points=None) -> np.ndarray:
    """Row of the inverse Vandermonde: weights w_j with
    sum_j w_j * f(alpha_j) = coeff_{t^i}(f) for every f of degree <= D."""
    if not 0 <= i <= D:
        raise ParameterError(f"target index {i} outside 0..{D}")
    p = field.p
    pts = _as_points(field, D, points)
    master = _master_coeffs(field, pts)
    # derivative of the master polynomial, evaluated at every point
    deriv = (master[1:] * np.arange(1, D + 2, dtype=np.int64)) % p
    denom = _eval_poly_at(field, deriv, pts)
    # coefficient i of master/(t - alpha_j), for all j at once, via the
    # backward synthetic-division recurrence q_{k-1} = m_k + alpha_j * q_k
    q = np.full(D + 1, int(master[D + 1]), dtype=np.int64)
    for k in range(D, i, -1):
        q = (int(master[k]) + pts * q) % p
    row = q * field.inv_arr(denom) % p
    _verify_unit_row(field, row, pts, i, D)
    return row


def _verify_unit_row(field, row, pts, i, D):
    p = field.p
    pw = np.ones_like(pts)
    for k in range(D + 1):
        s = int((row * pw % p).sum() % p)
        want = 1 if k == i else 0
        if s != want:
            raise ParameterError(
                f"inverse Vandermonde row failed the unit-row check at {k}"
            )
        pw = pw * pts % p


class InterpolationPlan:
    """Points, degree bound, target index, and the verified extraction row."""

    __slots__ = ("field", "points", "degree", "target", "row")

    def __init__(self, field, points, degree, target, row):
        self.field = field
        self.points = points
        self.degree = degree
        self.target = target
        self.row = row

    def extract(self, values) -> int:
        """Apply the row to evaluations taken at the plan's points."""
        vals = np.asarray(values, dtype=np.int64) % self.field.p
        if vals.shape[-1] != self.degree + 1:
            raise ParameterError("value count must be degree + 1")
        return (vals * self.row % self.field.p).sum(axis=-1) % self.field.p

    def to_jsonable(self):
        return {
            "points": [int(a) for a in self.points],
            "degree": self.degree,
            "target": self.target,
            "row": [str(int(w)) for w in self.row],
        }


def build_plan(field: PrimeField, D: int, i: int, points=None) -> InterpolationPlan:
    pts = _as_points(field, D, points)
    row = lagrange_row(field, D, i, pts)
    return InterpolationPlan(field, pts, D, i, row)


def interpolate_all(field: PrimeField, values, points=None) -> np.ndarray:
    """All coefficients of the degree-<=D polynomial through the values.

    ``values`` has shape (..., D+1) over the points (default 0..D); the
    result matches that shape, lowest coefficient first.  Newton's divided
    differences followed by basis expansion; O(D^2) vector work.
    """
    p = field.p
    arr = np.asarray(values, dtype=np.int64) % p
    shape = arr.shape
    vals = arr.reshape(-1, shape[-1])
    D = shape[-1] - 1
    pts = _as_points(field, D, points)
    # divided-difference pyramid; level k spans j .. j+k
    dd = vals.copy()
    lead = np.empty((vals.shape[0], D + 1), dtype=np.int64)
    lead[:, 0] = dd[:, 0]
    for k in range(1, D + 1):
        denom = (pts[k:] - pts[:-k]) % p
        dd = (dd[:, 1:] - dd[:, :-1]) % p * field.inv_arr(denom) % p
        lead[:, k] = dd[:, 0]
    # expand sum_k lead_k * prod_{i<k}(t - alpha_i) into monomials
    coeffs = np.zeros_like(lead)
    basis = np.zeros(D + 2, dtype=np.int64)
    basis[0] = 1
    for k in range(D + 1):
        coeffs[:, : k + 1] = (
            coeffs[:, : k + 1] + lead[:, k : k + 1] * basis[: k + 1]
        ) % p
        if k < D:
            a = int(pts[k])
            shifted = np.zeros_like(basis)
            shifted[1 : k + 2] = basis[: k + 1]
            basis = (shifted - a * basis) % p
    return (coeffs % p).reshape(shape)


def first_nonzero_coefficient(field: PrimeField, values, points=None):
    """Smallest index whose coefficient is nonzero at some probe.

    ``values`` is (probes, D+1); returns (index, coefficient matrix).
    Raises CoefficientNotFound when every coefficient of every probe is 0.
    """
    coeffs = np.atleast_2d(interpolate_all(field, values, points))
    nonzero = np.flatnonzero((coeffs != 0).any(axis=0))
    if nonzero.size == 0:
        raise CoefficientNotFound(
            "all scanned coefficients vanish at every probe point"
        )
    return int(nonzero[0]), coeffs


def _import_circuit(builder: CircuitBuilder, circuit: OracleCircuit) -> int:
    """Copy a circuit's gates into the builder; return the new output id."""
    mapping = {}
    for gid, gate in enumerate(circuit.gates):
        if gate.kind == "input":
            mapping[gid] = builder.input(gate.var)
        elif gate.kind == "const":
            mapping[gid] = builder.const(gate.value)
        elif gate.kind == "sum":
            mapping[gid] = builder.sum(
                [(mapping[c], w) for c, w in zip(gate.children, gate.weights)]
            )
        elif gate.kind == "prod":
            mapping[gid] = builder.prod([mapping[c] for c in gate.children])
        else:
            mapping[gid] = builder.oracle([mapping[c] for c in gate.children])
    return mapping[circuit.output]


def extract_coefficient_circuit(
    field: PrimeField, family, plan: InterpolationPlan
) -> OracleCircuit:
    """Weighted sum of the family's circuits at the plan's points.

    ``family`` maps a field element alpha to an OracleCircuit evaluating the
    target at that alpha; the output circuit computes the plan's target
    coefficient.  Members whose top gates are sums are folded into the new
    top sum, keeping the depth at the members' depth.
    """
    builder = CircuitBuilder(field)
    outputs = []
    weights = []
    for alpha, w in zip(plan.points.tolist(), plan.row.tolist()):
        member = family(int(alpha))
        if not isinstance(member, OracleCircuit):
            raise ParameterError("family must produce oracle circuits")
        outputs.append((_import_circuit(builder, member), int(w)))
    builder.sum(outputs)
    return merge_top_sums(builder.build())


def scan_first_nonzero(
    field: PrimeField, family, D: int, probe_points: list, spec
):
    """Smallest coefficient index with a nonzero probe value, plus its
    extraction circuit.  ``probe_points`` are input assignments; the family
    is materialized once at the D+1 interpolation points."""
    if not probe_points:
        raise ParameterError("need at least one probe point")
    pts = _as_points(field, D, None)
    members = [family(int(a)) for a in pts.tolist()]
    vals = np.array(
        [[m.eval(pt, spec) for m in members] for pt in probe_points],
        dtype=np.int64,
    )
    index, _ = first_nonzero_coefficient(field, vals)
    plan = build_plan(field, D, index)
    circuit = extract_coefficient_circuit(field, lambda a: members[a], plan)
    return index, circuit
