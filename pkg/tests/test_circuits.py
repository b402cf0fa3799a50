import random

import numpy as np
import pytest

from idealred.circuits import (
    AffineOracleSum,
    CircuitBuilder,
    OracleCircuit,
    OracleSpec,
    compose_linear_preimage,
    merge_top_sums,
    spec_from_polynomial,
)
from idealred.errors import DeskCapError, MissingAssignmentError, ParameterError
from idealred.field import PrimeField
from idealred.matrices import PolyMatrix, build_M_det, build_N_det
from idealred.poly import SparsePolynomial, mono, xvar

F = PrimeField(2147483647)


def det2_poly():
    x = lambda i, j: SparsePolynomial.variable(F, xvar(i, j))
    return x(1, 1) * x(2, 2) - x(1, 2) * x(2, 1)


DET2_ORDER = (xvar(1, 1), xvar(1, 2), xvar(2, 1), xvar(2, 2))


def test_single_input_metrics_and_eval():
    b = CircuitBuilder(F)
    b.input(("y", 1))
    c = b.build()
    m = c.metrics()
    assert (m.size, m.depth, m.top_gate_kind, m.oracle_call_count) == (
        1,
        0,
        "input",
        0,
    )
    assert c.eval({("y", 1): 5}) == 5
    with pytest.raises(MissingAssignmentError):
        c.eval({})


def test_weighted_sum_small_prime_example():
    F7 = PrimeField(7)
    b = CircuitBuilder(F7)
    x, y = b.input(("y", 1)), b.input(("y", 2))
    b.sum([(x, 2), (y, 3)])
    c = b.build()
    assert c.eval({("y", 1): 1, ("y", 2): 1}) == 5
    assert c.depth() == 1
    # 3 gates + 2 wires
    assert c.metrics().size == 5


def test_oracle_gate_det2():
    spec = spec_from_polynomial(det2_poly(), DET2_ORDER)
    b = CircuitBuilder(F)
    consts = [b.const(v) for v in (1, 2, 3, 4)]
    b.oracle(consts)
    c = b.build()
    assert c.eval({}, spec) == F.p - 2
    with pytest.raises(ParameterError):
        c.eval({})  # oracle gate but no oracle supplied


def test_oracle_arity_mismatch():
    spec = spec_from_polynomial(det2_poly(), DET2_ORDER)
    b = CircuitBuilder(F)
    b.oracle([b.const(1), b.const(2)])
    c = b.build()
    with pytest.raises(ParameterError):
        c.eval({}, spec)


def test_validation_rejects_bad_structure():
    from idealred.circuits import Gate

    with pytest.raises(ParameterError):
        OracleCircuit(F, [Gate("sum", children=[1], weights=[1])], 0)
    with pytest.raises(ParameterError):
        OracleCircuit(F, [Gate("input", var=("y", 1))], 3)
    with pytest.raises(ParameterError):
        OracleSpec(0, 1, lambda a: 0)
    with pytest.raises(ParameterError):
        OracleSpec(4, 0, lambda a: 0)


def random_circuit(rng, n_gates=30):
    b = CircuitBuilder(F)
    ids = [b.input(("y", i)) for i in range(1, 4)]
    ids.append(b.const(rng.randrange(F.p)))
    while len(b._gates) < n_gates:
        kind = rng.choice(["sum", "prod", "sum"])
        k = rng.randrange(1, 4)
        children = [rng.choice(ids) for _ in range(k)]
        if kind == "sum":
            ids.append(b.sum([(c, rng.randrange(1, F.p)) for c in children]))
        else:
            ids.append(b.prod(children))
    return b.build()


def recursive_eval(c, gid, point, memo):
    if gid in memo:
        return memo[gid]
    g = c.gates[gid]
    if g.kind == "input":
        v = point[g.var] % F.p
    elif g.kind == "const":
        v = g.value
    elif g.kind == "sum":
        v = sum(w * recursive_eval(c, ch, point, memo) for ch, w in zip(g.children, g.weights)) % F.p
    else:
        v = 1
        for ch in g.children:
            v = v * recursive_eval(c, ch, point, memo) % F.p
    memo[gid] = v
    return v


def test_eval_matches_recursive_on_random_circuits():
    rng = random.Random(7)
    for _ in range(20):
        c = random_circuit(rng, rng.randrange(8, 50))
        point = {("y", i): rng.randrange(F.p) for i in range(1, 4)}
        assert c.eval(point) == recursive_eval(c, c.output, point, {})


def test_json_round_trip_preserves_metrics():
    rng = random.Random(11)
    for _ in range(10):
        c = random_circuit(rng, 25)
        doc = c.to_jsonable()
        c2 = OracleCircuit.from_jsonable(doc)
        assert c2.to_jsonable() == doc
        assert c.metrics().to_dict() == c2.metrics().to_dict()
        point = {("y", i): rng.randrange(F.p) for i in range(1, 4)}
        assert c.eval(point) == c2.eval(point)


def test_merge_top_sums_preserves_value_and_drops_depth():
    rng = random.Random(13)
    for _ in range(10):
        b = CircuitBuilder(F)
        xs = [b.input(("y", i)) for i in range(1, 5)]
        inner = [
            b.sum([(x, rng.randrange(1, F.p)) for x in xs])
            for _ in range(3)
        ]
        b.sum([(g, rng.randrange(1, F.p)) for g in inner] + [(xs[0], 5)])
        c = b.build()
        merged = merge_top_sums(c)
        assert merged.depth() == c.depth() - 1
        assert not merged.lint()
        for _ in range(5):
            point = {("y", i): rng.randrange(F.p) for i in range(1, 5)}
            assert merged.eval(point) == c.eval(point)


def test_lint_flags_products_and_dead_gates():
    b = CircuitBuilder(F)
    x = b.input(("y", 1))
    b.prod([x, x])  # dead: not on the output path
    out = b.sum([(x, 1)])
    c = b.build(out)
    warnings = c.lint()
    assert any("product" in w for w in warnings)
    assert any("unreachable" in w for w in warnings)


def test_compose_linear_preimage_identity_and_zero():
    spec = spec_from_polynomial(det2_poly(), DET2_ORDER)
    ident = compose_linear_preimage(
        F, spec, [(0, {v: 1}) for v in DET2_ORDER]
    )
    assert ident.depth() == 2
    assert ident.metrics().top_gate_kind == "oracle"
    rng = random.Random(17)
    for _ in range(10):
        point = {v: rng.randrange(F.p) for v in DET2_ORDER}
        assert ident.eval(point, spec) == det2_poly().eval(point)
    zero = compose_linear_preimage(F, spec, [(0, {})] * 4)
    assert zero.eval({}, spec) == 0  # det2 at the zero matrix


def test_compose_linear_preimage_matrix_map():
    # X -> M X N for fixed lambda/xi values matches poly-level substitution
    rng = random.Random(19)
    spec = spec_from_polynomial(det2_poly(), DET2_ORDER)
    M = build_M_det(F, 2).expanded()
    N = build_N_det(F, 2).expanded()
    lam_val = rng.randrange(F.p)
    xi_val = rng.randrange(F.p)
    vals = {("lam", 1, 2): lam_val, ("xi", 1, 2): xi_val}
    Mn = M.substitute(vals)
    Nn = N.substitute(vals)
    X = PolyMatrix(
        F,
        [
            [SparsePolynomial.variable(F, xvar(i, j)) for j in (1, 2)]
            for i in (1, 2)
        ],
    )
    moved = Mn @ X @ Nn
    forms = []
    for i in (1, 2):
        for j in (1, 2):
            e = moved.entry(i, j)
            forms.append(
                (
                    e.constant_term(),
                    {v: e.coeff_of(v, 1).constant_term() for v in e.variables()},
                )
            )
    circ = compose_linear_preimage(F, spec, forms)
    g = det2_poly().substitute(
        {
            xvar(i, j): moved.entry(i, j)
            for i in (1, 2)
            for j in (1, 2)
        }
    )
    for _ in range(10):
        point = {v: rng.randrange(F.p) for v in DET2_ORDER}
        assert circ.eval(point, spec) == g.eval(point)


def test_affine_oracle_sum_matches_explicit():
    rng = random.Random(23)
    spec = spec_from_polynomial(det2_poly(), DET2_ORDER)
    inputs = (("y", 1), ("y", 2))
    calls = 9
    maps = np.array(
        [
            [[rng.randrange(F.p) for _ in range(3)] for _ in range(4)]
            for _ in range(calls)
        ],
        dtype=np.int64,
    )
    weights = [rng.randrange(1, F.p) for _ in range(calls)]
    compact = AffineOracleSum.from_maps(
        F, spec, inputs, weights, maps, constant=42
    )
    explicit = compact.to_oracle_circuit()
    assert explicit.depth() == 3
    assert explicit.gates[explicit.output].kind == "sum"
    pts = np.array(
        [[rng.randrange(F.p) for _ in range(2)] for _ in range(7)],
        dtype=np.int64,
    )
    got = compact.eval_many(pts)
    for row, val in zip(pts, got):
        point = dict(zip(inputs, (int(row[0]), int(row[1]))))
        assert explicit.eval(point, spec) == int(val)
        assert compact.eval(point) == int(val)
    m_c = compact.metrics()
    m_e = explicit.metrics()
    assert m_c.depth == m_e.depth == 3
    assert m_c.oracle_call_count == m_e.oracle_call_count == calls
    assert m_c.size == m_e.size
    assert m_c.top_gate_kind == "sum"


def test_affine_oracle_sum_chunked_eval_consistent():
    rng = random.Random(29)
    spec = spec_from_polynomial(det2_poly(), DET2_ORDER)
    calls = 50
    maps = np.array(
        [
            [[rng.randrange(F.p) for _ in range(2)] for _ in range(4)]
            for _ in range(calls)
        ],
        dtype=np.int64,
    )
    weights = [rng.randrange(F.p) for _ in range(calls)]
    big = AffineOracleSum.from_maps(F, spec, (("y", 1),), weights, maps)
    small = AffineOracleSum(
        F, spec, (("y", 1),), weights, lambda lo, hi: maps[lo:hi], chunk=7
    )
    pts = np.array([[rng.randrange(F.p)] for _ in range(5)], dtype=np.int64)
    assert np.array_equal(big.eval_many(pts), small.eval_many(pts))
    scaled = big.rescale(1234567)
    assert np.array_equal(
        scaled.eval_many(pts), big.eval_many(pts) * 1234567 % F.p
    )


def test_affine_oracle_sum_gate_cap():
    spec = spec_from_polynomial(det2_poly(), DET2_ORDER)
    maps = np.zeros((100, 4, 2), dtype=np.int64)
    big = AffineOracleSum.from_maps(F, spec, (("y", 1),), [1] * 100, maps)
    with pytest.raises(DeskCapError):
        big.to_oracle_circuit(gate_cap=50)


def test_spec_batch_matches_scalar():
    f = det2_poly()
    spec = spec_from_polynomial(f, DET2_ORDER)
    rng = random.Random(31)
    arr = np.array(
        [[rng.randrange(F.p) for _ in range(4)] for _ in range(40)],
        dtype=np.int64,
    )
    batched = spec.call_batch(arr)
    for row, val in zip(arr, batched):
        assert spec.call([int(v) for v in row]) == int(val)


def test_affine_sum_constant_rows_shortcut():
    # rows whose maps ignore the input must agree with the dense path
    field = PrimeField(101)
    spec = OracleSpec(
        2,
        1,
        lambda args: (args[0] + args[1]) % field.p,
        batch_evaluator=lambda arr: (arr[:, 0] + arr[:, 1]) % field.p,
    )
    inputs = (("u", 1), ("u", 2))
    maps = np.array(
        [
            [[1, 0, 3], [0, 2, 0]],
            [[0, 0, 5], [0, 0, 7]],
            [[0, 0, 0], [0, 0, 11]],
            [[4, 5, 6], [7, 8, 9]],
        ],
        dtype=np.int64,
    )
    weights = (1, 2, 3, 4)
    circ = AffineOracleSum.from_maps(field, spec, inputs, weights, maps)
    pts = np.array([[9, 13], [0, 0], [55, 1]], dtype=np.int64)
    got = circ.eval_many(pts)
    dense = []
    for pt in pts:
        total = 0
        for w, mp in zip(weights, maps):
            args = (mp[:, :-1] @ pt + mp[:, -1]) % field.p
            total = (total + w * int((args[0] + args[1]) % field.p)) % field.p
        dense.append(total)
    assert got.tolist() == dense
    single = circ.eval_many(pts[:1])
    assert single.tolist() == dense[:1]
