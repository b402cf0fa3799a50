import random

import numpy as np
import pytest

from idealred.bidet import (
    BideterminantRef,
    BipfaffianRef,
    bideterminant_multidegree,
    bipfaffian_multidegree,
    eij_expansion_check,
    eval_bideterminant,
    eval_bideterminant_batch,
    eval_bipfaffian,
    eval_bipfaffian_batch,
    expand_bideterminant,
    expand_bipfaffian,
    substitute_row_signed,
)
from idealred.errors import ParameterError
from idealred.field import PrimeField
from idealred.poly import MultiDegree, SparsePolynomial, mono, multidegree, xvar
from idealred.tableau import (
    Bitableau,
    Partition,
    Tableau,
    canonical,
    enumerate_css,
    enumerate_partitions,
)

F = PrimeField(2147483647)


def bd(s_rows, t_rows, n, m):
    return BideterminantRef(Bitableau(Tableau(s_rows), Tableau(t_rows)), n, m)


def random_skew(rng, dim):
    X = [[0] * dim for _ in range(dim)]
    for i in range(dim):
        for j in range(i + 1, dim):
            v = rng.randrange(F.p)
            X[i][j] = v
            X[j][i] = (-v) % F.p
    return np.array(X, dtype=np.int64)


def test_single_row_minor():
    ref = bd([(1, 2)], [(1, 2)], 2, 2)
    want = SparsePolynomial(
        F,
        {
            mono([(xvar(1, 1), 1), (xvar(2, 2), 1)]): 1,
            mono([(xvar(1, 2), 1), (xvar(2, 1), 1)]): F.p - 1,
        },
    )
    assert expand_bideterminant(F, ref) == want


def test_single_column_bitableau_is_monomial():
    ref = bd([(1,), (2,), (2,)], [(3,), (1,), (2,)], 2, 3)
    want = SparsePolynomial(
        F,
        {
            mono(
                [(xvar(1, 3), 1), (xvar(2, 1), 1), (xvar(2, 2), 1)]
            ): 1
        },
    )
    assert expand_bideterminant(F, ref) == want


def test_frozen_shape_21_evaluation():
    # S=((1,2),(1)), T=((1,2),(2)) at X=[[1,2],[3,4]]: det * x_{1,2} = -2 * 2
    ref = bd([(1, 2), (1,)], [(1, 2), (2,)], 2, 2)
    point = [[1, 2], [3, 4]]
    assert eval_bideterminant(F, ref, point) == (-4) % F.p
    assert expand_bideterminant(F, ref).eval(
        {xvar(i, j): point[i - 1][j - 1] for i in (1, 2) for j in (1, 2)}
    ) == (-4) % F.p


def test_bideterminant_homogeneous_degree():
    ref = bd([(1, 2), (1, 3), (2,)], [(2, 3), (1, 2), (1,)], 3, 3)
    f = expand_bideterminant(F, ref)
    assert f.degree() == ref.shape.size
    assert all(sum(e for _, e in m) == 5 for m in f.terms)


def test_bipfaffian_expansions():
    assert expand_bipfaffian(F, BipfaffianRef(Tableau([(1, 2)]), 4)) == (
        SparsePolynomial.variable(F, xvar(1, 2))
    )
    got = expand_bipfaffian(F, BipfaffianRef(Tableau([(1, 2, 3, 4)]), 4))
    want = SparsePolynomial(
        F,
        {
            mono([(xvar(1, 2), 1), (xvar(3, 4), 1)]): 1,
            mono([(xvar(1, 3), 1), (xvar(2, 4), 1)]): F.p - 1,
            mono([(xvar(1, 4), 1), (xvar(2, 3), 1)]): 1,
        },
    )
    assert got == want
    # column of pairs gives a monomial
    col = expand_bipfaffian(F, BipfaffianRef(Tableau([(1, 2), (3, 4), (1, 4)]), 4))
    assert col == SparsePolynomial(
        F,
        {mono([(xvar(1, 2), 1), (xvar(3, 4), 1), (xvar(1, 4), 1)]): 1},
    )
    with pytest.raises(ParameterError):
        BipfaffianRef(Tableau([(1, 2, 3)]), 4)


def test_bipfaffian_degree_is_half_size():
    ref = BipfaffianRef(Tableau([(1, 2, 3, 4), (1, 2)]), 4)
    f = expand_bipfaffian(F, ref)
    assert f.degree() == ref.shape.size // 2


def test_identity_point_and_repeated_rows():
    ref = bd([(1, 2, 3)], [(1, 2, 3)], 3, 3)
    assert eval_bideterminant(F, ref, np.eye(3, dtype=np.int64)) == 1
    # equal point rows kill a minor that uses both
    pt = np.array([[1, 2, 0], [1, 2, 0], [0, 0, 1]], dtype=np.int64)
    ref2 = bd([(1, 2)], [(1, 2)], 3, 3)
    assert eval_bideterminant(F, ref2, pt) == 0


def test_numeric_matches_symbolic_on_random_points():
    rng = random.Random(31)
    refs = [
        bd([(1, 2), (2,)], [(1, 3), (1,)], 3, 3),
        bd([(1, 2, 3)], [(1, 2, 3)], 3, 3),
        bd([(2, 3), (1, 3)], [(1, 2), (2, 3)], 3, 3),
    ]
    for ref in refs:
        f = expand_bideterminant(F, ref)
        pts = []
        for _ in range(50):
            pts.append([[rng.randrange(F.p) for _ in range(3)] for _ in range(3)])
        batch = eval_bideterminant_batch(F, ref, np.array(pts, dtype=np.int64))
        for k, pt in enumerate(pts):
            want = f.eval({xvar(i, j): pt[i - 1][j - 1] for i in (1, 2, 3) for j in (1, 2, 3)})
            assert eval_bideterminant(F, ref, pt) == want
            assert int(batch[k]) == want


def test_pfaffian_numeric_matches_symbolic():
    rng = random.Random(37)
    ref = BipfaffianRef(Tableau([(1, 2, 3, 4), (2, 3)]), 4)
    f = expand_bipfaffian(F, ref)
    pts = [random_skew(rng, 4) for _ in range(25)]
    batch = eval_bipfaffian_batch(F, ref, np.stack(pts))
    for k, pt in enumerate(pts):
        assign = {xvar(i, j): int(pt[i - 1, j - 1]) for i in range(1, 5) for j in range(i + 1, 5)}
        want = f.eval(assign)
        assert eval_bipfaffian(F, ref, pt) == want
        assert int(batch[k]) == want
    with pytest.raises(ParameterError):
        eval_bipfaffian(F, ref, np.eye(4, dtype=np.int64))


def test_multidegree_counts_entries():
    s = Partition((2, 1))
    ref = BideterminantRef(
        Bitableau(canonical(s, 2), canonical(s, 2)), 2, 2
    )
    assert bideterminant_multidegree(ref) == MultiDegree((2, 1), (2, 1))

    pref = BipfaffianRef(Tableau([(1, 2, 3, 4), (1, 2)]), 4)
    assert bipfaffian_multidegree(pref) == MultiDegree((2, 2, 1, 1), None)


def test_canonical_multidegrees_distinct():
    # distinct shapes give distinct canonical multidegrees
    n = 5
    seen = {}
    for d in range(1, 6):
        for sigma in enumerate_partitions(d, n):
            ref = BideterminantRef(
                Bitableau(canonical(sigma, n), canonical(sigma, n)), n, n
            )
            md = bideterminant_multidegree(ref)
            assert md not in seen, f"{sigma} collides with {seen[md]}"
            seen[md] = sigma


def test_multidegree_agrees_with_expansion():
    rng = random.Random(43)
    shapes = [Partition((2, 1)), Partition((2, 2)), Partition((1, 1))]
    for s in shapes:
        tabs = list(enumerate_css(s, 3))
        for _ in range(5):
            S = rng.choice(tabs)
            T = rng.choice(tabs)
            ref = BideterminantRef(Bitableau(S, T), 3, 3)
            md = bideterminant_multidegree(ref)
            f = expand_bideterminant(F, ref)
            assert multidegree(f, "det", 3, 3) == md


def test_substitute_row_signed():
    assert substitute_row_signed((1, 3), 1, 2) == ((2, 3), 1)
    assert substitute_row_signed((1, 3), 1, 4) == ((3, 4), -1)
    assert substitute_row_signed((1, 2), 1, 2) is None
    assert substitute_row_signed((2, 3), 1, 4) is None
    assert substitute_row_signed((2, 5, 7), 5, 9) == ((2, 7, 9), -1)


def test_eij_expansion_left_no_i_rows():
    rng = random.Random(3)
    # S lacks value 3 entirely: the expansion degenerates to the h=0 branch
    ref = bd([(1, 2)], [(1, 2)], 3, 3)
    for j in (1, 2):
        pt = [[rng.randrange(F.p) for _ in range(3)] for _ in range(3)]
        lam_value = rng.randrange(F.p)
        E = np.eye(3, dtype=np.int64)
        E[2, j - 1] = lam_value
        moved = (E @ np.array(pt, dtype=np.int64)) % F.p
        assert eval_bideterminant(F, ref, moved) == eval_bideterminant(F, ref, pt)


def test_eij_expansion_check_random_refs():
    rng = random.Random(53)
    refs = [
        bd([(1, 2), (1,)], [(1, 2), (2,)], 3, 3),
        bd([(1, 3), (2,)], [(2, 3), (1,)], 3, 3),
        bd([(1, 2, 3), (1, 2)], [(1, 2, 3), (1, 3)], 3, 3),
    ]
    for ref in refs:
        for i, j in [(1, 2), (1, 3), (2, 3)]:
            for side in ("left", "right"):
                for _ in range(5):
                    pt = [[rng.randrange(F.p) for _ in range(3)] for _ in range(3)]
                    ok = eij_expansion_check(
                        F, ref, i, j, side, rng.randrange(F.p), pt
                    )
                    assert ok, f"{ref} ({i},{j}) {side}"


def test_eij_expansion_check_conjugate():
    rng = random.Random(59)
    refs = [
        BipfaffianRef(Tableau([(1, 2, 3, 4)]), 4),
        BipfaffianRef(Tableau([(1, 2), (1, 4)]), 4),
        BipfaffianRef(Tableau([(2, 3)]), 4),
    ]
    for ref in refs:
        for i, j in [(1, 2), (1, 3), (2, 4), (3, 4)]:
            for _ in range(5):
                pt = random_skew(rng, 4)
                ok = eij_expansion_check(F, ref, i, j, "conjugate", rng.randrange(F.p), pt)
                assert ok, f"{ref} ({i},{j})"


def test_eij_single_row_with_both_values_unchanged():
    rng = random.Random(61)
    ref = bd([(1, 2)], [(1, 2)], 2, 2)
    pt = [[rng.randrange(F.p) for _ in range(2)] for _ in range(2)]
    lam_value = rng.randrange(F.p)
    E = np.eye(2, dtype=np.int64)
    E[0, 1] = lam_value
    moved = (E @ np.array(pt, dtype=np.int64)) % F.p
    assert eval_bideterminant(F, ref, moved) == eval_bideterminant(F, ref, pt)
