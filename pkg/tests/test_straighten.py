import random

import pytest

from idealred.bidet import (
    BideterminantRef,
    BipfaffianRef,
    expand_bideterminant,
    expand_bipfaffian,
)
from idealred.errors import DeskCapError, ParameterError
from idealred.field import PrimeField
from idealred.poly import SparsePolynomial, mono, xvar
from idealred.straighten import (
    StandardExpansion,
    certify_membership,
    straighten,
    sub_chain_signed,
    symbolic_pipeline_check,
)
from idealred.tableau import (
    Bitableau,
    Partition,
    Tableau,
    anti_canonical,
    enumerate_css,
    enumerate_partitions,
)

F = PrimeField(2147483647)


def minor_poly(rows, cols):
    ref = BideterminantRef(Bitableau(Tableau([rows]), Tableau([cols])), 3, 3)
    return expand_bideterminant(F, ref)


def xm(pairs, c=1):
    return SparsePolynomial(F, {mono([(xvar(i, j), 1) for i, j in pairs]): c})


def test_standard_ref_straightens_to_itself():
    ref = BideterminantRef(
        Bitableau(Tableau([(1, 2), (1,)]), Tableau([(1, 3), (2,)])), 3, 3
    )
    f = expand_bideterminant(F, ref)
    exp = straighten(F, f, "det", 3, 3)
    assert len(exp) == 1
    assert exp.terms[0] == (ref, 1)


def test_frozen_x12_x21_expansion():
    # x12*x21 = x11*x22 - det over the 2x2 ambient
    f = xm([(1, 2), (2, 1)])
    exp = straighten(F, f, "det", 2, 2)
    got = {ref: c for ref, c in exp.terms}
    col_ref = BideterminantRef(
        Bitableau(Tableau([(1,), (2,)]), Tableau([(1,), (2,)])), 2, 2
    )
    det_ref = BideterminantRef(
        Bitableau(Tableau([(1, 2)]), Tableau([(1, 2)])), 2, 2
    )
    assert got == {col_ref: 1, det_ref: F.p - 1}
    assert exp.reexpand(F) == f


def test_pfaff_monomial_straightens():
    f = xm([(1, 2), (3, 4)])
    exp = straighten(F, f, "pfaff", 4)
    got = {ref: c for ref, c in exp.terms}
    col_ref = BipfaffianRef(Tableau([(1, 2), (3, 4)]), 4)
    assert got.get(col_ref) == 1
    assert exp.reexpand(F) == f


def test_reexpansion_reproduces_random_combinations():
    rng = random.Random(71)
    refs = []
    for sigma in [Partition((2, 1)), Partition((1, 1)), Partition((2,))]:
        tabs = list(enumerate_css(sigma, 3))
        for _ in range(3):
            refs.append(
                BideterminantRef(
                    Bitableau(rng.choice(tabs), rng.choice(tabs)), 3, 3
                )
            )
    f = SparsePolynomial.zero(F)
    want = {}
    for ref in refs:
        c = rng.randrange(1, F.p)
        want[ref] = (want.get(ref, 0) + c) % F.p
        f = f + expand_bideterminant(F, ref).scale(c)
    exp = straighten(F, f, "det", 3, 3)
    got = {ref: c for ref, c in exp.terms}
    assert got == {ref: c for ref, c in want.items() if c}
    assert exp.reexpand(F) == f


def test_straighten_zero_and_caps():
    assert len(straighten(F, SparsePolynomial.zero(F), "det", 2, 2)) == 0
    too_big = SparsePolynomial(F, {mono([(xvar(1, 1), 7)]): 1})
    with pytest.raises(DeskCapError):
        straighten(F, too_big, "det", 2, 2)
    with pytest.raises(DeskCapError):
        straighten(F, xm([(1, 1)]), "det", 5, 5)
    with pytest.raises(ParameterError):
        straighten(F, SparsePolynomial.variable(F, ("y", 1)), "det", 2, 2)


def test_straighten_shape_dominance():
    # straightening a single bideterminant only produces shapes >=lex its own
    from idealred.tableau import lex_compare

    rng = random.Random(83)
    for sigma in [Partition((2, 1)), Partition((2,)), Partition((1, 1))]:
        tabs = list(enumerate_css(sigma, 3))
        for _ in range(4):
            ref = BideterminantRef(
                Bitableau(rng.choice(tabs), rng.choice(tabs)), 3, 3
            )
            exp = straighten(F, expand_bideterminant(F, ref), "det", 3, 3)
            for shape in exp.shapes():
                assert lex_compare(shape, sigma) >= 0


def test_membership_certificates():
    # a generator: the full 2x2 minor
    f = minor_poly((1, 2), (1, 2))
    ok, shapes = certify_membership(F, f, 2, "det", 3, 3)
    assert ok and all(s.parts[0] == 2 for s in shapes)

    # x11 alone is not in the ideal of 2x2 minors
    ok, shapes = certify_membership(F, xm([(1, 1)]), 2, "det", 3, 3)
    assert not ok and shapes == [Partition((1,))]

    # random combination of 2x2 minors stays a member
    rng = random.Random(89)
    for _ in range(5):
        f = SparsePolynomial.zero(F)
        for _ in range(3):
            rows = tuple(sorted(rng.sample([1, 2, 3], 2)))
            cols = tuple(sorted(rng.sample([1, 2, 3], 2)))
            scale = rng.randrange(1, F.p)
            extra = rng.choice([None, (rng.randrange(1, 4), rng.randrange(1, 4))])
            piece = minor_poly(rows, cols).scale(scale)
            if extra:
                piece = piece * SparsePolynomial.variable(F, xvar(*extra))
            f = f + piece
        if f.is_zero():
            continue
        ok, _ = certify_membership(F, f, 2, "det", 3, 3)
        assert ok

    # adding x11 flips the verdict
    f = minor_poly((1, 2), (1, 2)) + xm([(1, 1)])
    ok, _ = certify_membership(F, f, 2, "det", 3, 3)
    assert not ok


def test_membership_pfaffian():
    f = expand_bipfaffian(F, BipfaffianRef(Tableau([(1, 2, 3, 4)]), 4))
    ok, shapes = certify_membership(F, f, 2, "pfaff", 4)
    assert ok and all(s.parts[0] >= 4 for s in shapes)
    ok, _ = certify_membership(F, xm([(1, 2)]), 2, "pfaff", 4)
    assert not ok


def test_uniqueness_under_reordering():
    f = minor_poly((1, 2), (1, 2)) * xm([(1, 1)]) + minor_poly((1, 3), (2, 3))
    a = straighten(F, f, "det", 3, 3)
    b = straighten(F, f, "det", 3, 3)
    assert a.terms == b.terms
    assert a.reexpand(F) == f


def test_sub_chain_signed_consistency():
    from idealred.tableau import sub_chain

    for sigma in [Partition((2, 1)), Partition((2, 2)), Partition((1, 1))]:
        for tab in enumerate_css(sigma, 3):
            term_a, counts_a = sub_chain(tab, 3)
            term_b, counts_b, sign = sub_chain_signed(tab, 3)
            assert term_a == term_b == anti_canonical(sigma, 3)
            assert counts_a == counts_b
            assert sign in (1, -1)


def test_stage_mx_on_single_minor():
    f = minor_poly((1, 2), (1, 2))
    report = symbolic_pipeline_check(F, f, "det", "mx", 3, 3, r=2)
    assert report["ok"]
    assert report["leading_terms"] >= 1


def test_stage_mxn_and_reformulated():
    f = minor_poly((1, 2), (1, 2)) + minor_poly((2, 3), (1, 3)).scale(5)
    for stage in ("mxn", "reformulated"):
        report = symbolic_pipeline_check(F, f, "det", stage, 3, 3, r=2)
        assert report["ok"]


def test_stage_key_frozen_dmin():
    # a 2x2 minor of the 3x3 ambient isolates at v-degree 2*|K_(2)| = 6
    f = minor_poly((1, 2), (1, 2))
    report = symbolic_pipeline_check(F, f, "det", "key", 3, 3, r=2)
    assert report["ok"]
    assert report["d_min"] == 6
    assert (2,) in report["shapes"]


def test_stage_reformulated_with_multiplier():
    # x12 * 2x2 minor keeps every shape's first part >= 2
    f = xm([(1, 2)]) * minor_poly((1, 2), (1, 2))
    report = symbolic_pipeline_check(F, f, "det", "reformulated", 3, 3, r=2)
    assert report["ok"]


def test_stage_checks_exhaustive_small_battery():
    # every standard bideterminant of size <= 2 on 3x3, all det stages
    for d in (1, 2):
        for sigma in enumerate_partitions(d, 3):
            for S in enumerate_css(sigma, 3):
                for T in enumerate_css(sigma, 3):
                    ref = BideterminantRef(Bitableau(S, T), 3, 3)
                    f = expand_bideterminant(F, ref)
                    for stage in ("mx", "mxn", "reformulated", "key"):
                        report = symbolic_pipeline_check(
                            F, f, "det", stage, 3, 3, r=sigma.parts[0]
                        )
                        assert report["ok"], (sigma, S, T, stage)


def test_stage_checks_shape_21_subsample():
    rng = random.Random(97)
    sigma = Partition((2, 1))
    tabs = list(enumerate_css(sigma, 3))
    for _ in range(6):
        ref = BideterminantRef(Bitableau(rng.choice(tabs), rng.choice(tabs)), 3, 3)
        f = expand_bideterminant(F, ref)
        for stage in ("mx", "mxn", "reformulated", "key"):
            report = symbolic_pipeline_check(F, f, "det", stage, 3, 3, r=2)
            assert report["ok"]


def test_stage_checks_random_members():
    rng = random.Random(101)
    for _ in range(20):
        f = SparsePolynomial.zero(F)
        for _ in range(rng.randrange(1, 3)):
            rows = tuple(sorted(rng.sample([1, 2, 3], 2)))
            cols = tuple(sorted(rng.sample([1, 2, 3], 2)))
            piece = minor_poly(rows, cols).scale(rng.randrange(1, F.p))
            if rng.random() < 0.5:
                piece = piece * SparsePolynomial.variable(
                    F, xvar(rng.randrange(1, 4), rng.randrange(1, 4))
                )
            f = f + piece
        if f.is_zero():
            continue
        stage = rng.choice(["mx", "mxn", "reformulated", "key"])
        report = symbolic_pipeline_check(F, f, "det", stage, 3, 3, r=2)
        assert report["ok"]


def test_stage_checks_pfaffian():
    f = expand_bipfaffian(F, BipfaffianRef(Tableau([(1, 2, 3, 4)]), 4))
    for stage in ("conj", "reformulated", "key"):
        report = symbolic_pipeline_check(F, f, "pfaff", stage, 4, r=2)
        assert report["ok"], stage
    # frozen: d_min = |K_(4)| = 1+2+3+4 = 10
    report = symbolic_pipeline_check(F, f, "pfaff", "key", 4, r=2)
    assert report["d_min"] == 10

    g = xm([(1, 2), (3, 4)]) - xm([(1, 3), (2, 4)])
    for stage in ("conj", "reformulated", "key"):
        report = symbolic_pipeline_check(F, g, "pfaff", stage, 4, r=1)
        assert report["ok"], stage


def test_stage_check_caps():
    with pytest.raises(DeskCapError):
        symbolic_pipeline_check(F, xm([(1, 1)]), "det", "mx", 4, 4)
    big = SparsePolynomial(F, {mono([(xvar(1, 1), 4)]): 1})
    with pytest.raises(DeskCapError):
        symbolic_pipeline_check(F, big, "det", "mx", 3, 3)


def test_expansion_jsonable():
    f = minor_poly((1, 2), (1, 2))
    exp = straighten(F, f, "det", 3, 3)
    doc = exp.to_jsonable()
    assert doc[0]["S"] == [[1, 2]]
    assert doc[0]["coef"] == "1"
