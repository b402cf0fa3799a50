import itertools

import pytest

from idealred.errors import ParameterError
from idealred.tableau import (
    Bitableau,
    Partition,
    Tableau,
    anti_canonical,
    bitableau_from_dict,
    bitableau_to_dict,
    canonical,
    canonical_weight,
    enumerate_css,
    enumerate_partitions,
    is_css,
    lex_compare,
    pair_order,
    sub,
    sub_chain,
    sub_hypothesis_ok,
)


def test_partition_validation():
    assert Partition((3, 2, 2)).size == 7
    with pytest.raises(ParameterError):
        Partition((2, 3))
    with pytest.raises(ParameterError):
        Partition((2, 0))
    assert Partition(()).size == 0


def test_partition_conjugate_involution():
    for parts in [(), (1,), (3, 1), (4, 4, 2), (5, 4, 2, 1)]:
        s = Partition(parts)
        assert s.conjugate().conjugate() == s
    assert Partition((3, 1)).conjugate() == Partition((2, 1, 1))


def test_lex_compare_with_prefix_rule():
    assert lex_compare(Partition((5, 4, 2, 1)), Partition((5, 4, 3, 2, 1, 1))) == -1
    assert lex_compare(Partition((5, 4, 2, 1)), Partition((5, 4, 2))) == -1
    assert lex_compare(Partition((3, 1)), Partition((3, 1))) == 0
    assert lex_compare(Partition((4,)), Partition((3, 3))) == 1
    # total order sanity on a small universe
    univ = [Partition(p) for p in [(), (1,), (2,), (1, 1), (2, 1), (3,), (2, 2)]]
    for a, b in itertools.product(univ, univ):
        c = lex_compare(a, b)
        assert c == -lex_compare(b, a)
        if c == 0:
            assert a == b


def test_canonical_and_anti_canonical():
    s = Partition((5, 4, 2, 1))
    k = canonical(s, 7)
    kb = anti_canonical(s, 7)
    assert k.rows == ((1, 2, 3, 4, 5), (1, 2, 3, 4), (1, 2), (1,))
    assert kb.rows == ((3, 4, 5, 6, 7), (4, 5, 6, 7), (6, 7), (7,))
    assert is_css(k, 7) and is_css(kb, 7)
    one = Partition((1,))
    assert canonical(one, 1) == anti_canonical(one, 1) == Tableau([[1]])
    with pytest.raises(ParameterError):
        canonical(Partition((3,)), 2)


def test_canonical_weight():
    assert canonical_weight(Partition((2,))) == 3
    assert canonical_weight(Partition((5, 4, 2, 1))) == 15 + 10 + 3 + 1
    assert canonical(Partition((5, 4, 2, 1)), 7).entry_sum() == canonical_weight(
        Partition((5, 4, 2, 1))
    )


def test_css_predicate():
    assert is_css(Tableau([(1, 3), (2, 3)]))
    assert not is_css(Tableau([(1, 1)]))  # row not strict
    assert not is_css(Tableau([(2, 3), (1, 4)]))  # column decreases
    assert not is_css(Tableau([(1, 5)]), n=4)  # entry above bound


def test_sub_examples():
    t, h = sub(1, 2, Tableau([[1]]))
    assert t == Tableau([[2]]) and h == 1
    t, h = sub(1, 2, Tableau([[1, 2]]))
    assert t == Tableau([[1, 2]]) and h == 0
    t, h = sub(1, 2, Tableau([(1, 3), (2, 3)]))
    assert t == Tableau([(2, 3), (2, 3)]) and h == 1
    with pytest.raises(ParameterError):
        sub(2, 2, Tableau([[1]]))


def test_sub_hypothesis_predicate():
    # row (2,3) has no entry <= 1, row (1,2) holds {1}; both fine for (1,2)
    assert sub_hypothesis_ok(Tableau([(1, 2), (2, 3)]), 1, 2)
    # for (2,4): row (1,2) has entries <= 2 but lacks 3
    assert not sub_hypothesis_ok(Tableau([(1, 2), (2, 3)]), 2, 4)
    assert sub_hypothesis_ok(Tableau([(1, 2, 3), (2, 3)]), 2, 4)


def test_pair_order():
    assert pair_order(3) == [(1, 2), (1, 3), (2, 3)]
    assert len(pair_order(5)) == 10


def test_sub_chain_examples():
    s = Partition((2, 1))
    kb = anti_canonical(s, 3)
    final, counts = sub_chain(kb, 3)
    assert final == kb
    assert all(h == 0 for h in counts.values())

    final, counts = sub_chain(canonical(Partition((1,)), 2), 2)
    assert final == Tableau([[2]])
    assert counts == {(1, 2): 1}


def test_sub_chain_rejects_non_css():
    with pytest.raises(ParameterError):
        sub_chain(Tableau([(2, 1)]), 3)


def test_full_chain_terminates_at_anti_canonical():
    for parts, n in [((2, 1), 3), ((2, 2), 3), ((3, 1), 4), ((1, 1, 1), 3)]:
        s = Partition(parts)
        for tab in enumerate_css(s, n):
            final, _ = sub_chain(tab, n)
            assert final == anti_canonical(s, n)


def test_chain_injectivity_small_shapes():
    for parts, n in [((1,), 3), ((2,), 3), ((2, 1), 4), ((2, 2), 4), ((1, 1), 4)]:
        s = Partition(parts)
        seen = {}
        for tab in enumerate_css(s, n):
            final, counts = sub_chain(tab, n)
            key = (final, tuple(sorted(counts.items())))
            assert key not in seen, f"collision {tab} vs {seen[key]}"
            seen[key] = tab


def test_single_sub_injectivity_under_hypothesis():
    # over all CSS tableaux satisfying the hypothesis for (i, j),
    # (result, h) determines the input
    for parts, n in [((2, 1), 4), ((2, 2), 4)]:
        s = Partition(parts)
        for i, j in pair_order(n):
            seen = {}
            for tab in enumerate_css(s, n):
                if not sub_hypothesis_ok(tab, i, j):
                    continue
                res, h = sub(i, j, tab)
                assert is_css(res), f"sub broke CSS on {tab} at ({i},{j})"
                key = (res, h)
                assert key not in seen
                seen[key] = tab


def test_enumerate_css_counts_and_order():
    n = 4
    one_row = list(enumerate_css(Partition((n,)), n))
    assert one_row == [Tableau([tuple(range(1, n + 1))])]

    singles = list(enumerate_css(Partition((1,)), 3))
    assert singles == [Tableau([[k]]) for k in (1, 2, 3)]

    # independent brute-force filter for shape (2,1), n=3
    brute = set()
    for a, b, c in itertools.product(range(1, 4), repeat=3):
        rows = ((a, b), (c,))
        try:
            tab = Tableau(rows)
        except ParameterError:
            continue
        if is_css(tab, 3):
            brute.add(tab)
    got = list(enumerate_css(Partition((2, 1)), 3))
    assert len(got) == len(set(got)) == len(brute)
    assert set(got) == brute
    # lexicographic order of concatenated rows
    flat = [sum(t.rows, ()) for t in got]
    assert flat == sorted(flat)


def test_enumerate_partitions():
    got = list(enumerate_partitions(3, 2))
    assert got == [Partition((2, 1)), Partition((1, 1, 1))]
    assert list(enumerate_partitions(0, 5)) == [Partition(())]
    even = list(enumerate_partitions(4, 4, even_rows=True))
    assert even == [Partition((4,)), Partition((2, 2))]
    # spot check: all partitions of 6 with parts <= 3
    got6 = list(enumerate_partitions(6, 3))
    assert all(p.size == 6 and p.parts[0] <= 3 for p in got6)
    assert len(got6) == len(set(got6)) == 7


def test_bitableau_shape_check_and_json():
    S = Tableau([(1, 2), (2,)])
    T = Tableau([(1, 3), (2,)])
    bt = Bitableau(S, T)
    assert bt.shape == Partition((2, 1))
    assert bt.is_standard(3, 3)
    assert bitableau_from_dict(bitableau_to_dict(bt)) == bt
    with pytest.raises(ParameterError):
        Bitableau(S, Tableau([(1, 2)]))
