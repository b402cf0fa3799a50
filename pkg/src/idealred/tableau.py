"""Partitions, tableaux and the row-substitution machinery.

A tableau here is "conjugate semistandard" when every row is strictly
increasing and every column is nondecreasing downward.  The canonical
tableau of shape sigma fills row i with 1..sigma_i; the anti-canonical one
fills it with the top sigma_i values n-sigma_i+1..n.  Row substitution
sub(i, j) rewrites every row that has an i but no j, and chains of
substitutions in the fixed pair order drive any conjugate semistandard
tableau to the anti-canonical one while the replacement counts retain
enough information to invert the walk.
"""

from __future__ import annotations

from .errors import ParameterError


class Partition:
    """Weakly decreasing tuple of positive integers (possibly empty)."""

    __slots__ = ("parts",)

    def __init__(self, parts):
        parts = tuple(int(p) for p in parts)
        for k, p in enumerate(parts):
            if p <= 0:
                raise ParameterError(f"partition part {p} is not positive")
            if k and parts[k - 1] < p:
                raise ParameterError(f"parts not weakly decreasing: {parts}")
        self.parts = parts

    @property
    def size(self) -> int:
        return sum(self.parts)

    def __len__(self):
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)

    def __getitem__(self, k):
        return self.parts[k]

    def __eq__(self, other):
        return isinstance(other, Partition) and other.parts == self.parts

    def __hash__(self):
        return hash(self.parts)

    def __repr__(self):
        return f"Partition{self.parts}"

    def conjugate(self) -> "Partition":
        if not self.parts:
            return Partition(())
        cols = self.parts[0]
        return Partition(
            tuple(sum(1 for p in self.parts if p > c) for c in range(cols))
        )

    def all_even(self) -> bool:
        return all(p % 2 == 0 for p in self.parts)


def lex_compare(a: Partition, b: Partition) -> int:
    """-1, 0 or +1 comparing a to b.

    Larger first differing part wins; when one sequence is a proper prefix
    of the other, the shorter (prefix) is the larger: extending a partition
    makes it smaller.
    """
    for x, y in zip(a.parts, b.parts):
        if x != y:
            return 1 if x > y else -1
    if len(a.parts) == len(b.parts):
        return 0
    return 1 if len(a.parts) < len(b.parts) else -1


class Tableau:
    """Rows of positive integers; shape is the row-length sequence."""

    __slots__ = ("rows",)

    def __init__(self, rows):
        self.rows = tuple(tuple(int(e) for e in row) for row in rows)
        for row in self.rows:
            for e in row:
                if e <= 0:
                    raise ParameterError(f"tableau entry {e} not positive")
        Partition(tuple(len(r) for r in self.rows))  # validates shape

    @property
    def shape(self) -> Partition:
        return Partition(tuple(len(r) for r in self.rows))

    def entry_sum(self) -> int:
        return sum(sum(row) for row in self.rows)

    def max_entry(self) -> int:
        return max((max(row) for row in self.rows if row), default=0)

    def __eq__(self, other):
        return isinstance(other, Tableau) and other.rows == self.rows

    def __hash__(self):
        return hash(self.rows)

    def __repr__(self):
        return f"Tableau{list(map(list, self.rows))}"


def is_css(tab: Tableau, n: int | None = None) -> bool:
    """Conjugate semistandard: rows strictly increase, columns nondecrease."""
    rows = tab.rows
    for row in rows:
        for a, b in zip(row, row[1:]):
            if not a < b:
                return False
        if n is not None and row and row[-1] > n:
            return False
    for upper, lower in zip(rows, rows[1:]):
        for c in range(len(lower)):
            if upper[c] > lower[c]:
                return False
    return True


class Bitableau:
    """A pair of equal-shape tableaux: row side S, column side T."""

    __slots__ = ("S", "T")

    def __init__(self, S: Tableau, T: Tableau):
        if S.shape != T.shape:
            raise ParameterError(
                f"bitableau sides have different shapes {S.shape} vs {T.shape}"
            )
        self.S = S
        self.T = T

    @property
    def shape(self) -> Partition:
        return self.S.shape

    def is_standard(self, n: int | None = None, m: int | None = None) -> bool:
        return is_css(self.S, n) and is_css(self.T, m)

    def __eq__(self, other):
        return isinstance(other, Bitableau) and (other.S, other.T) == (self.S, self.T)

    def __hash__(self):
        return hash((self.S, self.T))

    def __repr__(self):
        return f"Bitableau(S={self.S!r}, T={self.T!r})"


def canonical(sigma: Partition, n: int) -> Tableau:
    if sigma.parts and sigma.parts[0] > n:
        raise ParameterError(f"shape {sigma} does not fit in {n} values")
    return Tableau(tuple(tuple(range(1, p + 1)) for p in sigma.parts))


def anti_canonical(sigma: Partition, n: int) -> Tableau:
    if sigma.parts and sigma.parts[0] > n:
        raise ParameterError(f"shape {sigma} does not fit in {n} values")
    return Tableau(tuple(tuple(range(n - p + 1, n + 1)) for p in sigma.parts))


def canonical_weight(sigma: Partition) -> int:
    """Entry sum of the canonical tableau: sum of p(p+1)/2 over the parts."""
    return sum(p * (p + 1) // 2 for p in sigma.parts)


# ----------------------------------------------------------------------
# Substitution operators
# ----------------------------------------------------------------------


def sub(i: int, j: int, tab: Tableau) -> tuple[Tableau, int]:
    """Replace i by j (re-sorting) in every row with an i and no j."""
    if i >= j:
        raise ParameterError(f"sub needs i < j, got ({i}, {j})")
    new_rows = []
    h = 0
    for row in tab.rows:
        if i in row and j not in row:
            h += 1
            new_rows.append(tuple(sorted(j if e == i else e for e in row)))
        else:
            new_rows.append(row)
    return Tableau(new_rows), h


def sub_hypothesis_ok(tab: Tableau, i: int, j: int) -> bool:
    """Every row holding any entry <= i must hold all of i, i+1, ..., j-1."""
    needed = set(range(i, j))
    for row in tab.rows:
        if any(e <= i for e in row) and not needed.issubset(row):
            return False
    return True


def pair_order(n: int) -> list[tuple[int, int]]:
    """All pairs (i, j), i < j <= n, ordered by first then second component."""
    return [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]


def sub_chain(
    tab: Tableau, n: int, upto: tuple[int, int] | None = None
) -> tuple[Tableau, dict]:
    """Apply every substitution through `upto` (default: all) in pair order.

    Returns the final tableau and the per-pair replacement counts.  The full
    chain of a conjugate semistandard tableau terminates at the
    anti-canonical tableau of the same shape, and each intermediate step is
    guaranteed to satisfy the substitution hypothesis, which we assert.
    """
    if not is_css(tab, n):
        raise ParameterError("sub_chain input is not conjugate semistandard")
    current = tab
    counts: dict[tuple[int, int], int] = {}
    for i, j in pair_order(n):
        assert sub_hypothesis_ok(current, i, j), (
            f"substitution hypothesis failed at ({i}, {j}) on {current!r}"
        )
        current, h = sub(i, j, current)
        counts[(i, j)] = h
        if upto is not None and (i, j) == tuple(upto):
            break
    return current, counts


# ----------------------------------------------------------------------
# Enumeration
# ----------------------------------------------------------------------


def _rows_of_length(length: int, n: int, floor: tuple | None):
    """Strictly increasing rows of a given length with entries <= n, entry c
    at least floor[c]; lexicographic order."""

    def extend(prefix: list, col: int):
        if col == length:
            yield tuple(prefix)
            return
        low = prefix[-1] + 1 if prefix else 1
        if floor is not None:
            low = max(low, floor[col])
        # leave room for the strictly increasing tail
        for e in range(low, n - (length - col) + 2):
            prefix.append(e)
            yield from extend(prefix, col + 1)
            prefix.pop()

    yield from extend([], 0)


def enumerate_css(sigma: Partition, n: int):
    """All conjugate semistandard tableaux of the given shape, entries <= n,
    in lexicographic order of the concatenated row sequences."""
    if sigma.parts and sigma.parts[0] > n:
        raise ParameterError(f"shape {sigma} does not fit in {n} values")
    parts = sigma.parts

    def build(k: int, rows: list):
        if k == len(parts):
            yield Tableau(tuple(rows))
            return
        floor = rows[-1][: parts[k]] if rows else None
        for row in _rows_of_length(parts[k], n, floor):
            rows.append(row)
            yield from build(k + 1, rows)
            rows.pop()

    yield from build(0, [])


def enumerate_partitions(d: int, maxrow: int, even_rows: bool = False):
    """All partitions of size exactly d with parts <= maxrow, largest-part
    lexicographic-descending order; optionally even parts only."""
    if d < 0:
        raise ParameterError("partition size must be nonnegative")
    step = 2 if even_rows else 1

    def build(remaining: int, cap: int, acc: list):
        if remaining == 0:
            yield Partition(tuple(acc))
            return
        top = min(cap, remaining)
        if even_rows and top % 2:
            top -= 1
        for part in range(top, 0, -step):
            acc.append(part)
            yield from build(remaining - part, part, acc)
            acc.pop()

    yield from build(d, maxrow, [])


# ----------------------------------------------------------------------
# JSON forms
# ----------------------------------------------------------------------


def partition_to_list(sigma: Partition) -> list:
    return list(sigma.parts)


def tableau_to_list(tab: Tableau) -> list:
    return [list(row) for row in tab.rows]


def bitableau_to_dict(bt: Bitableau) -> dict:
    return {"S": tableau_to_list(bt.S), "T": tableau_to_list(bt.T)}


def bitableau_from_dict(doc: dict) -> Bitableau:
    return Bitableau(Tableau(doc["S"]), Tableau(doc["T"]))
