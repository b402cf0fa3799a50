"""Prime-field arithmetic on canonical integer residues.

Elements of F_p are carried as plain ints in [0, p).  A PrimeField instance
holds the modulus and provides the operations; containers (polynomials,
matrices, circuits) store a reference to their field and refuse to mix
moduli.  Batched helpers operate on int64 numpy arrays and therefore require
p < 2**31 so that a single product of two reduced residues fits in int64.
"""

from __future__ import annotations

import numpy as np

from .errors import FieldMismatchError, NotPrimeError

DEFAULT_PRIME = 2147483647  # 2**31 - 1
ARRAY_PRIME_BOUND = 1 << 31

# Deterministic Miller-Rabin witnesses, valid for every n < 3.3 * 10**24.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for q in _MR_BASES:
        if n == q:
            return True
        if n % q == 0:
            return False
    d = n - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


class PrimeField:
    """F_p for an odd prime p, operating on canonical int residues."""

    __slots__ = ("p",)

    def __init__(self, p: int = DEFAULT_PRIME):
        if not isinstance(p, int) or not is_prime(p):
            raise NotPrimeError(f"modulus {p!r} is not prime")
        if p == 2:
            raise NotPrimeError("p must be an odd prime (p > 2)")
        self.p = p

    def __repr__(self):
        return f"PrimeField({self.p})"

    def __eq__(self, other):
        return isinstance(other, PrimeField) and other.p == self.p

    def __hash__(self):
        return hash(("PrimeField", self.p))

    def require_same(self, other: "PrimeField"):
        if self.p != other.p:
            raise FieldMismatchError(
                f"mixed moduli: {self.p} vs {other.p}"
            )

    @property
    def characteristic(self) -> int:
        return self.p

    def element(self, a: int) -> int:
        """Canonical residue of an arbitrary integer."""
        return a % self.p

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.p

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.p

    def neg(self, a: int) -> int:
        return -a % self.p

    def mul(self, a: int, b: int) -> int:
        return a * b % self.p

    def inv(self, a: int) -> int:
        a %= self.p
        if a == 0:
            raise ZeroDivisionError("inverse of 0 in F_p")
        return pow(a, self.p - 2, self.p)

    def div(self, a: int, b: int) -> int:
        return a * self.inv(b) % self.p

    def pow(self, a: int, e: int) -> int:
        if e < 0:
            return pow(self.inv(a), -e, self.p)
        return pow(a % self.p, e, self.p)

    def rand_element(self, rng) -> int:
        return rng.randrange(self.p)

    def rand_nonzero(self, rng) -> int:
        return rng.randrange(1, self.p)

    # ------------------------------------------------------------------
    # Batched helpers (int64 numpy arrays of canonical residues).
    # ------------------------------------------------------------------

    def _check_array_modulus(self):
        if self.p >= ARRAY_PRIME_BOUND:
            raise FieldMismatchError(
                f"batched ops need p < 2**31, got {self.p}"
            )

    def arr(self, values) -> np.ndarray:
        self._check_array_modulus()
        return np.asarray(values, dtype=np.int64) % self.p

    def mul_arr(self, a, b) -> np.ndarray:
        self._check_array_modulus()
        return (a * b) % self.p

    def pow_arr(self, base, e: int) -> np.ndarray:
        """Elementwise base**e mod p by square-and-multiply."""
        self._check_array_modulus()
        base = np.asarray(base, dtype=np.int64) % self.p
        if e < 0:
            base = self.inv_arr(base)
            e = -e
        out = np.ones_like(base)
        while e:
            if e & 1:
                out = (out * base) % self.p
            base = (base * base) % self.p
            e >>= 1
        return out

    def inv_arr(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64) % self.p
        if np.any(a == 0):
            raise ZeroDivisionError("inverse of 0 in F_p (array)")
        return self.pow_arr(a, self.p - 2)

    def dot_arr(self, a, b) -> int:
        """Exact dot product of two residue vectors."""
        prods = (np.asarray(a, dtype=np.int64) * np.asarray(b, dtype=np.int64)) % self.p
        # Each reduced product is < p < 2**31; chunked partial sums of
        # 2**31-bounded terms stay far below 2**63 up to 2**31 terms.
        total = 0
        for start in range(0, prods.size, 1 << 20):
            total += int(np.sum(prods[start : start + (1 << 20)], dtype=np.int64))
        return total % self.p
