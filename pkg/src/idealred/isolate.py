"""Randomized weight assignments that isolate a unique minimum-weight term.

Each auxiliary variable receives a uniform exponent in {0..M}; substituting
``t -> alpha^{z_t}`` turns a multivariate polynomial into a univariate one in
which, with probability at least 1 - epsilon, a single monomial attains the
minimum degree.  ``fold_v`` then merges a second variable ``v`` into the same
univariate by a positional (base z_v) shift, keeping distinct (v, w) degree
pairs distinct.
"""

import math
from fractions import Fraction

import numpy as np

from .errors import ParameterError


def _resolution(epsilon) -> Fraction:
    try:
        frac = Fraction(str(epsilon))
    except ValueError:
        frac = Fraction(epsilon)
    if not 0 < frac < 1:
        raise ParameterError("failure budget must lie strictly between 0 and 1")
    return frac


def weight_bound(K: int, ell: int, epsilon) -> int:
    """Smallest exponent range M with M >= K * ell / epsilon."""
    if K < 1 or ell < 1:
        raise ParameterError("degree bound and variable count must be >= 1")
    return math.ceil(Fraction(K * ell) / _resolution(epsilon))


class IsolationWeights:
    """Sampled per-variable exponents plus the degree bookkeeping."""

    __slots__ = (
        "exponents",
        "variables",
        "K",
        "ell",
        "epsilon",
        "M",
        "seed",
        "counter",
        "z_v",
        "deg_v_bound",
        "deg_w_bound",
    )

    def __init__(self, exponents, variables, K, ell, epsilon, M, seed, counter):
        self.exponents = np.asarray(exponents, dtype=np.int64)
        self.variables = tuple(variables) if variables is not None else None
        if self.variables is not None and len(self.variables) != len(self.exponents):
            raise ParameterError("variable list length must match exponent count")
        self.K = K
        self.ell = ell
        self.epsilon = epsilon
        self.M = M
        self.seed = seed
        self.counter = counter
        self.z_v = None
        self.deg_v_bound = None
        self.deg_w_bound = None

    def exponent_of(self, var) -> int:
        if self.variables is None:
            raise ParameterError("weights were sampled without variable names")
        return int(self.exponents[self.variables.index(var)])

    def weight_of(self, exponent_vector) -> int:
        """Total w-degree of a monomial given by its exponent vector."""
        vec = np.asarray(exponent_vector, dtype=np.int64)
        if vec.shape != self.exponents.shape:
            raise ParameterError("exponent vector length mismatch")
        return int(vec @ self.exponents)

    @property
    def total_degree_bound(self) -> int | None:
        """Univariate degree bound after folding v in; None before fold_v."""
        if self.z_v is None:
            return None
        return self.z_v * self.deg_v_bound + self.deg_w_bound

    def to_jsonable(self):
        doc = {
            "exponents": [int(z) for z in self.exponents],
            "K": self.K,
            "ell": self.ell,
            "epsilon": self.epsilon,
            "M": self.M,
            "seed": self.seed,
            "counter": self.counter,
        }
        if self.variables is not None:
            doc["variables"] = ["_".join(str(part) for part in v) for v in self.variables]
        if self.z_v is not None:
            doc["z_v"] = self.z_v
            doc["deg_v_bound"] = self.deg_v_bound
            doc["deg_w_bound"] = self.deg_w_bound
            doc["total_degree_bound"] = self.total_degree_bound
        return doc


def sample_weights(
    K: int, ell: int, epsilon, seed: int, variables=None, counter: int = 0
) -> IsolationWeights:
    """Uniform iid exponents in {0..M}, M = ceil(K*ell/epsilon).

    Deterministic given (seed, counter); the counter lets retry loops draw
    fresh weights without touching any shared generator state.
    """
    M = weight_bound(K, ell, epsilon)
    if variables is not None and len(variables) != ell:
        raise ParameterError("variable list length must equal ell")
    rng = np.random.default_rng([seed, counter])
    exps = rng.integers(0, M + 1, size=ell, dtype=np.int64)
    return IsolationWeights(exps, variables, K, ell, epsilon, M, seed, counter)


def fold_v(
    weights: IsolationWeights, deg_v_bound: int, deg_w_bound: int
) -> IsolationWeights:
    """Set z_v = deg_w_bound + 1 so (v, w)-degrees fold injectively.

    A monomial v^a w^b with b <= deg_w_bound maps to degree a*z_v + b; the
    base-z_v positional reading keeps distinct pairs distinct and orders
    slices by a first.
    """
    if deg_v_bound < 0 or deg_w_bound < 0:
        raise ParameterError("degree bounds must be nonnegative")
    folded = IsolationWeights(
        weights.exponents.copy(),
        weights.variables,
        weights.K,
        weights.ell,
        weights.epsilon,
        weights.M,
        weights.seed,
        weights.counter,
    )
    folded.z_v = deg_w_bound + 1
    folded.deg_v_bound = deg_v_bound
    folded.deg_w_bound = deg_w_bound
    return folded


def isolation_stats(collection, trials: int, epsilon, seed: int) -> dict:
    """Empirical rate of trials whose minimum weight is attained twice.

    ``collection`` is a list of distinct exponent vectors (equal length).
    Each trial draws its own weight vector from a counter-derived stream, so
    the result is reproducible regardless of evaluation order.
    """
    if not collection:
        raise ParameterError("collection must be nonempty")
    if trials < 1:
        raise ParameterError("need at least one trial")
    mat = np.asarray(collection, dtype=np.int64)
    if mat.ndim != 2:
        raise ParameterError("exponent vectors must have equal length")
    if len({tuple(row) for row in mat.tolist()}) != mat.shape[0]:
        raise ParameterError("exponent vectors must be distinct")
    ell = mat.shape[1]
    K = max(1, int(mat.max()))
    M = weight_bound(K, ell, epsilon)
    draws = np.empty((trials, ell), dtype=np.int64)
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        draws[t] = rng.integers(0, M + 1, size=ell, dtype=np.int64)
    values = mat @ draws.T  # (collection, trials)
    mins = values.min(axis=0)
    failures = int(((values == mins[None, :]).sum(axis=0) > 1).sum())
    rate = failures / trials
    eps = float(_resolution(epsilon))
    bound = eps + 3 * math.sqrt(eps * (1 - eps) / trials)
    return {
        "M": M,
        "trials": trials,
        "failures": failures,
        "rate": rate,
        "bound": bound,
    }
