"""Reduction pipeline for the ideal spanned by products of sub-Pfaffians.

The oracle polynomial f lives on the upper entries of a 2n x 2n
alternating matrix of indeterminates and is promised to lie in the span of
products of top-justified principal sub-Pfaffians whose largest block has
order at least 2r, with degree at most d in the matrix entries.  The
stages mirror the minor-ideal pipeline: canonical extraction, then
composition with a branching program of at most r vertices; the embedding
doubles into an alternating matrix whose order-2k leading Pfaffians agree
with the order-k leading minors up to signs that the final normalization
absorbs.

Oracle argument convention: arguments are the strictly-upper entries in
row-major order, X[1,2], X[1,3], ..., X[1,2n], X[2,3], ..., X[2n-1,2n].
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .abp import ABP, pfaff_abp
from .circuits import AffineOracleSum, OracleSpec, spec_from_polynomial
from .errors import ParameterError, ZeroPolynomialError
from .field import PrimeField
from .poly import SparsePolynomial, xvar
from .reduce_core import (
    PfaffGeometry,
    ReductionReport,
    extract_canonical_core,
    planned_counts,
    program_circuit_core,
)
from .reduce_det import DEFAULT_PROBES, DEFAULT_RETRIES, DEFAULT_SCAN_PROBES


def var_order_pfaff(dim: int) -> tuple:
    """Row-major strictly-upper argument order for a dim x dim skew matrix."""
    return tuple(
        xvar(i, j) for i in range(1, dim + 1) for j in range(i + 1, dim + 1)
    )


def skew_from_upper(field: PrimeField, args: np.ndarray, dim: int) -> np.ndarray:
    """Rebuild (B, dim, dim) alternating matrices from upper-entry rows."""
    args = np.asarray(args, dtype=np.int64) % field.p
    if args.ndim != 2 or args.shape[1] != dim * (dim - 1) // 2:
        raise ParameterError(
            f"expected (B, {dim * (dim - 1) // 2}) upper entries for dim={dim}"
        )
    iu, ju = np.triu_indices(dim, 1)
    out = np.zeros((args.shape[0], dim, dim), dtype=np.int64)
    out[:, iu, ju] = args
    out[:, ju, iu] = (field.p - args) % field.p
    return out


@dataclass
class PfaffPipelineParams:
    """Validated inputs for the sub-Pfaffian pipeline.

    ``n`` is the half-dimension: the matrix argument is 2n x 2n, and the
    embedded branching program may use at most r <= n vertices.
    """

    field: PrimeField
    n: int
    r: int
    d: int
    f_spec: OracleSpec
    f_poly: SparsePolynomial | None = None
    epsilon: Fraction = Fraction(1, 2)
    seed: int = 0
    retries: int = DEFAULT_RETRIES
    probes: int = DEFAULT_PROBES
    scan_probes: int = DEFAULT_SCAN_PROBES
    allow_fast_path: bool = True
    symbolic_audit: str = "auto"
    max_oracle_calls: int | None = None
    chunk: int = 4096

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("the half-dimension n must be positive")
        if not 1 <= self.r <= self.n:
            raise ParameterError(f"need 1 <= r <= n = {self.n}, got r={self.r}")
        if self.d < self.r:
            raise ParameterError(
                f"the degree bound d={self.d} cannot be below r={self.r}"
            )
        arity = self.n * (2 * self.n - 1)
        if self.f_spec.arity != arity:
            raise ParameterError(
                f"oracle arity {self.f_spec.arity} differs from the "
                f"{arity} upper entries of a {2 * self.n}x{2 * self.n} matrix"
            )
        if self.f_spec.degree > self.d:
            raise ParameterError(
                f"oracle degree {self.f_spec.degree} exceeds the bound d={self.d}"
            )
        if not 0 < Fraction(self.epsilon) < 1:
            raise ParameterError("epsilon must lie strictly between 0 and 1")
        if self.retries < 1 or self.probes < 1 or self.scan_probes < 2:
            raise ParameterError(
                "need retries >= 1, probes >= 1 and scan_probes >= 2"
            )
        if self.symbolic_audit not in ("auto", "off", "force"):
            raise ParameterError("symbolic_audit must be auto, off, or force")
        if self.chunk < 1:
            raise ParameterError("chunk must be positive")
        if self.f_poly is not None:
            if self.f_poly.is_zero():
                raise ZeroPolynomialError("the oracle polynomial is zero")
            extra = self.f_poly.variables() - set(var_order_pfaff(2 * self.n))
            if extra:
                raise ParameterError(
                    f"the oracle polynomial uses variables outside the "
                    f"upper entries: {sorted(extra)[:3]}"
                )

    @classmethod
    def from_polynomial(
        cls, field: PrimeField, f: SparsePolynomial, n: int, r: int,
        d: int | None = None, **kwargs,
    ) -> "PfaffPipelineParams":
        if f.is_zero():
            raise ZeroPolynomialError("the oracle polynomial is zero")
        deg = f.degree()
        spec = spec_from_polynomial(f, var_order_pfaff(2 * n))
        return cls(field, n, r, d if d is not None else deg, spec, f, **kwargs)

    def geometry(self) -> PfaffGeometry:
        return PfaffGeometry(self.field, self.n)

    def describe(self) -> dict:
        return {
            "mode": "pfaff",
            "n": self.n,
            "dim": 2 * self.n,
            "r": self.r,
            "d": self.d,
            "prime": self.field.p,
            "epsilon": str(Fraction(self.epsilon)),
            "seed": self.seed,
            "retries": self.retries,
            "probes": self.probes,
            "scan_probes": self.scan_probes,
            "allow_fast_path": self.allow_fast_path,
            "symbolic_audit": self.symbolic_audit,
            "max_oracle_calls": self.max_oracle_calls,
            "explicit_oracle": self.f_poly is not None,
        }

    def planned(self) -> dict:
        """Grid bounds and the exact worst-case oracle-call count."""
        return planned_counts(self.geometry(), self)


def extract_canonical_pfaff(
    params: PfaffPipelineParams,
) -> tuple[AffineOracleSum, ReductionReport]:
    """Depth-three circuit for one canonical product of leading Pfaffians."""
    return extract_canonical_core(params.geometry(), params)


def abp_pfaff_oracle_circuit(
    params: PfaffPipelineParams, program: ABP
) -> tuple[AffineOracleSum, ReductionReport]:
    """Depth-three circuit for the program's polynomial (or its p^k power)."""
    return program_circuit_core(params.geometry(), params, program, "abp")


def pfaff_oracle_circuit(
    params: PfaffPipelineParams, t: int
) -> tuple[AffineOracleSum, ReductionReport]:
    """Depth-three circuit for the order-t Pfaffian over f-oracle calls.

    ``t`` must be even; the matching-based program generator is capped, so
    large t is refused rather than silently approximated.
    """
    if t < 2 or t % 2:
        raise ParameterError("the Pfaffian order t must be a positive even number")
    program = pfaff_abp(params.field, t)
    circuit, report = program_circuit_core(
        params.geometry(), params, program, "pfaff"
    )
    report.outer["target"] = f"pfaff:{t}"
    return circuit, report


def pfaffian_oracle_spec(field: PrimeField, n: int, r: int) -> OracleSpec:
    """Black-box oracle for the order-2r leading Pfaffian on 2n x 2n input."""
    from .matrices import batch_pfaff_elim

    if not 1 <= r <= n:
        raise ParameterError("Pfaffian order out of range")
    dim = 2 * n

    def batch(arr: np.ndarray) -> np.ndarray:
        mats = skew_from_upper(field, arr, dim)[:, : 2 * r, : 2 * r]
        return batch_pfaff_elim(field, mats)

    def single(args) -> int:
        return int(batch(np.asarray(args, dtype=np.int64).reshape(1, -1))[0])

    return OracleSpec(n * (2 * n - 1), r, single, batch)
