"""Reduction pipeline for the ideal spanned by products of minors.

The oracle polynomial f lives on an n x m matrix of indeterminates and is
promised to lie in the span of products of top-justified minors whose
largest block has order at least r, with total degree at most d.  The
pipeline turns oracle access to any such nonzero f into depth-three
circuits:

* :func:`extract_canonical` computes one canonical product of leading
  principal minors (times a recorded scalar);
* :func:`abp_oracle_circuit` composes the extraction with an algebraic
  branching program of at most r vertices to compute that program's
  polynomial (or its p^k-th power when the field characteristic divides
  the number of qualifying blocks, with k recorded);
* :func:`det_oracle_circuit` and :func:`imm_oracle_circuit` instantiate
  the program stage for the t x t determinant and for an iterated product
  of D matrices of width W.

Oracle argument convention: arguments are the matrix entries in row-major
order, X[1,1], X[1,2], ..., X[n,m].
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .abp import ABP, imm_abp, mv_det_abp
from .circuits import AffineOracleSum, OracleSpec, spec_from_polynomial
from .errors import ParameterError, ZeroPolynomialError
from .field import PrimeField
from .poly import SparsePolynomial, xvar
from .reduce_core import (
    DetGeometry,
    ReductionReport,
    extract_canonical_core,
    planned_counts,
    program_circuit_core,
)

DEFAULT_RETRIES = 8
DEFAULT_PROBES = 100
DEFAULT_SCAN_PROBES = 6


def var_order_det(n: int, m: int) -> tuple:
    """Row-major oracle argument order for an n x m matrix."""
    return tuple(xvar(i, j) for i in range(1, n + 1) for j in range(1, m + 1))


@dataclass
class DetPipelineParams:
    """Validated inputs shared by every stage of the minor-ideal pipeline.

    ``epsilon`` bounds the per-attempt isolation failure probability and
    ``seed`` makes the whole run reproducible; every random draw streams
    from it.  ``f_poly`` is optional: when the oracle is available in
    explicit sparse form it enables the proportionality shortcut, the
    desk-scale membership certificate, and the symbolic audit.
    """

    field: PrimeField
    n: int
    m: int
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
        if self.n < 1 or self.m < 1:
            raise ParameterError("matrix dimensions must be positive")
        if not 1 <= self.r <= min(self.n, self.m):
            raise ParameterError(
                f"need 1 <= r <= min(n, m) = {min(self.n, self.m)}, got r={self.r}"
            )
        if self.d < self.r:
            raise ParameterError(
                f"the degree bound d={self.d} cannot be below r={self.r}"
            )
        if self.f_spec.arity != self.n * self.m:
            raise ParameterError(
                f"oracle arity {self.f_spec.arity} differs from n*m = "
                f"{self.n * self.m}"
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
            extra = self.f_poly.variables() - set(var_order_det(self.n, self.m))
            if extra:
                raise ParameterError(
                    f"the oracle polynomial uses variables outside the "
                    f"{self.n}x{self.m} matrix: {sorted(extra)[:3]}"
                )

    @classmethod
    def from_polynomial(
        cls, field: PrimeField, f: SparsePolynomial, n: int, m: int, r: int,
        d: int | None = None, **kwargs,
    ) -> "DetPipelineParams":
        if f.is_zero():
            raise ZeroPolynomialError("the oracle polynomial is zero")
        deg = f.degree()
        spec = spec_from_polynomial(f, var_order_det(n, m))
        return cls(
            field, n, m, r, d if d is not None else deg, spec, f, **kwargs
        )

    def geometry(self) -> DetGeometry:
        return DetGeometry(self.field, self.n, self.m)

    def describe(self) -> dict:
        return {
            "mode": "det",
            "n": self.n,
            "m": self.m,
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


def extract_canonical(
    params: DetPipelineParams,
) -> tuple[AffineOracleSum, ReductionReport]:
    """Depth-three circuit for one canonical product of leading minors."""
    return extract_canonical_core(params.geometry(), params)


def abp_oracle_circuit(
    params: DetPipelineParams, program: ABP
) -> tuple[AffineOracleSum, ReductionReport]:
    """Depth-three circuit for the program's polynomial (or its p^k power)."""
    return program_circuit_core(params.geometry(), params, program, "abp")


def det_oracle_circuit(
    params: DetPipelineParams, t: int
) -> tuple[AffineOracleSum, ReductionReport]:
    """Depth-three circuit for the t x t determinant over f-oracle calls."""
    if t < 1:
        raise ParameterError("determinant order must be at least 1")
    program = mv_det_abp(params.field, t)
    circuit, report = program_circuit_core(
        params.geometry(), params, program, "det"
    )
    report.outer["target"] = f"det:{t}"
    return circuit, report


def imm_oracle_circuit(
    params: DetPipelineParams, W: int, D: int
) -> tuple[AffineOracleSum, ReductionReport]:
    """Depth-three circuit for the (1, W, ..., W, 1) iterated matrix product."""
    if W < 1 or D < 1:
        raise ParameterError("need width >= 1 and depth >= 1")
    program = imm_abp(params.field, W, D)
    circuit, report = program_circuit_core(
        params.geometry(), params, program, "imm"
    )
    report.outer["target"] = f"imm:{W}x{D}"
    return circuit, report


def minor_oracle_spec(field: PrimeField, n: int, m: int, r: int) -> OracleSpec:
    """Black-box oracle for the leading r x r minor of an n x m argument."""
    from .matrices import batch_det

    if not 1 <= r <= min(n, m):
        raise ParameterError("minor order out of range")

    def batch(arr: np.ndarray) -> np.ndarray:
        mats = arr.reshape(-1, n, m)[:, :r, :r]
        return batch_det(field, mats)

    def single(args) -> int:
        return int(batch(np.asarray(args, dtype=np.int64).reshape(1, -1))[0])

    return OracleSpec(n * m, r, single, batch)
