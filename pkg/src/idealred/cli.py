"""Command-line interface for the ideal-to-oracle reduction pipelines.

Subcommands
-----------
``reduce det|pfaff|imm``
    Build the final depth-three oracle circuit for a determinant, Pfaffian,
    or iterated-matrix-multiplication target from a supplied (or default)
    ideal member, and optionally write the circuit and the run report as
    JSON.
``extract-canonical det|pfaff``
    Run only the canonical-member extraction stage.
``verify``
    Re-check a previously exported explicit circuit against a named target
    at fresh random points.
``isolate-stats``
    Empirical failure-rate report for the random isolation weights.

Exit codes: 0 success; 2 a completed run failed its checks (isolation
exhausted or a verification mismatch); 3 rejected input (parameters,
field size, desk-scale caps).
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

import numpy as np

from .abp import imm_abp, mv_det_abp, pfaff_abp
from .bidet import (
    BideterminantRef,
    BipfaffianRef,
    expand_bideterminant,
    expand_bipfaffian,
)
from .circuits import OracleCircuit, spec_from_polynomial
from .errors import (
    DeskCapError,
    FieldMismatchError,
    FieldTooSmallError,
    IdealredError,
    IsolationFailure,
    NotPrimeError,
    ParameterError,
    VerificationError,
    ZeroPolynomialError,
)
from .field import PrimeField
from .isolate import isolation_stats
from .matrices import batch_det, batch_pfaff
from .poly import poly_from_json, var_name
from .reduce_core import ReductionReport
from .reduce_det import (
    DetPipelineParams,
    det_oracle_circuit,
    extract_canonical,
    imm_oracle_circuit,
    var_order_det,
)
from .reduce_pfaff import (
    PfaffPipelineParams,
    extract_canonical_pfaff,
    pfaff_oracle_circuit,
    skew_from_upper,
    var_order_pfaff,
)
from .tableau import Partition, Bitableau, canonical

DEFAULT_PRIME = 2147483647

_REJECTED = (
    ParameterError,
    FieldTooSmallError,
    NotPrimeError,
    DeskCapError,
    ZeroPolynomialError,
    FieldMismatchError,
)
_FAILED = (IsolationFailure, VerificationError)

PFAFF_TARGET_CAP = 6
_PFAFF_CAP_MESSAGE = (
    f"the matching-enumeration Pfaffian program is capped at t = "
    f"{PFAFF_TARGET_CAP}; the scalable Mahajan-Subramanya-Vinay "
    f"construction is out of scope for this build"
)


# ----------------------------------------------------------------------
# Shared option plumbing
# ----------------------------------------------------------------------


def _add_common_reduce_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--f", metavar="F_JSON", help="ideal member as a polynomial JSON file")
    sub.add_argument("--prime", type=int, help=f"field modulus (default {DEFAULT_PRIME}, or the prime recorded in --f)")
    sub.add_argument("--d", type=int, help="degree bound for f (default: its actual degree)")
    sub.add_argument("--epsilon", default="1/2", help="isolation failure budget per attempt, e.g. 1/2 or 0.25")
    sub.add_argument("--seed", type=int, default=0, help="seed for every random draw in the run")
    sub.add_argument("--retries", type=int, default=8, help="attempt cap for the extraction stage")
    sub.add_argument("--probes", type=int, default=100, help="random verification points")
    sub.add_argument("--scan-probes", type=int, default=6, help="random points used by the nonzero scan")
    sub.add_argument("--no-fast-path", action="store_true", help="always run the scan grid, even when f is visibly canonical")
    sub.add_argument("--audit", choices=("auto", "off", "force"), default="auto", help="symbolic-equality audit policy")
    sub.add_argument("--max-oracle-calls", type=int, help="refuse runs whose worst-case grid exceeds this many calls")
    sub.add_argument("--out", metavar="CIRCUIT_JSON", help="write the final circuit (explicit form when small enough)")
    sub.add_argument("--report", metavar="REPORT_JSON", help="write the full run report")


def _epsilon(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParameterError(f"cannot parse epsilon {text!r}: {exc}") from None


def _load_poly(path: str, prime: int | None):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    field = PrimeField(prime) if prime is not None else None
    return poly_from_json(text, field)


def _full_minor(field: PrimeField, r: int, n: int, m: int):
    tab = canonical(Partition((r,)), min(n, m))
    return expand_bideterminant(field, BideterminantRef(Bitableau(tab, tab), n, m))


def _full_sub_pfaffian(field: PrimeField, r: int, dim: int):
    tab = canonical(Partition((2 * r,)), dim)
    return expand_bipfaffian(field, BipfaffianRef(tab, dim))


def _kwargs(args) -> dict:
    kw = dict(
        epsilon=_epsilon(args.epsilon),
        seed=args.seed,
        retries=args.retries,
        probes=args.probes,
        scan_probes=args.scan_probes,
        allow_fast_path=not args.no_fast_path,
        symbolic_audit=args.audit,
    )
    if args.max_oracle_calls is not None:
        kw["max_oracle_calls"] = args.max_oracle_calls
    return kw


def _emit(circuit, report: ReductionReport, args) -> None:
    doc = report.to_jsonable()
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
    if args.out:
        try:
            explicit = circuit.to_oracle_circuit()
            payload = explicit.to_jsonable()
        except DeskCapError:
            payload = {
                "kind": "oracle_sum_summary",
                "note": (
                    "circuit too large for the explicit gate-list format; "
                    "re-run programmatically for streaming evaluation"
                ),
                "prime": str(circuit.field.p),
                "inputs": [var_name(v) for v in circuit.inputs],
                "constant": str(circuit.constant),
                "metrics": circuit.metrics().to_dict(),
            }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
    summary = {
        "mode": doc["mode"],
        "stage": doc["stage"],
        "shape": doc.get("shape"),
        "attempts": len(doc.get("attempts", [])) or (1 if doc.get("fast_path") else 0),
        "fast_path": doc.get("fast_path"),
        "membership": doc.get("membership"),
        "metrics": doc.get("metrics"),
        "verification": doc.get("verification"),
    }
    if doc.get("outer"):
        summary["target"] = doc["outer"].get("target")
        summary["p_adic_k"] = doc["outer"].get("p_adic_k")
    print(json.dumps(summary, indent=2, sort_keys=True))


# ----------------------------------------------------------------------
# reduce / extract-canonical
# ----------------------------------------------------------------------


def _det_params(args, need_t: int | None) -> DetPipelineParams:
    prime = args.prime
    f = _load_poly(args.f, prime) if args.f else None
    if f is not None:
        field = f.field
    else:
        field = PrimeField(prime if prime is not None else DEFAULT_PRIME)
    r = args.r
    if r is None:
        if need_t is None:
            raise ParameterError("--r is required when no target dimension fixes it")
        r = mv_det_abp(field, need_t).vertex_count
    n = args.n if args.n is not None else r
    m = args.m if args.m is not None else n
    if f is None:
        f = _full_minor(field, r, n, m)
    return DetPipelineParams.from_polynomial(
        field, f, n, m, r, d=args.d, **_kwargs(args)
    )


def _pfaff_params(args, need_t: int | None) -> PfaffPipelineParams:
    prime = args.prime
    f = _load_poly(args.f, prime) if args.f else None
    if f is not None:
        field = f.field
    else:
        field = PrimeField(prime if prime is not None else DEFAULT_PRIME)
    r = args.r
    if r is None:
        if need_t is None:
            raise ParameterError("--r is required when no target dimension fixes it")
        r = pfaff_abp(field, need_t).vertex_count
    n = args.n if args.n is not None else r
    if f is None:
        f = _full_sub_pfaffian(field, r, 2 * n)
    return PfaffPipelineParams.from_polynomial(
        field, f, n, r, d=args.d, **_kwargs(args)
    )


def _cmd_reduce_det(args) -> int:
    if args.t < 1:
        raise ParameterError("the determinant order t must be at least 1")
    params = _det_params(args, args.t)
    circuit, report = det_oracle_circuit(params, args.t)
    _emit(circuit, report, args)
    return 0


def _cmd_reduce_pfaff(args) -> int:
    if args.t < 2 or args.t % 2:
        raise ParameterError("the Pfaffian order t must be even and at least 2")
    if args.t > PFAFF_TARGET_CAP:
        raise DeskCapError(_PFAFF_CAP_MESSAGE)
    params = _pfaff_params(args, args.t)
    circuit, report = pfaff_oracle_circuit(params, args.t)
    _emit(circuit, report, args)
    return 0


def _cmd_reduce_imm(args) -> int:
    if args.W < 1 or args.D < 1:
        raise ParameterError("need W >= 1 and D >= 1")
    prime = args.prime if args.prime is not None else DEFAULT_PRIME
    probe_field = PrimeField(prime)
    vertices = imm_abp(probe_field, args.W, args.D).vertex_count
    if args.r is None:
        args.r = vertices
    params = _det_params(args, None)
    circuit, report = imm_oracle_circuit(params, args.W, args.D)
    _emit(circuit, report, args)
    return 0


def _cmd_extract(args) -> int:
    if args.mode == "det":
        params = _det_params(args, None)
        circuit, report = extract_canonical(params)
    else:
        params = _pfaff_params(args, None)
        circuit, report = extract_canonical_pfaff(params)
    _emit(circuit, report, args)
    return 0


# ----------------------------------------------------------------------
# verify
# ----------------------------------------------------------------------


def _parse_target(text: str):
    head, _, tail = text.partition(":")
    try:
        if head == "det":
            return ("det", int(tail))
        if head == "pfaff":
            return ("pfaff", int(tail))
        if head == "imm":
            w, _, d = tail.partition(",")
            return ("imm", (int(w), int(d)))
    except ValueError:
        pass
    raise ParameterError(
        f"unknown target {text!r}: expected det:T, pfaff:T, or imm:W,D"
    )


def _infer_oracle_order(f, mode: str):
    """Oracle argument order from the variables appearing in f."""
    xs = sorted(v for v in f.variables() if v[0] == "X")
    if not xs:
        raise ParameterError("the oracle polynomial uses no matrix variables")
    rows = max(v[1] for v in xs)
    cols = max(v[2] for v in xs)
    if mode == "auto":
        mode = "pfaff" if all(v[1] < v[2] for v in xs) else "det"
    if mode == "pfaff":
        return var_order_pfaff(max(rows, cols))
    return var_order_det(rows, cols)


def _target_values(kind, detail, field, y_vars, pts):
    count = pts.shape[0]
    if kind == "det":
        t = detail
        mats = np.zeros((count, t, t), dtype=np.int64)
        idx = {v: j for j, v in enumerate(y_vars)}
        for i in range(1, t + 1):
            for j in range(1, t + 1):
                var = ("y", i, j)
                if var not in idx:
                    raise ParameterError(
                        f"circuit inputs do not cover the {t}x{t} matrix "
                        f"(missing {var_name(var)})"
                    )
                mats[:, i - 1, j - 1] = pts[:, idx[var]]
        return batch_det(field, mats)
    if kind == "pfaff":
        t = detail
        idx = {v: j for j, v in enumerate(y_vars)}
        order = [("y",) + v[1:] for v in var_order_pfaff(t)]
        cols = []
        for var in order:
            if var not in idx:
                raise ParameterError(
                    f"circuit inputs do not cover the order-{t} skew matrix "
                    f"(missing {var_name(var)})"
                )
            cols.append(pts[:, idx[var]])
        upper = np.stack(cols, axis=1)
        return batch_pfaff(field, skew_from_upper(field, upper, t))
    W, D = detail
    prog = imm_abp(field, W, D)
    vals = np.empty(count, dtype=np.int64)
    for i in range(count):
        point = {v: int(pts[i, j]) for j, v in enumerate(y_vars)}
        vals[i] = prog.eval(point)
    return vals


def _cmd_verify(args) -> int:
    with open(args.circuit, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("kind") == "oracle_sum_summary":
        raise ParameterError(
            "this file is a size summary, not an explicit circuit; "
            "only explicit gate-list circuits can be re-verified"
        )
    circuit = OracleCircuit.from_jsonable(doc)
    field = circuit.field
    f = _load_poly(args.f, field.p)
    spec = spec_from_polynomial(f, _infer_oracle_order(f, args.mode))
    kind, detail = _parse_target(args.target)
    y_vars = circuit.input_variables()
    if not y_vars:
        raise ParameterError("the circuit has no input gates")
    rng = np.random.default_rng(args.seed)
    pts = rng.integers(0, field.p, size=(args.points, len(y_vars)))
    want = _target_values(kind, detail, field, y_vars, pts)
    power = args.power
    agreements = 0
    for i in range(args.points):
        point = {v: int(pts[i, j]) for j, v in enumerate(y_vars)}
        got = circuit.eval(point, spec)
        if got == field.pow(int(want[i]), power):
            agreements += 1
    passed = agreements == args.points
    print(
        json.dumps(
            {
                "target": args.target,
                "power": power,
                "points": args.points,
                "agreements": agreements,
                "passed": passed,
            },
            indent=2,
            sort_keys=True,
        )
    )
    if not passed:
        raise VerificationError(
            f"circuit disagreed with {args.target}^{power} at "
            f"{args.points - agreements} of {args.points} points"
        )
    return 0


# ----------------------------------------------------------------------
# isolate-stats
# ----------------------------------------------------------------------


def _cmd_isolate_stats(args) -> int:
    if args.collection:
        with open(args.collection, "r", encoding="utf-8") as fh:
            collection = json.load(fh)
    else:
        if args.count < 2:
            raise ParameterError("need at least two exponent vectors")
        rng = np.random.default_rng([args.seed, 999])
        seen: set = set()
        rows = []
        limit = 1000 * args.count
        while len(rows) < args.count and limit:
            cand = tuple(int(x) for x in rng.integers(0, args.K + 1, size=args.ell))
            limit -= 1
            if cand in seen:
                continue
            seen.add(cand)
            rows.append(list(cand))
        if len(rows) < args.count:
            raise ParameterError(
                f"could not draw {args.count} distinct exponent vectors "
                f"with K={args.K}, ell={args.ell}"
            )
        collection = rows
    stats = isolation_stats(
        collection, args.trials, _epsilon(args.epsilon), args.seed
    )
    stats["within_bound"] = stats["rate"] <= stats["bound"]
    print(json.dumps(stats, indent=2, sort_keys=True))
    return 0


# ----------------------------------------------------------------------
# Entry point
# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="idealred",
        description="depth-three oracle circuits from ideal membership",
    )
    top = parser.add_subparsers(dest="command", required=True)

    reduce_p = top.add_parser("reduce", help="build a final target circuit")
    targets = reduce_p.add_subparsers(dest="target_kind", required=True)

    det_p = targets.add_parser("det", help="t x t determinant")
    det_p.add_argument("--t", type=int, required=True, help="determinant order")
    det_p.add_argument("--n", type=int, help="matrix rows (default r)")
    det_p.add_argument("--m", type=int, help="matrix columns (default n)")
    det_p.add_argument("--r", type=int, help="ideal minor order (default: program vertex count)")
    _add_common_reduce_flags(det_p)
    det_p.set_defaults(run=_cmd_reduce_det)

    pf_p = targets.add_parser("pfaff", help="order-t Pfaffian (t even)")
    pf_p.add_argument("--t", type=int, required=True, help="Pfaffian order (even)")
    pf_p.add_argument("--n", type=int, help="half-dimension of the ambient matrix (default r)")
    pf_p.add_argument("--r", type=int, help="ideal sub-Pfaffian half-order (default: program vertex count)")
    _add_common_reduce_flags(pf_p)
    pf_p.set_defaults(run=_cmd_reduce_pfaff)

    imm_p = targets.add_parser("imm", help="iterated matrix multiplication")
    imm_p.add_argument("--W", type=int, required=True, help="matrix width")
    imm_p.add_argument("--D", type=int, required=True, help="number of factors")
    imm_p.add_argument("--n", type=int, help="matrix rows (default r)")
    imm_p.add_argument("--m", type=int, help="matrix columns (default n)")
    imm_p.add_argument("--r", type=int, help="ideal minor order (default: program vertex count)")
    _add_common_reduce_flags(imm_p)
    imm_p.set_defaults(run=_cmd_reduce_imm)

    ext_p = top.add_parser(
        "extract-canonical", help="canonical-member extraction stage only"
    )
    ext_p.add_argument("mode", choices=("det", "pfaff"))
    ext_p.add_argument("--n", type=int, help="rows (det) or half-dimension (pfaff)")
    ext_p.add_argument("--m", type=int, help="columns (det only, default n)")
    ext_p.add_argument("--r", type=int, required=True)
    _add_common_reduce_flags(ext_p)
    ext_p.set_defaults(run=_cmd_extract)

    ver_p = top.add_parser("verify", help="re-check an exported circuit")
    ver_p.add_argument("--circuit", required=True, metavar="CIRCUIT_JSON")
    ver_p.add_argument("--f", required=True, metavar="F_JSON")
    ver_p.add_argument("--target", required=True, help="det:T, pfaff:T, or imm:W,D")
    ver_p.add_argument("--points", type=int, default=100)
    ver_p.add_argument("--seed", type=int, default=0)
    ver_p.add_argument(
        "--power",
        type=int,
        default=1,
        help="compare against target**power (p^k in small characteristic)",
    )
    ver_p.add_argument(
        "--mode",
        choices=("auto", "det", "pfaff"),
        default="auto",
        help="oracle argument convention when f alone is ambiguous",
    )
    ver_p.set_defaults(run=_cmd_verify)

    iso_p = top.add_parser("isolate-stats", help="isolation failure-rate report")
    iso_p.add_argument("--K", type=int, default=4, help="max exponent in the collection")
    iso_p.add_argument("--ell", type=int, default=8, help="number of weighted variables")
    iso_p.add_argument("--count", type=int, default=32, help="collection size")
    iso_p.add_argument("--epsilon", default="1/2")
    iso_p.add_argument("--trials", type=int, default=1000)
    iso_p.add_argument("--seed", type=int, default=0)
    iso_p.add_argument(
        "--collection", metavar="JSON", help="explicit exponent vectors (list of lists)"
    )
    iso_p.set_defaults(run=_cmd_isolate_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.run(args)
    except _FAILED as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return 2
    except _REJECTED as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return 3
    except IdealredError as exc:  # any other library rejection
        print(f"rejected: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
