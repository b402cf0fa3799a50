"""Oracle-circuit DAGs: construction, metrics, evaluation, serialization.

A circuit is a topologically ordered list of gates; gate kinds are
``input``, ``const``, ``sum`` (weighted sum, scalar weights live on the
wires and are free for the size metric), ``prod``, and ``oracle`` (applies
a fixed black-box polynomial to its ordered children).  Size counts gates
plus wires; depth counts non-input gates along the longest path.

Pipeline outputs are huge weighted sums of oracle calls over affine maps,
so this module also provides :class:`AffineOracleSum`, a compact form of a
depth-three circuit (top weighted sum, middle oracle gates, bottom affine
sums) that evaluates in bulk without materializing gate objects.
"""

import numpy as np

from .errors import DeskCapError, MissingAssignmentError, ParameterError
from .field import PrimeField
from .poly import var_from_name, var_name

GATE_KINDS = ("input", "const", "sum", "prod", "oracle")

EXPLICIT_GATE_CAP = 200000


class OracleSpec:
    """A black-box polynomial gate: arity, total degree, and evaluators."""

    __slots__ = ("arity", "degree", "evaluator", "batch_evaluator")

    def __init__(self, arity, degree, evaluator, batch_evaluator=None):
        if arity <= 0:
            raise ParameterError("oracle arity must be positive")
        if degree < 1:
            raise ParameterError("oracle degree must be at least 1")
        self.arity = int(arity)
        self.degree = int(degree)
        self.evaluator = evaluator
        self.batch_evaluator = batch_evaluator

    def call(self, args) -> int:
        if len(args) != self.arity:
            raise ParameterError(
                f"oracle expects {self.arity} arguments, got {len(args)}"
            )
        return int(self.evaluator(tuple(args)))

    def call_batch(self, arr: np.ndarray) -> np.ndarray:
        """Evaluate on a (B, arity) int64 array, returning (B,)."""
        if arr.ndim != 2 or arr.shape[1] != self.arity:
            raise ParameterError("batch input must have shape (B, arity)")
        if self.batch_evaluator is not None:
            return self.batch_evaluator(arr)
        return np.array(
            [self.evaluator(tuple(int(v) for v in row)) for row in arr],
            dtype=np.int64,
        )


def spec_from_polynomial(f, var_order) -> OracleSpec:
    """Wrap a sparse polynomial as an oracle over the given argument order."""
    order = tuple(var_order)
    deg = f.degree()
    if deg is None or deg < 1:
        raise ParameterError("oracle polynomial must be nonconstant")

    def evaluator(args):
        return f.eval(dict(zip(order, args)))

    def batch_evaluator(arr):
        return f.eval_arr({v: arr[:, i] for i, v in enumerate(order)})

    return OracleSpec(len(order), deg, evaluator, batch_evaluator)


class Gate:
    __slots__ = ("kind", "var", "value", "children", "weights")

    def __init__(self, kind, *, var=None, value=None, children=(), weights=()):
        self.kind = kind
        self.var = var
        self.value = value
        self.children = tuple(children)
        self.weights = tuple(weights)

    def __repr__(self):
        if self.kind == "input":
            return f"Gate(input {self.var})"
        if self.kind == "const":
            return f"Gate(const {self.value})"
        return f"Gate({self.kind} <-{len(self.children)})"


class CircuitMetrics:
    __slots__ = (
        "size",
        "depth",
        "top_gate_kind",
        "oracle_call_count",
        "product_gate_count",
    )

    def __init__(
        self, size, depth, top_gate_kind, oracle_call_count, product_gate_count=0
    ):
        self.size = size
        self.depth = depth
        self.top_gate_kind = top_gate_kind
        self.oracle_call_count = oracle_call_count
        self.product_gate_count = product_gate_count

    def to_dict(self):
        return {
            "size": self.size,
            "depth": self.depth,
            "top_gate_kind": self.top_gate_kind,
            "oracle_call_count": self.oracle_call_count,
            "product_gate_count": self.product_gate_count,
        }

    def __repr__(self):
        return (
            f"CircuitMetrics(size={self.size}, depth={self.depth}, "
            f"top={self.top_gate_kind!r}, oracle_calls={self.oracle_call_count}, "
            f"products={self.product_gate_count})"
        )


class OracleCircuit:
    """Immutable gate DAG; children always precede parents in the gate list."""

    __slots__ = ("field", "gates", "output")

    def __init__(self, field: PrimeField, gates, output: int):
        self.field = field
        self.gates = tuple(gates)
        if not self.gates:
            raise ParameterError("circuit needs at least one gate")
        if not 0 <= output < len(self.gates):
            raise ParameterError("output gate id out of range")
        self.output = output
        self._validate()

    def _validate(self):
        arity = None
        for i, g in enumerate(self.gates):
            if g.kind not in GATE_KINDS:
                raise ParameterError(f"unknown gate kind {g.kind!r}")
            for c in g.children:
                if not 0 <= c < i:
                    raise ParameterError(
                        f"gate {i} child {c} does not precede it"
                    )
            if g.kind == "input":
                if g.var is None or g.children:
                    raise ParameterError("input gates carry a variable only")
            elif g.kind == "const":
                if g.value is None or g.children:
                    raise ParameterError("const gates carry a value only")
                if not 0 <= g.value < self.field.p:
                    raise ParameterError("const value out of field range")
            elif g.kind == "sum":
                if len(g.weights) != len(g.children):
                    raise ParameterError("sum weights/children mismatch")
                if any(not 0 <= w < self.field.p for w in g.weights):
                    raise ParameterError("sum weight out of field range")
            elif g.kind == "oracle":
                if not g.children:
                    raise ParameterError("oracle gate needs children")
                if arity is None:
                    arity = len(g.children)
                elif len(g.children) != arity:
                    raise ParameterError(
                        "oracle gates disagree on argument count"
                    )

    @property
    def oracle_arity(self):
        for g in self.gates:
            if g.kind == "oracle":
                return len(g.children)
        return None

    def num_wires(self) -> int:
        return sum(len(g.children) for g in self.gates)

    def depth(self) -> int:
        depths = [0] * len(self.gates)
        for i, g in enumerate(self.gates):
            if g.kind in ("input", "const"):
                depths[i] = 0
            else:
                depths[i] = 1 + max(
                    (depths[c] for c in g.children), default=0
                )
        return depths[self.output]

    def metrics(self) -> CircuitMetrics:
        calls = sum(1 for g in self.gates if g.kind == "oracle")
        prods = sum(1 for g in self.gates if g.kind == "prod")
        return CircuitMetrics(
            size=len(self.gates) + self.num_wires(),
            depth=self.depth(),
            top_gate_kind=self.gates[self.output].kind,
            oracle_call_count=calls,
            product_gate_count=prods,
        )

    def eval(self, point, spec: OracleSpec | None = None) -> int:
        p = self.field.p
        vals = [0] * len(self.gates)
        for i, g in enumerate(self.gates):
            if g.kind == "input":
                if g.var not in point:
                    raise MissingAssignmentError(
                        f"no value for input {var_name(g.var)}"
                    )
                vals[i] = point[g.var] % p
            elif g.kind == "const":
                vals[i] = g.value
            elif g.kind == "sum":
                vals[i] = (
                    sum(w * vals[c] for c, w in zip(g.children, g.weights)) % p
                )
            elif g.kind == "prod":
                acc = 1
                for c in g.children:
                    acc = acc * vals[c] % p
                vals[i] = acc
            else:
                if spec is None:
                    raise ParameterError(
                        "circuit has oracle gates but no oracle was supplied"
                    )
                if len(g.children) != spec.arity:
                    raise ParameterError(
                        f"oracle gate arity {len(g.children)} != spec arity "
                        f"{spec.arity}"
                    )
                vals[i] = spec.call([vals[c] for c in g.children]) % p
        return vals[self.output]

    def input_variables(self):
        return sorted({g.var for g in self.gates if g.kind == "input"})

    def lint(self) -> list[str]:
        warnings = []
        prods = sum(1 for g in self.gates if g.kind == "prod")
        if prods:
            warnings.append(f"{prods} product gate(s) present")
        reachable = {self.output}
        for i in range(len(self.gates) - 1, -1, -1):
            if i in reachable:
                reachable.update(self.gates[i].children)
        dead = len(self.gates) - len(reachable)
        if dead:
            warnings.append(f"{dead} gate(s) unreachable from the output")
        for i, g in enumerate(self.gates):
            if g.kind == "sum" and not g.children:
                warnings.append(f"gate {i} is an empty sum")
        return warnings

    def to_jsonable(self) -> dict:
        gates = []
        for i, g in enumerate(self.gates):
            doc = {"id": i, "kind": g.kind}
            if g.kind == "input":
                doc["var"] = var_name(g.var)
            elif g.kind == "const":
                doc["value"] = str(g.value)
            else:
                doc["children"] = list(g.children)
                if g.kind == "sum":
                    doc["weights"] = [str(w) for w in g.weights]
            gates.append(doc)
        return {
            "kind": "oracle_circuit",
            "prime": str(self.field.p),
            "output": self.output,
            "gates": gates,
        }

    @classmethod
    def from_jsonable(cls, doc) -> "OracleCircuit":
        if doc.get("kind") != "oracle_circuit":
            raise ParameterError("not an oracle-circuit document")
        field = PrimeField(int(doc["prime"]))
        gates = []
        for i, gd in enumerate(doc["gates"]):
            if gd["id"] != i:
                raise ParameterError("gate ids must be consecutive from 0")
            kind = gd["kind"]
            if kind == "input":
                gates.append(Gate("input", var=var_from_name(gd["var"])))
            elif kind == "const":
                gates.append(Gate("const", value=int(gd["value"])))
            elif kind == "sum":
                gates.append(
                    Gate(
                        "sum",
                        children=gd["children"],
                        weights=[int(w) for w in gd["weights"]],
                    )
                )
            else:
                gates.append(Gate(kind, children=gd["children"]))
        return cls(field, gates, doc["output"])


class CircuitBuilder:
    """Incremental builder; dedupes input and constant gates."""

    def __init__(self, field: PrimeField):
        self.field = field
        self._gates: list[Gate] = []
        self._inputs: dict = {}
        self._consts: dict = {}

    def _add(self, gate: Gate) -> int:
        self._gates.append(gate)
        return len(self._gates) - 1

    def input(self, var) -> int:
        if var not in self._inputs:
            self._inputs[var] = self._add(Gate("input", var=var))
        return self._inputs[var]

    def const(self, value: int) -> int:
        value %= self.field.p
        if value not in self._consts:
            self._consts[value] = self._add(Gate("const", value=value))
        return self._consts[value]

    def sum(self, pairs) -> int:
        children, weights = [], []
        for child, w in pairs:
            w %= self.field.p
            if w:
                children.append(child)
                weights.append(w)
        return self._add(Gate("sum", children=children, weights=weights))

    def prod(self, children) -> int:
        return self._add(Gate("prod", children=children))

    def oracle(self, children) -> int:
        return self._add(Gate("oracle", children=children))

    def build(self, output: int | None = None) -> OracleCircuit:
        if output is None:
            output = len(self._gates) - 1
        return OracleCircuit(self.field, self._gates, output)


def compose_linear_preimage(field, spec: OracleSpec, forms) -> OracleCircuit:
    """Depth-2 circuit computing the oracle applied to affine input forms.

    ``forms`` holds one ``(constant, {var: coeff})`` pair per oracle slot.
    """
    forms = list(forms)
    if len(forms) != spec.arity:
        raise ParameterError(
            f"need {spec.arity} affine forms, got {len(forms)}"
        )
    b = CircuitBuilder(field)
    slots = []
    for const, terms in forms:
        pairs = [(b.input(v), c) for v, c in sorted(terms.items()) if c % field.p]
        if const % field.p:
            pairs.append((b.const(1), const))
        slots.append(b.sum(pairs))
    out = b.oracle(slots)
    return b.build(out)


def merge_top_sums(circuit: OracleCircuit) -> OracleCircuit:
    """Fold sum-children of a top sum gate into it, dropping one layer.

    Evaluation is preserved exactly; unreachable gates are pruned so the
    size metric reflects the merged circuit.
    """
    top = circuit.gates[circuit.output]
    if top.kind != "sum":
        return circuit
    p = circuit.field.p
    merged: dict[int, int] = {}
    for child, w in zip(top.children, top.weights):
        g = circuit.gates[child]
        if g.kind == "sum":
            for gc, gw in zip(g.children, g.weights):
                merged[gc] = (merged.get(gc, 0) + w * gw) % p
        else:
            merged[child] = (merged.get(child, 0) + w) % p
    pairs = [(c, w) for c, w in sorted(merged.items()) if w]
    keep = {c for c, _ in pairs}
    for i in range(len(circuit.gates) - 1, -1, -1):
        if i in keep:
            keep.update(circuit.gates[i].children)
    remap, gates = {}, []
    for i in sorted(keep):
        g = circuit.gates[i]
        gates.append(
            Gate(
                g.kind,
                var=g.var,
                value=g.value,
                children=[remap[c] for c in g.children],
                weights=g.weights,
            )
        )
        remap[i] = len(gates) - 1
    gates.append(
        Gate(
            "sum",
            children=[remap[c] for c, _ in pairs],
            weights=[w for _, w in pairs],
        )
    )
    return OracleCircuit(circuit.field, gates, len(gates) - 1)


class AffineOracleSum:
    """Compact depth-three circuit: weighted sum of oracle calls on affine maps.

    Represents ``constant + Σ_k weight_k · oracle(map_k(inputs))`` where each
    map is affine.  Maps are produced chunk-wise by a provider callback
    ``provider(lo, hi) -> int64 array (hi-lo, arity, n_inputs+1)`` whose last
    coefficient column is the constant term, so instances with millions of
    calls never hold all maps in memory at once.
    """

    __slots__ = (
        "field",
        "spec",
        "inputs",
        "weights",
        "provider",
        "constant",
        "chunk",
        "_wire_stats",
    )

    def __init__(
        self,
        field: PrimeField,
        spec: OracleSpec,
        inputs,
        weights,
        provider,
        constant: int = 0,
        chunk: int = 1 << 15,
    ):
        self.field = field
        self.spec = spec
        self.inputs = tuple(inputs)
        self.weights = np.asarray(weights, dtype=np.int64) % field.p
        if self.weights.ndim != 1 or not len(self.weights):
            raise ParameterError("need a nonempty 1-d weight vector")
        self.provider = provider
        self.constant = constant % field.p
        self.chunk = chunk
        self._wire_stats = None

    @classmethod
    def from_maps(cls, field, spec, inputs, weights, maps, constant=0):
        arr = np.asarray(maps, dtype=np.int64) % field.p
        if arr.shape != (len(weights), spec.arity, len(tuple(inputs)) + 1):
            raise ParameterError("map array shape mismatch")
        return cls(
            field, spec, inputs, weights, lambda lo, hi: arr[lo:hi], constant
        )

    @property
    def call_count(self) -> int:
        return len(self.weights)

    def _eval_chunk(self, maps: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """maps (C, A, I+1), pts (P, I) -> oracle values (C, P)."""
        p = self.field.p
        P = pts.shape[0]
        if P > 1:
            const = ~np.any(maps[:, :, :-1], axis=(1, 2))
            if const.any():
                # rows whose maps ignore the input repeat one value per point
                out = np.empty((maps.shape[0], P), dtype=np.int64)
                cvals = self.spec.call_batch(maps[const, :, -1] % p) % p
                out[const] = cvals[:, None]
                varying = ~const
                if varying.any():
                    out[varying] = self._eval_chunk_dense(maps[varying], pts)
                return out
        return self._eval_chunk_dense(maps, pts)

    def _eval_chunk_dense(self, maps: np.ndarray, pts: np.ndarray) -> np.ndarray:
        p = self.field.p
        ext = np.concatenate(
            [pts % p, np.ones((pts.shape[0], 1), dtype=np.int64)], axis=1
        )
        C, A = maps.shape[0], maps.shape[1]
        args = np.zeros((C, A, pts.shape[0]), dtype=np.int64)
        for i in range(ext.shape[1]):
            args = (args + maps[:, :, i, None] * ext[None, None, :, i]) % p
        flat = args.transpose(0, 2, 1).reshape(-1, A)
        vals = self.spec.call_batch(flat) % p
        return vals.reshape(C, pts.shape[0])

    def eval_many(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at each row of a (P, n_inputs) array."""
        p = self.field.p
        pts = np.asarray(points, dtype=np.int64)
        if pts.ndim != 2 or pts.shape[1] != len(self.inputs):
            raise ParameterError("points must have shape (P, n_inputs)")
        acc = np.full(pts.shape[0], self.constant, dtype=np.int64)
        for lo in range(0, self.call_count, self.chunk):
            hi = min(lo + self.chunk, self.call_count)
            maps = np.asarray(self.provider(lo, hi), dtype=np.int64) % p
            vals = self._eval_chunk(maps, pts)
            weighted = (self.weights[lo:hi, None] * vals) % p
            acc = (acc + weighted.sum(axis=0) % p) % p
        return acc

    def eval(self, point: dict) -> int:
        row = np.array(
            [[point[v] for v in self.inputs]], dtype=np.int64
        )
        return int(self.eval_many(row)[0])

    def rescale(self, scalar: int) -> "AffineOracleSum":
        s = scalar % self.field.p
        return AffineOracleSum(
            self.field,
            self.spec,
            self.inputs,
            (self.weights * s) % self.field.p,
            self.provider,
            self.constant * s % self.field.p,
            self.chunk,
        )

    def _count_wires(self):
        """One pass over the maps counting nonzero bottom-layer wires."""
        if self._wire_stats is None:
            nz_coeff = 0
            nz_const = 0
            for lo in range(0, self.call_count, self.chunk):
                hi = min(lo + self.chunk, self.call_count)
                maps = np.asarray(self.provider(lo, hi), dtype=np.int64)
                maps = maps % self.field.p
                nz_coeff += int(np.count_nonzero(maps[:, :, :-1]))
                nz_const += int(np.count_nonzero(maps[:, :, -1]))
            self._wire_stats = (nz_coeff, nz_const)
        return self._wire_stats

    def metrics(self) -> CircuitMetrics:
        nz_coeff, nz_const = self._count_wires()
        calls, arity = self.call_count, self.spec.arity
        n_const_gates = 1 if (nz_const or self.constant) else 0
        gates = len(self.inputs) + n_const_gates + calls * arity + calls + 1
        wires = (
            nz_coeff
            + nz_const
            + calls * arity
            + int(np.count_nonzero(self.weights))
            + (1 if self.constant else 0)
        )
        return CircuitMetrics(
            size=gates + wires,
            depth=3,
            top_gate_kind="sum",
            oracle_call_count=calls,
            product_gate_count=0,
        )

    def lint(self) -> list[str]:
        return []

    def to_oracle_circuit(self, gate_cap: int = EXPLICIT_GATE_CAP) -> OracleCircuit:
        calls, arity = self.call_count, self.spec.arity
        est = len(self.inputs) + 1 + calls * (arity + 1) + 1
        if est > gate_cap:
            raise DeskCapError(
                f"explicit circuit would need ~{est} gates (cap {gate_cap})"
            )
        b = CircuitBuilder(self.field)
        input_ids = [b.input(v) for v in self.inputs]
        top_pairs = []
        for lo in range(0, calls, self.chunk):
            hi = min(lo + self.chunk, calls)
            maps = np.asarray(self.provider(lo, hi), dtype=np.int64) % self.field.p
            for k in range(hi - lo):
                slots = []
                for a in range(arity):
                    pairs = [
                        (input_ids[i], int(maps[k, a, i]))
                        for i in range(len(self.inputs))
                        if maps[k, a, i]
                    ]
                    if maps[k, a, -1]:
                        pairs.append((b.const(1), int(maps[k, a, -1])))
                    slots.append(b.sum(pairs))
                gid = b.oracle(slots)
                top_pairs.append((gid, int(self.weights[lo + k])))
        if self.constant:
            top_pairs.append((b.const(1), self.constant))
        out = b.sum(top_pairs)
        return b.build(out)
