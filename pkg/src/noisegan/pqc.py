"""Parameterized quantum circuits: SU(4) two-qubit blocks, the staggered
layered ansatz, the QCNN readout structure, and parameter-shift gradients.

Every rotation parameter theta realizes exp(-i theta sigma / 2), so the
parameter-shift rule with +-pi/2 shifts is exact for all circuits built
here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import kernels
from .qsim import PureState

ROTATION_KINDS = ("RX", "RY", "RZ")
_KIND_CODES = {"RX": 0, "RY": 1, "RZ": 2, "CNOT": 3}


@dataclass(frozen=True)
class Gate:
    """One gate: a parameterized rotation or a CNOT (targets = control, target)."""

    kind: str
    targets: tuple
    param_index: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.kind in ROTATION_KINDS:
            if len(self.targets) != 1 or self.param_index is None:
                raise ValueError("rotation gates take one target and a param_index")
        elif self.kind == "CNOT":
            if len(self.targets) != 2 or self.targets[0] == self.targets[1]:
                raise ValueError("CNOT takes two distinct targets")
            if self.param_index is not None:
                raise ValueError("CNOT carries no parameter")
        else:
            raise ValueError(f"unknown gate kind {self.kind!r}")


@dataclass(frozen=True)
class ParamCircuit:
    """Ordered gate list over nqubits with nparams rotation parameters."""

    nqubits: int
    gates: tuple
    nparams: int

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if any(t < 0 or t >= self.nqubits for t in g.targets):
                raise ValueError(f"gate target out of range in {g}")
            if g.param_index is not None and not 0 <= g.param_index < self.nparams:
                raise ValueError(f"param_index out of range in {g}")


class QcnnLayer(NamedTuple):
    pairs: tuple  # ((keep, drop), ...) SU(4) blocks on active qubit pairs
    discarded: frozenset  # qubits forgotten after this layer


@dataclass(frozen=True)
class QcnnSpec:
    """Layer structure of a QCNN: pairings and per-layer discarded qubits."""

    nqubits: int
    layers: tuple
    measure_qubit: int

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        active = set(range(self.nqubits))
        for layer in self.layers:
            for a, b in layer.pairs:
                if a not in active or b not in active:
                    raise ValueError("QCNN layer pairs a non-active qubit")
            if not layer.discarded <= active:
                raise ValueError("QCNN discards a non-active qubit")
            if self.measure_qubit in layer.discarded:
                raise ValueError("measure qubit must stay active")
            survivors = active - layer.discarded
            if len(survivors) != -(-len(active) // 2):
                raise ValueError("QCNN layer must halve the active set (rounding up)")
            active = survivors
        if active != {self.measure_qubit}:
            raise ValueError("QCNN must end with only the measure qubit active")


def su4_block(q1: int, q2: int, param_offset: int) -> list:
    """Universal 15-parameter 3-CNOT two-qubit template on (q1, q2).

    Layout: (RZ,RY,RZ) triples on both qubits, CNOT(q2->q1), RZ(q1) and
    RY(q2), CNOT(q1->q2), RY(q2), CNOT(q2->q1), then (RZ,RY,RZ) triples
    on both qubits again.
    """
    if q1 == q2:
        raise ValueError("su4_block requires distinct qubits")
    p = param_offset
    return [
        Gate("RZ", (q1,), p + 0),
        Gate("RY", (q1,), p + 1),
        Gate("RZ", (q1,), p + 2),
        Gate("RZ", (q2,), p + 3),
        Gate("RY", (q2,), p + 4),
        Gate("RZ", (q2,), p + 5),
        Gate("CNOT", (q2, q1)),
        Gate("RZ", (q1,), p + 6),
        Gate("RY", (q2,), p + 7),
        Gate("CNOT", (q1, q2)),
        Gate("RY", (q2,), p + 8),
        Gate("CNOT", (q2, q1)),
        Gate("RZ", (q1,), p + 9),
        Gate("RY", (q1,), p + 10),
        Gate("RZ", (q1,), p + 11),
        Gate("RZ", (q2,), p + 12),
        Gate("RY", (q2,), p + 13),
        Gate("RZ", (q2,), p + 14),
    ]


def ansatz_pairs(nqubits: int, depth: int) -> list:
    """Block pairs of the staggered layered ansatz, in gate order."""
    if nqubits < 2:
        raise ValueError("layered ansatz needs at least 2 qubits")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    pairs = []
    for layer in range(1, depth + 1):
        start = 0 if layer % 2 == 1 else 1
        pairs.extend((q, q + 1) for q in range(start, nqubits - 1, 2))
    return pairs


def layered_ansatz(nqubits: int, depth: int) -> ParamCircuit:
    """Staggered SU(4) layers: odd layers pair (0,1),(2,3),...; even (1,2),(3,4),..."""
    gates = []
    offset = 0
    for a, b in ansatz_pairs(nqubits, depth):
        gates.extend(su4_block(a, b, offset))
        offset += 15
    return ParamCircuit(nqubits, tuple(gates), offset)


def qcnn(nqubits: int) -> tuple:
    """QCNN readout: pair adjacent active qubits, discard the higher index
    of each pair (the odd qubit out carries over), until one survives.

    Returns (QcnnSpec, ParamCircuit); the surviving qubit is the
    measurement qubit.
    """
    if nqubits < 2:
        raise ValueError("qcnn needs at least 2 qubits")
    active = list(range(nqubits))
    layers = []
    gates = []
    offset = 0
    while len(active) > 1:
        pairs = []
        discarded = set()
        for i in range(0, len(active) - 1, 2):
            a, b = active[i], active[i + 1]
            pairs.append((a, b))
            discarded.add(b)
            gates.extend(su4_block(a, b, offset))
            offset += 15
        layers.append(QcnnLayer(tuple(pairs), frozenset(discarded)))
        active = [q for q in active if q not in discarded]
    spec = QcnnSpec(nqubits, tuple(layers), active[0])
    return spec, ParamCircuit(nqubits, tuple(gates), offset)


def encode_gates(circuit: ParamCircuit):
    """Pack a gate list into the int arrays consumed by the kernels."""
    n = len(circuit.gates)
    kinds = np.empty(n, dtype=np.int64)
    q0 = np.empty(n, dtype=np.int64)
    q1 = np.full(n, -1, dtype=np.int64)
    pidx = np.full(n, -1, dtype=np.int64)
    for i, g in enumerate(circuit.gates):
        kinds[i] = _KIND_CODES[g.kind]
        q0[i] = g.targets[0]
        if g.kind == "CNOT":
            q1[i] = g.targets[1]
        else:
            pidx[i] = g.param_index
    return kinds, q0, q1, pidx


def run(circuit: ParamCircuit, params, input: PureState) -> PureState:
    """Apply the circuit's gates in order to `input`."""
    params = np.ascontiguousarray(params, dtype=np.float64)
    if params.shape != (circuit.nparams,):
        raise ValueError(
            f"expected {circuit.nparams} parameters, got shape {params.shape}"
        )
    if input.nqubits != circuit.nqubits:
        raise ValueError("input state size does not match circuit")
    kinds, q0, q1, pidx = encode_gates(circuit)
    amps = kernels.run_gates(
        input.amplitudes, kinds, q0, q1, pidx, params, circuit.nqubits
    )
    return PureState(circuit.nqubits, amps)


def param_shift_grad(eval: Callable, params) -> np.ndarray:
    """Exact gradient of a rotation-generated expectation via +-pi/2 shifts."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.empty(params.shape[0])
    for j in range(params.shape[0]):
        shifted = params.copy()
        shifted[j] = params[j] + np.pi / 2
        plus = eval(shifted)
        shifted[j] = params[j] - np.pi / 2
        minus = eval(shifted)
        grads[j] = (plus - minus) / 2
    return grads
