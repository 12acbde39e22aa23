"""Dense complex linear algebra and exact pure-state / density-matrix
simulation for small registers (up to ~10 qubits).

Conventions used across the whole package:
  * qubit 0 is the most significant bit of the computational-basis index,
  * matrices are plain numpy complex128 arrays in row-major order
    (the ``ComplexMatrix`` alias below),
  * all expectation values are exact — there is no shot sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

ComplexMatrix = np.ndarray

_NORM_TOL = 1e-10
_HERM_TOL = 1e-10
_TRACE_TOL = 1e-10
_EIG_CLAMP = 1e-9


def _as_complex(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.complex128)


@dataclass(frozen=True)
class PureState:
    """Normalized state vector of `nqubits` qubits."""

    nqubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _as_complex(self.amplitudes)
        object.__setattr__(self, "amplitudes", amps)
        if self.nqubits < 0:
            raise ValueError("nqubits must be non-negative")
        if amps.shape != (2**self.nqubits,):
            raise ValueError(
                f"expected {2 ** self.nqubits} amplitudes, got shape {amps.shape}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > _NORM_TOL:
            raise ValueError(f"state norm {norm} deviates from 1 beyond {_NORM_TOL}")


def zero_state(nqubits: int) -> PureState:
    """|0...0> on `nqubits` qubits."""
    amps = np.zeros(2**nqubits, dtype=np.complex128)
    amps[0] = 1.0
    return PureState(nqubits, amps)


@dataclass(frozen=True)
class DensityMatrix:
    """Valid density operator: Hermitian, unit trace, PSD within tolerance."""

    nqubits: int
    matrix: np.ndarray

    def __post_init__(self):
        m = _as_complex(self.matrix)
        object.__setattr__(self, "matrix", m)
        dim = 2**self.nqubits
        if self.nqubits < 0:
            raise ValueError("nqubits must be non-negative")
        if m.shape != (dim, dim):
            raise ValueError(f"expected {dim}x{dim} matrix, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > _HERM_TOL:
            raise ValueError("density matrix is not Hermitian within 1e-10")
        tr = np.trace(m).real
        if abs(tr - 1.0) > _TRACE_TOL:
            raise ValueError(f"density matrix trace {tr} deviates from 1")
        if np.linalg.eigvalsh(m).min() < -_EIG_CLAMP:
            raise ValueError("density matrix has an eigenvalue below -1e-9")


def pure_dm(state: PureState) -> DensityMatrix:
    """|psi><psi| as a DensityMatrix."""
    return DensityMatrix(state.nqubits, np.outer(state.amplitudes, state.amplitudes.conj()))


def kron(a: ComplexMatrix, b: ComplexMatrix) -> ComplexMatrix:
    """Kronecker product; the first factor is the most significant qubit."""
    return np.kron(_as_complex(a), _as_complex(b))


def apply_gate(state: PureState, gate: ComplexMatrix, targets) -> PureState:
    """Apply `gate` to the listed target qubits (identity elsewhere)."""
    gate = _as_complex(gate)
    targets = list(targets)
    k = len(targets)
    if gate.shape != (2**k, 2**k):
        raise ValueError(f"gate shape {gate.shape} does not match {k} targets")
    if len(set(targets)) != k:
        raise ValueError("repeated target qubit")
    if any(t < 0 or t >= state.nqubits for t in targets):
        raise ValueError("target qubit out of range")
    if np.max(np.abs(gate @ gate.conj().T - np.eye(2**k))) > 1e-10:
        raise ValueError("gate is not unitary within 1e-10")
    bitpos = np.array([state.nqubits - 1 - t for t in targets], dtype=np.int64)
    out = kernels.apply_gate(state.amplitudes, gate, bitpos)
    return PureState(state.nqubits, out)


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Trace out all qubits not in `keep`; kept qubits stay in ascending order."""
    keep = sorted(set(keep))
    n = rho.nqubits
    if not keep:
        raise ValueError("keep set must be non-empty")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError("keep qubit out of range")
    tensor = rho.matrix.reshape((2,) * (2 * n))
    keep_set = set(keep)
    # row axis of qubit q is q, column axis is n+q; traced qubits share a label
    subscripts = list(range(n)) + [n + q if q in keep_set else q for q in range(n)]
    out_subscripts = keep + [n + q for q in keep]
    reduced = np.einsum(tensor, subscripts, out_subscripts)
    k = len(keep)
    return DensityMatrix(k, reduced.reshape(2**k, 2**k))


def psd_sqrt(m: ComplexMatrix) -> ComplexMatrix:
    """Principal square root of a PSD matrix (eigenvalues clamped at 0)."""
    m = _as_complex(m)
    if np.max(np.abs(m - m.conj().T)) > _HERM_TOL:
        raise ValueError("psd_sqrt requires a Hermitian matrix")
    vals, vecs = np.linalg.eigh(m)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def _fidelity_arrays(a: np.ndarray, b: np.ndarray) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2 on raw PSD arrays."""
    ra = psd_sqrt(a)
    inner = psd_sqrt(ra @ b @ ra)
    f = np.trace(inner).real ** 2
    return float(min(max(f, 0.0), 1.0))


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    if rho.nqubits != sigma.nqubits:
        raise ValueError("fidelity requires equal dimensions")
    return _fidelity_arrays(rho.matrix, sigma.matrix)


def projector_expectation(state: PureState, qubit: int, outcome: int) -> float:
    """Probability of measuring `outcome` on `qubit` in the computational basis."""
    if qubit < 0 or qubit >= state.nqubits:
        raise ValueError("qubit out of range")
    if outcome not in (0, 1):
        raise ValueError("outcome must be 0 or 1")
    bitpos = state.nqubits - 1 - qubit
    amps = state.amplitudes
    idx = np.arange(amps.shape[0])
    p1 = float(np.sum(np.abs(amps[(idx >> bitpos) & 1 == 1]) ** 2))
    return p1 if outcome == 1 else 1.0 - p1
