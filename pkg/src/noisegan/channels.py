"""Noise-channel models and metrics: spatially correlated Pauli channels,
random unitary maps, Choi states, KL divergence and averaged fidelity,
and the phase-distribution metrology channel.

Probability tables over Pauli strings are flat vectors of length 4^n in
base-4 index order: digit t of the flat index (most significant first)
is the Pauli letter (0=I, 1=X, 2=Y, 3=Z) acting on use/qubit t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .qsim import ComplexMatrix, DensityMatrix, fidelity, kron

_SUM_TOL = 1e-10

PAULI_1Q = (
    np.eye(2, dtype=np.complex128),
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
)


@dataclass(frozen=True)
class PauliIndex:
    """Multi-index over n Pauli letters."""

    n: int
    digits: tuple

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(int(d) for d in self.digits))
        if len(self.digits) != self.n or self.n < 1:
            raise ValueError("digit count must equal n >= 1")
        if any(d not in (0, 1, 2, 3) for d in self.digits):
            raise ValueError("Pauli digits must lie in {0,1,2,3}")

    @classmethod
    def from_flat(cls, n: int, k: int) -> "PauliIndex":
        digits = [(k >> (2 * (n - 1 - t))) & 3 for t in range(n)]
        return cls(n, tuple(digits))

    def to_flat(self) -> int:
        k = 0
        for d in self.digits:
            k = (k << 2) | d
        return k


@dataclass(frozen=True)
class ProbTable:
    """Probability vector over the 4^n Pauli multi-indices."""

    n: int
    probs: np.ndarray

    def __post_init__(self):
        probs = np.ascontiguousarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", probs)
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if probs.shape != (4**self.n,):
            raise ValueError(f"expected {4 ** self.n} entries, got {probs.shape}")
        if probs.min() < 0:
            raise ValueError("probabilities must be non-negative")
        if abs(probs.sum() - 1.0) > _SUM_TOL:
            raise ValueError(f"probabilities sum to {probs.sum()}, not 1")


@dataclass(frozen=True)
class RandomUnitaryMap:
    """Mixture of unitaries: branches of (matrix, weight)."""

    branches: tuple

    def __post_init__(self):
        branches = tuple(
            (np.ascontiguousarray(u, dtype=np.complex128), float(w))
            for u, w in self.branches
        )
        object.__setattr__(self, "branches", branches)
        if not branches:
            raise ValueError("a random unitary map needs at least one branch")
        total = sum(w for _, w in branches)
        if any(w < 0 for _, w in branches) or abs(total - 1.0) > _SUM_TOL:
            raise ValueError("branch weights must be non-negative and sum to 1")
        dim = branches[0][0].shape[0]
        eye = np.eye(dim)
        for u, _ in branches:
            if u.shape != (dim, dim):
                raise ValueError("all branch unitaries must share one dimension")
            if np.max(np.abs(u @ u.conj().T - eye)) > 1e-10:
                raise ValueError("branch matrix is not unitary within 1e-10")


@dataclass(frozen=True)
class CorrelationModel:
    """Single-use prior plus a memory weight mu interpolating to full correlation."""

    prior: ProbTable
    mu: float

    def __post_init__(self):
        if self.prior.n != 1:
            raise ValueError("correlation prior must be a single-use table")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError("mu must lie in [0, 1]")


def pauli_string_tables(n: int, nqubits: int):
    """(flips, phases) of all 4^n Pauli strings, digit t on qubit t.

    Acting on a 2^nqubits register: string k maps amplitude j to
    phases[k, j] * amplitude[j ^ flips[k]].
    """
    dim = 1 << nqubits
    count = 4**n
    flips = np.zeros(count, dtype=np.int64)
    phases = np.ones((count, dim), dtype=np.complex128)
    singles = [
        [kernels.pauli1(dim, nqubits - 1 - t, d) for d in range(4)] for t in range(n)
    ]
    for k in range(count):
        f = 0
        ph = None
        for t in range(n):
            d = (k >> (2 * (n - 1 - t))) & 3
            ft, pt = singles[t][d]
            f ^= ft
            ph = pt if ph is None else ph * pt
        flips[k] = f
        phases[k] = ph
    return flips, phases


def apply_pauli_spatial(table: ProbTable, rho: DensityMatrix) -> DensityMatrix:
    """Sum_k p_k sigma_k rho sigma_k over all Pauli strings."""
    if rho.nqubits != table.n:
        raise ValueError("state size does not match table")
    n = table.n
    dim = 1 << n
    flips, phases = pauli_string_tables(n, n)
    out = np.zeros((dim, dim), dtype=np.complex128)
    m = rho.matrix
    idx = np.arange(dim)
    for k in range(4**n):
        p = table.probs[k]
        if p == 0.0:
            continue
        perm = idx ^ flips[k]
        ph = phases[k][perm]  # sigma maps |i> to ph'[i^f] |i^f>
        out += p * (np.outer(ph, ph.conj()) * m[np.ix_(perm, perm)])
    return DensityMatrix(n, out)


def correlated_table(model: CorrelationModel, n: int) -> ProbTable:
    """Markov-correlated Pauli table: each later letter repeats the previous
    one with weight mu, otherwise redraws from the prior."""
    if n < 1:
        raise ValueError("n must be >= 1")
    p = model.prior.probs
    mu = model.mu
    v = p.copy()
    letters = np.arange(4)
    for _ in range(n - 1):
        last = np.arange(v.shape[0]) % 4
        step = (1 - mu) * p[None, :] + mu * (letters[None, :] == last[:, None])
        v = (v[:, None] * step).reshape(-1)
    return ProbTable(n, v / v.sum())


def factorized_table(priors) -> ProbTable:
    """Product distribution of independent single-use tables."""
    priors = list(priors)
    if not priors:
        raise ValueError("factorized_table needs at least one prior")
    v = priors[0].probs.copy()
    for prior in priors[1:]:
        if prior.n != 1:
            raise ValueError("each factor must be a single-use table")
        v = (v[:, None] * prior.probs[None, :]).reshape(-1)
    return ProbTable(len(priors), v)


def pauli_map(table: ProbTable) -> RandomUnitaryMap:
    """The ProbTable's channel as an explicit mixture of Pauli-string unitaries."""
    mats = []
    for k in range(4**table.n):
        digits = PauliIndex.from_flat(table.n, k).digits
        u = PAULI_1Q[digits[0]]
        for d in digits[1:]:
            u = kron(u, PAULI_1Q[d])
        mats.append(u)
    return RandomUnitaryMap(tuple((u, w) for u, w in zip(mats, table.probs)))


def choi_state(map: RandomUnitaryMap, nqubits: int) -> DensityMatrix:
    """(I (x) Phi)(|Omega><Omega|) for the channel Phi given by `map`.

    The first nqubits are the untouched reference half, the second the
    channel input/output half.
    """
    dim = 1 << nqubits
    if map.branches[0][0].shape[0] != dim:
        raise ValueError("map dimension does not match nqubits")
    out = np.zeros((dim * dim, dim * dim), dtype=np.complex128)
    scale = 1.0 / dim
    for u, w in map.branches:
        if w == 0.0:
            continue
        # (I (x) U)|Omega> has amplitude U[j, i]/sqrt(dim) at index (i << n) | j
        psi = (u.T).reshape(-1) * np.sqrt(scale)
        out += w * np.outer(psi, psi.conj())
    return DensityMatrix(2 * nqubits, out)


def _kl_raw(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    if np.any(q[mask] == 0):
        return float("inf")
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def kl_divergence(p: ProbTable, q: ProbTable) -> float:
    """Sum_k p_k log(p_k / q_k); +inf when q misses support of p."""
    if p.n != q.n:
        raise ValueError("tables must share n")
    return _kl_raw(p.probs, q.probs)


def avg_fidelity(real, fake, n: int) -> float:
    """Mean fidelity of the two channels' outputs over computational basis inputs.

    `real` and `fake` are channel evaluators: callables mapping a
    DensityMatrix on n qubits to an output DensityMatrix.
    """
    dim = 1 << n
    total = 0.0
    for i in range(dim):
        m = np.zeros((dim, dim), dtype=np.complex128)
        m[i, i] = 1.0
        basis = DensityMatrix(n, m)
        total += fidelity(real(basis), fake(basis))
    return total / dim


def metrology_map(m: int, dist, n: int) -> RandomUnitaryMap:
    """Phase-distribution channel: mixture of U(s_b)^{(x)n}, s_b = b/2^m,
    U(s) = diag(1, e^{2 pi i s})."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    dist = np.ascontiguousarray(dist, dtype=np.float64)
    if dist.shape != (2**m,):
        raise ValueError(f"expected {2 ** m} probabilities, got {dist.shape}")
    if dist.min() < 0 or abs(dist.sum() - 1.0) > _SUM_TOL:
        raise ValueError("phase distribution must be normalized")
    branches = []
    for b in range(2**m):
        s = b / 2**m
        u1 = np.diag([1.0, np.exp(2j * np.pi * s)]).astype(np.complex128)
        u = u1
        for _ in range(n - 1):
            u = kron(u, u1)
        branches.append((u, float(dist[b])))
    return RandomUnitaryMap(tuple(branches))
