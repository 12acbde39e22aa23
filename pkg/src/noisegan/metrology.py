"""Phase-distribution metrology: identifiability analysis and the
adversarial reconstruction game for the dephasing-phase channel.

The channel applies U(s)^(x)n with U(s) = diag(1, e^{2 pi i s}), where s
is drawn from a distribution over the 2^m grid points b/2^m. Whether
that distribution can be identified from the channel at all is decided
by the Gram matrix of the branch Choi states; its eigenvalues have a
closed form in binomial coefficients, and the minimum eigenvalue is
positive exactly when n >= 2^{m-1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import game as _game
from .channels import _kl_raw
from .game import GameConfig, TrainingLog, _GenAdapter, _SpatialEngine, _run_loop
from .qsim import _fidelity_arrays

_SUM_TOL = 1e-10


@dataclass(frozen=True)
class MetrologyConfig:
    """Grid resolution m, probe count n, and the target distribution p(s)."""

    m: int
    n: int
    target_dist: np.ndarray

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be >= 1")
        dist = np.ascontiguousarray(self.target_dist, dtype=np.float64)
        object.__setattr__(self, "target_dist", dist)
        if dist.shape != (2**self.m,):
            raise ValueError(f"target_dist needs {2 ** self.m} entries")
        if dist.min() < 0 or abs(dist.sum() - 1.0) > _SUM_TOL:
            raise ValueError("target_dist must be normalized")


def gram_eigenvalues(m: int, n: int) -> np.ndarray:
    """Eigenvalues g_0..g_{2^m - 1} of the branch-Choi Gram matrix.

    The Gram matrix is circulant with symbol cos^{2n}(pi j / 2^m), so

        g_k = 2^{m - 2n} * sum of C(2n, r) over r in [0, 2n]
              with r = (n + k) mod 2^m.

    Exact integer binomials keep true zeros exact.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    size = 1 << m
    out = np.empty(size)
    for k in range(size):
        total = 0
        for r in range((n + k) % size, 2 * n + 1, size):
            total += math.comb(2 * n, r)
        out[k] = math.ldexp(float(total), m - 2 * n)
    return out


def brute_force_gram(m: int, n: int) -> np.ndarray:
    """Eigenvalues of the explicitly assembled Gram matrix (ascending).

    G_st = |<chi_s|chi_t>|^(2n) with <chi_s|chi_t> = (1 + e^{2 pi i (t-s)/2^m})/2.
    """
    if m > 6:
        raise ValueError("brute_force_gram supports m <= 6")
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    size = 1 << m
    s = np.arange(size)
    z = (1.0 + np.exp(2j * np.pi * (s[None, :] - s[:, None]) / size)) / 2.0
    gram = np.abs(z) ** (2 * n)
    return np.linalg.eigvalsh(gram)


def is_identifiable(m: int, n: int) -> bool:
    """True when n probes pin down a 2^m-point phase distribution."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    return n >= 2 ** (m - 1)


def phase_estimation_error(s: float, m: int, b_prime: int) -> float:
    """Probability that textbook m-bit phase estimation of phase s
    returns the grid outcome b_prime."""
    if not 0.0 <= s < 1.0:
        raise ValueError("s must lie in [0, 1)")
    size = 1 << m
    if not 0 <= b_prime < size:
        raise ValueError("b_prime must lie in [0, 2^m)")
    delta = 2.0 * np.pi * (s - b_prime / size)
    den = 1.0 - np.exp(1j * delta)
    if abs(den) < 1e-12:
        return 1.0
    num = 1.0 - np.exp(1j * size * delta)
    return float(abs(num / (size * den)) ** 2)


def _choi_overlap_frame(m: int, n: int):
    """Orthonormal-frame reduction of the branch-Choi span.

    Branch Choi states are |chi_b><chi_b| with overlaps
    <chi_a|chi_b> = ((1 + e^{2 pi i (s_b - s_a)})/2)^n. Any mixture's
    Choi state lives in their span, so fidelities reduce to r x r
    matrices W^dag G diag(p) G W with W an orthonormal basis of the span.
    """
    size = 1 << m
    s = np.arange(size) / size
    g = ((1.0 + np.exp(2j * np.pi * (s[None, :] - s[:, None]))) / 2.0) ** n
    vals, vecs = np.linalg.eigh(g)
    keep = vals > vals.max() * 1e-12
    w = vecs[:, keep] / np.sqrt(vals[keep])
    gw = g @ w

    def reduce(dist: np.ndarray) -> np.ndarray:
        return gw.conj().T @ (dist[:, None] * gw)

    return reduce


def choi_fidelity(m: int, n: int, p: np.ndarray, q: np.ndarray) -> float:
    """Fidelity of the Choi states of two phase-distribution channels."""
    reduce = _choi_overlap_frame(m, n)
    return _fidelity_arrays(reduce(np.asarray(p, float)), reduce(np.asarray(q, float)))


def _phase_branch_tables(m: int, n_sys: int, nfull: int):
    """(flips, phases) of the 2^m diagonal branch unitaries U(s_b)^(x)n
    acting on qubits 0..n_sys-1 of a 2^nfull register."""
    dim = 1 << nfull
    sysmask = ((1 << n_sys) - 1) << (nfull - n_sys)
    counts = np.array([bin(i & sysmask).count("1") for i in range(dim)])
    size = 1 << m
    flips = np.zeros(size, dtype=np.int64)
    phases = np.empty((size, dim), dtype=np.complex128)
    for b in range(size):
        phases[b] = np.exp(2j * np.pi * (b / size) * counts)
    return flips, phases


def run_metrology_game(config: MetrologyConfig, game_config: GameConfig):
    """Adversarially reconstruct the phase distribution.

    Reuses the spatial discriminator topology on n system qubits; the
    generator is a FULL softmax over the 2^m grid weights. The logged
    avg_fidelity column holds the Choi-state fidelity between target and
    proposal (output fidelity on basis inputs is blind to the phases),
    and the stopping rule compares it to game_config.fidelity_threshold.
    Returns (learnt distribution, TrainingLog).
    """
    if game_config.correlation_kind != _game.SPATIAL:
        raise ValueError("metrology game uses the SPATIAL layout")
    if game_config.n_uses != config.n:
        raise ValueError("game_config.n_uses must equal config.n")
    nfull = config.n + game_config.ancilla_count + 1
    flips, phases = _phase_branch_tables(config.m, config.n, nfull)
    engine = _SpatialEngine(
        config.n, game_config.ancilla_count, game_config.init_depth, flips, phases
    )
    adapter = _GenAdapter(_game.FULL_SOFTMAX, None, 1 << config.m, None)
    reduce = _choi_overlap_frame(config.m, config.n)
    a_target = reduce(config.target_dist)

    def fid_fn(q: np.ndarray) -> float:
        return _fidelity_arrays(a_target, reduce(q))

    rng = np.random.Generator(np.random.Philox(key=game_config.seed))
    gen, log = _run_loop(
        engine, config.target_dist, adapter, game_config, fid_fn, rng
    )
    return _game._softmax_neg(gen.betas), log
