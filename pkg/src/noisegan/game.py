"""Adversarial reconstruction game.

A softmax generator proposes a Pauli probability table q; a circuit
discriminator (entangling preparation, the channel branch, then a
convolutional read-out ending in a single-qubit measurement) is trained
to separate the real table p from q. The payoff is

    S = sum_k (p_k - q_k) * s_k,   s_k = survivor-excitation of branch k,

which the discriminator ascends and the generator descends. Both sides
take optimistic ADAM steps; turns alternate a block of discriminator
steps with a block of generator steps.

Discriminator register layout: qubits [0, n_sys) carry the channel
branch, qubits [n_sys, n_sys + ancilla_count) are entangled ancillas,
and one extra qubit joins for the read-out circuit, which measures
qubit 0. TEMPORAL games use a single system qubit visited n_uses times,
with a fresh comb block on system+ancillas between visits.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels, pqc
from .channels import (
    CorrelationModel,
    ProbTable,
    _kl_raw,
    correlated_table,
    pauli_string_tables,
)

SPATIAL = "SPATIAL"
TEMPORAL = "TEMPORAL"
CORRELATION_KINDS = (SPATIAL, TEMPORAL)

FULL_SOFTMAX = "FULL_SOFTMAX"
FACTORIZED_SOFTMAX = "FACTORIZED_SOFTMAX"
MU_ONLY = "MU_ONLY"
GENERATOR_MODES = (FULL_SOFTMAX, FACTORIZED_SOFTMAX, MU_ONLY)

_ADAM_B1 = 0.9
_ADAM_B2 = 0.999
_ADAM_EPS = 1e-8


# ---------------------------------------------------------------------------
# parameter containers


@dataclass(frozen=True)
class GeneratorParams:
    """Generator state: softmax logits, or a mu logit over a known prior."""

    mode: str
    betas: np.ndarray | None = None
    mu_logit: float | None = None
    known_prior: ProbTable | None = None

    def __post_init__(self):
        if self.mode not in GENERATOR_MODES:
            raise ValueError(f"unknown generator mode {self.mode!r}")
        if self.mode == MU_ONLY:
            if self.mu_logit is None or self.known_prior is None:
                raise ValueError("MU_ONLY needs mu_logit and known_prior")
            if self.betas is not None:
                raise ValueError("MU_ONLY carries no betas")
        else:
            if self.betas is None or self.mu_logit is not None:
                raise ValueError(f"{self.mode} needs betas and no mu_logit")
            betas = np.ascontiguousarray(self.betas, dtype=np.float64)
            object.__setattr__(self, "betas", betas)
            if self.mode == FACTORIZED_SOFTMAX:
                if betas.ndim != 2 or betas.shape[1] != 4:
                    raise ValueError("FACTORIZED_SOFTMAX betas must be (n, 4)")
            elif betas.ndim != 1:
                raise ValueError("FULL_SOFTMAX betas must be a flat vector")


@dataclass(frozen=True)
class DiscriminatorParams:
    """Circuit parameters: preparation, per-step comb blocks, read-out."""

    theta_init: np.ndarray
    theta_mid: tuple
    theta_meas: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "theta_init", np.ascontiguousarray(self.theta_init, np.float64)
        )
        object.__setattr__(
            self,
            "theta_mid",
            tuple(np.ascontiguousarray(t, np.float64) for t in self.theta_mid),
        )
        object.__setattr__(
            self, "theta_meas", np.ascontiguousarray(self.theta_meas, np.float64)
        )


@dataclass(frozen=True)
class OptimizerState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int
    prev_increment: np.ndarray


def zero_optimizer(nparams: int) -> OptimizerState:
    z = np.zeros(nparams)
    return OptimizerState(z, z.copy(), 0, z.copy())


@dataclass(frozen=True)
class GameConfig:
    """Hyperparameters of one adversarial run.

    ancilla_count defaults to the system size (SPATIAL) or 1 (TEMPORAL);
    init_depth defaults to 3 when the prepared register has at most 3
    qubits and 4 otherwise.
    """

    n_uses: int
    correlation_kind: str
    seed: int
    ancilla_count: int | None = None
    init_depth: int | None = None
    learning_rate_D: float = 0.05
    learning_rate_G: float = 0.05
    D_steps_per_turn: int = 20
    G_steps_per_turn: int = 1
    max_turns: int = 500
    fidelity_threshold: float = 0.999

    def __post_init__(self):
        if self.correlation_kind not in CORRELATION_KINDS:
            raise ValueError(f"unknown correlation kind {self.correlation_kind!r}")
        if self.n_uses < 1:
            raise ValueError("n_uses must be >= 1")
        n_sys = self.n_uses if self.correlation_kind == SPATIAL else 1
        if self.ancilla_count is None:
            anc = n_sys if self.correlation_kind == SPATIAL else 1
            object.__setattr__(self, "ancilla_count", anc)
        if self.ancilla_count < 0 or n_sys + self.ancilla_count < 2:
            raise ValueError("need at least two prepared qubits")
        if self.init_depth is None:
            depth = 3 if n_sys + self.ancilla_count <= 3 else 4
            object.__setattr__(self, "init_depth", depth)
        if self.init_depth < 1:
            raise ValueError("init_depth must be >= 1")
        for lr in (self.learning_rate_D, self.learning_rate_G):
            if not 0.0 < lr < 1.0:
                raise ValueError("learning rates must lie in (0, 1)")
        if self.D_steps_per_turn < 1 or self.G_steps_per_turn < 1:
            raise ValueError("step counts must be >= 1")
        if self.max_turns < 0:
            raise ValueError("max_turns must be >= 0")


class TurnRecord(NamedTuple):
    turn: int
    score: float
    gen_objective: float
    kl: float
    avg_fidelity: float
    wall_time: float


@dataclass
class TrainingLog:
    records: list = field(default_factory=list)
    stop_reason: str = ""


class TrainingDiverged(RuntimeError):
    """Raised when the payoff turns non-finite; carries the partial log."""

    def __init__(self, turn: int, log: TrainingLog):
        super().__init__(f"non-finite score at turn {turn}")
        self.turn = turn
        self.log = log


# ---------------------------------------------------------------------------
# generator algebra


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


def _softmax_neg(betas: np.ndarray) -> np.ndarray:
    z = -betas
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def _mu_table_and_grad(prior: np.ndarray, mu: float, n: int):
    """Markov table q(mu) and dq/dmu, by product-rule accumulation."""
    v = prior.copy()
    dv = np.zeros(4)
    letters = np.arange(4)
    for _ in range(n - 1):
        last = np.arange(v.shape[0]) % 4
        hit = (letters[None, :] == last[:, None]).astype(np.float64)
        step = (1 - mu) * prior[None, :] + mu * hit
        dstep = hit - prior[None, :]
        dv = (dv[:, None] * step + v[:, None] * dstep).reshape(-1)
        v = (v[:, None] * step).reshape(-1)
    return v, dv


def generator_table(gen: GeneratorParams, n: int) -> ProbTable:
    """The distribution the generator currently proposes."""
    if gen.mode == FULL_SOFTMAX:
        if gen.betas.shape != (4**n,):
            raise ValueError("betas length must be 4^n")
        return ProbTable(n, _softmax_neg(gen.betas))
    if gen.mode == FACTORIZED_SOFTMAX:
        if gen.betas.shape != (n, 4):
            raise ValueError("betas shape must be (n, 4)")
        v = _softmax_neg(gen.betas[0])
        for t in range(1, n):
            v = (v[:, None] * _softmax_neg(gen.betas[t])[None, :]).reshape(-1)
        return ProbTable(n, v)
    model = CorrelationModel(gen.known_prior, _sigmoid(gen.mu_logit))
    return correlated_table(model, n)


def generator_gradient(gen: GeneratorParams, branch_scores: np.ndarray) -> np.ndarray:
    """d(payoff)/d(generator params), flattened.

    The payoff depends on the generator only through -sum_k q_k s_k, so
    in FULL mode the j-th component is q_j (s_j - <s>_q), which sums to 0.
    """
    s = np.asarray(branch_scores, dtype=np.float64)
    if gen.mode == FULL_SOFTMAX:
        q = _softmax_neg(gen.betas)
        if q.shape != s.shape:
            raise ValueError("betas and branch_scores disagree on size")
        return q * (s - q @ s)
    if gen.mode == FACTORIZED_SOFTMAX:
        n = gen.betas.shape[0]
        if s.shape != (4**n,):
            raise ValueError("branch_scores length must be 4^n")
        q = generator_table(gen, n).probs
        qs = q * s
        sq = qs.sum()
        grad = np.empty((n, 4))
        for t in range(n):
            digit = (np.arange(4**n) >> (2 * (n - 1 - t))) & 3
            marg = _softmax_neg(gen.betas[t])
            grad[t] = np.bincount(digit, weights=qs, minlength=4) - marg * sq
        return grad.reshape(-1)
    n = round(np.log(s.shape[0]) / np.log(4))
    if 4**n != s.shape[0]:
        raise ValueError("branch_scores length must be a power of 4")
    mu = _sigmoid(gen.mu_logit)
    v, dv = _mu_table_and_grad(gen.known_prior.probs, mu, n)
    total = v.sum()
    # d/dmu of the normalized table (total is 1 up to rounding)
    dq = (dv - v * (dv.sum() / total)) / total
    dmu = mu * (1.0 - mu)
    return np.array([-(s @ dq) * dmu])


def optimistic_adam_step(
    params: np.ndarray,
    gradient: np.ndarray,
    state: OptimizerState,
    learning_rate: float,
    ascent: bool,
):
    """One optimistic ADAM update: theta -= lr * (2*delta_t - delta_{t-1})."""
    g = -gradient if ascent else gradient
    m = _ADAM_B1 * state.first_moment + (1 - _ADAM_B1) * g
    v = _ADAM_B2 * state.second_moment + (1 - _ADAM_B2) * g * g
    t = state.step_count + 1
    mhat = m / (1 - _ADAM_B1**t)
    vhat = v / (1 - _ADAM_B2**t)
    delta = mhat / (np.sqrt(vhat) + _ADAM_EPS)
    new_params = params - 2 * learning_rate * delta + learning_rate * state.prev_increment
    return new_params, OptimizerState(m, v, t, delta)


# ---------------------------------------------------------------------------
# discriminator engines


def _bitpos_pairs(pairs, nqubits):
    p0 = np.array([nqubits - 1 - a for a, _ in pairs], dtype=np.int64)
    p1 = np.array([nqubits - 1 - b for _, b in pairs], dtype=np.int64)
    return p0, p1


def _qcnn_pairs(nqubits):
    spec, _ = pqc.qcnn(nqubits)
    return [p for layer in spec.layers for p in layer.pairs], spec.measure_qubit


class _SpatialEngine:
    """Branches act in parallel on the system qubits between the two circuits."""

    def __init__(self, n_sys, ancilla_count, init_depth, flips, phases):
        nfull = n_sys + ancilla_count + 1
        self.nfull = nfull
        self.dim = 1 << nfull
        init_pairs = pqc.ansatz_pairs(n_sys + ancilla_count, init_depth)
        meas_pairs, measure_qubit = _qcnn_pairs(nfull)
        self.init_bp = _bitpos_pairs(init_pairs, nfull)
        self.meas_bp = _bitpos_pairs(meas_pairs, nfull)
        self.sizes = (15 * len(init_pairs), (), 15 * len(meas_pairs))
        self.measure_bit = nfull - 1 - measure_qubit
        self.flips = flips
        self.phases = phases
        self.nbranch = flips.shape[0]
        self.proj = np.diag(
            ((np.arange(self.dim) >> self.measure_bit) & 1).astype(np.complex128)
        )
        self._psi0 = np.zeros((1, self.dim), np.complex128)
        self._psi0[0, 0] = 1.0
        self._one = np.ones(1)

    def _mats(self, disc):
        return (
            kernels.su4_matrices(disc.theta_init.reshape(-1, 15)),
            kernels.su4_matrices(disc.theta_meas.reshape(-1, 15)),
        )

    def scores(self, disc: DiscriminatorParams) -> np.ndarray:
        im, mm = self._mats(disc)
        psi = kernels.apply_blocks(self._psi0, im, *self.init_bp)
        br = kernels.pauli_layer(
            np.repeat(psi, self.nbranch, axis=0), self.flips, self.phases
        )
        fin = kernels.apply_blocks(br, mm, *self.meas_bp)
        return kernels.prob_one(fin, self.measure_bit)

    def grads(self, disc: DiscriminatorParams, w: np.ndarray) -> np.ndarray:
        im, mm = self._mats(disc)
        ti = disc.theta_init.reshape(-1, 15)
        tm = disc.theta_meas.reshape(-1, 15)
        init_sweep = kernels.sweep_states(self._psi0, im, *self.init_bp)
        br = kernels.pauli_layer(
            np.repeat(init_sweep[-1], self.nbranch, axis=0), self.flips, self.phases
        )
        meas_suf = kernels.suffix_ops(self.proj, mm, *self.meas_bp)
        if self.nbranch > 2 * self.dim:
            rho_w = kernels.weighted_outer(br, w)
            rho_sweep = kernels.sweep_dms(rho_w, mm, *self.meas_bp)
            g_meas = kernels.segment_grads_dm(mm, *self.meas_bp, tm, rho_sweep, meas_suf)
        else:
            meas_sweep = kernels.sweep_states(br, mm, *self.meas_bp)
            g_meas = kernels.segment_grads(mm, *self.meas_bp, tm, meas_sweep, meas_suf, w)
        h = kernels.conj_pauli_weighted(meas_suf[0], self.flips, self.phases, w)
        init_suf = kernels.suffix_ops(h, im, *self.init_bp)
        g_init = kernels.segment_grads(
            im, *self.init_bp, ti, init_sweep, init_suf, self._one
        )
        return np.concatenate([g_init, g_meas])


class _TemporalEngine:
    """One system qubit visited n_uses times with comb blocks in between."""

    def __init__(self, n_uses, ancilla_count, init_depth):
        n_prep = 1 + ancilla_count
        nfull = n_prep + 1
        self.n_uses = n_uses
        self.nfull = nfull
        self.dim = 1 << nfull
        self.sys_bitpos = nfull - 1  # system qubit is qubit 0
        init_pairs = pqc.ansatz_pairs(n_prep, init_depth)
        mid_pairs = pqc.ansatz_pairs(n_prep, 1)
        meas_pairs, measure_qubit = _qcnn_pairs(nfull)
        self.init_bp = _bitpos_pairs(init_pairs, nfull)
        self.mid_bp = _bitpos_pairs(mid_pairs, nfull)
        self.meas_bp = _bitpos_pairs(meas_pairs, nfull)
        n_mid = 15 * len(mid_pairs)
        self.sizes = (
            15 * len(init_pairs),
            tuple(n_mid for _ in range(n_uses - 1)),
            15 * len(meas_pairs),
        )
        self.measure_bit = nfull - 1 - measure_qubit
        self.nbranch = 4**n_uses
        self.proj = np.diag(
            ((np.arange(self.dim) >> self.measure_bit) & 1).astype(np.complex128)
        )
        self._psi0 = np.zeros((1, self.dim), np.complex128)
        self._psi0[0, 0] = 1.0
        self._one = np.ones(1)
        self._t_total = (4**n_uses - 4) // 3
        self._e_total = (4**n_uses - 1) // 3

    def _mats(self, disc):
        im = kernels.su4_matrices(disc.theta_init.reshape(-1, 15))
        mm = kernels.su4_matrices(disc.theta_meas.reshape(-1, 15))
        mids = [kernels.su4_matrices(t.reshape(-1, 15)) for t in disc.theta_mid]
        return im, mids, mm

    def _step_mats(self, mids):
        out = np.empty((self.n_uses - 1, self.dim, self.dim), np.complex128)
        p0, p1 = self.mid_bp
        for t, mats in enumerate(mids):
            full = np.eye(self.dim, dtype=np.complex128)
            for i in range(mats.shape[0]):
                full = kernels.embed_gate(mats[i], (int(p0[i]), int(p1[i])), self.dim) @ full
            out[t] = full
        return out

    def _forward(self, im, mids):
        init_sweep = kernels.sweep_states(self._psi0, im, *self.init_bp)
        step_mats = self._step_mats(mids)
        t_buf = np.empty((self._t_total, self.dim), np.complex128)
        leaves = np.empty((self.nbranch, self.dim), np.complex128)
        kernels.tree_forward(
            init_sweep[-1][0], self.sys_bitpos, step_mats, self.n_uses, t_buf, leaves
        )
        return init_sweep, step_mats, t_buf, leaves

    def scores(self, disc: DiscriminatorParams) -> np.ndarray:
        im, mids, mm = self._mats(disc)
        _, _, _, leaves = self._forward(im, mids)
        fin = kernels.apply_blocks(leaves, mm, *self.meas_bp)
        return kernels.prob_one(fin, self.measure_bit)

    def grads(self, disc: DiscriminatorParams, w: np.ndarray) -> np.ndarray:
        im, mids, mm = self._mats(disc)
        tm = disc.theta_meas.reshape(-1, 15)
        init_sweep, step_mats, t_buf, leaves = self._forward(im, mids)
        meas_suf = kernels.suffix_ops(self.proj, mm, *self.meas_bp)
        if self.nbranch > 2 * self.dim:
            rho_w = kernels.weighted_outer(leaves, w)
            rho_sweep = kernels.sweep_dms(rho_w, mm, *self.meas_bp)
            g_meas = kernels.segment_grads_dm(mm, *self.meas_bp, tm, rho_sweep, meas_suf)
        else:
            meas_sweep = kernels.sweep_states(leaves, mm, *self.meas_bp)
            g_meas = kernels.segment_grads(mm, *self.meas_bp, tm, meas_sweep, meas_suf, w)
        e_buf = np.empty((self._e_total, self.dim, self.dim), np.complex128)
        kernels.tree_backward(
            meas_suf[0], w, self.sys_bitpos, step_mats, self.n_uses, e_buf
        )
        init_suf = kernels.suffix_ops(e_buf[0], im, *self.init_bp)
        g_init = kernels.segment_grads(
            im, *self.init_bp, disc.theta_init.reshape(-1, 15), init_sweep, init_suf,
            self._one,
        )
        parts = [g_init]
        p0, p1 = self.mid_bp
        for j in range(self.n_uses - 1):
            lvl = j + 1
            count = 4**lvl
            t_states = t_buf[(count - 4) // 3 : (count - 4) // 3 + count]
            e_ops = e_buf[(count - 1) // 3 : (count - 1) // 3 + count]
            mats = mids[j]
            mid_sweep = kernels.sweep_states(t_states, mats, p0, p1)
            thj = disc.theta_mid[j].reshape(-1, 15)
            gj = np.empty(15 * mats.shape[0])
            q_ops = np.ascontiguousarray(e_ops)
            for b in range(mats.shape[0] - 1, -1, -1):
                gj[15 * b : 15 * b + 15] = kernels.block_grads_rowops(
                    thj[b], int(p0[b]), int(p1[b]), np.ascontiguousarray(mid_sweep[b]), q_ops
                )
                if b > 0:
                    full = kernels.embed_gate(mats[b], (int(p0[b]), int(p1[b])), self.dim)
                    q_ops = np.matmul(full.conj().T, np.matmul(q_ops, full))
            parts.append(gj)
        parts.append(g_meas)
        return np.concatenate(parts)


def _pauli_engine(config: GameConfig):
    if config.correlation_kind == TEMPORAL:
        return _TemporalEngine(config.n_uses, config.ancilla_count, config.init_depth)
    nfull = config.n_uses + config.ancilla_count + 1
    flips, phases = pauli_string_tables(config.n_uses, nfull)
    return _SpatialEngine(
        config.n_uses, config.ancilla_count, config.init_depth, flips, phases
    )


def _pack(disc: DiscriminatorParams) -> np.ndarray:
    return np.concatenate([disc.theta_init, *disc.theta_mid, disc.theta_meas])


def _unpack(sizes, vec: np.ndarray) -> DiscriminatorParams:
    n_init, mids, n_meas = sizes
    pos = n_init
    theta_mid = []
    for n in mids:
        theta_mid.append(vec[pos : pos + n])
        pos += n
    return DiscriminatorParams(vec[:n_init], tuple(theta_mid), vec[pos : pos + n_meas])


def _init_disc(sizes, rng) -> DiscriminatorParams:
    n_init, mids, n_meas = sizes
    theta_init = rng.uniform(-np.pi, np.pi, n_init)
    theta_mid = tuple(rng.uniform(-np.pi, np.pi, n) for n in mids)
    theta_meas = rng.uniform(-np.pi, np.pi, n_meas)
    return DiscriminatorParams(theta_init, theta_mid, theta_meas)


# ---------------------------------------------------------------------------
# public game ops


def branch_scores(disc: DiscriminatorParams, config: GameConfig) -> np.ndarray:
    """Survivor-excitation probability of every channel branch, in [0, 1]."""
    return _pauli_engine(config).scores(disc)


def score(
    disc: DiscriminatorParams,
    real_table: ProbTable,
    gen: GeneratorParams,
    config: GameConfig,
) -> float:
    """Payoff sum_k (p_k - q_k) s_k; lies in [-1, 1]."""
    s = branch_scores(disc, config)
    q = generator_table(gen, config.n_uses).probs
    return float((real_table.probs - q) @ s)


class _GenAdapter:
    """Flat-vector view of the generator for the optimizer loop."""

    def __init__(self, mode, n, nbranch, known_prior):
        self.mode = mode
        self.n = n
        self.nbranch = nbranch
        self.known_prior = known_prior
        if mode == MU_ONLY and known_prior is None:
            raise ValueError("MU_ONLY needs a known prior")
        if mode == FULL_SOFTMAX:
            self.size = nbranch
        elif mode == FACTORIZED_SOFTMAX:
            self.size = 4 * n
        else:
            self.size = 1

    def vec0(self):
        return np.zeros(self.size)

    def to_params(self, vec) -> GeneratorParams:
        if self.mode == FULL_SOFTMAX:
            return GeneratorParams(self.mode, betas=vec.copy())
        if self.mode == FACTORIZED_SOFTMAX:
            return GeneratorParams(self.mode, betas=vec.reshape(self.n, 4).copy())
        return GeneratorParams(
            self.mode, mu_logit=float(vec[0]), known_prior=self.known_prior
        )

    def table(self, vec) -> np.ndarray:
        if self.mode == FULL_SOFTMAX:
            return _softmax_neg(vec)
        return generator_table(self.to_params(vec), self.n).probs

    def grad(self, vec, scores) -> np.ndarray:
        return generator_gradient(self.to_params(vec), scores)


def _flip_mask_digits(n: int) -> np.ndarray:
    """Bit t of entry k is set when Pauli digit t of k flips (X or Y)."""
    ks = np.arange(4**n)
    mask = np.zeros(4**n, dtype=np.int64)
    for t in range(n):
        d = (ks >> (2 * (n - 1 - t))) & 3
        mask |= ((d == 1) | (d == 2)).astype(np.int64) << (n - 1 - t)
    return mask


def _basis_fidelity_fn(real_probs: np.ndarray, n: int):
    """Basis-averaged output fidelity of two Pauli tables.

    On a computational basis input both channel outputs are diagonal,
    with weights given by the total probability of each flip pattern, so
    the average collapses to a Bhattacharyya overlap of flip masses.
    """
    masks = _flip_mask_digits(n)
    fm_p = np.bincount(masks, weights=real_probs, minlength=2**n)

    def fid(q: np.ndarray) -> float:
        fm_q = np.bincount(masks, weights=q, minlength=2**n)
        return float(np.sum(np.sqrt(fm_p * fm_q)) ** 2)

    return fid


def pauli_choi_fidelity(p: ProbTable, q: ProbTable) -> float:
    """Choi-state fidelity of two Pauli tables: (sum_k sqrt(p_k q_k))^2."""
    if p.n != q.n:
        raise ValueError("tables must share n")
    return float(np.sum(np.sqrt(p.probs * q.probs)) ** 2)


def _run_loop(engine, real_probs, adapter, config, fid_fn, rng):
    disc = _init_disc(engine.sizes, rng)
    d_vec = _pack(disc)
    d_state = zero_optimizer(d_vec.size)
    g_vec = adapter.vec0()
    g_state = zero_optimizer(g_vec.size)
    log = TrainingLog()
    t0 = time.perf_counter()
    scores = engine.scores(disc)
    turn = 0
    while True:
        q = adapter.table(g_vec)
        payoff = float((real_probs - q) @ scores)
        gen_obj = float(q @ scores)
        log.records.append(
            TurnRecord(
                turn,
                payoff,
                gen_obj,
                _kl_raw(real_probs, q),
                fid_fn(q),
                time.perf_counter() - t0,
            )
        )
        if not np.isfinite(payoff):
            log.stop_reason = "diverged"
            raise TrainingDiverged(turn, log)
        if log.records[-1].avg_fidelity >= config.fidelity_threshold:
            log.stop_reason = "fidelity_threshold"
            break
        if turn >= config.max_turns:
            log.stop_reason = "max_turns"
            break
        w = real_probs - q
        for _ in range(config.D_steps_per_turn):
            g = engine.grads(disc, w)
            d_vec, d_state = optimistic_adam_step(
                d_vec, g, d_state, config.learning_rate_D, ascent=True
            )
            disc = _unpack(engine.sizes, d_vec)
        scores = engine.scores(disc)
        for _ in range(config.G_steps_per_turn):
            gg = adapter.grad(g_vec, scores)
            g_vec, g_state = optimistic_adam_step(
                g_vec, gg, g_state, config.learning_rate_G, ascent=False
            )
        turn += 1
    return adapter.to_params(g_vec), log


def train(
    real_table: ProbTable,
    gen_mode: str,
    config: GameConfig,
    known_prior: ProbTable | None = None,
):
    """Run the adversarial loop; returns (final GeneratorParams, TrainingLog).

    Each turn logs metrics first (so turn 0 is the untrained state), then
    takes D_steps_per_turn discriminator ascent steps against the frozen
    generator, then G_steps_per_turn generator descent steps against the
    updated discriminator. Stops on the fidelity threshold or max_turns;
    raises TrainingDiverged on a non-finite payoff.
    """
    if gen_mode not in GENERATOR_MODES:
        raise ValueError(f"unknown generator mode {gen_mode!r}")
    if real_table.n != config.n_uses:
        raise ValueError("real table size does not match config.n_uses")
    engine = _pauli_engine(config)
    adapter = _GenAdapter(gen_mode, config.n_uses, engine.nbranch, known_prior)
    fid_fn = _basis_fidelity_fn(real_table.probs, config.n_uses)
    rng = np.random.Generator(np.random.Philox(key=config.seed))
    return _run_loop(engine, real_table.probs, adapter, config, fid_fn, rng)
