"""Statevector-kernel tests.

The numpy module is checked against the dense first-principles oracles;
the numba module is then checked against the numpy module on the same
inputs, so a bug in either backend shows up as a disagreement somewhere.
"""

import os
import subprocess
import sys

import numpy as np
import pytest

from noisegan import kernels, pqc
from oracles import (
    PAULI,
    embed_dense,
    finite_diff,
    circuit_unitary,
    random_prob_vector,
)

try:
    NUMBA = kernels.get_backend("numba")
except ImportError:  # pragma: no cover - CI always has numba
    NUMBA = None

NUMPY = kernels.get_backend("numpy")

needs_numba = pytest.mark.skipif(NUMBA is None, reason="numba unavailable")


def rand_state_batch(rng, nbatch, dim):
    s = rng.normal(size=(nbatch, dim)) + 1j * rng.normal(size=(nbatch, dim))
    return s / np.linalg.norm(s, axis=1, keepdims=True)


def rand_hermitian(rng, dim):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return m + m.conj().T


def rand_blocks(rng, nblocks, nqubits):
    """Random block parameters and a staggered placement on nqubits."""
    thetas = rng.uniform(-np.pi, np.pi, size=(nblocks, 15))
    pairs = [(q, q + 1) for q in range(nqubits - 1)]
    pairs = [pairs[i % len(pairs)] for i in range(nblocks)]
    p0 = np.array([nqubits - 1 - a for a, _ in pairs], dtype=np.int64)
    p1 = np.array([nqubits - 1 - b for _, b in pairs], dtype=np.int64)
    return thetas, p0, p1


def dense_product(mats, p0, p1, dim):
    u = np.eye(dim, dtype=np.complex128)
    for i in range(mats.shape[0]):
        u = kernels.embed_gate(mats[i], (int(p0[i]), int(p1[i])), dim) @ u
    return u


# ---------------------------------------------------------------- dispatch


def test_backend_constant_and_lookup():
    assert kernels.BACKEND in ("numba", "numpy")
    assert kernels.get_backend("numpy") is NUMPY
    with pytest.raises(ValueError, match="unknown kernel backend"):
        kernels.get_backend("cython")


def test_cold_helpers_always_numpy():
    # embed_gate/pauli1 run once per engine build, not per step
    assert kernels.embed_gate is NUMPY.embed_gate
    assert kernels.pauli1 is NUMPY.pauli1


def test_env_flag_selects_backend():
    code = "import noisegan.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, NOISEGAN_BACKEND="numpy")
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True
    )
    assert out.returncode == 0
    assert out.stdout.strip() == "numpy"

    env = dict(os.environ, NOISEGAN_BACKEND="fortran")
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True
    )
    assert out.returncode != 0
    assert "NOISEGAN_BACKEND" in out.stderr


# ------------------------------------------------------------ cold helpers


def test_embed_gate_matches_dense_oracle():
    rng = np.random.default_rng(11)
    n = 3
    dim = 1 << n
    g1 = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    for q in range(n):
        full = kernels.embed_gate(g1, (n - 1 - q,), dim)
        assert np.allclose(full, embed_dense(g1, (q,), n), atol=1e-12)
    g2 = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            full = kernels.embed_gate(g2, (n - 1 - a, n - 1 - b), dim)
            assert np.allclose(full, embed_dense(g2, (a, b), n), atol=1e-12)


def test_pauli1_matches_pauli_matrices():
    n = 3
    dim = 1 << n
    idx = np.arange(dim)
    for q in range(n):
        for d in range(4):
            flip, phase = kernels.pauli1(dim, n - 1 - q, d)
            dense = np.zeros((dim, dim), dtype=np.complex128)
            dense[idx, idx ^ flip] = phase
            assert np.allclose(dense, embed_dense(PAULI[d], (q,), n), atol=1e-12)


# ------------------------------------------------------- numpy vs oracles


def test_su4_single_matches_block_circuit():
    rng = np.random.default_rng(12)
    theta = rng.uniform(-np.pi, np.pi, size=15)
    circ = pqc.ParamCircuit(2, tuple(pqc.su4_block(0, 1, 0)), 15)
    assert np.allclose(
        NUMPY.su4_single(theta), circuit_unitary(circ, theta), atol=1e-12
    )


def test_run_gates_matches_circuit_oracle():
    rng = np.random.default_rng(13)
    circ = pqc.layered_ansatz(3, 2)
    params = rng.uniform(-np.pi, np.pi, size=circ.nparams)
    psi = rand_state_batch(rng, 1, 8)[0]
    kinds, q0, q1, pidx = pqc.encode_gates(circ)
    got = NUMPY.run_gates(psi, kinds, q0, q1, pidx, params, 3)
    assert np.allclose(got, circuit_unitary(circ, params) @ psi, atol=1e-10)


def test_apply_blocks_and_sweeps_match_dense_product():
    rng = np.random.default_rng(14)
    nq, dim = 3, 8
    thetas, p0, p1 = rand_blocks(rng, 4, nq)
    mats = NUMPY.su4_matrices(thetas)
    states = rand_state_batch(rng, 5, dim)
    u = dense_product(mats, p0, p1, dim)

    out = NUMPY.apply_blocks(states.copy(), mats, p0, p1)
    assert np.allclose(out, states @ u.T, atol=1e-12)

    sweep = NUMPY.sweep_states(states, mats, p0, p1)
    assert sweep.shape == (5, 5, dim)
    assert np.allclose(sweep[0], states, atol=0)
    assert np.allclose(sweep[-1], out, atol=1e-12)
    for i in range(4):
        ui = dense_product(mats[: i + 1], p0, p1, dim)
        assert np.allclose(sweep[i + 1], states @ ui.T, atol=1e-12)

    seed = rand_hermitian(rng, dim)
    suf = NUMPY.suffix_ops(seed, mats, p0, p1)
    assert np.allclose(suf[-1], seed, atol=0)
    # <psi|suf[0]|psi> == <U psi|seed|U psi>
    psi = states[0]
    lhs = np.vdot(psi, suf[0] @ psi)
    rhs = np.vdot(u @ psi, seed @ (u @ psi))
    assert abs(lhs - rhs) < 1e-10

    rho = (psi[:, None] * psi.conj()[None, :]).copy()
    dms = NUMPY.sweep_dms(rho, mats, p0, p1)
    assert np.allclose(dms[0], rho, atol=0)
    assert np.allclose(dms[-1], u @ rho @ u.conj().T, atol=1e-12)


def test_pauli_layer_prob_one_weighted_outer():
    rng = np.random.default_rng(15)
    dim, nb = 8, 6
    states = rand_state_batch(rng, nb, dim)
    flips = rng.integers(0, dim, size=nb).astype(np.int64)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, size=(nb, dim)))

    got = NUMPY.pauli_layer(states, flips, phases)
    want = np.empty_like(states)
    for b in range(nb):
        for i in range(dim):
            want[b, i] = phases[b, i] * states[b, i ^ flips[b]]
    assert np.allclose(got, want, atol=1e-12)

    for bitpos in range(3):
        probs = NUMPY.prob_one(states, bitpos)
        idx = np.arange(dim)
        mask = ((idx >> bitpos) & 1) == 1
        want_p = (np.abs(states[:, mask]) ** 2).sum(axis=1)
        assert np.allclose(probs, want_p, atol=1e-12)

    w = rng.normal(size=nb)
    rho = NUMPY.weighted_outer(states, w)
    want_r = sum(w[b] * np.outer(states[b], states[b].conj()) for b in range(nb))
    assert np.allclose(rho, want_r, atol=1e-12)


def test_conj_pauli_weighted_expectation_identity():
    rng = np.random.default_rng(16)
    dim, nb = 8, 5
    flips = rng.integers(0, dim, size=nb).astype(np.int64)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, size=(nb, dim)))
    w = rng.normal(size=nb)
    op = rand_hermitian(rng, dim)
    psi = rand_state_batch(rng, 1, dim)[0]

    h = NUMPY.conj_pauli_weighted(op, flips, phases, w)
    branch = NUMPY.pauli_layer(np.repeat(psi[None, :], nb, axis=0), flips, phases)
    want = sum(w[b] * np.vdot(branch[b], op @ branch[b]) for b in range(nb))
    assert abs(np.vdot(psi, h @ psi) - want) < 1e-10


def test_segment_grads_match_finite_difference():
    rng = np.random.default_rng(17)
    nq, dim, nb = 3, 8, 4
    thetas, p0, p1 = rand_blocks(rng, 3, nq)
    states = rand_state_batch(rng, nb, dim)
    w = rng.normal(size=nb)
    seed = rand_hermitian(rng, dim)

    def objective(flat):
        mats = NUMPY.su4_matrices(flat.reshape(-1, 15))
        out = NUMPY.apply_blocks(states.copy(), mats, p0, p1)
        return float(w @ np.einsum("bi,ij,bj->b", out.conj(), seed, out).real)

    mats = NUMPY.su4_matrices(thetas)
    prefixes = NUMPY.sweep_states(states, mats, p0, p1)
    sufops = NUMPY.suffix_ops(seed, mats, p0, p1)
    grads = NUMPY.segment_grads(mats, p0, p1, thetas, prefixes, sufops, w)
    fd = finite_diff(objective, thetas.reshape(-1))
    assert np.max(np.abs(grads - fd)) < 1e-6

    # DM form computes the same exact gradient from a weighted outer product
    rho = NUMPY.weighted_outer(states, w)
    rho_sweep = NUMPY.sweep_dms(rho, mats, p0, p1)
    grads_dm = NUMPY.segment_grads_dm(mats, p0, p1, thetas, rho_sweep, sufops)
    assert np.max(np.abs(grads_dm - grads)) < 1e-10


def test_block_grads_rowops_matches_finite_difference():
    rng = np.random.default_rng(18)
    dim, nb = 8, 5
    theta = rng.uniform(-np.pi, np.pi, size=15)
    p0, p1 = 2, 1
    t_states = rand_state_batch(rng, nb, dim)
    e_ops = np.stack([rand_hermitian(rng, dim) for _ in range(nb)])

    def objective(th):
        full = kernels.embed_gate(NUMPY.su4_single(th), (p0, p1), dim)
        v = t_states @ full.T
        return float(np.einsum("bi,bij,bj->", v.conj(), e_ops, v).real)

    grads = NUMPY.block_grads_rowops(theta, p0, p1, t_states, e_ops)
    assert np.max(np.abs(grads - finite_diff(objective, theta))) < 1e-6


# ------------------------------------------------------------ tree kernels


def tree_problem(rng, nsteps, nq=3):
    dim = 1 << nq
    sys_bitpos = nq - 1  # system qubit 0 = most significant bit
    psi0 = rand_state_batch(rng, 1, dim)[0]
    step_mats = np.empty((nsteps - 1, dim, dim), dtype=np.complex128)
    for t in range(nsteps - 1):
        m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        q, _ = np.linalg.qr(m)
        step_mats[t] = q
    return dim, sys_bitpos, psi0, step_mats


def branch_unitaries(dim, sys_bitpos, step_mats, nsteps):
    """Dense per-branch operator: Pauli d0, step 0, Pauli d1, step 1, ..."""
    idx = np.arange(dim)
    pdense = []
    for d in range(4):
        f, ph = kernels.pauli1(dim, sys_bitpos, d)
        m = np.zeros((dim, dim), dtype=np.complex128)
        m[idx, idx ^ f] = ph
        pdense.append(m)
    ops = []
    for k in range(4**nsteps):
        digits = [(k >> (2 * (nsteps - 1 - t))) & 3 for t in range(nsteps)]
        u = pdense[digits[0]].copy()
        for t in range(1, nsteps):
            u = pdense[digits[t]] @ step_mats[t - 1] @ u
        ops.append(u)
    return ops


def test_tree_forward_matches_dense_branches():
    rng = np.random.default_rng(19)
    nsteps = 3
    dim, sys_bitpos, psi0, step_mats = tree_problem(rng, nsteps)
    t_buf = np.empty(((4**nsteps - 4) // 3, dim), dtype=np.complex128)
    leaves = np.empty((4**nsteps, dim), dtype=np.complex128)
    NUMPY.tree_forward(psi0, sys_bitpos, step_mats, nsteps, t_buf, leaves)

    ops = branch_unitaries(dim, sys_bitpos, step_mats, nsteps)
    for k in range(4**nsteps):
        assert np.allclose(leaves[k], ops[k] @ psi0, atol=1e-10)

    # level-1 entries sit first in t_buf: state right after the first Pauli
    idx = np.arange(dim)
    for d in range(4):
        f, ph = kernels.pauli1(dim, sys_bitpos, d)
        assert np.allclose(t_buf[d], ph * psi0[idx ^ f], atol=1e-12)


def test_tree_backward_summarizes_completions():
    rng = np.random.default_rng(20)
    nsteps = 2
    dim, sys_bitpos, psi0, step_mats = tree_problem(rng, nsteps)
    w = rng.normal(size=4**nsteps)
    g0 = rand_hermitian(rng, dim)
    e_buf = np.empty(((4**nsteps - 1) // 3, dim, dim), dtype=np.complex128)
    NUMPY.tree_backward(g0, w, sys_bitpos, step_mats, nsteps, e_buf)

    ops = branch_unitaries(dim, sys_bitpos, step_mats, nsteps)
    x = rand_state_batch(rng, 1, dim)[0]
    # level 0: one operator summarizing the whole comb
    want = sum(w[k] * np.vdot(ops[k] @ x, g0 @ (ops[k] @ x)) for k in range(16))
    assert abs(np.vdot(x, e_buf[0] @ x) - want) < 1e-9

    # level 1, node pi: completions share the leading digit pi
    idx = np.arange(dim)
    for pi in range(4):
        acc = 0.0
        for d in range(4):
            f, ph = kernels.pauli1(dim, sys_bitpos, d)
            leaf = ph * x[idx ^ f]
            acc += w[pi * 4 + d] * np.vdot(leaf, g0 @ leaf)
        assert abs(np.vdot(x, e_buf[1 + pi] @ x) - acc) < 1e-9


# -------------------------------------------------------- numba equivalence


@needs_numba
def test_numba_su4_and_gate_application():
    rng = np.random.default_rng(21)
    thetas = rng.uniform(-np.pi, np.pi, size=(3, 15))
    assert np.max(np.abs(NUMBA.su4_single(thetas[0]) - NUMPY.su4_single(thetas[0]))) < 1e-12
    assert np.max(np.abs(NUMBA.su4_matrices(thetas) - NUMPY.su4_matrices(thetas))) < 1e-12

    dim = 16
    psi = rand_state_batch(rng, 1, dim)[0]
    g2 = NUMPY.su4_single(thetas[0])
    bp = np.array([3, 1], dtype=np.int64)
    assert np.max(np.abs(NUMBA.apply_gate(psi, g2, bp) - NUMPY.apply_gate(psi, g2, bp))) < 1e-12

    circ = pqc.layered_ansatz(4, 2)
    kinds, q0, q1, pidx = pqc.encode_gates(circ)
    params = rng.uniform(-np.pi, np.pi, size=circ.nparams)
    a = NUMBA.run_gates(psi, kinds, q0, q1, pidx, params, 4)
    b = NUMPY.run_gates(psi, kinds, q0, q1, pidx, params, 4)
    assert np.max(np.abs(a - b)) < 1e-9


@needs_numba
def test_numba_batch_kernels():
    rng = np.random.default_rng(22)
    nq, dim, nb = 4, 16, 20
    thetas, p0, p1 = rand_blocks(rng, 5, nq)
    mats = NUMPY.su4_matrices(thetas)
    states = rand_state_batch(rng, nb, dim)
    flips = rng.integers(0, dim, size=nb).astype(np.int64)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, size=(nb, dim)))
    w = rng.normal(size=nb)
    seed = rand_hermitian(rng, dim)
    rho = NUMPY.weighted_outer(states, w)

    pairs = [
        (NUMBA.apply_blocks(states.copy(), mats, p0, p1),
         NUMPY.apply_blocks(states.copy(), mats, p0, p1)),
        (NUMBA.pauli_layer(states, flips, phases),
         NUMPY.pauli_layer(states, flips, phases)),
        (NUMBA.prob_one(states, 2), NUMPY.prob_one(states, 2)),
        (NUMBA.weighted_outer(states, w), NUMPY.weighted_outer(states, w)),
        (NUMBA.sweep_states(states, mats, p0, p1),
         NUMPY.sweep_states(states, mats, p0, p1)),
        (NUMBA.suffix_ops(seed, mats, p0, p1),
         NUMPY.suffix_ops(seed, mats, p0, p1)),
        (NUMBA.sweep_dms(rho, mats, p0, p1), NUMPY.sweep_dms(rho, mats, p0, p1)),
        (NUMBA.conj_pauli_weighted(seed, flips, phases, w),
         NUMPY.conj_pauli_weighted(seed, flips, phases, w)),
    ]
    for got, want in pairs:
        assert np.max(np.abs(got - want)) < 1e-9


@needs_numba
def test_numba_gradient_kernels():
    rng = np.random.default_rng(23)
    nq, dim, nb = 3, 8, 10
    thetas, p0, p1 = rand_blocks(rng, 4, nq)
    mats = NUMPY.su4_matrices(thetas)
    states = rand_state_batch(rng, nb, dim)
    w = rng.normal(size=nb)
    seed = rand_hermitian(rng, dim)
    prefixes = NUMPY.sweep_states(states, mats, p0, p1)
    sufops = NUMPY.suffix_ops(seed, mats, p0, p1)
    rho_sweep = NUMPY.sweep_dms(NUMPY.weighted_outer(states, w), mats, p0, p1)

    a = NUMBA.segment_grads(mats, p0, p1, thetas, prefixes, sufops, w)
    b = NUMPY.segment_grads(mats, p0, p1, thetas, prefixes, sufops, w)
    assert np.max(np.abs(a - b)) < 1e-9

    a = NUMBA.segment_grads_dm(mats, p0, p1, thetas, rho_sweep, sufops)
    b = NUMPY.segment_grads_dm(mats, p0, p1, thetas, rho_sweep, sufops)
    assert np.max(np.abs(a - b)) < 1e-9

    e_ops = np.stack([rand_hermitian(rng, dim) for _ in range(nb)])
    a = NUMBA.block_grads_rowops(thetas[0], 2, 1, states, e_ops)
    b = NUMPY.block_grads_rowops(thetas[0], 2, 1, states, e_ops)
    assert np.max(np.abs(a - b)) < 1e-9


@needs_numba
def test_numba_tree_kernels():
    rng = np.random.default_rng(24)
    nsteps = 3
    dim, sys_bitpos, psi0, step_mats = tree_problem(rng, nsteps)
    w = random_prob_vector(rng, 4**nsteps)
    g0 = rand_hermitian(rng, dim)

    t_a = np.empty(((4**nsteps - 4) // 3, dim), dtype=np.complex128)
    l_a = np.empty((4**nsteps, dim), dtype=np.complex128)
    t_b = np.empty_like(t_a)
    l_b = np.empty_like(l_a)
    NUMBA.tree_forward(psi0, sys_bitpos, step_mats, nsteps, t_a, l_a)
    NUMPY.tree_forward(psi0, sys_bitpos, step_mats, nsteps, t_b, l_b)
    assert np.max(np.abs(t_a - t_b)) < 1e-9
    assert np.max(np.abs(l_a - l_b)) < 1e-9

    e_a = np.empty(((4**nsteps - 1) // 3, dim, dim), dtype=np.complex128)
    e_b = np.empty_like(e_a)
    NUMBA.tree_backward(g0, w, sys_bitpos, step_mats, nsteps, e_a)
    NUMPY.tree_backward(g0, w, sys_bitpos, step_mats, nsteps, e_b)
    assert np.max(np.abs(e_a - e_b)) < 1e-9
