"""Pure-numpy statevector kernels.

Reference implementation of the kernel API shared with the numba backend
(see kernels.py for the dispatch rules). Gates are embedded into full
2^N x 2^N matrices and applied with matmul, which keeps this backend
short and obviously correct at the price of speed; the numba backend
implements the same semantics with bit-twiddling loops.

Conventions (fixed package-wide):
  * qubit 0 is the most significant bit of the amplitude index, so a
    qubit q on an N-qubit register sits at bit position N-1-q,
  * a "bitpos" argument is always a bit position, not a qubit index,
  * two-qubit block matrices are 4x4 in the basis |ab> where a is the
    bit at p0 and b the bit at p1,
  * batches of states are (nbatch, dim) complex128 arrays.
"""

import numpy as np


def embed_gate(gate, bitpos, dim):
    """Full dim x dim matrix acting as `gate` on the given bit positions."""
    k = len(bitpos)
    sub = 1 << k
    mask = 0
    for p in bitpos:
        mask |= 1 << int(p)
    idx = np.arange(dim, dtype=np.int64)
    base = idx[(idx & mask) == 0]
    offs = np.zeros(sub, dtype=np.int64)
    for t in range(sub):
        for j in range(k):
            if (t >> (k - 1 - j)) & 1:
                offs[t] |= 1 << int(bitpos[j])
    full = np.zeros((dim, dim), dtype=np.complex128)
    for t in range(sub):
        for u in range(sub):
            full[base + offs[t], base + offs[u]] = gate[t, u]
    return full


def _rx(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def _ry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def _rz(theta):
    e = np.exp(-1j * theta / 2)
    return np.array([[e, 0], [0, e.conjugate()]], dtype=np.complex128)


# CNOT in the 2-bit gate basis |ab>: _CN_BA has control b (the less
# significant sub-index), _CN_AB has control a.
_CN_BA = np.array(
    [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=np.complex128
)
_CN_AB = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
)

_I2 = np.eye(2, dtype=np.complex128)


def su4_single(theta):
    """Compile one 15-parameter two-qubit block to its 4x4 matrix.

    Gate order matches pqc.su4_block: (RZ,RY,RZ) on each qubit, CNOT(b->a),
    RZ(a) and RY(b), CNOT(a->b), RY(b), CNOT(b->a), then (RZ,RY,RZ) on each
    qubit again. Qubit a is the more significant of the pair.
    """
    ta = _rz(theta[2]) @ _ry(theta[1]) @ _rz(theta[0])
    tb = _rz(theta[5]) @ _ry(theta[4]) @ _rz(theta[3])
    u = _CN_BA @ np.kron(ta, tb)
    u = _CN_AB @ (np.kron(_rz(theta[6]), _ry(theta[7])) @ u)
    u = _CN_BA @ (np.kron(_I2, _ry(theta[8])) @ u)
    oa = _rz(theta[11]) @ _ry(theta[10]) @ _rz(theta[9])
    ob = _rz(theta[14]) @ _ry(theta[13]) @ _rz(theta[12])
    return np.kron(oa, ob) @ u


def su4_matrices(thetas):
    """Compile (B, 15) block parameters to (B, 4, 4) matrices."""
    out = np.empty((thetas.shape[0], 4, 4), dtype=np.complex128)
    for i in range(thetas.shape[0]):
        out[i] = su4_single(thetas[i])
    return out


def apply_gate(amps, gate, bitpos):
    """Apply a 2^k x 2^k gate at the given bit positions (MSB first)."""
    return embed_gate(gate, bitpos, amps.shape[0]) @ amps


def run_gates(amps, kinds, q0, q1, pidx, params, nqubits):
    """Interpret an encoded gate list: kinds 0=RX, 1=RY, 2=RZ, 3=CNOT.

    q0/q1 hold qubit indices (q1 = -1 for rotations); pidx indexes into
    params for rotations and is -1 for CNOT.
    """
    state = amps.copy()
    dim = state.shape[0]
    for g in range(kinds.shape[0]):
        if kinds[g] == 3:
            pc = nqubits - 1 - q0[g]
            pt = nqubits - 1 - q1[g]
            full = embed_gate(_CN_AB, (pc, pt), dim)
        else:
            theta = params[pidx[g]]
            if kinds[g] == 0:
                rot = _rx(theta)
            elif kinds[g] == 1:
                rot = _ry(theta)
            else:
                rot = _rz(theta)
            full = embed_gate(rot, (nqubits - 1 - q0[g],), dim)
        state = full @ state
    return state


def apply_blocks(states, mats, p0, p1):
    """Apply a sequence of two-qubit blocks to every row of `states`."""
    dim = states.shape[1]
    for i in range(mats.shape[0]):
        full = embed_gate(mats[i], (p0[i], p1[i]), dim)
        states = states @ full.T
    return np.ascontiguousarray(states)


def pauli_layer(states, flips, phases):
    """Per-row permutation+phase: out[b, i] = phases[b, i] * in[b, i ^ flips[b]]."""
    dim = states.shape[1]
    cols = np.arange(dim, dtype=np.int64)[None, :] ^ flips[:, None]
    return phases * np.take_along_axis(states, cols, axis=1)


def prob_one(states, bitpos):
    """Probability that the bit at `bitpos` reads 1, for each row."""
    idx = np.arange(states.shape[1], dtype=np.int64)
    sel = (idx >> bitpos) & 1 == 1
    sub = states[:, sel]
    return np.einsum("bi,bi->b", sub.conj(), sub).real


def weighted_outer(states, w):
    """Sum_b w[b] |states[b]><states[b]| (w real, result Hermitian)."""
    return np.einsum("b,bi,bj->ij", w, states, states.conj())


def sweep_states(states, mats, p0, p1):
    """All intermediate batches: out[i] = batch before block i; out[B] = final."""
    nb, dim = states.shape
    out = np.empty((mats.shape[0] + 1, nb, dim), dtype=np.complex128)
    out[0] = states
    for i in range(mats.shape[0]):
        full = embed_gate(mats[i], (p0[i], p1[i]), dim)
        out[i + 1] = out[i] @ full.T
    return out


def suffix_ops(seed, mats, p0, p1):
    """Backward conjugation chain: out[B] = seed; out[i] = M_i^H out[i+1] M_i."""
    nb = mats.shape[0]
    dim = seed.shape[0]
    out = np.empty((nb + 1, dim, dim), dtype=np.complex128)
    out[nb] = seed
    for i in range(nb - 1, -1, -1):
        full = embed_gate(mats[i], (p0[i], p1[i]), dim)
        out[i] = full.conj().T @ out[i + 1] @ full
    return out


def sweep_dms(rho, mats, p0, p1):
    """Forward density-matrix chain: out[0] = rho; out[i+1] = M_i out[i] M_i^H."""
    nb = mats.shape[0]
    dim = rho.shape[0]
    out = np.empty((nb + 1, dim, dim), dtype=np.complex128)
    out[0] = rho
    for i in range(nb):
        full = embed_gate(mats[i], (p0[i], p1[i]), dim)
        out[i + 1] = full @ out[i] @ full.conj().T
    return out


def conj_pauli_weighted(op, flips, phases, w):
    """Sum_b w[b] sigma_b^H op sigma_b for permutation+phase unitaries sigma_b."""
    dim = op.shape[0]
    idx = np.arange(dim, dtype=np.int64)
    acc = np.zeros((dim, dim), dtype=np.complex128)
    for b in range(flips.shape[0]):
        perm = idx ^ flips[b]
        c = phases[b][perm].conj()
        acc += w[b] * (np.outer(c, c.conj()) * op[np.ix_(perm, perm)])
    return acc


def _shift_table(theta):
    """30 parameter vectors: theta with +pi/2 then -pi/2 at each position."""
    shifted = np.repeat(theta[None, :], 30, axis=0)
    for t in range(15):
        shifted[2 * t, t] += np.pi / 2
        shifted[2 * t + 1, t] -= np.pi / 2
    return shifted


def segment_grads(mats, p0, p1, thetas, prefixes, sufops, weights):
    """Parameter-shift gradients for one block segment, state form.

    prefixes[i] is the (nbatch, dim) batch entering block i and sufops[i+1]
    the operator summarizing everything after block i, so the gradient of
    sum_b weights[b] * <out_b|seed|out_b> needs two shifted evaluations of
    block i alone per parameter.
    """
    nblocks = mats.shape[0]
    dim = prefixes.shape[2]
    grads = np.empty(nblocks * 15, dtype=np.float64)
    for i in range(nblocks):
        shifted = _shift_table(thetas[i])
        suf = sufops[i + 1]
        pre = prefixes[i]
        vals = np.empty(30)
        for s in range(30):
            full = embed_gate(su4_single(shifted[s]), (p0[i], p1[i]), dim)
            v = pre @ full.T
            vals[s] = weights @ np.einsum("bi,ij,bj->b", v.conj(), suf, v).real
        grads[15 * i : 15 * (i + 1)] = (vals[0::2] - vals[1::2]) / 2
    return grads


def segment_grads_dm(mats, p0, p1, thetas, rho_pre, sufops):
    """Parameter-shift gradients for one segment, weighted-density-matrix form."""
    nblocks = mats.shape[0]
    dim = rho_pre.shape[1]
    grads = np.empty(nblocks * 15, dtype=np.float64)
    for i in range(nblocks):
        shifted = _shift_table(thetas[i])
        suf = sufops[i + 1]
        rho = rho_pre[i]
        vals = np.empty(30)
        for s in range(30):
            full = embed_gate(su4_single(shifted[s]), (p0[i], p1[i]), dim)
            vals[s] = np.trace(suf @ (full @ rho @ full.conj().T)).real
        grads[15 * i : 15 * (i + 1)] = (vals[0::2] - vals[1::2]) / 2
    return grads


def block_grads_rowops(mat_theta, p0, p1, t_states, e_ops):
    """Parameter-shift gradients of one block with a per-row suffix operator.

    Computes d/dtheta of sum_b <t_states[b] M^H | e_ops[b] | M t_states[b]>
    for the 15 parameters of the block M at bit positions (p0, p1).
    """
    dim = t_states.shape[1]
    shifted = _shift_table(mat_theta)
    vals = np.empty(30)
    for s in range(30):
        full = embed_gate(su4_single(shifted[s]), (p0, p1), dim)
        v = t_states @ full.T
        vals[s] = np.einsum("bi,bij,bj->", v.conj(), e_ops, v).real
    return (vals[0::2] - vals[1::2]) / 2


def pauli1(dim, bitpos, digit):
    """(flip, phase vector) of a single-qubit Pauli I/X/Y/Z at a bit position."""
    idx = np.arange(dim, dtype=np.int64)
    bit = (idx >> bitpos) & 1
    if digit == 0:
        return 0, np.ones(dim, dtype=np.complex128)
    if digit == 1:
        return 1 << bitpos, np.ones(dim, dtype=np.complex128)
    if digit == 2:
        return 1 << bitpos, np.where(bit == 1, 1j, -1j).astype(np.complex128)
    return 0, (1.0 - 2.0 * bit).astype(np.complex128)


def tree_forward(psi0, sys_bitpos, step_mats, nsteps, t_out, leaves_out):
    """Expand the sequential-use branch tree of a single-qubit Pauli comb.

    Branches are base-4 digit strings read most-significant-first; the
    child of tree node pi under digit d is pi*4 + d, so leaf order equals
    flat probability-table order. Level t (4^t states, t >= 1) holds the
    states right after the t-th Pauli, before the shared step unitary
    step_mats[t-1] (a full dim x dim matrix). t_out receives levels
    1..nsteps-1 stacked contiguously; leaves_out the 4^nsteps leaf states.
    """
    dim = psi0.shape[0]
    idx = np.arange(dim, dtype=np.int64)
    paulis = [pauli1(dim, sys_bitpos, d) for d in range(4)]
    cur = psi0[None, :]
    t_off = 0
    for step in range(nsteps):
        k = cur.shape[0]
        nxt = np.empty((4 * k, dim), dtype=np.complex128)
        for d in range(4):
            f, ph = paulis[d]
            # rows p*4+d for all parents p
            nxt[d::4] = ph[None, :] * cur[:, idx ^ f]
        if step < nsteps - 1:
            t_out[t_off : t_off + 4 * k] = nxt
            t_off += 4 * k
            cur = nxt @ step_mats[step].T
        else:
            leaves_out[:] = nxt


def tree_backward(g0, weights, sys_bitpos, step_mats, nsteps, e_out):
    """Weighted suffix-operator tree of a single-qubit Pauli comb.

    e_out is stacked levels 0..nsteps-1; level t starts at offset
    (4^t - 1) // 3 and holds 4^t operators. The level-t entry for node pi
    satisfies: the weighted sum over branch completions of the leaf
    expectation of g0 equals <x| e_t[pi] |x>, with x the state entering
    the t-th Pauli (i.e. right after step_mats[t-1]). Level 0's single
    entry therefore summarizes the whole comb after the initialization
    segment.
    """
    dim = g0.shape[0]
    idx = np.arange(dim, dtype=np.int64)
    pconj = []
    for d in range(4):
        f, ph = pauli1(dim, sys_bitpos, d)
        perm = idx ^ f
        c = ph[perm].conj()
        pconj.append((perm, np.outer(c, c.conj())))
    k = 4 ** (nsteps - 1)
    cur = np.empty((k, dim, dim), dtype=np.complex128)
    for pi in range(k):
        acc = np.zeros((dim, dim), dtype=np.complex128)
        for d in range(4):
            perm, outer = pconj[d]
            acc += weights[pi * 4 + d] * (outer * g0[np.ix_(perm, perm)])
        cur[pi] = acc
    lvl = nsteps - 1
    while True:
        e_out[(4**lvl - 1) // 3 : (4 ** (lvl + 1) - 1) // 3] = cur
        if lvl == 0:
            break
        step = step_mats[lvl - 1]
        k = cur.shape[0] // 4
        nxt = np.empty((k, dim, dim), dtype=np.complex128)
        for pi in range(k):
            acc = np.zeros((dim, dim), dtype=np.complex128)
            for d in range(4):
                pre = step.conj().T @ cur[pi * 4 + d] @ step
                perm, outer = pconj[d]
                acc += outer * pre[np.ix_(perm, perm)]
            nxt[pi] = acc
        cur = nxt
        lvl -= 1
