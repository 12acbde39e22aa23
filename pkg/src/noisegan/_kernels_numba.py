"""Numba statevector kernels.

Bit-twiddling implementation of the kernel API (see _kernels_numpy for
the reference semantics and the layout conventions). Gates are never
embedded into full matrices here; indices touched by a gate are
enumerated by depositing zero bits into a compact counter. The
parameter-shift segment kernels additionally factor the batched
quadratic form through a 4x4x4x4 contraction tensor so each of the 30
shifted evaluations per block costs O(4^4) instead of O(dim^2).

All kernels are serial and deterministic.
"""

import numba as nb
import numpy as np


@nb.njit(cache=True)
def _deposit1(r, p):
    """Insert a zero bit at position p of the compact index r."""
    return ((r >> p) << (p + 1)) | (r & ((1 << p) - 1))


@nb.njit(cache=True)
def _deposit2(r, plo, phi):
    """Insert zero bits at positions plo < phi of the compact index r."""
    x = ((r >> plo) << (plo + 1)) | (r & ((1 << plo) - 1))
    return ((x >> phi) << (phi + 1)) | (x & ((1 << phi) - 1))


@nb.njit(cache=True)
def _mm2(a, b):
    out = np.empty((2, 2), np.complex128)
    for i in range(2):
        for j in range(2):
            out[i, j] = a[i, 0] * b[0, j] + a[i, 1] * b[1, j]
    return out


@nb.njit(cache=True)
def _mm4(a, b):
    out = np.empty((4, 4), np.complex128)
    for i in range(4):
        for j in range(4):
            acc = 0.0 + 0.0j
            for k in range(4):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


@nb.njit(cache=True)
def _kron22(a, b):
    out = np.empty((4, 4), np.complex128)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    out[2 * i + k, 2 * j + l] = a[i, j] * b[k, l]
    return out


@nb.njit(cache=True)
def _rx(theta):
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    out = np.empty((2, 2), np.complex128)
    out[0, 0] = c
    out[0, 1] = -1j * s
    out[1, 0] = -1j * s
    out[1, 1] = c
    return out


@nb.njit(cache=True)
def _ry(theta):
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    out = np.empty((2, 2), np.complex128)
    out[0, 0] = c
    out[0, 1] = -s
    out[1, 0] = s
    out[1, 1] = c
    return out


@nb.njit(cache=True)
def _rz(theta):
    e = np.exp(-1j * theta / 2)
    out = np.zeros((2, 2), np.complex128)
    out[0, 0] = e
    out[1, 1] = e.conjugate()
    return out


@nb.njit(cache=True)
def _eye2():
    out = np.zeros((2, 2), np.complex128)
    out[0, 0] = 1.0
    out[1, 1] = 1.0
    return out


@nb.njit(cache=True)
def _cn_ba():
    # control = less significant sub-index b
    out = np.zeros((4, 4), np.complex128)
    out[0, 0] = 1.0
    out[1, 3] = 1.0
    out[2, 2] = 1.0
    out[3, 1] = 1.0
    return out


@nb.njit(cache=True)
def _cn_ab():
    # control = more significant sub-index a
    out = np.zeros((4, 4), np.complex128)
    out[0, 0] = 1.0
    out[1, 1] = 1.0
    out[2, 3] = 1.0
    out[3, 2] = 1.0
    return out


@nb.njit(cache=True)
def su4_single(theta):
    """Compile one 15-parameter two-qubit block to its 4x4 matrix."""
    ta = _mm2(_rz(theta[2]), _mm2(_ry(theta[1]), _rz(theta[0])))
    tb = _mm2(_rz(theta[5]), _mm2(_ry(theta[4]), _rz(theta[3])))
    u = _mm4(_cn_ba(), _kron22(ta, tb))
    u = _mm4(_cn_ab(), _mm4(_kron22(_rz(theta[6]), _ry(theta[7])), u))
    u = _mm4(_cn_ba(), _mm4(_kron22(_eye2(), _ry(theta[8])), u))
    oa = _mm2(_rz(theta[11]), _mm2(_ry(theta[10]), _rz(theta[9])))
    ob = _mm2(_rz(theta[14]), _mm2(_ry(theta[13]), _rz(theta[12])))
    return _mm4(_kron22(oa, ob), u)


@nb.njit(cache=True)
def su4_matrices(thetas):
    """Compile (B, 15) block parameters to (B, 4, 4) matrices."""
    out = np.empty((thetas.shape[0], 4, 4), np.complex128)
    for i in range(thetas.shape[0]):
        out[i] = su4_single(thetas[i])
    return out


@nb.njit(cache=True)
def apply_gate(amps, gate, bitpos):
    """Apply a 2^k x 2^k gate at the given bit positions (MSB first)."""
    k = bitpos.shape[0]
    sub = 1 << k
    dim = amps.shape[0]
    srt = np.sort(bitpos)
    offs = np.zeros(sub, np.int64)
    for t in range(sub):
        for j in range(k):
            if (t >> (k - 1 - j)) & 1:
                offs[t] |= np.int64(1) << bitpos[j]
    out = amps.copy()
    scratch = np.empty(sub, np.complex128)
    for r in range(dim >> k):
        x = np.int64(r)
        for j in range(k):
            x = _deposit1(x, srt[j])
        for t in range(sub):
            scratch[t] = out[x + offs[t]]
        for t in range(sub):
            acc = 0.0 + 0.0j
            for u in range(sub):
                acc += gate[t, u] * scratch[u]
            out[x + offs[t]] = acc
    return out


@nb.njit(cache=True)
def run_gates(amps, kinds, q0, q1, pidx, params, nqubits):
    """Interpret an encoded gate list: kinds 0=RX, 1=RY, 2=RZ, 3=CNOT."""
    state = amps.copy()
    dim = state.shape[0]
    half = dim >> 1
    for g in range(kinds.shape[0]):
        if kinds[g] == 3:
            pc = nqubits - 1 - q0[g]
            pt = nqubits - 1 - q1[g]
            mc = np.int64(1) << pc
            mt = np.int64(1) << pt
            for i in range(dim):
                # visit each swapped pair once, from its target-0 member
                if (i & mc) != 0 and (i & mt) == 0:
                    j = i | mt
                    tmp = state[i]
                    state[i] = state[j]
                    state[j] = tmp
        else:
            p = nqubits - 1 - q0[g]
            m = np.int64(1) << p
            theta = params[pidx[g]]
            c = np.cos(theta / 2)
            s = np.sin(theta / 2)
            for r in range(half):
                i0 = _deposit1(np.int64(r), p)
                i1 = i0 | m
                a0 = state[i0]
                a1 = state[i1]
                if kinds[g] == 0:
                    state[i0] = c * a0 - 1j * s * a1
                    state[i1] = -1j * s * a0 + c * a1
                elif kinds[g] == 1:
                    state[i0] = c * a0 - s * a1
                    state[i1] = s * a0 + c * a1
                else:
                    e = complex(c, -s)
                    state[i0] = e * a0
                    state[i1] = e.conjugate() * a1
    return state


@nb.njit(cache=True)
def _block_apply_inplace(states, mat, p0, p1):
    """Apply one 4x4 block at bit positions (p0=a, p1=b) to every row."""
    nbatch, dim = states.shape
    plo = p0 if p0 < p1 else p1
    phi = p1 if p0 < p1 else p0
    m0 = np.int64(1) << p0
    m1 = np.int64(1) << p1
    for b in range(nbatch):
        for r in range(dim >> 2):
            x = _deposit2(np.int64(r), plo, phi)
            i1 = x | m1
            i2 = x | m0
            i3 = x | m0 | m1
            a0 = states[b, x]
            a1 = states[b, i1]
            a2 = states[b, i2]
            a3 = states[b, i3]
            states[b, x] = mat[0, 0] * a0 + mat[0, 1] * a1 + mat[0, 2] * a2 + mat[0, 3] * a3
            states[b, i1] = mat[1, 0] * a0 + mat[1, 1] * a1 + mat[1, 2] * a2 + mat[1, 3] * a3
            states[b, i2] = mat[2, 0] * a0 + mat[2, 1] * a1 + mat[2, 2] * a2 + mat[2, 3] * a3
            states[b, i3] = mat[3, 0] * a0 + mat[3, 1] * a1 + mat[3, 2] * a2 + mat[3, 3] * a3


@nb.njit(cache=True)
def apply_blocks(states, mats, p0, p1):
    """Apply a sequence of two-qubit blocks to every row of `states`."""
    out = states.copy()
    for i in range(mats.shape[0]):
        _block_apply_inplace(out, mats[i], p0[i], p1[i])
    return out


@nb.njit(cache=True)
def pauli_layer(states, flips, phases):
    """Per-row permutation+phase: out[b, i] = phases[b, i] * in[b, i ^ flips[b]]."""
    nbatch, dim = states.shape
    out = np.empty((nbatch, dim), np.complex128)
    for b in range(nbatch):
        f = flips[b]
        for i in range(dim):
            out[b, i] = phases[b, i] * states[b, i ^ f]
    return out


@nb.njit(cache=True)
def prob_one(states, bitpos):
    """Probability that the bit at `bitpos` reads 1, for each row."""
    nbatch, dim = states.shape
    out = np.zeros(nbatch)
    for b in range(nbatch):
        acc = 0.0
        for i in range(dim):
            if (i >> bitpos) & 1:
                a = states[b, i]
                acc += a.real * a.real + a.imag * a.imag
        out[b] = acc
    return out


@nb.njit(cache=True)
def weighted_outer(states, w):
    """Sum_b w[b] |states[b]><states[b]|."""
    nbatch, dim = states.shape
    out = np.zeros((dim, dim), np.complex128)
    for b in range(nbatch):
        wb = w[b]
        if wb != 0.0:
            for i in range(dim):
                c = wb * states[b, i]
                for j in range(dim):
                    out[i, j] += c * states[b, j].conjugate()
    return out


@nb.njit(cache=True)
def sweep_states(states, mats, p0, p1):
    """All intermediate batches: out[i] = batch before block i; out[B] = final."""
    nbk = mats.shape[0]
    nbatch, dim = states.shape
    out = np.empty((nbk + 1, nbatch, dim), np.complex128)
    out[0] = states
    for i in range(nbk):
        out[i + 1] = out[i]
        _block_apply_inplace(out[i + 1], mats[i], p0[i], p1[i])
    return out


@nb.njit(cache=True)
def _rows_mix(x, m, p0, p1, dagger):
    """In place x <- M x with M = embed(m) (or embed(m)^H when dagger)."""
    dim = x.shape[0]
    plo = p0 if p0 < p1 else p1
    phi = p1 if p0 < p1 else p0
    m0 = np.int64(1) << p0
    m1 = np.int64(1) << p1
    for r in range(dim >> 2):
        base = _deposit2(np.int64(r), plo, phi)
        i1 = base | m1
        i2 = base | m0
        i3 = base | m0 | m1
        for j in range(dim):
            a0 = x[base, j]
            a1 = x[i1, j]
            a2 = x[i2, j]
            a3 = x[i3, j]
            if dagger:
                x[base, j] = (
                    m[0, 0].conjugate() * a0
                    + m[1, 0].conjugate() * a1
                    + m[2, 0].conjugate() * a2
                    + m[3, 0].conjugate() * a3
                )
                x[i1, j] = (
                    m[0, 1].conjugate() * a0
                    + m[1, 1].conjugate() * a1
                    + m[2, 1].conjugate() * a2
                    + m[3, 1].conjugate() * a3
                )
                x[i2, j] = (
                    m[0, 2].conjugate() * a0
                    + m[1, 2].conjugate() * a1
                    + m[2, 2].conjugate() * a2
                    + m[3, 2].conjugate() * a3
                )
                x[i3, j] = (
                    m[0, 3].conjugate() * a0
                    + m[1, 3].conjugate() * a1
                    + m[2, 3].conjugate() * a2
                    + m[3, 3].conjugate() * a3
                )
            else:
                x[base, j] = m[0, 0] * a0 + m[0, 1] * a1 + m[0, 2] * a2 + m[0, 3] * a3
                x[i1, j] = m[1, 0] * a0 + m[1, 1] * a1 + m[1, 2] * a2 + m[1, 3] * a3
                x[i2, j] = m[2, 0] * a0 + m[2, 1] * a1 + m[2, 2] * a2 + m[2, 3] * a3
                x[i3, j] = m[3, 0] * a0 + m[3, 1] * a1 + m[3, 2] * a2 + m[3, 3] * a3


@nb.njit(cache=True)
def _cols_mix(x, m, p0, p1, dagger):
    """In place x <- x M with M = embed(m) (or embed(m)^H when dagger)."""
    dim = x.shape[0]
    plo = p0 if p0 < p1 else p1
    phi = p1 if p0 < p1 else p0
    m0 = np.int64(1) << p0
    m1 = np.int64(1) << p1
    for i in range(dim):
        for r in range(dim >> 2):
            base = _deposit2(np.int64(r), plo, phi)
            j1 = base | m1
            j2 = base | m0
            j3 = base | m0 | m1
            a0 = x[i, base]
            a1 = x[i, j1]
            a2 = x[i, j2]
            a3 = x[i, j3]
            if dagger:
                # (x M^H)[i, j_t] = sum_u x[i, j_u] conj(m[t, u])
                x[i, base] = (
                    a0 * m[0, 0].conjugate()
                    + a1 * m[0, 1].conjugate()
                    + a2 * m[0, 2].conjugate()
                    + a3 * m[0, 3].conjugate()
                )
                x[i, j1] = (
                    a0 * m[1, 0].conjugate()
                    + a1 * m[1, 1].conjugate()
                    + a2 * m[1, 2].conjugate()
                    + a3 * m[1, 3].conjugate()
                )
                x[i, j2] = (
                    a0 * m[2, 0].conjugate()
                    + a1 * m[2, 1].conjugate()
                    + a2 * m[2, 2].conjugate()
                    + a3 * m[2, 3].conjugate()
                )
                x[i, j3] = (
                    a0 * m[3, 0].conjugate()
                    + a1 * m[3, 1].conjugate()
                    + a2 * m[3, 2].conjugate()
                    + a3 * m[3, 3].conjugate()
                )
            else:
                # (x M)[i, j_t] = sum_u x[i, j_u] m[u, t]
                x[i, base] = a0 * m[0, 0] + a1 * m[1, 0] + a2 * m[2, 0] + a3 * m[3, 0]
                x[i, j1] = a0 * m[0, 1] + a1 * m[1, 1] + a2 * m[2, 1] + a3 * m[3, 1]
                x[i, j2] = a0 * m[0, 2] + a1 * m[1, 2] + a2 * m[2, 2] + a3 * m[3, 2]
                x[i, j3] = a0 * m[0, 3] + a1 * m[1, 3] + a2 * m[2, 3] + a3 * m[3, 3]


@nb.njit(cache=True)
def suffix_ops(seed, mats, p0, p1):
    """Backward conjugation chain: out[B] = seed; out[i] = M_i^H out[i+1] M_i."""
    nbk = mats.shape[0]
    dim = seed.shape[0]
    out = np.empty((nbk + 1, dim, dim), np.complex128)
    out[nbk] = seed
    for i in range(nbk - 1, -1, -1):
        out[i] = out[i + 1]
        _rows_mix(out[i], mats[i], p0[i], p1[i], True)
        _cols_mix(out[i], mats[i], p0[i], p1[i], False)
    return out


@nb.njit(cache=True)
def sweep_dms(rho, mats, p0, p1):
    """Forward density-matrix chain: out[0] = rho; out[i+1] = M_i out[i] M_i^H."""
    nbk = mats.shape[0]
    dim = rho.shape[0]
    out = np.empty((nbk + 1, dim, dim), np.complex128)
    out[0] = rho
    for i in range(nbk):
        out[i + 1] = out[i]
        _rows_mix(out[i + 1], mats[i], p0[i], p1[i], False)
        _cols_mix(out[i + 1], mats[i], p0[i], p1[i], True)
    return out


@nb.njit(cache=True)
def conj_pauli_weighted(op, flips, phases, w):
    """Sum_b w[b] sigma_b^H op sigma_b for permutation+phase unitaries sigma_b."""
    dim = op.shape[0]
    out = np.zeros((dim, dim), np.complex128)
    c = np.empty(dim, np.complex128)
    for b in range(flips.shape[0]):
        wb = w[b]
        if wb == 0.0:
            continue
        f = flips[b]
        for i in range(dim):
            c[i] = phases[b, i ^ f].conjugate()
        for x in range(dim):
            cx = wb * c[x]
            for y in range(dim):
                out[x, y] += cx * c[y].conjugate() * op[x ^ f, y ^ f]
    return out


@nb.njit(cache=True)
def _a_tensor(g, r, p0, p1):
    """A[t',u',t,u] = sum_{rq} g[(t',r),(u',q)] r[(u,q),(t,r)].

    With E_s = embed(m_s) acting on the sub-index pair, this contraction
    turns Tr(g E_s r E_s^H) into sum conj(m_s[t',t]) m_s[u',u] A[t',u',t,u],
    so the 30 parameter-shift evaluations of a block reuse one A.
    """
    dim = g.shape[0]
    plo = p0 if p0 < p1 else p1
    phi = p1 if p0 < p1 else p0
    m0 = np.int64(1) << p0
    m1 = np.int64(1) << p1
    offs = np.empty(4, np.int64)
    offs[0] = 0
    offs[1] = m1
    offs[2] = m0
    offs[3] = m0 | m1
    a = np.zeros((4, 4, 4, 4), np.complex128)
    quarter = dim >> 2
    for ri in range(quarter):
        br = _deposit2(np.int64(ri), plo, phi)
        for qi in range(quarter):
            bq = _deposit2(np.int64(qi), plo, phi)
            for tp in range(4):
                for up in range(4):
                    gv = g[br + offs[tp], bq + offs[up]]
                    if gv != 0.0:
                        for t in range(4):
                            for u in range(4):
                                a[tp, up, t, u] += gv * r[bq + offs[u], br + offs[t]]
    return a


@nb.njit(cache=True)
def _a_form(a, m):
    """Real part of sum conj(m[t',t]) m[u',u] A[t',u',t,u]."""
    acc = 0.0 + 0.0j
    for tp in range(4):
        for t in range(4):
            cm = m[tp, t].conjugate()
            if cm != 0.0:
                for up in range(4):
                    for u in range(4):
                        acc += cm * m[up, u] * a[tp, up, t, u]
    return acc.real


@nb.njit(cache=True)
def _shift_grads_from_a(a, theta, out, off):
    """15 parameter-shift gradients of the A-form at theta into out[off:off+15]."""
    work = theta.copy()
    for t in range(15):
        orig = work[t]
        work[t] = orig + np.pi / 2
        plus = _a_form(a, su4_single(work))
        work[t] = orig - np.pi / 2
        minus = _a_form(a, su4_single(work))
        work[t] = orig
        out[off + t] = (plus - minus) / 2


@nb.njit(cache=True)
def segment_grads(mats, p0, p1, thetas, prefixes, sufops, weights):
    """Parameter-shift gradients for one block segment, state form."""
    nblocks = mats.shape[0]
    grads = np.empty(nblocks * 15)
    for i in range(nblocks):
        r = weighted_outer(prefixes[i], weights)
        a = _a_tensor(sufops[i + 1], r, p0[i], p1[i])
        _shift_grads_from_a(a, thetas[i], grads, 15 * i)
    return grads


@nb.njit(cache=True)
def segment_grads_dm(mats, p0, p1, thetas, rho_pre, sufops):
    """Parameter-shift gradients for one segment, weighted-density-matrix form."""
    nblocks = mats.shape[0]
    grads = np.empty(nblocks * 15)
    for i in range(nblocks):
        a = _a_tensor(sufops[i + 1], rho_pre[i], p0[i], p1[i])
        _shift_grads_from_a(a, thetas[i], grads, 15 * i)
    return grads


@nb.njit(cache=True)
def block_grads_rowops(mat_theta, p0, p1, t_states, e_ops):
    """Parameter-shift gradients of one block with a per-row suffix operator."""
    nbatch, dim = t_states.shape
    plo = p0 if p0 < p1 else p1
    phi = p1 if p0 < p1 else p0
    m0 = np.int64(1) << p0
    m1 = np.int64(1) << p1
    offs = np.empty(4, np.int64)
    offs[0] = 0
    offs[1] = m1
    offs[2] = m0
    offs[3] = m0 | m1
    quarter = dim >> 2
    a = np.zeros((4, 4, 4, 4), np.complex128)
    for b in range(nbatch):
        for ri in range(quarter):
            br = _deposit2(np.int64(ri), plo, phi)
            for qi in range(quarter):
                bq = _deposit2(np.int64(qi), plo, phi)
                for tp in range(4):
                    for up in range(4):
                        gv = e_ops[b, br + offs[tp], bq + offs[up]]
                        if gv != 0.0:
                            for t in range(4):
                                cu = t_states[b, br + offs[t]].conjugate()
                                for u in range(4):
                                    a[tp, up, t, u] += gv * t_states[b, bq + offs[u]] * cu
    grads = np.empty(15)
    _shift_grads_from_a(a, mat_theta, grads, 0)
    return grads


@nb.njit(cache=True)
def _pauli1_tables(dim, bitpos):
    """Flip masks (4,) and phase tables (4, dim) of I/X/Y/Z at a bit position."""
    flips = np.zeros(4, np.int64)
    phases = np.ones((4, dim), np.complex128)
    m = np.int64(1) << bitpos
    flips[1] = m
    flips[2] = m
    for i in range(dim):
        if (i >> bitpos) & 1:
            phases[2, i] = 1j
            phases[3, i] = -1.0
        else:
            phases[2, i] = -1j
    return flips, phases


@nb.njit(cache=True)
def tree_forward(psi0, sys_bitpos, step_mats, nsteps, t_out, leaves_out):
    """Expand the sequential-use branch tree of a single-qubit Pauli comb.

    Level t (4^t states) holds the states right after the t-th Pauli,
    before the full-register step unitary step_mats[t-1]; child of node
    pi under digit d is pi*4 + d so leaf order equals flat table order.
    t_out receives levels 1..nsteps-1 stacked; leaves_out the leaves.
    """
    dim = psi0.shape[0]
    flips, phases = _pauli1_tables(dim, sys_bitpos)
    cur = psi0.copy().reshape(1, dim)
    t_off = 0
    for step in range(nsteps):
        k = cur.shape[0]
        nxt = np.empty((4 * k, dim), np.complex128)
        for p in range(k):
            for d in range(4):
                f = flips[d]
                for i in range(dim):
                    nxt[4 * p + d, i] = phases[d, i] * cur[p, i ^ f]
        if step < nsteps - 1:
            t_out[t_off : t_off + 4 * k] = nxt
            t_off += 4 * k
            m = step_mats[step]
            cur = np.empty((4 * k, dim), np.complex128)
            for b in range(4 * k):
                for i in range(dim):
                    acc = 0.0 + 0.0j
                    for j in range(dim):
                        acc += m[i, j] * nxt[b, j]
                    cur[b, i] = acc
        else:
            leaves_out[:] = nxt


@nb.njit(cache=True)
def tree_backward(g0, weights, sys_bitpos, step_mats, nsteps, e_out):
    """Weighted suffix-operator tree of a single-qubit Pauli comb.

    e_out is stacked levels 0..nsteps-1 with level t at offset
    (4^t - 1) // 3; see the reference backend for the exact contract.
    """
    dim = g0.shape[0]
    flips, phases = _pauli1_tables(dim, sys_bitpos)
    conj_ph = np.empty((4, dim), np.complex128)
    for d in range(4):
        f = flips[d]
        for i in range(dim):
            conj_ph[d, i] = phases[d, i ^ f].conjugate()
    k = 4 ** (nsteps - 1)
    cur = np.zeros((k, dim, dim), np.complex128)
    for pi in range(k):
        for d in range(4):
            wv = weights[pi * 4 + d]
            if wv == 0.0:
                continue
            f = flips[d]
            for x in range(dim):
                cx = wv * conj_ph[d, x]
                for y in range(dim):
                    cur[pi, x, y] += cx * conj_ph[d, y].conjugate() * g0[x ^ f, y ^ f]
    lvl = nsteps - 1
    while True:
        e_out[(4**lvl - 1) // 3 : (4 ** (lvl + 1) - 1) // 3] = cur
        if lvl == 0:
            break
        m = step_mats[lvl - 1]
        k = cur.shape[0] // 4
        nxt = np.zeros((k, dim, dim), np.complex128)
        pre = np.empty((dim, dim), np.complex128)
        tmp = np.empty((dim, dim), np.complex128)
        for pi in range(k):
            for d in range(4):
                # pre = m^H cur[pi*4+d] m
                src = cur[pi * 4 + d]
                for x in range(dim):
                    for y in range(dim):
                        acc = 0.0 + 0.0j
                        for j in range(dim):
                            acc += src[x, j] * m[j, y]
                        tmp[x, y] = acc
                for x in range(dim):
                    for y in range(dim):
                        acc = 0.0 + 0.0j
                        for j in range(dim):
                            acc += m[j, x].conjugate() * tmp[j, y]
                        pre[x, y] = acc
                f = flips[d]
                for x in range(dim):
                    cx = conj_ph[d, x]
                    for y in range(dim):
                        nxt[pi, x, y] += cx * conj_ph[d, y].conjugate() * pre[x ^ f, y ^ f]
        cur = nxt
        lvl -= 1
