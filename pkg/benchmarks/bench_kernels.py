"""Compare the numba and numpy kernel backends.

Times each hot kernel on the register shapes the shipped experiments
actually produce (two-use spatial game on 5 qubits, four-step temporal
comb on 3 qubits), then optionally times short end-to-end training runs
in subprocesses with NOISEGAN_BACKEND set, which is exactly how a user
selects a backend.

Usage:
    python3 benchmarks/bench_kernels.py [--repeats N] [--turns N] [--no-games]
"""

import argparse
import statistics
import subprocess
import sys
import time
import os

import numpy as np

from noisegan import kernels


def median_ms(fn, repeats):
    fn()  # warmup (loads the numba disk cache on first call)
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(samples)


def kernel_cases(rng):
    """(name, builder) pairs; builder(backend) returns a no-arg callable."""
    # spatial two-use shapes: 5-qubit register, 16 branches, 8 + 4 blocks
    dim, nb = 32, 16
    thetas = rng.uniform(-np.pi, np.pi, size=(8, 15))
    pairs = [(0, 1), (2, 3), (1, 2), (3, 4)] * 2
    p0 = np.array([4 - a for a, _ in pairs], dtype=np.int64)
    p1 = np.array([4 - b for _, b in pairs], dtype=np.int64)
    states = rng.normal(size=(nb, dim)) + 1j * rng.normal(size=(nb, dim))
    states /= np.linalg.norm(states, axis=1, keepdims=True)
    psi = states[0]
    flips = rng.integers(0, dim, size=nb).astype(np.int64)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, size=(nb, dim)))
    w = rng.normal(size=nb)
    seed = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    seed = seed + seed.conj().T

    # temporal four-step shapes: 3-qubit register, 256 leaves
    tdim, nsteps, sysbit = 8, 4, 2
    tpsi = rng.normal(size=tdim) + 1j * rng.normal(size=tdim)
    tpsi /= np.linalg.norm(tpsi)
    step_mats = np.stack(
        [np.linalg.qr(rng.normal(size=(tdim, tdim)) + 1j * rng.normal(size=(tdim, tdim)))[0]
         for _ in range(nsteps - 1)]
    )
    tw = rng.uniform(size=4**nsteps)
    tg0 = rng.normal(size=(tdim, tdim)) + 1j * rng.normal(size=(tdim, tdim))
    tg0 = tg0 + tg0.conj().T

    def with_backend(k):
        mats = k.su4_matrices(thetas)
        prefixes = k.sweep_states(states, mats, p0, p1)
        sufops = k.suffix_ops(seed, mats, p0, p1)
        rho = k.weighted_outer(states, w)
        rho_sweep = k.sweep_dms(rho, mats, p0, p1)
        e_ops = np.stack([seed] * nb)
        t_buf = np.empty(((4**nsteps - 4) // 3, tdim), dtype=np.complex128)
        leaves = np.empty((4**nsteps, tdim), dtype=np.complex128)
        e_buf = np.empty(((4**nsteps - 1) // 3, tdim, tdim), dtype=np.complex128)
        return [
            ("su4_matrices", lambda: k.su4_matrices(thetas)),
            ("apply_blocks", lambda: k.apply_blocks(states.copy(), mats, p0, p1)),
            ("pauli_layer", lambda: k.pauli_layer(states, flips, phases)),
            ("prob_one", lambda: k.prob_one(states, 4)),
            ("sweep_states", lambda: k.sweep_states(states, mats, p0, p1)),
            ("suffix_ops", lambda: k.suffix_ops(seed, mats, p0, p1)),
            ("segment_grads", lambda: k.segment_grads(mats, p0, p1, thetas, prefixes, sufops, w)),
            ("weighted_outer", lambda: k.weighted_outer(states, w)),
            ("sweep_dms", lambda: k.sweep_dms(rho, mats, p0, p1)),
            ("segment_grads_dm", lambda: k.segment_grads_dm(mats, p0, p1, thetas, rho_sweep, sufops)),
            ("conj_pauli_weighted", lambda: k.conj_pauli_weighted(seed, flips, phases, w)),
            ("block_grads_rowops", lambda: k.block_grads_rowops(thetas[0], 4, 3, states, e_ops)),
            ("tree_forward", lambda: k.tree_forward(tpsi, sysbit, step_mats, nsteps, t_buf, leaves)),
            ("tree_backward", lambda: k.tree_backward(tg0, tw, sysbit, step_mats, nsteps, e_buf)),
        ]

    return with_backend


GAME_SNIPPETS = {
    "spatial n=2 (FULL)": """
import time, numpy as np
from noisegan import channels, game
from noisegan.channels import CorrelationModel, ProbTable
prior = ProbTable(1, np.array([0.55, 0.2, 0.15, 0.1]))
target = channels.correlated_table(CorrelationModel(prior, 0.5), 2)
cfg = game.GameConfig(n_uses=2, correlation_kind=game.SPATIAL, seed=0,
                      max_turns={turns}, fidelity_threshold=2.0)
t0 = time.perf_counter()
game.train(target, game.FULL_SOFTMAX, cfg)
print(time.perf_counter() - t0)
""",
    "temporal n=2 (FULL)": """
import time, numpy as np
from noisegan import channels, game
from noisegan.channels import CorrelationModel, ProbTable
prior = ProbTable(1, np.array([0.55, 0.2, 0.15, 0.1]))
target = channels.correlated_table(CorrelationModel(prior, 0.5), 2)
cfg = game.GameConfig(n_uses=2, correlation_kind=game.TEMPORAL, seed=0,
                      max_turns={turns}, fidelity_threshold=2.0)
t0 = time.perf_counter()
game.train(target, game.FULL_SOFTMAX, cfg)
print(time.perf_counter() - t0)
""",
}


def run_game(snippet, backend):
    env = dict(os.environ, NOISEGAN_BACKEND=backend)
    out = subprocess.run(
        [sys.executable, "-c", snippet], env=env, capture_output=True, text=True
    )
    if out.returncode != 0:
        raise RuntimeError(out.stderr)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--turns", type=int, default=40,
                    help="training turns for the end-to-end comparison")
    ap.add_argument("--no-games", action="store_true",
                    help="skip the subprocess end-to-end runs")
    args = ap.parse_args(argv)

    try:
        numba = kernels.get_backend("numba")
    except ImportError:
        numba = None
    numpy_k = kernels.get_backend("numpy")

    rng = np.random.default_rng(0)
    builder = kernel_cases(rng)
    rows = []
    numpy_cases = dict(builder(numpy_k))
    numba_cases = dict(builder(numba)) if numba else {}
    for name, np_fn in numpy_cases.items():
        t_np = median_ms(np_fn, args.repeats)
        if numba:
            t_nb = median_ms(numba_cases[name], args.repeats)
            rows.append((name, t_nb, t_np, t_np / t_nb))
        else:
            rows.append((name, float("nan"), t_np, float("nan")))

    print(f"{'kernel':<22}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    print("-" * 51)
    for name, t_nb, t_np, ratio in rows:
        print(f"{name:<22}{t_nb:>10.4f}{t_np:>10.4f}{ratio:>8.1f}x")

    if args.no_games:
        return
    if numba is None:
        print("\nnumba unavailable; skipping end-to-end comparison")
        return

    print(f"\nend-to-end training, {args.turns} turns (subprocess per backend):")
    print(f"{'game':<22}{'numba s':>10}{'numpy s':>10}{'speedup':>9}")
    print("-" * 51)
    for name, tmpl in GAME_SNIPPETS.items():
        snippet = tmpl.format(turns=args.turns)
        t_nb = run_game(snippet, "numba")
        t_np = run_game(snippet, "numpy")
        print(f"{name:<22}{t_nb:>10.2f}{t_np:>10.2f}{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
