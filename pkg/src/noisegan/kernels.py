"""Kernel backend selection.

Two interchangeable implementations of the hot statevector kernels exist:
a numba one (_kernels_numba) and a pure-numpy reference (_kernels_numpy).
The NOISEGAN_BACKEND environment variable picks one at import time:

  * unset/empty -> numba, silently falling back to numpy (with a warning)
    if numba cannot be imported,
  * "numba"     -> numba, raising if it cannot be imported,
  * "numpy"     -> the pure-numpy reference.

Cold helpers (gate embedding, Pauli tables) are always served by the
numpy module; they run once per configuration, not per training step.
"""

import os
import warnings

from . import _kernels_numpy as _numpy_impl

_HOT_NAMES = (
    "su4_single",
    "su4_matrices",
    "apply_gate",
    "run_gates",
    "apply_blocks",
    "pauli_layer",
    "prob_one",
    "weighted_outer",
    "sweep_states",
    "suffix_ops",
    "sweep_dms",
    "conj_pauli_weighted",
    "segment_grads",
    "segment_grads_dm",
    "block_grads_rowops",
    "tree_forward",
    "tree_backward",
)


def get_backend(name):
    """Return the kernel module for an explicit backend name."""
    if name == "numpy":
        return _numpy_impl
    if name == "numba":
        from . import _kernels_numba as _numba_impl

        return _numba_impl
    raise ValueError(f"unknown kernel backend {name!r}")


def _select():
    choice = os.environ.get("NOISEGAN_BACKEND", "").strip().lower()
    if choice not in ("", "numba", "numpy"):
        raise ValueError(
            f"NOISEGAN_BACKEND must be 'numba' or 'numpy', got {choice!r}"
        )
    if choice == "numpy":
        return _numpy_impl, "numpy"
    try:
        return get_backend("numba"), "numba"
    except ImportError:
        if choice == "numba":
            raise
        warnings.warn(
            "numba is unavailable; falling back to the pure-numpy kernels",
            RuntimeWarning,
            stacklevel=2,
        )
        return _numpy_impl, "numpy"


_impl, BACKEND = _select()

su4_single = _impl.su4_single
su4_matrices = _impl.su4_matrices
apply_gate = _impl.apply_gate
run_gates = _impl.run_gates
apply_blocks = _impl.apply_blocks
pauli_layer = _impl.pauli_layer
prob_one = _impl.prob_one
weighted_outer = _impl.weighted_outer
sweep_states = _impl.sweep_states
suffix_ops = _impl.suffix_ops
sweep_dms = _impl.sweep_dms
conj_pauli_weighted = _impl.conj_pauli_weighted
segment_grads = _impl.segment_grads
segment_grads_dm = _impl.segment_grads_dm
block_grads_rowops = _impl.block_grads_rowops
tree_forward = _impl.tree_forward
tree_backward = _impl.tree_backward

# cold helpers, backend-independent
embed_gate = _numpy_impl.embed_gate
pauli1 = _numpy_impl.pauli1

__all__ = list(_HOT_NAMES) + ["BACKEND", "get_backend", "embed_gate", "pauli1"]
