"""Correlated-noise channel simulator and adversarial reconstruction engine.

An unknown noise map — a Pauli channel with spatial or temporal
correlations, or a random-phase metrology channel — is reconstructed by
training a softmax generator against a parameterized-circuit
discriminator on the exact statevector simulator in :mod:`noisegan.qsim`.
"""

from .channels import (
    CorrelationModel,
    PauliIndex,
    ProbTable,
    RandomUnitaryMap,
    apply_pauli_spatial,
    avg_fidelity,
    choi_state,
    correlated_table,
    factorized_table,
    kl_divergence,
    metrology_map,
    pauli_map,
)
from .game import (
    FACTORIZED_SOFTMAX,
    FULL_SOFTMAX,
    MU_ONLY,
    SPATIAL,
    TEMPORAL,
    DiscriminatorParams,
    GameConfig,
    GeneratorParams,
    OptimizerState,
    TrainingDiverged,
    TrainingLog,
    TurnRecord,
    branch_scores,
    generator_gradient,
    generator_table,
    optimistic_adam_step,
    pauli_choi_fidelity,
    score,
    train,
    zero_optimizer,
)
from .metrology import (
    MetrologyConfig,
    brute_force_gram,
    choi_fidelity,
    gram_eigenvalues,
    is_identifiable,
    phase_estimation_error,
    run_metrology_game,
)
from .pqc import Gate, ParamCircuit, QcnnSpec, ansatz_pairs, layered_ansatz, param_shift_grad, qcnn, su4_block
from .qsim import DensityMatrix, PureState, apply_gate, fidelity, kron, partial_trace, projector_expectation, psd_sqrt, pure_dm, zero_state

__version__ = "0.1.0"

__all__ = [
    "CorrelationModel",
    "PauliIndex",
    "ProbTable",
    "RandomUnitaryMap",
    "apply_pauli_spatial",
    "avg_fidelity",
    "choi_state",
    "correlated_table",
    "factorized_table",
    "kl_divergence",
    "metrology_map",
    "pauli_map",
    "FACTORIZED_SOFTMAX",
    "FULL_SOFTMAX",
    "MU_ONLY",
    "SPATIAL",
    "TEMPORAL",
    "DiscriminatorParams",
    "GameConfig",
    "GeneratorParams",
    "OptimizerState",
    "TrainingDiverged",
    "TrainingLog",
    "TurnRecord",
    "branch_scores",
    "generator_gradient",
    "generator_table",
    "optimistic_adam_step",
    "pauli_choi_fidelity",
    "score",
    "train",
    "zero_optimizer",
    "MetrologyConfig",
    "brute_force_gram",
    "choi_fidelity",
    "gram_eigenvalues",
    "is_identifiable",
    "phase_estimation_error",
    "run_metrology_game",
    "Gate",
    "ParamCircuit",
    "QcnnSpec",
    "ansatz_pairs",
    "layered_ansatz",
    "param_shift_grad",
    "qcnn",
    "su4_block",
    "DensityMatrix",
    "PureState",
    "apply_gate",
    "fidelity",
    "kron",
    "partial_trace",
    "projector_expectation",
    "psd_sqrt",
    "pure_dm",
    "zero_state",
]
