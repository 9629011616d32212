"""Qubit circuits for the finite-rank ansatz: core preparation, squeezing and error budgets."""

from .bounds import (
    BoundUnavailable,
    BudgetUnreachable,
    ErrorBudget,
    beta,
    commutator_norms,
    eps_for_fidelity,
    fidelity_bound,
    leak_norm,
    min_resources,
    path_majorant,
    trotter_error,
    trunc_error,
)
from .encoding import QubitEncoding, encode_amplitudes, encode_core, fock_vector_from_bits
from .gates import Gate, GateCircuit, gate_counts, mcrot_cnot_cost, pauli2_matrix, rotation_matrix
from .prep import reduction_step, sparse_prep
from .qasm import export_qasm, import_qasm, simulate_qasm
from .simulate import simulate, simulate_sparse, sparse_overlap, sparse_to_dense, unitary
from .squeeze import (
    s_matrix,
    t_matrix,
    trotter_squeeze,
    trotter_squeeze_matrix,
    truncated_squeeze,
    unary_parity_qubits,
)
