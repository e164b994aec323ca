"""Simulator and protocol compiler for selective Dicke-state transitions in
a periodically modulated resonator--two-ensemble system."""

from .errors import (
    InvalidParameterError, WrongModeError, ContractViolationError,
    IntegrationFailureError, SolverFailureError, ProtocolConsistencyError,
    TruncationError, ConfigError,
)
from .operators import (
    OperatorMatrix, CompositeBasis, build_collective_ops, build_boson_ops,
    displacement_matrix, bessel_j, assoc_laguerre, hermitian_eig,
)
from .states import QuantumState, DensityMatrix
from .model import (
    SystemSpec, DriveStep, GaussianEnvelope, ABRUPT, TransformedModel,
    BoundDrive, resonance_delta, magnon_resonance_delta, drive_frequency,
    rabi_rate, build_transformed_hamiltonian, build_magnon_hamiltonian,
    build_effective_hamiltonian, lab_frame_state, build_lab_unitary,
    enumerate_sidebands,
)
from .dynamics import propagate_unitary, build_dressed_basis, propagate_master, DressedBasis

__version__ = "0.1.0"
