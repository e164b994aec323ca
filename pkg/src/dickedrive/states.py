"""State containers shared by the model and dynamics layers.

Frames: 'transformed' is the polaron-rotated frame in which all
simulations run; 'lab' is the original frame; 'rotating' marks amplitudes
expressed in the step-local rotating gauge (diagonal phases of the
transformed-frame Hamiltonian removed), which is where protocol targets
live.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError

FRAMES = ("transformed", "lab", "rotating")


@dataclass
class QuantumState:
    amplitudes: np.ndarray
    basis: tuple
    frame: str = "transformed"

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.frame not in FRAMES:
            raise ContractViolationError(f"unknown frame {self.frame!r}")

    @property
    def dim(self):
        return self.amplitudes.shape[0]

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def require_normalized(self, tol=1e-9):
        if abs(self.norm() - 1.0) > tol:
            raise ContractViolationError(f"state norm {self.norm()} deviates from 1 by > {tol}")
        return self

    def population(self, flat_index):
        return float(abs(self.amplitudes[flat_index]) ** 2)


@dataclass
class DensityMatrix:
    entries: np.ndarray
    basis: tuple
    frame: str = "transformed"

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        if self.frame not in FRAMES:
            raise ContractViolationError(f"unknown frame {self.frame!r}")

    @property
    def dim(self):
        return self.entries.shape[0]

    def trace(self):
        return float(np.real(np.trace(self.entries)))

    def validate(self, trace_tol=1e-8, herm_tol=1e-10, pos_tol=-1e-7):
        if abs(self.trace() - 1.0) > trace_tol:
            raise ContractViolationError(f"trace {self.trace()} deviates from 1 by > {trace_tol}")
        dev = np.abs(self.entries - self.entries.conj().T).max()
        if dev > herm_tol:
            raise ContractViolationError(f"density matrix not Hermitian (max dev {dev:.3e})")
        w = np.linalg.eigvalsh((self.entries + self.entries.conj().T) / 2)
        if w.min() < pos_tol:
            raise ContractViolationError(f"negative eigenvalue {w.min():.3e} below {pos_tol}")
        return self

    @staticmethod
    def from_pure(state):
        v = state.amplitudes
        return DensityMatrix(np.outer(v, v.conj()), state.basis, state.frame)
