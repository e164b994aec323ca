"""Time evolution: unitary propagation, the dressed basis of the undriven
system, and the dressed-state master equation.

Unitary runs use exponential-midpoint stepping built from exact factor
exponentials: the diagonal part of the transformed-frame Hamiltonian
(including the drive's cos(w t) term) is integrated analytically into
phase factors, while the static coupling matrices are applied through
their cached eigendecompositions.  Every factor is exactly unitary, so
norms are preserved to rounding error over arbitrarily long runs.  A
generic midpoint path (dense eigendecomposition of H(t + dt/2) per step)
is available for arbitrary callable providers and serves as the
cross-validation reference.

Dissipative runs integrate the dressed-state master equation

    drho/dt = -i [H(t), rho] + sum_{n > m} Gamma^{nm} D[|m><n|] rho,
    D[O] rho = 2 O rho O' - rho O'O - O'O rho,

with jump operators between eigenstates of the undriven Hamiltonian and
zero-temperature (downward only) rates.  The equation is integrated with
fixed-step RK4 in the dressed eigenbasis, inside the rotating gauge of
the full diagonal (dressed energies plus the drive's diagonal), where the
dissipator is exactly gauge-invariant and only the small off-diagonal
drive residual enters the commutator.  Dissipators are applied in their
structured row/column form; no dense superoperator is ever built.
"""

from dataclasses import dataclass
from math import ceil, pi

import numpy as np

from .errors import (InvalidParameterError, IntegrationFailureError,
                     ContractViolationError)
from .states import QuantumState, DensityMatrix
from .model import (TransformedModel, BoundDrive, GaussianEnvelope, ABRUPT,
                    FINITE, MAGNON, magnon_resonance_delta)
from .operators import OperatorMatrix

__all__ = [
    "QuantumState", "DensityMatrix", "DressedBasis",
    "propagate_unitary", "build_dressed_basis", "propagate_master",
]


def _as_amplitudes(psi0, dim):
    if isinstance(psi0, QuantumState):
        return psi0.amplitudes.astype(complex).copy(), psi0.basis, psi0.frame
    v = np.asarray(psi0, dtype=complex).copy()
    if v.shape != (dim,):
        raise InvalidParameterError(f"state shape {v.shape} does not match dim {dim}")
    return v, None, "transformed"


def _check_finite(psi, t):
    if not np.isfinite(psi.view(float)).all():
        raise IntegrationFailureError("non-finite amplitudes", time=t)


# ---------------------------------------------------------------------------
# unitary propagation
# ---------------------------------------------------------------------------

def propagate_unitary(H, psi0, t_grid, dt_max):
    """Propagate a pure state through H over the requested time grid.

    H is either a BoundDrive (fast split path) or a callable t -> dense
    Hermitian matrix (midpoint eigendecomposition path).  psi0 is the
    state at t_grid[0]; states are returned exactly at the grid times.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0 or np.any(np.diff(t_grid) < 0):
        raise InvalidParameterError("t_grid must be a non-empty ascending sequence")
    if dt_max <= 0:
        raise InvalidParameterError("dt_max must be positive")
    if isinstance(H, BoundDrive):
        dim = H.dim
        psi, basis, frame = _as_amplitudes(psi0, dim)
        basis = basis or H.model.spec.basis_tag
        amps = _propagate_split(H.model, H.step, psi, t_grid, dt_max)
    elif callable(H):
        H0 = H(t_grid[0])
        A0 = H0.entries if isinstance(H0, OperatorMatrix) else np.asarray(H0)
        dim = A0.shape[0]
        psi, basis, frame = _as_amplitudes(psi0, dim)
        amps = _propagate_midpoint(H, psi, t_grid, dt_max)
    else:
        raise InvalidParameterError("H must be a BoundDrive or callable t -> matrix")
    return [QuantumState(a, basis, frame) for a in amps]


def _propagate_midpoint(Hfun, psi, t_grid, dt_max):
    out = [psi.copy()]
    for ta, tb in zip(t_grid[:-1], t_grid[1:]):
        span = tb - ta
        if span == 0:
            out.append(psi.copy())
            continue
        n = max(1, ceil(span / dt_max))
        h = span / n
        t = ta
        for _ in range(n):
            Hm = Hfun(t + h / 2)
            A = Hm.entries if isinstance(Hm, OperatorMatrix) else np.asarray(Hm)
            w, Q = np.linalg.eigh(A)
            psi = Q @ (np.exp(-1j * w * h) * (Q.conj().T @ psi))
            t += h
        _check_finite(psi, tb)
        out.append(psi.copy())
    return out


def _propagate_split(model, step, psi, t_grid, dt_max):
    """Strang composition: exact diagonal phases (static levels + drive)
    around exact exponentials of the static coupling matrices."""
    om = step.omega
    A1, A2 = step.amplitude(1), step.amplitude(2)
    E0 = model.E0
    zp1, zp2, pix = model.z1_pairs, model.z2_pairs, model.pair_index
    env = step.envelope
    soft_j = env.driven if isinstance(env, GaussianEnvelope) else None

    if soft_j is None:
        wV, QV, QVh = model.coupling_eig("12")
    else:
        other = 2 if soft_j == 1 else 1
        wS, QS, QSh = model.coupling_eig(str(soft_j))
        wO, QO, QOh = model.coupling_eig(str(other))

    def dsin(t0, t1):
        if om > 0:
            return (np.sin(om * t1) - np.sin(om * t0)) / om
        return t1 - t0

    out = [psi.copy()]
    for ta, tb in zip(t_grid[:-1], t_grid[1:]):
        span = tb - ta
        if span == 0:
            out.append(psi.copy())
            continue
        n = max(1, ceil(span / dt_max))
        h = span / n
        expE0h = np.exp(-1j * E0 * (h / 2))
        if soft_j is None:
            expVh = np.exp(-1j * wV * h)
        else:
            expOh = np.exp(-1j * wO * (h / 2))
        t = ta
        for _ in range(n):
            tm, te = t + h / 2, t + h
            c1 = dsin(t, tm)
            pair = np.exp(-1j * ((A1 * c1) * zp1 + (A2 * c1) * zp2))
            psi = (expE0h * pair[pix]) * psi
            if soft_j is None:
                psi = QV @ (expVh * (QVh @ psi))
            else:
                sbar = step.envelope_mean(soft_j, t, te)
                psi = QO @ (expOh * (QOh @ psi))
                psi = QS @ (np.exp(-1j * wS * (sbar * h)) * (QSh @ psi))
                psi = QO @ (expOh * (QOh @ psi))
            c2 = dsin(tm, te)
            pair = np.exp(-1j * ((A1 * c2) * zp1 + (A2 * c2) * zp2))
            psi = (expE0h * pair[pix]) * psi
            t = te
        _check_finite(psi, tb)
        out.append(psi.copy())
    return out


# ---------------------------------------------------------------------------
# dressed basis and decay-rate tables
# ---------------------------------------------------------------------------

@dataclass
class DressedBasis:
    """Ascending eigensystem of the undriven Hamiltonian plus per-pair
    downward decay-rate tables.

    rate tables are [n, m] arrays (source dressed index n, destination m)
    that vanish unless the transition energy is positive; `total_rates` is
    their thresholded sum.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    rates_q1: np.ndarray
    rates_q2: np.ndarray
    rates_c: np.ndarray
    total_rates: np.ndarray
    threshold: float
    weighting: str
    spec: object
    model: TransformedModel

    @property
    def dim(self):
        return len(self.eigenvalues)


def build_dressed_basis(spec, kappa, gamma1, gamma2, *, n_max=None, m_max=None,
                        weighting="flat", rate_threshold=None, model=None):
    """Diagonalize the undriven system and tabulate dressed decay rates.

    Jump coupling operators are the collective ladder combinations
    S_j^- + S_j^+ of each ensemble (magnon variant: m_j + m_j^dagger, with
    no 1/N_j factor) and the resonator quadrature expressed in the
    simulation frame, a + a^dagger - 2 sum_j beta_j Sz_j.

    weighting='flat' (default) uses energy-independent rates
    2 (Gamma_j/N_j) |<m|O_j|n>|^2, which reproduces the reference
    dissipative fidelity tables; weighting='ohmic' applies the linear
    spectral factor Delta_nm/Omega_ref with Omega_ref = w_qj (finite) or
    the mode's base carrier resonance (magnon), and Delta_nm/w_c for the
    resonator.  Pairs with total rate below `rate_threshold` (default
    1e-12 * w_c) are dropped; pass 0 to keep everything.
    """
    for name, val in (("kappa", kappa), ("gamma1", gamma1), ("gamma2", gamma2)):
        if val < 0:
            raise InvalidParameterError(f"{name} must be >= 0")
    if weighting not in ("flat", "ohmic"):
        raise InvalidParameterError(f"unknown weighting {weighting!r}")
    spec = spec.with_truncation(n_max=n_max, m_max=m_max)
    model = model or TransformedModel(spec)
    lam, Q = np.linalg.eigh(model.undriven_hamiltonian())

    d1, d2 = spec.ensemble_dims
    dc = spec.n_max + 1
    I1, I2 = np.eye(d1), np.eye(d2)
    r1, r2 = model.raise1_local, model.raise2_local
    O1 = np.kron(r1 + r1.T, np.kron(I2, np.eye(dc)))
    O2 = np.kron(I1, np.kron(r2 + r2.T, np.eye(dc)))
    aq = np.diag(np.sqrt(np.arange(1, dc)), 1)
    Oc = (np.kron(I1, np.kron(I2, aq + aq.T))
          - 2 * (spec.beta1 * np.kron(np.diag(model.z1_local), np.kron(I2, np.eye(dc)))
                 + spec.beta2 * np.kron(I1, np.kron(np.diag(model.z2_local), np.eye(dc)))))

    Qh = Q.conj().T
    mel1 = np.abs((Qh @ O1 @ Q).T) ** 2   # mel[n, m] = |<m|O|n>|^2
    mel2 = np.abs((Qh @ O2 @ Q).T) ** 2
    melc = np.abs((Qh @ Oc @ Q).T) ** 2

    dnm = lam[:, None] - lam[None, :]
    down = dnm > 1e-10 * spec.omega_c
    if weighting == "flat":
        w1 = w2 = wc_ = 2.0
    else:
        if spec.mode == FINITE:
            ref1, ref2 = spec.omega_q1, spec.omega_q2
        else:
            ref1 = magnon_resonance_delta(1, 0, 0, spec)
            ref2 = magnon_resonance_delta(2, 0, 0, spec)
        w1 = dnm / ref1
        w2 = dnm / ref2
        wc_ = dnm / spec.omega_c
    collective1 = spec.N1 if spec.mode == FINITE else 1.0
    collective2 = spec.N2 if spec.mode == FINITE else 1.0
    R1 = np.where(down, (gamma1 / collective1) * w1 * mel1, 0.0)
    R2 = np.where(down, (gamma2 / collective2) * w2 * mel2, 0.0)
    Rc = np.where(down, kappa * wc_ * melc, 0.0)

    total = R1 + R2 + Rc
    threshold = 1e-12 * spec.omega_c if rate_threshold is None else rate_threshold
    if threshold > 0:
        total = np.where(total >= threshold, total, 0.0)
    return DressedBasis(lam, Q, R1, R2, Rc, total, threshold, weighting, spec, model)


# ---------------------------------------------------------------------------
# dressed-state master equation
# ---------------------------------------------------------------------------

def propagate_master(H, dressed, rho0, t_grid, dt_max=None, *,
                     residual_cut=1e-4, nu_safety=0.8, validate=True):
    """Integrate the dressed-state master equation over t_grid.

    H is a BoundDrive sharing the dressed basis' system spec (abrupt
    envelope only).  The integrator runs fixed-step RK4 in the dressed
    eigenbasis inside the exact rotating gauge of the diagonal; the step
    is min(dt_max, nu_safety/nu_max) with nu_max the fastest retained
    phase among significant drive couplings.  `residual_cut` drops
    relative drive-residual couplings below the cut when choosing the
    step (the couplings themselves are kept).
    """
    if not isinstance(H, BoundDrive):
        raise InvalidParameterError("propagate_master requires a BoundDrive provider")
    step = H.step
    if step.envelope != ABRUPT:
        raise InvalidParameterError("master-equation runs support abrupt envelopes only")
    model = dressed.model
    if H.model.spec != model.spec:
        raise ContractViolationError("provider and dressed basis describe different systems")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0 or np.any(np.diff(t_grid) < 0):
        raise InvalidParameterError("t_grid must be a non-empty ascending sequence")

    lam, Q = dressed.eigenvalues, dressed.eigenvectors
    Qh = Q.conj().T
    d = dressed.dim

    if isinstance(rho0, QuantumState):
        rho0 = DensityMatrix.from_pure(rho0)
    R = np.asarray(rho0.entries, dtype=complex)
    if R.shape != (d, d):
        raise InvalidParameterError("density matrix dimension mismatch")
    basis_tag = rho0.basis

    om = step.omega
    A1, A2 = step.amplitude(1), step.amplitude(2)
    wvec = A1 * model.z1 + A2 * model.z2
    Wd = Qh @ (wvec[:, None] * Q)
    Wdiag = np.real(np.diag(Wd)).copy()
    Woff = Wd - np.diag(np.diag(Wd))

    wmax = np.abs(Woff).max()
    if wmax > 0:
        sig = np.abs(Woff) > residual_cut * wmax
        numax = (np.abs(lam[:, None] - lam[None, :])[sig]).max() + om if sig.any() else om
    else:
        numax = max(om, 1.0)
    dt_auto = nu_safety / numax if numax > 0 else np.inf
    dt_eff = min(dt_max, dt_auto) if dt_max else dt_auto

    rates = dressed.total_rates
    gam = rates.sum(axis=1)                  # total out-rate per source state
    damp = gam[:, None] + gam[None, :]
    Rt = np.ascontiguousarray(rates.T)

    rho = Qh @ R @ Q
    # enter the rotating gauge at the first grid time
    def phase(t):
        s = np.sin(om * t) / om if om > 0 else t
        return lam * t + s * Wdiag

    def gauge(t):
        return np.exp(1j * phase(t))

    u0 = gauge(t_grid[0])
    rho = (u0[:, None] * rho) * u0.conj()[None, :]

    def deriv(t, r):
        u = gauge(t)
        s = (u.conj()[:, None] * r) * u[None, :]
        M = Woff @ s
        comm = M - M.conj().T
        out = (-1j * np.cos(om * t)) * ((u[:, None] * comm) * u.conj()[None, :])
        out -= damp * r
        np.fill_diagonal(out, np.diag(out) + 2.0 * (Rt @ np.real(np.diag(r))))
        return out

    results = []

    def emit(t, r):
        u = gauge(t)
        rs = (u.conj()[:, None] * r) * u[None, :]
        back = Q @ rs @ Qh
        dm = DensityMatrix(back, basis_tag, rho0.frame)
        tr = dm.trace()
        if abs(tr - 1.0) > 1e-6:
            raise IntegrationFailureError(f"trace drift {tr - 1.0:.2e}", time=t)
        if validate:
            dm.validate()
        results.append(dm)

    emit(t_grid[0], rho)
    for ta, tb in zip(t_grid[:-1], t_grid[1:]):
        span = tb - ta
        if span > 0:
            n = max(1, ceil(span / dt_eff))
            h = span / n
            t = ta
            for _ in range(n):
                k1 = deriv(t, rho)
                k2 = deriv(t + h / 2, rho + (h / 2) * k1)
                k3 = deriv(t + h / 2, rho + (h / 2) * k2)
                k4 = deriv(t + h, rho + h * k3)
                rho += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
                t += h
            if not np.isfinite(rho.view(float)).all():
                raise IntegrationFailureError("non-finite density matrix", time=tb)
        emit(tb, rho)
    return results
