"""System Hamiltonians, frames and closed-form resonance/rate calculators.

The physical system is two qubit ensembles coupled to one resonator, with
each ensemble driven through a periodically modulated bias.  In the lab
frame

    H(t) = w_c a'a - sum_j eps_j Sz_j + sum_j g_j (a + a') Sx_j
           + sum_j [w_qj + A_j cos(w t)] Sx_j.

A polaron displacement conditioned on Sx, followed by a pi rotation about
(x+z)/sqrt(2), turns this into the transformed frame used for all
simulations:

    H'(t) = w_c a'a + F(Sz1, Sz2) + sum_j A_j cos(w t) Sz_j
            - sum_j (eps_j/2) [D(beta_j) S+_j + h.c.],

with beta_j = g_j/w_c, F carrying the static splittings, the
beta^2-squeezed level shifts and the cross-Kerr term.  The drive enters
only through the scalar cos(w t); no Bessel truncation is ever applied to
the exact model.  Carrier transitions of ensemble j between neighbouring
Dicke states resonate at the excitation-dependent frequencies Delta_j and
oscillate at rates proportional to J_{q0}(eta_j).

In the thermodynamic limit the collective operators bosonize
(Sz -> m'm - s, S+ -> sqrt(2s) m'), producing the same structure on two
magnon modes; all builders below handle both variants.

Everything is expressed in absolute angular frequencies (rad/s).
"""

from dataclasses import dataclass, replace
from math import sqrt, exp, lgamma, erf, pi

import numpy as np

from .errors import InvalidParameterError, WrongModeError
from .operators import (
    OperatorMatrix, CompositeBasis, build_collective_ops, build_boson_ops,
    displacement_matrix, bessel_j, assoc_laguerre, splus_amp,
    dicke_tag, fock_tag, composite_tag, hermitian_eig,
)
from .states import QuantumState

__all__ = [
    "SystemSpec", "DriveStep", "GaussianEnvelope", "ABRUPT",
    "resonance_delta", "magnon_resonance_delta", "drive_frequency",
    "rabi_rate", "TransformedModel", "build_transformed_hamiltonian",
    "build_magnon_hamiltonian", "build_effective_hamiltonian",
    "lab_frame_state", "build_lab_unitary", "lab_frame_hamiltonian",
    "enumerate_sidebands",
]

FINITE = "finite_dicke"
MAGNON = "magnon_hp"


# ---------------------------------------------------------------------------
# static system description
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemSpec:
    """Static physical parameters of the resonator--two-ensemble system.

    In magnon mode the ensembles are described by bosonic modes with
    pseudospin s_j = N_j/2 and per-mode truncation m_max.
    """

    mode: str = FINITE
    N1: int = 4
    N2: int = 4
    omega_c: float = 2 * pi * 2.2e9
    eps1: float = 0.0
    eps2: float = 0.0
    g1: float = 0.0
    g2: float = 0.0
    omega_q1: float = 0.0
    omega_q2: float = 0.0
    q0: int = -1
    n_max: int = 30
    m_max: int = 5

    def __post_init__(self):
        if self.mode not in (FINITE, MAGNON):
            raise InvalidParameterError(f"unknown mode {self.mode!r}")
        if self.N1 < 1 or self.N2 < 1:
            raise InvalidParameterError("ensemble sizes must be >= 1")
        if self.omega_c <= 0:
            raise InvalidParameterError("omega_c must be positive")
        for name in ("eps1", "eps2"):
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"{name} must be positive")
        for name in ("g1", "g2"):
            ratio = getattr(self, name) / self.omega_c
            if not 0 < ratio <= 1:
                raise InvalidParameterError(
                    f"{name}/omega_c = {ratio} outside the supported range (0, 1]")
        if self.q0 == 0:
            raise InvalidParameterError("q0 must be a nonzero integer")
        if self.n_max < 1:
            raise InvalidParameterError("n_max must be >= 1")
        if self.mode == MAGNON and self.m_max < 1:
            raise InvalidParameterError("m_max must be >= 1")

    # derived quantities are recomputed on access, never stored
    @property
    def beta1(self):
        return self.g1 / self.omega_c

    @property
    def beta2(self):
        return self.g2 / self.omega_c

    def beta(self, j):
        return self.beta1 if j == 1 else self.beta2

    def eps(self, j):
        return self.eps1 if j == 1 else self.eps2

    def g(self, j):
        return self.g1 if j == 1 else self.g2

    def omega_q(self, j):
        return self.omega_q1 if j == 1 else self.omega_q2

    def ensemble_size(self, j):
        return self.N1 if j == 1 else self.N2

    def s(self, j):
        return self.ensemble_size(j) / 2.0

    @property
    def ensemble_dims(self):
        if self.mode == FINITE:
            return self.N1 + 1, self.N2 + 1
        return self.m_max + 1, self.m_max + 1

    @property
    def basis(self):
        d1, d2 = self.ensemble_dims
        return CompositeBasis(d1, d2, self.n_max + 1)

    @property
    def basis_tag(self):
        if self.mode == FINITE:
            return composite_tag(dicke_tag(self.N1), dicke_tag(self.N2),
                                 fock_tag(self.n_max))
        return composite_tag(fock_tag(self.m_max), fock_tag(self.m_max),
                             fock_tag(self.n_max))

    @property
    def dim(self):
        return self.basis.dim

    def with_truncation(self, n_max=None, m_max=None):
        kw = {}
        if n_max is not None:
            kw["n_max"] = int(n_max)
        if m_max is not None:
            kw["m_max"] = int(m_max)
        return replace(self, **kw) if kw else self

    def raise_amp(self, j, k):
        """Matrix element of the collective raising operator for ensemble j
        between neighbouring ladder states k -> k+1."""
        if self.mode == FINITE:
            N = self.ensemble_size(j)
            if not 0 <= k <= N - 1:
                raise InvalidParameterError(f"k={k} has no upward transition for N={N}")
            return splus_amp(N, k)
        if k < 0:
            raise InvalidParameterError("magnon occupation must be >= 0")
        return sqrt(2 * self.s(j) * (k + 1))


# ---------------------------------------------------------------------------
# drive segments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianEnvelope:
    """Gaussian soft envelope applied to the driven ensemble's eps_j.

    The scale runs as mu * exp(-(t - T/2)^2 / (2 sigma^2)) over the local
    step window [0, T]; mu > 1 is required for the pulse area to reach its
    target on a finite window.
    """
    mu: float
    sigma: float
    driven: int

    def __post_init__(self):
        if self.mu <= 1:
            raise InvalidParameterError("gaussian envelope requires mu > 1")
        if self.sigma <= 0:
            raise InvalidParameterError("gaussian envelope requires sigma > 0")
        if self.driven not in (1, 2):
            raise InvalidParameterError("driven ensemble must be 1 or 2")


ABRUPT = "abrupt"


@dataclass(frozen=True)
class DriveStep:
    """One protocol segment: drive frequency, modulation indices, duration
    and envelope.  Times are local to the segment (it starts at t = 0)."""

    omega: float
    eta1: float
    eta2: float
    duration: float
    envelope: object = ABRUPT

    def __post_init__(self):
        if self.duration <= 0:
            raise InvalidParameterError("step duration must be positive")
        if self.omega < 0:
            raise InvalidParameterError("drive frequency must be >= 0")
        if not (self.envelope == ABRUPT or isinstance(self.envelope, GaussianEnvelope)):
            raise InvalidParameterError(f"unsupported envelope {self.envelope!r}")

    def amplitude(self, j):
        """Drive amplitude A_j = eta_j * omega."""
        return (self.eta1 if j == 1 else self.eta2) * self.omega

    def envelope_scale(self, j, t):
        """Instantaneous eps_j multiplier at local time t."""
        env = self.envelope
        if env == ABRUPT or env.driven != j:
            return 1.0
        tc = self.duration / 2
        return env.mu * exp(-((t - tc) ** 2) / (2 * env.sigma ** 2))

    def envelope_mean(self, j, t0, t1):
        """Exact average of the eps_j multiplier over [t0, t1]."""
        env = self.envelope
        if env == ABRUPT or env.driven != j:
            return 1.0
        if t1 <= t0:
            return self.envelope_scale(j, t0)
        tc = self.duration / 2
        w = env.sigma * sqrt(2.0)
        area = env.mu * env.sigma * sqrt(pi / 2.0) * (
            erf((t1 - tc) / w) - erf((t0 - tc) / w))
        return area / (t1 - t0)


# ---------------------------------------------------------------------------
# closed-form resonances and rates
# ---------------------------------------------------------------------------

def _check_j(j):
    if j not in (1, 2):
        raise InvalidParameterError(f"ensemble index must be 1 or 2, got {j!r}")


def resonance_delta(j, k1, k2, spec):
    """Carrier resonance Delta_j(k1, k2) of the finite-Dicke system (rad/s).

    Delta_1 = w_q1 + (g1^2/w_c)(N1 - 2 k1 - 1) + (g1 g2/w_c)(N2 - 2 k2),
    and symmetrically for j = 2.  The driven ensemble's index must leave
    room for an upward transition.
    """
    _check_j(j)
    if spec.mode != FINITE:
        raise WrongModeError("resonance_delta applies to finite_dicke mode")
    for kk, N in ((k1, spec.N1), (k2, spec.N2)):
        if not 0 <= kk <= N:
            raise InvalidParameterError(f"excitation index {kk} outside 0..{N}")
    kd = k1 if j == 1 else k2
    if kd > spec.ensemble_size(j) - 1:
        raise InvalidParameterError(
            f"driven index k{j}={kd} has no upward transition")
    wc = spec.omega_c
    if j == 1:
        return (spec.omega_q1
                + (spec.g1 ** 2 / wc) * (spec.N1 - 2 * k1 - 1)
                + (spec.g1 * spec.g2 / wc) * (spec.N2 - 2 * k2))
    return (spec.omega_q2
            + (spec.g2 ** 2 / wc) * (spec.N2 - 2 * k2 - 1)
            + (spec.g1 * spec.g2 / wc) * (spec.N1 - 2 * k1))


def magnon_resonance_delta(j, m1, m2, spec):
    """Magnon-number-dependent resonance Delta_j(m1, m2) (rad/s).

    Delta_1 = w_q1 + (g1^2/w_c)(2 s1 - 2 m1 - 1) + 2 (g1 g2/w_c)(s2 - m2),
    and symmetrically for j = 2.  The base detuning of each mode is
    identified with its static splitting w_qj.
    """
    _check_j(j)
    if spec.mode != MAGNON:
        raise WrongModeError("magnon_resonance_delta applies to magnon_hp mode")
    if m1 < 0 or m2 < 0:
        raise InvalidParameterError("magnon occupations must be >= 0")
    wc = spec.omega_c
    if j == 1:
        return (spec.omega_q1
                + (spec.g1 ** 2 / wc) * (2 * spec.s(1) - 2 * m1 - 1)
                + 2 * (spec.g1 * spec.g2 / wc) * (spec.s(2) - m2))
    return (spec.omega_q2
            + (spec.g2 ** 2 / wc) * (2 * spec.s(2) - 2 * m2 - 1)
            + 2 * (spec.g1 * spec.g2 / wc) * (spec.s(1) - m1))


def transition_delta(j, k1, k2, spec):
    """Resonance for either mode, dispatching on spec.mode."""
    if spec.mode == FINITE:
        return resonance_delta(j, k1, k2, spec)
    return magnon_resonance_delta(j, k1, k2, spec)


def drive_frequency(j, k1, k2, spec):
    """Drive frequency realizing the carrier resonance: w = -Delta_j/q0."""
    w = -transition_delta(j, k1, k2, spec) / spec.q0
    if w <= 0:
        raise InvalidParameterError(
            f"q0={spec.q0} puts the carrier resonance at non-positive frequency")
    return w


def _displacement_element(beta, s, n):
    """|n+s><n| element of D(beta) for real beta >= 0 (carrier: s = 0)."""
    x = beta * beta
    mag = exp(-x / 2) * beta ** s * exp(0.5 * (lgamma(n + 1) - lgamma(n + s + 1)))
    return mag * assoc_laguerre(n, s, x)


def rabi_rate(j, k, eta, spec, s=0, n=0):
    """Signed carrier/sideband coupling rate G_j^(s)(k, eta) in rad/s.

    G = -(eps_j/2) J_{q0}(eta) h_j(k) D_{n+s,n}(beta_j); the Rabi period of
    the coupled pair is 2 pi / |G|.  Zeros of the Bessel factor freeze the
    transition (population trapping).
    """
    _check_j(j)
    if s < 0 or n < 0:
        raise InvalidParameterError("sideband order and Fock index must be >= 0")
    amp = spec.raise_amp(j, k)
    dmn = _displacement_element(spec.beta(j), s, n)
    return -0.5 * spec.eps(j) * bessel_j(spec.q0, eta) * amp * dmn


# ---------------------------------------------------------------------------
# transformed-frame model
# ---------------------------------------------------------------------------

class TransformedModel:
    """Precomputed operator structure of the transformed-frame Hamiltonian.

    Splits H'(t) into an exactly integrable diagonal part

        diag(t) = E0 + cos(w t) * (A1 z1 + A2 z2)

    (E0 covering w_c n plus the static level function F, z_j the Sz_j
    eigenvalue vectors) and two static coupling matrices V1, V2 (one per
    ensemble) whose eigendecompositions are cached for the propagator.
    Works for both the finite-Dicke and the magnon variant.
    """

    def __init__(self, spec):
        self.spec = spec
        self.cb = spec.basis
        d1, d2 = spec.ensemble_dims
        dc = spec.n_max + 1
        boson = build_boson_ops(spec.n_max)

        if spec.mode == FINITE:
            z1 = np.arange(d1) - spec.N1 / 2.0
            z2 = np.arange(d2) - spec.N2 / 2.0
            raise1 = np.zeros((d1, d1))
            for k in range(d1 - 1):
                raise1[k + 1, k] = splus_amp(spec.N1, k)
            raise2 = np.zeros((d2, d2))
            for k in range(d2 - 1):
                raise2[k + 1, k] = splus_amp(spec.N2, k)
        else:
            z1 = np.arange(d1) - spec.s(1)
            z2 = np.arange(d2) - spec.s(2)
            raise1 = np.diag(np.sqrt(2 * spec.s(1) * np.arange(1, d1)), k=-1)
            raise2 = np.diag(np.sqrt(2 * spec.s(2) * np.arange(1, d2)), k=-1)

        self.z1_local, self.z2_local = z1, z2
        self.raise1_local, self.raise2_local = raise1, raise2

        nvec = np.arange(dc, dtype=float)
        # flat-index expansions of the diagonal pieces
        i1, i2, ic = np.meshgrid(np.arange(d1), np.arange(d2), np.arange(dc),
                                 indexing="ij")
        i1, i2, ic = i1.ravel(), i2.ravel(), ic.ravel()
        zz1 = z1[i1]
        zz2 = z2[i2]
        wc = spec.omega_c
        fvals = (spec.omega_q1 * zz1 + spec.omega_q2 * zz2
                 - wc * (spec.beta1 * zz1) ** 2 - wc * (spec.beta2 * zz2) ** 2
                 - 2 * (spec.g1 * spec.g2 / wc) * zz1 * zz2)
        self.E0 = wc * nvec[ic] + fvals
        self.z1 = zz1
        self.z2 = zz2
        # index of the (k1, k2) pair per flat entry, for fast phase lookup
        self.pair_index = (i1 * d2 + i2).astype(np.intp)
        self.z1_pairs = z1[np.repeat(np.arange(d1), d2)]
        self.z2_pairs = np.tile(z2, d1)

        Dc1 = displacement_matrix(spec.beta1, 0.0, spec.n_max).entries
        Dc2 = displacement_matrix(spec.beta2, 0.0, spec.n_max).entries
        I1, I2 = np.eye(d1), np.eye(d2)
        self.V1 = -(spec.eps1 / 2) * (np.kron(raise1, np.kron(I2, Dc1))
                                      + np.kron(raise1.T, np.kron(I2, Dc1.conj().T)))
        self.V2 = -(spec.eps2 / 2) * (np.kron(I1, np.kron(raise2, Dc2))
                                      + np.kron(I1, np.kron(raise2.T, Dc2.conj().T)))
        self._eig_cache = {}
        self._boson = boson

    @property
    def dim(self):
        return self.cb.dim

    def coupling_eig(self, which):
        """Cached eigendecomposition of V1, V2 or V1+V2."""
        if which not in self._eig_cache:
            if which == "1":
                M = self.V1
            elif which == "2":
                M = self.V2
            else:
                M = self.V1 + self.V2
            w, Q = np.linalg.eigh(M)
            self._eig_cache[which] = (w, np.ascontiguousarray(Q),
                                      np.ascontiguousarray(Q.conj().T))
        return self._eig_cache[which]

    def undriven_hamiltonian(self):
        """Static transformed-frame Hamiltonian (no drive)."""
        return np.diag(self.E0.astype(complex)) + self.V1 + self.V2

    def hamiltonian(self, step, t):
        """Dense H'(t) for a drive step, local time t."""
        H = np.diag((self.E0
                     + np.cos(step.omega * t) * (step.amplitude(1) * self.z1
                                                 + step.amplitude(2) * self.z2)
                     ).astype(complex))
        H += step.envelope_scale(1, t) * self.V1
        H += step.envelope_scale(2, t) * self.V2
        return H

    def diag_phase(self, step, t0, t1):
        """Integral of the diagonal part over [t0, t1] (a phase vector)."""
        if step.omega > 0:
            dsin = (np.sin(step.omega * t1) - np.sin(step.omega * t0)) / step.omega
        else:
            dsin = t1 - t0
        return (self.E0 * (t1 - t0)
                + dsin * (step.amplitude(1) * self.z1 + step.amplitude(2) * self.z2))

    def rotating_phase(self, step, t):
        """Accumulated diagonal phase from the local step start."""
        return self.diag_phase(step, 0.0, t)

    def to_rotating_frame(self, step, t, psi):
        """Convert transformed-frame amplitudes at local time t to the
        step-local rotating gauge."""
        return np.exp(1j * self.rotating_phase(step, t)) * psi

    def bind(self, step):
        """Attach a drive step, yielding a propagation-ready provider."""
        return BoundDrive(self, step)


@dataclass(frozen=True)
class BoundDrive:
    """A TransformedModel with one DriveStep attached; the time-indexed
    Hamiltonian provider consumed by the propagators."""
    model: TransformedModel
    step: DriveStep

    @property
    def dim(self):
        return self.model.dim

    def matrix(self, t):
        return self.model.hamiltonian(self.step, t)

    def rotating_phase(self, t):
        return self.model.rotating_phase(self.step, t)


def build_transformed_hamiltonian(spec, step, t, model=None):
    """Dense transformed-frame Hamiltonian H'(t) of the finite system."""
    if spec.mode != FINITE:
        raise WrongModeError("build_transformed_hamiltonian requires finite_dicke mode")
    model = model or TransformedModel(spec)
    return OperatorMatrix(model.hamiltonian(step, t), spec.basis_tag)


def build_magnon_hamiltonian(spec, step, t, model=None):
    """Dense interaction-picture magnon Hamiltonian H_I^m(t).

    Built exactly: the time dependence enters through the scalar
    e^{i eta_j sin(w t)}, the rotated displacement D(beta_j e^{i w_c t}) and
    the diagonal phase operator carrying the occupation-dependent
    resonances evaluated on the source state; no Bessel truncation.
    """
    if spec.mode != MAGNON:
        raise WrongModeError("build_magnon_hamiltonian requires magnon_hp mode")
    model = model or TransformedModel(spec)
    d1, d2 = spec.ensemble_dims
    dc = spec.n_max + 1
    I1, I2 = np.eye(d1), np.eye(d2)
    H = np.zeros((spec.dim, spec.dim), dtype=complex)
    for j, raise_local in ((1, model.raise1_local), (2, model.raise2_local)):
        Dc = displacement_matrix(spec.beta(j), spec.omega_c * t, spec.n_max).entries
        # phase operator on the source occupations (m1, m2)
        ph = np.zeros((d1, d2), dtype=complex)
        for m1 in range(d1):
            for m2 in range(d2):
                ph[m1, m2] = np.exp(1j * magnon_resonance_delta(j, m1, m2, spec) * t)
        scal = (spec.eps(j) / 2) * np.exp(1j * (step.eta1 if j == 1 else step.eta2)
                                          * np.sin(step.omega * t))
        scal = scal * step.envelope_scale(j, t)
        # build (m_j^dagger P_j) on the pair space explicitly
        pair = np.zeros((d1 * d2, d1 * d2), dtype=complex)
        for m1 in range(d1):
            for m2 in range(d2):
                src = m1 * d2 + m2
                if j == 1 and m1 + 1 < d1:
                    pair[(m1 + 1) * d2 + m2, src] = raise_local[m1 + 1, m1] * ph[m1, m2]
                if j == 2 and m2 + 1 < d2:
                    pair[m1 * d2 + (m2 + 1), src] = raise_local[m2 + 1, m2] * ph[m1, m2]
        term = -scal * np.kron(pair, Dc)
        H += term + term.conj().T
    return OperatorMatrix(H, spec.basis_tag)


def build_effective_hamiltonian(j, k1p, k2p, spec, eta, model=None):
    """Rank-2 selective-interaction Hamiltonian on the composite basis:
    G (|driven+1><driven| x projector x |0><0|_cavity + h.c.)."""
    _check_j(j)
    cb = spec.basis
    d1, d2 = spec.ensemble_dims
    if not (0 <= k1p < d1 and 0 <= k2p < d2):
        raise InvalidParameterError(f"indices ({k1p},{k2p}) outside basis")
    kd = k1p if j == 1 else k2p
    dlim = d1 if j == 1 else d2
    if kd + 1 >= dlim:
        raise InvalidParameterError(f"driven index {kd} has no upward state in basis")
    G = rabi_rate(j, kd, eta, spec)
    to = (k1p + 1, k2p) if j == 1 else (k1p, k2p + 1)
    H = np.zeros((cb.dim, cb.dim), dtype=complex)
    H[cb.flat(*to, 0), cb.flat(k1p, k2p, 0)] = G
    H[cb.flat(k1p, k2p, 0), cb.flat(*to, 0)] = np.conj(G)
    return OperatorMatrix(H, spec.basis_tag)


# ---------------------------------------------------------------------------
# lab frame: unitary, states, Hamiltonian
# ---------------------------------------------------------------------------

def x_rotation(N):
    """Unitary R = exp[i (pi/sqrt 2)(Sx + Sz)] mapping Dicke states onto
    x-basis Dicke states (R|W^k> is an Sx eigenstate with eigenvalue k-N/2)."""
    ops = build_collective_ops(N)
    M = (pi / sqrt(2)) * (ops["Sx"].entries + ops["Sz"].entries)
    w, Q = hermitian_eig(M)
    return (Q * np.exp(1j * w)) @ Q.conj().T


def build_lab_unitary(spec, model=None):
    """Dense matrix of the frame transformation U (polaron displacement
    times the pi/sqrt(2) spin rotation) on the composite basis."""
    if spec.mode != FINITE:
        raise WrongModeError("the lab-frame unitary is built for finite_dicke mode")
    d1, d2 = spec.ensemble_dims
    dc = spec.n_max + 1
    R1 = x_rotation(spec.N1)
    R2 = x_rotation(spec.N2)
    ops1 = build_collective_ops(spec.N1)
    ops2 = build_collective_ops(spec.N2)
    x1, Q1 = hermitian_eig(ops1["Sx"])
    x2, Q2 = hermitian_eig(ops2["Sx"])
    # exp[sum_j beta_j (a - a') Sx_j] is a displacement conditioned on the
    # joint Sx eigenvalue: D(-(beta1 x1 + beta2 x2)) per (x1, x2) sector
    U1 = np.zeros((spec.dim, spec.dim), dtype=complex)
    for a1 in range(d1):
        for a2 in range(d2):
            xi = spec.beta1 * x1[a1] + spec.beta2 * x2[a2]
            Dblock = displacement_matrix(-xi, 0.0, spec.n_max).entries
            proj = np.kron(np.outer(Q1[:, a1], Q1[:, a1].conj()),
                           np.outer(Q2[:, a2], Q2[:, a2].conj()))
            U1 += np.kron(proj, Dblock)
    U2 = np.kron(R1, np.kron(R2, np.eye(dc)))
    return U1 @ U2


def lab_frame_state(k1, k2, spec, unitary=None):
    """Lab-frame image of the transformed-frame product state
    |W^k1, W^k2, 0>: an x-basis Dicke pair with a coherent resonator state
    of amplitude xi = (N1/2 - k1) beta1 + (N2/2 - k2) beta2."""
    if spec.mode != FINITE:
        raise WrongModeError("lab_frame_state requires finite_dicke mode")
    cb = spec.basis
    U = build_lab_unitary(spec) if unitary is None else unitary
    return QuantumState(U @ cb.basis_vector(k1, k2, 0), spec.basis_tag, frame="lab")


def coherent_amplitude(k1, k2, spec):
    """xi_{k1,k2} = (N1/2 - k1) beta1 + (N2/2 - k2) beta2."""
    return (spec.N1 / 2 - k1) * spec.beta1 + (spec.N2 / 2 - k2) * spec.beta2


def lab_frame_hamiltonian(spec, step, t, model=None):
    """Dense lab-frame Hamiltonian including the periodic drive (used for
    cross-frame consistency checks)."""
    if spec.mode != FINITE:
        raise WrongModeError("lab_frame_hamiltonian requires finite_dicke mode")
    d1, d2 = spec.ensemble_dims
    dc = spec.n_max + 1
    ops1 = build_collective_ops(spec.N1)
    ops2 = build_collective_ops(spec.N2)
    boson = build_boson_ops(spec.n_max)
    I1, I2, Ic = np.eye(d1), np.eye(d2), np.eye(dc)
    a = boson["a"].entries
    q = a + a.conj().T
    H = spec.omega_c * np.kron(I1, np.kron(I2, boson["num"].entries))
    H -= spec.eps1 * np.kron(ops1["Sz"].entries, np.kron(I2, Ic))
    H -= spec.eps2 * np.kron(I1, np.kron(ops2["Sz"].entries, Ic))
    bias1 = spec.omega_q1 + step.amplitude(1) * np.cos(step.omega * t)
    bias2 = spec.omega_q2 + step.amplitude(2) * np.cos(step.omega * t)
    H += np.kron(ops1["Sx"].entries, np.kron(I2, spec.g1 * q + bias1 * Ic))
    H += np.kron(I1, np.kron(ops2["Sx"].entries, spec.g2 * q + bias2 * Ic))
    return OperatorMatrix(H, spec.basis_tag)


# ---------------------------------------------------------------------------
# sideband diagnostics
# ---------------------------------------------------------------------------

def enumerate_sidebands(spec, step, k1, k2, s_max=3, q_range=range(-5, 6), n=0):
    """Diagnostic table of carrier and sideband terms seen from the state
    (k1, k2) with the cavity at Fock index n.

    Each row is a dict with the ensemble j, Bessel order q, signed sideband
    order s (positive: cavity gains s quanta; negative: loses), detuning
    delta = q w + Delta_j + s w_c (rad/s) and coupling rate |G|.  Used to
    check rotating-wave safety margins |delta| >> |G| away from the
    selected carrier.
    """
    if s_max < 0:
        raise InvalidParameterError("s_max must be >= 0")
    rows = []
    for j in (1, 2):
        kd = k1 if j == 1 else k2
        limit = spec.ensemble_size(j) - 1 if spec.mode == FINITE else None
        if limit is not None and kd > limit:
            continue
        delta_j = transition_delta(j, k1, k2, spec)
        eta = step.eta1 if j == 1 else step.eta2
        amp = spec.raise_amp(j, kd)
        for q in q_range:
            jq = bessel_j(q, eta)
            for s in range(0, s_max + 1):
                for sgn in ((0,) if s == 0 else (+1, -1)):
                    ss = s * sgn if s else 0
                    dmn = _displacement_element(spec.beta(j), s, n)
                    G = -0.5 * spec.eps(j) * jq * amp * dmn
                    if ss < 0:
                        G *= (-1) ** s
                    rows.append({
                        "j": j, "q": q, "s": ss,
                        "delta": q * step.omega + delta_j + ss * spec.omega_c,
                        "rate": G,
                    })
    return rows
