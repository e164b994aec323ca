"""Compilation and execution of multi-step entangling protocols.

A protocol is an ordered list of transition requests, each naming the
driven ensemble, the source occupation pair, a pulse area (pi/4 splits
amplitude evenly; pi/2 transfers it fully) and an envelope.  Compilation
turns requests into drive steps: frequencies from the carrier-resonance
formulas, durations from area/|G|, and for soft steps a Gaussian width
solved from the pulse-area constraint.  Execution simulates the steps
back-to-back (each step restarts its local clock and rotating gauge) and
scores every step against the ideal composed target.
"""

from dataclasses import dataclass, field
from math import sqrt, exp, pi, erf, cos, sin

import numpy as np
from scipy.integrate import quad

from .errors import (InvalidParameterError, SolverFailureError,
                     ProtocolConsistencyError)
from .model import (SystemSpec, DriveStep, GaussianEnvelope, ABRUPT,
                    TransformedModel, transition_delta, drive_frequency,
                    rabi_rate, FINITE)
from .states import QuantumState
from .dynamics import propagate_unitary

__all__ = [
    "TransitionRequest", "CompiledStep", "ProtocolReport",
    "compile_protocol", "gaussian_sigma_solve", "envelope_value",
    "execute_protocol", "DEFAULT_MU",
]

DEFAULT_MU = sqrt(6.0 / 5.0)

_AREAS = {"quarter_pi": (pi / 4, 2), "half_pi": (pi / 2, 1)}


@dataclass(frozen=True)
class TransitionRequest:
    """One requested carrier transition: ensemble j is driven one quantum
    upward from `source`, with the stated pulse area and envelope
    ('abrupt' or 'gaussian')."""

    j: int
    source: tuple
    area: str = "half_pi"
    envelope: str = ABRUPT
    mu: float = DEFAULT_MU

    def __post_init__(self):
        if self.j not in (1, 2):
            raise InvalidParameterError("driven ensemble must be 1 or 2")
        if self.area not in _AREAS:
            raise InvalidParameterError(f"unknown pulse area {self.area!r}")
        if self.envelope not in (ABRUPT, "gaussian"):
            raise InvalidParameterError(f"unknown envelope {self.envelope!r}")

    @property
    def target(self):
        k1, k2 = self.source
        return (k1 + 1, k2) if self.j == 1 else (k1, k2 + 1)


@dataclass
class CompiledStep:
    request: TransitionRequest
    drive: DriveStep
    rabi_rate: float
    area: float
    area_divisor: int
    target_amplitudes: dict
    fidelity: float = None

    @property
    def sigma(self):
        env = self.drive.envelope
        return env.sigma if isinstance(env, GaussianEnvelope) else None


@dataclass
class ProtocolReport:
    spec: SystemSpec
    eta1: float
    eta2: float
    initial: tuple
    steps: list = field(default_factory=list)
    final_fidelity: float = None

    def summary_rows(self):
        wc = self.spec.omega_c
        rows = []
        for i, st in enumerate(self.steps):
            rows.append({
                "step": i + 1,
                "j": st.request.j,
                "source": list(st.request.source),
                "omega_over_omega_c": st.drive.omega / wc,
                "duration_s": st.drive.duration,
                "sigma_s": st.sigma,
                "rabi_rate_rad_s": st.rabi_rate,
                "envelope": st.request.envelope,
                "fidelity": st.fidelity,
            })
        return rows


# ---------------------------------------------------------------------------
# Gaussian soft control
# ---------------------------------------------------------------------------

def gaussian_sigma_solve(rabi_rate_value, mu, t_start, t_end, n,
                         tol=1e-12, max_iter=200):
    """Width of the Gaussian envelope enforcing the pulse-area constraint.

    Solves sigma = sqrt(pi) / (2 sqrt(2) n mu O0 erf[(t_end-t_start)/(2 sqrt(2) sigma)])
    by damped fixed-point iteration, then verifies by adaptive quadrature
    that the enveloped rate integrates to pi/(2 n) over the window.
    """
    if mu <= 1:
        raise InvalidParameterError("gaussian soft control requires mu > 1")
    if t_end <= t_start:
        raise InvalidParameterError("t_end must exceed t_start")
    if n not in (1, 2):
        raise InvalidParameterError("area divisor n must be 1 or 2")
    omega0 = abs(rabi_rate_value)
    if omega0 == 0:
        raise InvalidParameterError("zero Rabi rate; no pulse can satisfy the area")
    span = t_end - t_start
    base = sqrt(pi) / (2 * sqrt(2.0) * n * mu * omega0)

    def gmap(s):
        return base / erf(span / (2 * sqrt(2.0) * s))

    # relaxed fixed point; the relaxation factor adapts to the estimated
    # local slope of the map (which approaches 1 as mu -> 1+)
    sigma = base
    prev_s, prev_g = None, None
    lam = 0.5
    converged = False
    for _ in range(max_iter):
        g = gmap(sigma)
        if abs(g - sigma) <= tol * sigma:
            sigma = g
            converged = True
            break
        if prev_s is not None and sigma != prev_s:
            slope = (g - prev_g) / (sigma - prev_s)
            if slope < 0.999999:
                lam = min(10.0, max(0.1, 1.0 / (1.0 - slope)))
        prev_s, prev_g = sigma, g
        sigma = sigma + lam * (g - sigma)
    if not converged:
        resid = abs(gmap(sigma) - sigma) / sigma
        raise SolverFailureError("sigma fixed point did not converge", residual=resid)

    tc = (t_start + t_end) / 2
    marks = sorted({min(max(tc + k * sigma, t_start), t_end) for k in (-8, -2, 0, 2, 8)})
    area, _err = quad(lambda t: mu * omega0 * exp(-((t - tc) ** 2) / (2 * sigma ** 2)),
                      t_start, t_end, limit=200, points=marks)
    target = pi / (2 * n)
    if abs(area - target) > 1e-6:
        raise SolverFailureError(
            f"pulse area {area} misses {target} by {abs(area - target):.2e}",
            residual=abs(area - target))
    return sigma


def envelope_value(step, rabi_rate_value, t):
    """Instantaneous envelope multiplier Omega(t)/Omega0 at local time t."""
    if not 0 <= t <= step.duration:
        raise InvalidParameterError(f"t={t} outside the step window [0, {step.duration}]")
    env = step.envelope
    if env == ABRUPT:
        return 1.0
    return step.envelope_scale(env.driven, t)


# ---------------------------------------------------------------------------
# compilation
# ---------------------------------------------------------------------------

def _check_support(requests, initial):
    """Track the superposition support symbolically and verify each request
    is reachable; returns the support sets per step."""
    support = {tuple(initial)}
    for i, req in enumerate(requests):
        src = tuple(req.source)
        if src not in support:
            raise ProtocolConsistencyError(
                f"step {i + 1}: source state {src} not in the current support "
                f"{sorted(support)}", step_index=i)
        tgt = req.target
        if tgt in support:
            raise ProtocolConsistencyError(
                f"step {i + 1}: target state {tgt} already populated", step_index=i)
        if req.area == "half_pi":
            support = (support - {src}) | {tgt}
        else:
            support = support | {tgt}
    return support


def compile_protocol(requests, spec, eta1, eta2, initial=(0, 0)):
    """Compile transition requests into drive steps with analytic targets.

    Frequencies are w = -Delta_j(source)/q0, durations area/|G|; Gaussian
    steps get their width from the pulse-area solver and their peak scale
    mu.  Fidelities are left unset until a simulation fills them.
    """
    _check_support(requests, initial)
    report = ProtocolReport(spec=spec, eta1=eta1, eta2=eta2, initial=tuple(initial))
    amp = {tuple(initial): 1.0 + 0.0j}
    for req in requests:
        eta = eta1 if req.j == 1 else eta2
        kd = req.source[req.j - 1]
        G = rabi_rate(req.j, kd, eta, spec)
        if G == 0:
            raise InvalidParameterError(
                f"transition {req.source} -> {req.target} has zero coupling "
                f"(Bessel zero at eta={eta})")
        theta, ndiv = _AREAS[req.area]
        duration = theta / abs(G)
        omega = drive_frequency(req.j, *req.source, spec)
        if req.envelope == "gaussian":
            sigma = gaussian_sigma_solve(G, req.mu, 0.0, duration, ndiv)
            envelope = GaussianEnvelope(req.mu, sigma, req.j)
        else:
            envelope = ABRUPT
        step = DriveStep(omega=omega, eta1=eta1, eta2=eta2,
                         duration=duration, envelope=envelope)
        # ideal composed target: the resonant pair rotates by theta
        src, tgt = tuple(req.source), req.target
        s = 1.0 if G > 0 else -1.0
        a_src = amp[src]
        amp[tgt] = -1j * s * sin(theta) * a_src
        if req.area == "half_pi":
            del amp[src]
        else:
            amp[src] = cos(theta) * a_src
        report.steps.append(CompiledStep(
            request=req, drive=step, rabi_rate=G, area=theta,
            area_divisor=ndiv, target_amplitudes=dict(amp)))
    return report


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

def _target_vector(spec, amplitudes):
    cb = spec.basis
    v = np.zeros(cb.dim, dtype=complex)
    for (k1, k2), a in amplitudes.items():
        v[cb.flat(k1, k2, 0)] = a
    return v / np.linalg.norm(v)


def default_dt_max(spec):
    """Step bound resolving the fastest carrier phases of the mode."""
    scale = 0.02 if spec.mode == FINITE else 0.004
    return scale / spec.omega_c


def execute_protocol(requests, spec, eta1, eta2, initial=(0, 0), *,
                     dt_max=None, samples_per_step=8, model=None,
                     track=None):
    """Compile and simulate a protocol, scoring each step against its
    ideal target.

    Returns the filled ProtocolReport, the final state in the last step's
    rotating gauge, and a population time series [(t, {pair: population})]
    over the tracked occupation pairs.
    """
    report = compile_protocol(requests, spec, eta1, eta2, initial)
    model = model or TransformedModel(spec)
    dt = dt_max if dt_max is not None else default_dt_max(spec)
    cb = spec.basis

    tracked = list(track) if track else sorted(
        {tuple(initial)} | {st.request.target for st in report.steps})
    d1, d2 = spec.ensemble_dims

    psi = cb.basis_vector(*initial, 0)
    t_offset = 0.0
    series = []

    def record(t, vec):
        probs = np.abs(vec) ** 2
        grid = probs.reshape(d1, d2, spec.n_max + 1).sum(axis=2)
        series.append((t, {pair: float(grid[pair]) for pair in tracked}))

    record(0.0, psi)
    final = None
    for st in report.steps:
        bound = model.bind(st.drive)
        grid = np.linspace(0.0, st.drive.duration, samples_per_step + 1)
        states = propagate_unitary(bound, psi, grid, dt)
        for tg, state in zip(grid[1:], states[1:]):
            record(t_offset + tg, state.amplitudes)
        end = states[-1].amplitudes
        chi = model.to_rotating_frame(st.drive, st.drive.duration, end)
        tvec = _target_vector(spec, st.target_amplitudes)
        st.fidelity = float(abs(np.vdot(tvec, chi)) ** 2)
        psi = chi
        t_offset += st.drive.duration
        final = chi
    if report.steps:
        report.final_fidelity = report.steps[-1].fidelity
    state = QuantumState(final if final is not None else psi,
                         spec.basis_tag, frame="rotating")
    return report, state, series
