"""Basis operators and special functions.

Collective spin operators are represented on the permutation-symmetric
(Dicke) subspace of each ensemble, bosonic modes on a truncated Fock
space, and composite operators on the flat product basis

    flat(k1, k2, n) = (k1 * (N2 + 1) + k2) * (n_max + 1) + n

i.e. the cavity index varies fastest.  All matrices are dense complex
numpy arrays; everything here is a pure function of its inputs.
"""

from dataclasses import dataclass
from math import lgamma, sqrt, exp, log, cos, sin, isfinite
import warnings

import numpy as np

from .errors import InvalidParameterError, ContractViolationError

__all__ = [
    "BasisTag", "dicke_tag", "fock_tag", "composite_tag",
    "OperatorMatrix", "CompositeBasis",
    "build_collective_ops", "build_boson_ops", "displacement_matrix",
    "bessel_j", "assoc_laguerre", "hermitian_eig",
]


# ---------------------------------------------------------------------------
# basis bookkeeping
# ---------------------------------------------------------------------------

def dicke_tag(N):
    """Basis tag for the (N+1)-dimensional symmetric subspace of N qubits."""
    return ("dicke", int(N))


def fock_tag(n_max):
    """Basis tag for a bosonic mode truncated at occupation n_max."""
    return ("fock", int(n_max))


def composite_tag(*factors):
    """Basis tag for a tensor product; factor order matches kron order."""
    return ("composite", tuple(factors))


def tag_dim(tag):
    kind = tag[0]
    if kind in ("dicke", "fock"):
        return tag[1] + 1
    if kind == "composite":
        d = 1
        for f in tag[1]:
            d *= tag_dim(f)
        return d
    raise InvalidParameterError(f"unknown basis tag {tag!r}")


BasisTag = tuple


@dataclass(frozen=True)
class OperatorMatrix:
    """A dense operator together with the basis it acts on."""

    entries: np.ndarray
    basis: BasisTag

    def __post_init__(self):
        d = tag_dim(self.basis)
        if self.entries.shape != (d, d):
            raise ContractViolationError(
                f"matrix shape {self.entries.shape} does not match basis dim {d}")

    @property
    def dim(self):
        return self.entries.shape[0]

    def require_hermitian(self, tol=1e-12):
        dev = np.abs(self.entries - self.entries.conj().T).max()
        if dev > tol:
            raise ContractViolationError(f"matrix is not Hermitian (max dev {dev:.3e})")
        return self


class CompositeBasis:
    """Flat indexing for the (k1, k2, n) product basis.

    The flat index is (k1*d2 + k2)*dc + n, which is a bijection with the
    index triple; `flat` and `unflat` invert each other.
    """

    def __init__(self, d1, d2, dc):
        self.d1, self.d2, self.dc = int(d1), int(d2), int(dc)
        self.dim = self.d1 * self.d2 * self.dc

    def flat(self, k1, k2, n):
        if not (0 <= k1 < self.d1 and 0 <= k2 < self.d2 and 0 <= n < self.dc):
            raise InvalidParameterError(
                f"index ({k1},{k2},{n}) outside basis ({self.d1},{self.d2},{self.dc})")
        return (k1 * self.d2 + k2) * self.dc + n

    def unflat(self, i):
        if not 0 <= i < self.dim:
            raise InvalidParameterError(f"flat index {i} outside dimension {self.dim}")
        i, n = divmod(i, self.dc)
        k1, k2 = divmod(i, self.d2)
        return k1, k2, n

    def basis_vector(self, k1, k2, n):
        v = np.zeros(self.dim, dtype=complex)
        v[self.flat(k1, k2, n)] = 1.0
        return v


# ---------------------------------------------------------------------------
# collective spin and boson operators
# ---------------------------------------------------------------------------

def splus_amp(N, k):
    """Raising amplitude <k+1|S+|k> = sqrt((k+1)(N-k)) on the Dicke ladder."""
    return sqrt((k + 1) * (N - k))


def build_collective_ops(N):
    """Collective spin operators on the symmetric subspace of N qubits.

    Returns a dict with Sz, Splus, Sminus, Sx as OperatorMatrix of
    dimension N+1.  Sz is diagonal with entries k - N/2; the raising
    amplitudes are sqrt((k+1)(N-k)).
    """
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise InvalidParameterError(f"ensemble size must be a positive integer, got {N!r}")
    tag = dicke_tag(N)
    k = np.arange(N + 1)
    Sz = np.diag((k - N / 2).astype(complex))
    Sp = np.zeros((N + 1, N + 1), dtype=complex)
    for kk in range(N):
        Sp[kk + 1, kk] = splus_amp(N, kk)
    Sm = Sp.conj().T
    Sx = (Sp + Sm) / 2
    return {
        "Sz": OperatorMatrix(Sz, tag),
        "Splus": OperatorMatrix(Sp, tag),
        "Sminus": OperatorMatrix(Sm, tag),
        "Sx": OperatorMatrix(Sx, tag),
    }


def build_boson_ops(n_max):
    """Truncated bosonic mode operators: a, a^dagger and the number operator."""
    if not isinstance(n_max, (int, np.integer)) or n_max < 1:
        raise InvalidParameterError(f"n_max must be a positive integer, got {n_max!r}")
    tag = fock_tag(n_max)
    a = np.diag(np.sqrt(np.arange(1, n_max + 1)).astype(complex), k=1)
    adag = a.conj().T
    num = np.diag(np.arange(n_max + 1).astype(complex))
    return {
        "a": OperatorMatrix(a, tag),
        "adag": OperatorMatrix(adag, tag),
        "num": OperatorMatrix(num, tag),
    }


# ---------------------------------------------------------------------------
# special functions
# ---------------------------------------------------------------------------

def assoc_laguerre(n, s, x):
    """Associated Laguerre polynomial L_n^(s)(x) by the three-term recurrence."""
    if n < 0 or s < 0:
        raise InvalidParameterError(f"degree and superscript must be >= 0, got n={n}, s={s}")
    if n == 0:
        return 1.0
    lm1 = 1.0
    l = 1.0 + s - x
    for k in range(2, n + 1):
        lm1, l = l, ((2 * k - 1 + s - x) * l - (k - 1 + s) * lm1) / k
    return l


def bessel_j(q, eta):
    """Bessel function of the first kind J_q(eta) for integer order.

    Small arguments use the alternating power series; larger arguments use
    Miller's downward recurrence normalized with J_0 + 2*sum J_2k = 1.
    Valid (double-precision accurate) for |q| <= 200, |eta| <= 500.
    """
    q = int(q)
    x = float(eta)
    if not isfinite(x):
        raise InvalidParameterError(f"eta must be finite, got {eta!r}")
    sign = 1.0
    if q < 0:
        q = -q
        if q % 2:
            sign = -sign
    if x < 0:
        x = -x
        if q % 2:
            sign = -sign
    if x == 0.0:
        return sign if q == 0 else 0.0
    if x <= 12.0:
        return sign * _bessel_series(q, x)
    return sign * _bessel_miller(q, x)


def _bessel_series(q, x):
    # sum_k (-1)^k (x/2)^(q+2k) / (k! (q+k)!)
    half = x / 2.0
    term = exp(q * log(half) - lgamma(q + 1))
    total = term
    k = 0
    while True:
        k += 1
        term *= -(half * half) / (k * (q + k))
        total += term
        if abs(term) < 1e-17 * (abs(total) + 1e-300) or k > 400:
            return total


def _bessel_miller(q, x):
    # downward recurrence J_{k-1} = (2k/x) J_k - J_{k+1}, started well above
    # the turning point, normalized with J_0 + 2 sum_{k>=1} J_{2k} = 1
    m = max(q, int(x)) + 25 + int(3.0 * sqrt(max(q, x)))
    if m % 2:
        m += 1
    jp = 0.0
    j = 1e-300
    norm = 0.0
    out = 0.0
    for k in range(m, 0, -1):
        jm = (2.0 * k / x) * j - jp
        jp, j = j, jm
        if k - 1 == q:
            out = j
        if (k - 1) % 2 == 0:
            norm += j if k - 1 == 0 else 2.0 * j
        if abs(j) > 1e250:
            jp *= 1e-250
            j *= 1e-250
            norm *= 1e-250
            out *= 1e-250
    return out / norm


# ---------------------------------------------------------------------------
# displacement operator
# ---------------------------------------------------------------------------

def displacement_matrix(beta, phase, n_max):
    """Matrix of the displacement operator D(beta * e^{i*phase}) on the
    truncated Fock space.

    Elements are the closed Laguerre forms: the diagonal is
    e^{-beta^2/2} L_n(beta^2); for m > n the element carries
    beta^s e^{i s phase} sqrt(n!/m!) L_n^(s)(beta^2) with s = m - n, and
    for m < n the conjugate-reflected form with (-beta)^s.
    """
    beta = float(beta)
    if not isfinite(beta):
        raise InvalidParameterError(f"displacement amplitude must be finite, got {beta!r}")
    if not isinstance(n_max, (int, np.integer)) or n_max < 1:
        raise InvalidParameterError(f"n_max must be a positive integer, got {n_max!r}")
    d = n_max + 1
    b = abs(beta)
    if beta < 0:
        phase = phase + np.pi
    if b > 0:
        tail = exp(-b * b / 2 + n_max * log(b) - 0.5 * lgamma(n_max + 1))
        if tail >= 1e-12:
            warnings.warn(
                f"Fock truncation n_max={n_max} marginal for displacement beta={beta}"
                f" (top-level amplitude {tail:.2e})", stacklevel=2)
    x = b * b
    pref = exp(-x / 2)
    D = np.zeros((d, d), dtype=complex)
    for n in range(d):
        D[n, n] = pref * assoc_laguerre(n, 0, x)
    for n in range(d):
        for m in range(n + 1, d):
            s = m - n
            mag = pref * b ** s * exp(0.5 * (lgamma(n + 1) - lgamma(m + 1)))
            lag = assoc_laguerre(n, s, x)
            D[m, n] = mag * lag * complex(cos(s * phase), sin(s * phase))
            D[n, m] = mag * lag * (-1) ** s * complex(cos(s * phase), -sin(s * phase))
    return OperatorMatrix(D, fock_tag(n_max))


# ---------------------------------------------------------------------------
# dense Hermitian eigendecomposition
# ---------------------------------------------------------------------------

def hermitian_eig(M, tol=1e-10):
    """Ascending eigendecomposition of a Hermitian matrix.

    Accepts an OperatorMatrix or a plain ndarray.  Raises
    ContractViolationError if the input deviates from Hermiticity by more
    than `tol`.  Within a degenerate cluster the eigenvector order is
    unspecified; rely on projectors, not individual columns.
    """
    A = M.entries if isinstance(M, OperatorMatrix) else np.asarray(M)
    dev = np.abs(A - A.conj().T).max()
    if dev > tol:
        raise ContractViolationError(f"matrix is not Hermitian within {tol} (max dev {dev:.3e})")
    values, vectors = np.linalg.eigh(A)
    return values, vectors
