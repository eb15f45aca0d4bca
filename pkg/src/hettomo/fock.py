"""Exact finite-dimensional quantum states and analytic phase-space oracles.

Unit convention (used by every module in this package): the complex field
amplitude is ``alpha = X + iP`` and the vacuum Husimi Q function is
``Q_vac(alpha) = exp(-|alpha|^2)/pi``, i.e. per-quadrature variance 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import h as PLANCK, k as BOLTZMANN
from scipy.linalg import expm

from .moments import ANTINORMAL, NORMAL, MomentMatrix, hermitize, moment_indices

DEFAULT_CUTOFF = 8

_TRACE_TOL = 1e-12
_HERM_TOL = 1e-12
_EIG_TOL = -1e-10
_THERMAL_TAIL_TOL = 1e-6


def destroy(dim: int) -> np.ndarray:
    """Annihilation operator on a (dim)-dimensional truncated Fock space."""
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


@dataclass(frozen=True)
class FockState:
    """Quantum state of a single mode in a truncated Fock basis.

    Always stored as a density matrix ``rho[j, k] = <j|rho|k>`` with
    ``0 <= j, k <= N``.  ``profile`` is an optional provenance hint
    (e.g. ``("coherent", alpha)``) that lets samplers pick an exact
    special-case path; it never affects equality or physics.
    """

    rho: np.ndarray
    profile: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError("rho must be a square matrix")
        if not np.all(np.isfinite(rho.view(float))):
            raise ValueError("rho contains non-finite entries")
        if abs(np.trace(rho).real - 1.0) > 1e-10 or abs(np.trace(rho).imag) > _TRACE_TOL:
            raise ValueError("rho must have unit trace")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
            raise ValueError("rho must be Hermitian")
        eigs = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
        if np.min(eigs) < _EIG_TOL:
            raise ValueError("rho must be positive semidefinite")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def cutoff(self) -> int:
        """Photon-number cutoff N (basis runs |0> .. |N>)."""
        return self.rho.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def support(self) -> int:
        """Largest occupied Fock level (population or coherence above 1e-14)."""
        mag = np.maximum(np.max(np.abs(self.rho), axis=0),
                         np.max(np.abs(self.rho), axis=1))
        occupied = np.nonzero(mag > 1e-14)[0]
        return int(occupied[-1]) if occupied.size else 0

    def padded(self, extra: int) -> "FockState":
        """Same state embedded in a Fock space with `extra` more levels."""
        dim = self.dim + extra
        rho = np.zeros((dim, dim), dtype=complex)
        rho[: self.dim, : self.dim] = self.rho
        return FockState(rho, profile=self.profile)

    @classmethod
    def from_amplitudes(cls, amps, profile: tuple | None = None) -> "FockState":
        c = np.asarray(amps, dtype=complex)
        norm = np.sum(np.abs(c) ** 2)
        if abs(norm - 1.0) > _TRACE_TOL:
            raise ValueError("pure-state amplitudes must be normalized")
        return cls(np.outer(c, c.conj()), profile=profile)

    @classmethod
    def vacuum(cls, cutoff: int = DEFAULT_CUTOFF) -> "FockState":
        return cls.fock(0, cutoff)

    @classmethod
    def fock(cls, k: int, cutoff: int = DEFAULT_CUTOFF) -> "FockState":
        if not 0 <= k <= cutoff:
            raise ValueError("Fock level outside cutoff")
        c = np.zeros(cutoff + 1, dtype=complex)
        c[k] = 1.0
        return cls.from_amplitudes(c, profile=("fock", k))


@dataclass(frozen=True)
class NoiseModel:
    """Thermal occupation of the amplifier noise mode h."""

    nbar: float

    def __post_init__(self):
        if not math.isfinite(self.nbar) or self.nbar < 0:
            raise ValueError("mean thermal photon number must be >= 0")

    @classmethod
    def from_temperature(cls, temperature_k: float, frequency_hz: float,
                         rayleigh_jeans: bool = False) -> "NoiseModel":
        """Bose-Einstein occupation at (T, nu); Rayleigh-Jeans kT/(h nu) on request."""
        if temperature_k < 0 or frequency_hz <= 0:
            raise ValueError("need T >= 0 and nu > 0")
        if temperature_k == 0:
            return cls(0.0)
        x = PLANCK * frequency_hz / (BOLTZMANN * temperature_k)
        if rayleigh_jeans:
            return cls(1.0 / x)
        return cls(1.0 / math.expm1(x))


def prepare_superposition(beta: complex, admixture_error: float = 0.0,
                          cutoff: int = DEFAULT_CUTOFF) -> FockState:
    """Ideal qubit-to-field map producing alpha|0> + beta|1>, optionally
    mixed convexly with vacuum (weight `admixture_error`)."""
    beta = complex(beta)
    if abs(beta) > 1.0 + 1e-12:
        raise ValueError("excited-state amplitude must satisfy |beta| <= 1")
    if not 0.0 <= admixture_error <= 1.0:
        raise ValueError("admixture_error must lie in [0, 1]")
    a0 = math.sqrt(max(0.0, 1.0 - abs(beta) ** 2))
    c = np.zeros(cutoff + 1, dtype=complex)
    c[0], c[1] = a0, beta
    rho = np.outer(c, c.conj())
    if admixture_error > 0.0:
        vac = np.zeros_like(rho)
        vac[0, 0] = 1.0
        rho = (1.0 - admixture_error) * rho + admixture_error * vac
    return FockState(rho)


def coherent_state(alpha: complex, cutoff: int = DEFAULT_CUTOFF) -> FockState:
    """Truncated coherent state |alpha>, renormalized after truncation."""
    alpha = complex(alpha)
    if abs(alpha) ** 2 > cutoff / 4.0:
        raise ValueError("cutoff too small for requested coherent amplitude")
    k = np.arange(cutoff + 1)
    logfact = np.cumsum(np.concatenate(([0.0], np.log(np.arange(1, cutoff + 1)))))
    c = np.exp(-0.5 * abs(alpha) ** 2) * alpha ** k / np.exp(0.5 * logfact)
    c = c / math.sqrt(float(np.sum(np.abs(c) ** 2)))
    return FockState.from_amplitudes(c, profile=("coherent", alpha))


def thermal_cutoff(nbar: float, tail: float = _THERMAL_TAIL_TOL) -> int:
    """Smallest cutoff keeping the geometric tail weight below `tail`."""
    if nbar <= 0:
        return 1
    # tail weight beyond N is (nbar/(nbar+1))**(N+1)
    q = nbar / (nbar + 1.0)
    return max(1, math.ceil(math.log(tail) / math.log(q)) - 1)


def thermal_state(nbar: float, cutoff: int | None = None) -> FockState:
    """Thermal state with mean photon number nbar, diagonal in the Fock basis."""
    if nbar < 0:
        raise ValueError("nbar must be >= 0")
    needed = thermal_cutoff(nbar)
    if cutoff is None:
        cutoff = needed
    elif cutoff < needed:
        raise ValueError(f"cutoff {cutoff} too small for nbar={nbar} "
                         f"(need >= {needed} for tail < {_THERMAL_TAIL_TOL})")
    if nbar == 0:
        return FockState.vacuum(cutoff)
    k = np.arange(cutoff + 1)
    p = (nbar / (nbar + 1.0)) ** k
    p = p / p.sum()
    return FockState(np.diag(p.astype(complex)), profile=("thermal", nbar))


def analytic_moments(state: FockState, order: int = 4) -> MomentMatrix:
    """Normally ordered moments m(n, m) = Tr[rho (a^dag)^n a^m], exact."""
    if order > 2 * state.cutoff:
        raise ValueError("order cap exceeds 2N; raise the Fock cutoff")
    a = destroy(state.dim)
    ad = a.conj().T
    a_pow = [np.eye(state.dim, dtype=complex)]
    ad_pow = [np.eye(state.dim, dtype=complex)]
    for _ in range(order):
        a_pow.append(a_pow[-1] @ a)
        ad_pow.append(ad_pow[-1] @ ad)
    values = np.zeros((order + 1, order + 1), dtype=complex)
    for n, m in moment_indices(order):
        values[n, m] = np.trace(state.rho @ ad_pow[n] @ a_pow[m])
    return MomentMatrix(hermitize(values), ordering=NORMAL)


def antinormal_moments(state: FockState, order: int = 4) -> MomentMatrix:
    """Antinormally ordered moments m(n, m) = Tr[rho a^n (a^dag)^m].

    These are the moments of the state's own Q function:
    integral of alpha^n conj(alpha)^m Q(alpha).  Computed in a padded basis
    so intermediate raising never truncates.
    """
    padded = state.padded(order)
    a = destroy(padded.dim)
    ad = a.conj().T
    values = np.zeros((order + 1, order + 1), dtype=complex)
    for n, m in moment_indices(order):
        op = np.linalg.matrix_power(a, n) @ np.linalg.matrix_power(ad, m)
        values[n, m] = np.trace(padded.rho @ op)
    return MomentMatrix(hermitize(values), ordering=ANTINORMAL)


def noise_moments(noise: NoiseModel, order: int = 4) -> MomentMatrix:
    """Antinormal thermal-noise moments <h^n (h^dag)^m> = delta_nm n! (nbar+1)^n."""
    values = np.zeros((order + 1, order + 1), dtype=complex)
    for n in range(order + 1):
        if 2 * n <= order:
            values[n, n] = math.factorial(n) * (noise.nbar + 1.0) ** n
    values[0, 0] = 1.0
    return MomentMatrix(values, ordering=ANTINORMAL)


def coherent_vectors(alpha: np.ndarray, dim: int) -> np.ndarray:
    """Fock coefficients <k|alpha> for an array of amplitudes, shape (..., dim)."""
    alpha = np.asarray(alpha, dtype=complex)
    k = np.arange(dim)
    logfact = np.cumsum(np.concatenate(([0.0], np.log(np.arange(1, dim)))))
    # alpha**k with 0**0 = 1
    powers = np.where(k == 0, 1.0, alpha[..., None] ** k)
    return np.exp(-0.5 * np.abs(alpha)[..., None] ** 2) * powers / np.exp(0.5 * logfact)


def husimi_q(state: FockState, alpha) -> np.ndarray | float:
    """Husimi Q function <alpha|rho|alpha>/pi; non-negative, integrates to 1."""
    alpha_arr = np.atleast_1d(np.asarray(alpha, dtype=complex))
    v = coherent_vectors(alpha_arr.ravel(), state.dim)
    q = np.einsum("ij,jk,ik->i", v.conj(), state.rho, v).real / np.pi
    q = np.maximum(q, 0.0).reshape(alpha_arr.shape)
    if np.isscalar(alpha) or np.asarray(alpha).ndim == 0:
        return float(q.reshape(-1)[0])
    return q


def _parity_pad(state: FockState, alpha_max: float) -> int:
    # displaced support center grows like (sqrt(N) + |alpha|)^2; keep a wide
    # Gaussian-tail margin so truncation error stays below 1e-8
    n = state.support()
    center = (math.sqrt(n) + alpha_max) ** 2
    return max(4, math.ceil(center + 8.0 * math.sqrt(center + 1.0) + 8) - state.cutoff)


def wigner_oracle(state: FockState, alpha) -> np.ndarray | float:
    """Displaced-parity Wigner function, W(alpha) = (2/pi) Tr[D(-a) rho D(a) Pi].

    Independent oracle for the moment-based reconstruction; uses an exact
    truncated matrix exponential for the displacement with generous padding.
    """
    alpha_arr = np.atleast_1d(np.asarray(alpha, dtype=complex))
    flat = alpha_arr.ravel()
    pad = _parity_pad(state, float(np.max(np.abs(flat))) if flat.size else 0.0)
    padded = state.padded(pad)
    a = destroy(padded.dim)
    ad = a.conj().T
    parity = np.diag((-1.0) ** np.arange(padded.dim))
    out = np.empty(flat.shape, dtype=float)
    for i, al in enumerate(flat):
        d = expm(al * ad - np.conj(al) * a)
        out[i] = (2.0 / np.pi) * np.trace(d.conj().T @ padded.rho @ d @ parity).real
    out = out.reshape(alpha_arr.shape)
    if np.isscalar(alpha) or np.asarray(alpha).ndim == 0:
        return float(out.reshape(-1)[0])
    return out


def loss_channel(state: FockState, eta: float) -> FockState:
    """Pure-loss (beam-splitter with vacuum) channel; <a^dag a> scales by eta."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("transmission eta must lie in [0, 1]")
    dim = state.dim
    if eta == 1.0:
        return FockState(state.rho.copy(), profile=state.profile)
    out = np.zeros_like(state.rho)
    for j in range(dim):  # j photons lost
        k = np.zeros((dim, dim))
        for n in range(j, dim):
            k[n - j, n] = math.sqrt(math.comb(n, j) * eta ** (n - j) * (1.0 - eta) ** j)
        out += k @ state.rho @ k.T
    return FockState(out)
