"""Shared independent oracles for the test suite.

These deliberately avoid the code paths they are used to check: moments by
brute-force operator traces in (padded) Fock bases, kernels by numerical
quadrature.
"""

from __future__ import annotations

import numpy as np

from hettomo.fock import FockState, destroy
from hettomo.moments import hermitize


def random_density_matrix(rng: np.random.Generator, dim: int) -> FockState:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return FockState(rho / np.trace(rho).real)


def random_pure_state(rng: np.random.Generator, dim: int) -> np.ndarray:
    c = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return c / np.linalg.norm(c)


def random_moment_matrix(rng: np.random.Generator, order: int) -> np.ndarray:
    v = rng.normal(size=(order + 1, order + 1)) \
        + 1j * rng.normal(size=(order + 1, order + 1))
    v = hermitize(v)
    v[0, 0] = 1.0
    return v


def thermal_rho(nbar: float, dim: int) -> np.ndarray:
    if nbar == 0:
        rho = np.zeros((dim, dim), dtype=complex)
        rho[0, 0] = 1.0
        return rho
    p = (nbar / (nbar + 1.0)) ** np.arange(dim)
    return np.diag((p / p.sum()).astype(complex))


def thermal_antinormal_oracle(nbar: float, n: int, m: int,
                              cutoff: int = 80) -> complex:
    """<h^n (h^dag)^m> by direct trace over a big truncated thermal state."""
    dim = cutoff + 1 + max(n, m)
    rho = thermal_rho(nbar, dim)
    h = destroy(dim)
    op = np.linalg.matrix_power(h, n) @ np.linalg.matrix_power(h.conj().T, m)
    return complex(np.trace(rho @ op))


def two_mode_raw_oracle(rho_a: np.ndarray, nbar_h: float, gain: float,
                        n: int, m: int, cutoff_h: int = 60) -> complex:
    """Brute-force <(S^dag)^n S^m> = G^{(n+m)/2} <(a^dag+h)^n (a+h^dag)^m>
    on the product state rho_a (x) thermal(nbar_h)."""
    dim_a = rho_a.shape[0] + max(n, m)   # pad so raising never truncates
    dim_h = cutoff_h + 1 + max(n, m)
    rho_a_pad = np.zeros((dim_a, dim_a), dtype=complex)
    rho_a_pad[: rho_a.shape[0], : rho_a.shape[0]] = rho_a
    a = np.kron(destroy(dim_a), np.eye(dim_h))
    h = np.kron(np.eye(dim_a), destroy(dim_h))
    rho = np.kron(rho_a_pad, thermal_rho(nbar_h, dim_h))
    s_dag = a.conj().T + h
    s = a + h.conj().T
    op = np.linalg.matrix_power(s_dag, n) @ np.linalg.matrix_power(s, m)
    return complex(gain ** ((n + m) / 2.0) * np.trace(rho @ op))


def wigner_kernel_quadrature(n: int, m: int, alpha: complex,
                             radius: float = 8.0, points: int = 481) -> complex:
    """Numerical 2D quadrature of the Wigner lambda-integral, convention
    pinned to moments pairing with lambda^n (-conj(lambda))^m."""
    x = np.linspace(-radius, radius, points)
    d = x[1] - x[0]
    lam = x[:, None] + 1j * x[None, :]
    integrand = (lam ** n * (-np.conj(lam)) ** m
                 * np.exp(-0.5 * np.abs(lam) ** 2
                          + alpha * np.conj(lam) - np.conj(alpha) * lam))
    return complex(np.sum(integrand) * d * d / np.pi ** 2)
