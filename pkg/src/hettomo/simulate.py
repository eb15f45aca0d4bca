"""Synthetic heterodyne detector outcomes for an amplified single mode.

The detector record is S = sqrt(G) (alpha + nu) where alpha is drawn from
the signal mode's Husimi Q function and nu is the complex Gaussian noise
added by the amplifier chain (total variance nbar_h, i.e. nbar_h/2 per
quadrature).  For vacuum input the per-quadrature variance of S is
G (1 + nbar_h) / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fock import FockState, NoiseModel, husimi_q

_REJECTION_SAFETY = 1.2


@dataclass(frozen=True)
class AmplifierChain:
    """Phase-insensitive amplifier: effective power gain plus thermal noise."""

    gain: float
    noise: NoiseModel

    def __post_init__(self):
        if not (math.isfinite(self.gain) and self.gain > 0):
            raise ValueError("gain must be > 0")


@dataclass(frozen=True)
class TemporalEnvelope:
    """Discretized temporal mode f(t) = sqrt(kappa) exp(-kappa t / 2) for t >= 0."""

    kappa: float          # decay rate, 1/ns
    dt: float = 1.0       # time step, ns
    n_bins: int = 400
    f: np.ndarray = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        if self.kappa <= 0 or self.dt <= 0 or self.n_bins < 1:
            raise ValueError("need kappa > 0, dt > 0, n_bins >= 1")
        if self.kappa * self.dt > 0.1:
            raise ValueError("time step too coarse: require kappa*dt <= 0.1")
        if self.n_bins * self.dt < 6.0 / self.kappa:
            raise ValueError("window too short: require n_bins*dt >= 6/kappa")
        t = (np.arange(self.n_bins) + 0.5) * self.dt
        f = np.sqrt(self.kappa) * np.exp(-0.5 * self.kappa * t)
        f = f / math.sqrt(float(np.sum(np.abs(f) ** 2) * self.dt))
        f.setflags(write=False)
        object.__setattr__(self, "f", f.astype(complex))

    def same_grid(self, other: "TemporalEnvelope") -> bool:
        return self.dt == other.dt and self.n_bins == other.n_bins


@dataclass(frozen=True)
class ShotBatch:
    """A batch of complex detector outcomes with its RNG provenance."""

    samples: np.ndarray
    seed: int | tuple
    stream: int = 0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if not np.all(np.isfinite(samples.view(float))):
            raise ValueError("shot batch contains non-finite samples")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def count(self) -> int:
        return self.samples.size


def stream_rng(seed, *path: int) -> np.random.Generator:
    """Deterministic RNG stream derived from (seed, *path) via SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(np.random.SeedSequence(
            entropy=seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(path)))
    entropy = list(seed) if isinstance(seed, (tuple, list)) else [seed]
    return np.random.default_rng(np.random.SeedSequence(entropy + list(path)))


def _complex_normal(rng: np.random.Generator, n: int, var_per_quad: float) -> np.ndarray:
    # interleaved (re, im) view keeps this a single draw + single scale pass
    arr = rng.standard_normal(2 * n)
    arr *= math.sqrt(var_per_quad)
    return arr.view(complex)


def _rejection_envelope(state: FockState, support: int) -> tuple[float, float]:
    """Proposal per-quadrature variance and envelope constant for Q sampling."""
    var = (support + 2) / 2.0
    radius = 2.0 * math.sqrt(support + 2.0)
    x = np.linspace(-radius, radius, 101)
    grid = x[:, None] + 1j * x[None, :]
    q = husimi_q(state, grid)
    proposal = np.exp(-np.abs(grid) ** 2 / (2.0 * var)) / (2.0 * np.pi * var)
    bound = float(np.max(q / proposal)) * _REJECTION_SAFETY
    if not math.isfinite(bound) or bound <= 0:
        raise ValueError("could not compute a finite rejection envelope")
    return var, bound


def _sample_q_rejection(state: FockState, n: int, rng: np.random.Generator) -> np.ndarray:
    support = state.support()
    trimmed = FockState(state.rho[: support + 1, : support + 1]
                        / np.trace(state.rho[: support + 1, : support + 1]).real)
    var, bound = _rejection_envelope(trimmed, support)
    out = np.empty(n, dtype=complex)
    filled = 0
    while filled < n:
        want = n - filled
        draw = max(1000, int(want * bound * 1.1))
        cand = _complex_normal(rng, draw, var)
        proposal = np.exp(-np.abs(cand) ** 2 / (2.0 * var)) / (2.0 * np.pi * var)
        accept = rng.random(draw) * bound * proposal < husimi_q(trimmed, cand)
        got = cand[accept][:want]
        out[filled:filled + got.size] = got
        filled += got.size
    return out


def sample_q(state: FockState, n: int, seed, stream: int = 0) -> np.ndarray:
    """Draw n i.i.d. samples from the state's Husimi Q distribution.

    Vacuum/coherent, Fock and thermal states use exact samplers; everything
    else goes through rejection sampling against a wide Gaussian proposal.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    rng = stream_rng(seed, stream)
    kind = state.profile[0] if state.profile else None
    if kind == "fock":
        k = state.profile[1]
        if k == 0:
            return _complex_normal(rng, n, 0.5)
        r = np.sqrt(rng.gamma(shape=k + 1, scale=1.0, size=n))
        return r * np.exp(2j * np.pi * rng.random(n))
    if kind == "coherent":
        return state.profile[1] + _complex_normal(rng, n, 0.5)
    if kind == "thermal":
        return _complex_normal(rng, n, (state.profile[1] + 1.0) / 2.0)
    return _sample_q_rejection(state, n, rng)


def sample_detector(state: FockState, chain: AmplifierChain, n: int,
                    seed, stream: int = 0) -> ShotBatch:
    """Detector outcomes S = sqrt(G) (alpha + nu), alpha ~ Q, nu ~ amplifier noise."""
    if n < 1:
        raise ValueError("need n >= 1")
    alpha = sample_q(state, n, seed, stream=stream)
    noise_rng = stream_rng(seed, stream, 1)
    nu = _complex_normal(noise_rng, n, chain.noise.nbar / 2.0) \
        if chain.noise.nbar > 0 else 0.0
    s = math.sqrt(chain.gain) * (alpha + nu)
    return ShotBatch(s, seed=seed, stream=stream)


def simulate_time_trace(state: FockState, env: TemporalEnvelope,
                        chain: AmplifierChain, n: int, seed,
                        stream: int = 0) -> np.ndarray:
    """Time-binned records r_j(t_i) = sqrt(G) (alpha_j f_i + xi_ji).

    xi is white complex Gaussian with per-bin total variance nbar_h/dt so
    that matched filtering reproduces sample_detector statistics exactly.
    Valid for the matched filter only; model temporal-mode mismatch with
    fock.loss_channel(eta=overlap**2) instead.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    alpha = sample_q(state, n, seed, stream=stream)
    records = alpha[:, None] * env.f[None, :]
    if chain.noise.nbar > 0:
        noise_rng = stream_rng(seed, stream, 1)
        var_per_quad = chain.noise.nbar / (2.0 * env.dt)
        xi = _complex_normal(noise_rng, n * env.n_bins, var_per_quad)
        records = records + xi.reshape(n, env.n_bins)
    return math.sqrt(chain.gain) * records


def matched_filter(records: np.ndarray, env: TemporalEnvelope,
                   weights: np.ndarray | None = None,
                   seed=0, stream: int = 0) -> ShotBatch:
    """Project time-binned records onto a temporal mode: S_j = sum_i g_i* r_ji dt.

    `weights` overrides the envelope's filter values on the same time grid
    (e.g. for orthogonal-mode checks); the default is the matched filter.
    """
    records = np.asarray(records, dtype=complex)
    if records.ndim != 2 or records.shape[1] != env.n_bins:
        raise ValueError("records do not match the envelope time grid")
    g = env.f if weights is None else np.asarray(weights, dtype=complex)
    if g.shape != (env.n_bins,):
        raise ValueError("filter weights do not match the envelope time grid")
    s = records @ g.conj() * env.dt
    return ShotBatch(s, seed=seed, stream=stream)


def overlap(f: TemporalEnvelope, g: TemporalEnvelope) -> float:
    """Mode overlap c = sum_i f_i g_i* dt; for exponential envelopes
    c = 2 sqrt(kappa kappa') / (kappa + kappa')."""
    if not f.same_grid(g):
        raise ValueError("envelopes live on different time grids")
    return float(np.sum(f.f * g.f.conj()).real * f.dt)
