"""Spectral Galerkin integrator for the edge-masked stochastic reaction-diffusion system.

The state is the coefficient vector ``c`` of ``X = sum_k c_k phi_k`` in an
orthonormal :class:`~treespde.spectral.SpectralBasis`. One step of size ``tau``
applies the exact heat semigroup, a phi_1-weighted drift and an exactly
sampled Gaussian convolution increment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import lapack

from .graph import NoiseConfig
from .spectral import SpectralBasis, edge_gram

DIVERGENCE_GUARD = 1e6
PIVOT_RTOL = 1e-12


@dataclass
class GalerkinState:
    coefficients: np.ndarray
    time: float = 0.0

    @property
    def norm(self) -> float:
        """L2 norm on the graph; equal to the Euclidean norm since the basis is orthonormal."""
        return float(np.linalg.norm(self.coefficients))


# ---------------------------------------------------------------- noise

def psd_factor(S: np.ndarray, rtol: float = PIVOT_RTOL) -> np.ndarray:
    """``F`` with ``F @ F.T == S`` by pivoted Cholesky; numerically null directions are dropped.

    Columns past the detected rank are zero, so ``F`` stays square and a fixed
    number of standard normals is consumed per step regardless of the rank.
    """
    n = S.shape[0]
    scale = float(np.max(np.diag(S))) if n else 0.0
    F = np.zeros_like(S)
    if scale <= 0.0:
        return F
    L, piv, rank, info = lapack.dpstrf(np.array(S, dtype=float, order="F"), lower=1, tol=rtol * scale)
    if info < 0:
        raise np.linalg.LinAlgError(f"dpstrf failed with info={info}")
    L = np.tril(L)
    L[:, rank:] = 0.0
    F[piv - 1, :] = L
    resid = np.max(np.abs(F @ F.T - S))
    if resid > 1e-8 * max(scale, 1.0):
        raise np.linalg.LinAlgError(f"covariance is not positive semidefinite (residual {resid:.3g})")
    return F


def convolution_covariance(C: np.ndarray, mu: np.ndarray, tau: float) -> np.ndarray:
    """``C_kl (1 - exp(-(mu_k + mu_l) tau)) / (mu_k + mu_l)``, with limit ``tau C_kl`` at zero."""
    s = mu[:, None] + mu[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(s > 0, -np.expm1(-s * tau) / np.where(s > 0, s, 1.0), tau)
    return C * g


@dataclass
class NoiseSampler:
    basis: SpectralBasis
    config: NoiseConfig
    C: np.ndarray
    _factors: dict = field(default_factory=dict, repr=False)

    def covariance(self, tau: float) -> np.ndarray:
        return convolution_covariance(self.C, self.basis.eigenvalues, tau)

    def factor(self, tau: float) -> np.ndarray:
        F = self._factors.get(tau)
        if F is None:
            F = psd_factor(self.covariance(tau))
            self._factors[tau] = F
        return F

    def rank(self, tol: float = 1e-10) -> int:
        ev = np.linalg.eigvalsh(self.C)
        return int(np.sum(ev > tol * max(ev.max(), 1.0)))


def mode_covariance(basis: SpectralBasis, config: NoiseConfig) -> NoiseSampler:
    if config.m != basis.tree.m:
        raise ValueError("noise configuration and basis refer to different trees")
    C = edge_gram(basis.omega, basis.A, basis.B, weights=config.mask)
    return NoiseSampler(basis, config, 0.5 * (C + C.T))


# ---------------------------------------------------------------- drift

DRIFT_TAGS = ("zero", "masked_sine", "scaled_dissipative", "cubic", "identity")


@dataclass(frozen=True)
class DriftPreset:
    tag: str = "zero"
    c: float = 2.0  # scale of scaled_dissipative: b(x) = x / (c sqrt(1 + x^2))

    def __post_init__(self) -> None:
        if self.tag not in DRIFT_TAGS:
            raise ValueError(f"unknown drift {self.tag!r}; expected one of {', '.join(DRIFT_TAGS)}")
        if self.tag == "scaled_dissipative" and not self.c > 0:
            raise ValueError("scaled_dissipative needs c > 0")

    @property
    def lipschitz(self) -> float:
        return {"zero": 0.0, "masked_sine": 1.0, "scaled_dissipative": 1.0 / self.c,
                "cubic": math.inf, "identity": 1.0}[self.tag]

    @property
    def is_zero(self) -> bool:
        return self.tag == "zero"

    def __call__(self, u: np.ndarray, mask: np.ndarray) -> np.ndarray:
        """Apply ``b_j`` pointwise; ``mask`` holds Q_j broadcast to the columns of ``u``."""
        if self.tag == "zero":
            return np.zeros_like(u)
        if self.tag == "masked_sine":
            return mask * np.sin(u)
        if self.tag == "scaled_dissipative":
            return u / (self.c * np.sqrt(1.0 + u * u))
        if self.tag == "cubic":
            return u - u**3
        return u.copy()

    def describe(self) -> str:
        return f"scaled_dissipative(c={self.c!r})" if self.tag == "scaled_dissipative" else self.tag


@dataclass
class Quadrature:
    """Gauss-Legendre nodes on every edge, with mode values precomputed."""

    nodes: np.ndarray
    weights: np.ndarray  # tiled over edges, length m*Q
    phi: np.ndarray  # (N, m*Q)
    mask: np.ndarray  # Q_j per column

    @classmethod
    def build(cls, basis: SpectralBasis, config: NoiseConfig, quad: int = 128) -> "Quadrature":
        if quad < 2:
            raise ValueError("quad must be at least 2")
        t, w = np.polynomial.legendre.leggauss(quad)
        x, w = 0.5 * (t + 1.0), 0.5 * w
        m = basis.tree.m
        phi = basis.values_at(x).reshape(basis.N, m * quad)
        return cls(x, np.tile(w, m), phi, np.repeat(config.mask, quad))


def nemytskii_project(c: np.ndarray, drift: DriftPreset, quadrature: Quadrature) -> np.ndarray:
    """Coefficients of the L2 projection of ``B(X)``; ``c`` is (N,) or (M, N)."""
    if drift.is_zero:
        return np.zeros_like(c)
    u = c @ quadrature.phi
    return (drift(u, quadrature.mask) * quadrature.weights) @ quadrature.phi.T


# ---------------------------------------------------------------- time stepping

SCHEMES = ("phi1", "euler")


@dataclass
class Stepper:
    decay: np.ndarray
    weight: np.ndarray
    factor: np.ndarray
    drift: DriftPreset
    quadrature: Quadrature | None

    @classmethod
    def build(cls, basis: SpectralBasis, sampler: NoiseSampler, drift: DriftPreset, tau: float,
              scheme: str = "phi1", quad: int = 128) -> "Stepper":
        if tau <= 0:
            raise ValueError("tau must be positive")
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}")
        mu = basis.eigenvalues
        decay = np.exp(-mu * tau)
        if scheme == "phi1":
            with np.errstate(divide="ignore", invalid="ignore"):
                weight = np.where(mu > 0, -np.expm1(-mu * tau) / np.where(mu > 0, mu, 1.0), tau)
        else:
            weight = np.full_like(mu, tau)
        quadrature = None if drift.is_zero else Quadrature.build(basis, sampler.config, quad)
        return cls(decay, weight, sampler.factor(tau), drift, quadrature)

    def step(self, c: np.ndarray, z: np.ndarray, increment: np.ndarray | None = None) -> np.ndarray:
        """One exponential Euler step; ``z`` holds standard normals of the same shape as ``c``.

        A precomputed convolution ``increment`` replaces ``z`` when given.
        """
        eta = z @ self.factor.T if increment is None else increment
        out = c * self.decay + eta
        if self.quadrature is not None:
            out += self.weight * nemytskii_project(c, self.drift, self.quadrature)
        return out


def exp_euler_step(state: GalerkinState, tau: float, drift: DriftPreset, sampler: NoiseSampler,
                   rng: np.random.Generator, scheme: str = "phi1", quad: int = 128) -> GalerkinState:
    stepper = Stepper.build(sampler.basis, sampler, drift, tau, scheme, quad)
    z = rng.standard_normal(sampler.basis.N)
    return GalerkinState(stepper.step(state.coefficients, z), state.time + tau)


def linear_exact_law(basis: SpectralBasis, config: NoiseConfig, c0: np.ndarray, t: float):
    """Mean and covariance of the coefficients of the linear equation at time ``t``."""
    if t <= 0:
        raise ValueError("t must be positive")
    sampler = mode_covariance(basis, config)
    return np.exp(-basis.eigenvalues * t) * np.asarray(c0, dtype=float), sampler.covariance(t)


# ---------------------------------------------------------------- batches of trajectories

def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for trajectory ``index``; shared across configs for common random numbers."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def step_count(T: float, tau: float) -> int:
    n = round(T / tau)
    if n < 1 or abs(n * tau - T) > 1e-9 * max(T, 1.0):
        raise ValueError(f"tau={tau!r} does not divide T={T!r}")
    return int(n)


def coarsen_increments(eta: np.ndarray, mu: np.ndarray, tau: float) -> np.ndarray:
    """Convolution increments over steps of ``2 tau`` from those over ``tau`` (leading axis = step).

    Exact in law and pathwise: the integral over two consecutive steps is
    ``exp(-mu tau) eta_1 + eta_2``.
    """
    if eta.shape[0] % 2:
        raise ValueError("need an even number of fine steps")
    return np.exp(-mu * tau) * eta[0::2] + eta[1::2]


def sample_increments(basis: SpectralBasis, config: NoiseConfig, tau: float, T: float, M: int, seed: int,
                      first_index: int = 0) -> np.ndarray:
    """Convolution increments (steps, M, N) using the same streams as :func:`run_trajectories`."""
    F = mode_covariance(basis, config).factor(tau)
    steps = step_count(T, tau)
    z = np.stack([trajectory_rng(seed, first_index + i).standard_normal((steps, basis.N)) for i in range(M)], axis=1)
    return z @ F.T


@dataclass
class TrajectoryBatch:
    terminal: np.ndarray  # (M, N)
    diverged: np.ndarray  # (M,) bool
    times: np.ndarray
    observed: np.ndarray | None = None  # (steps + 1, M) when an observable was given
    path: np.ndarray | None = None  # (steps + 1, M, N) when requested
    seed: int = 0

    @property
    def diverged_fraction(self) -> float:
        return float(np.mean(self.diverged)) if len(self.diverged) else 0.0


def run_trajectories(
    basis: SpectralBasis,
    config: NoiseConfig,
    drift: DriftPreset,
    c0: np.ndarray,
    tau: float,
    T: float,
    M: int,
    seed: int,
    *,
    scheme: str = "phi1",
    quad: int = 128,
    observe: Callable[[np.ndarray], np.ndarray] | None = None,
    keep_path: bool = False,
    chunk: int = 512,
    guard: float = DIVERGENCE_GUARD,
    first_index: int = 0,
    increments: np.ndarray | None = None,
) -> TrajectoryBatch:
    """Integrate ``M`` trajectories from ``c0`` ((N,) shared or (M, N) per trajectory).

    Trajectory ``i`` draws its normals from ``trajectory_rng(seed, first_index + i)``,
    so results do not depend on ``chunk``. ``increments`` ((steps, M, N)) overrides
    the sampled noise, which couples runs at different step sizes. A trajectory
    whose norm exceeds ``guard`` is flagged and frozen at its last finite state.
    """
    N = basis.N
    steps = step_count(T, tau)
    sampler = mode_covariance(basis, config)
    stepper = Stepper.build(basis, sampler, drift, tau, scheme, quad)
    c0 = np.asarray(c0, dtype=float)
    starts = np.broadcast_to(c0, (M, N)) if c0.ndim == 1 else c0
    if starts.shape != (M, N):
        raise ValueError(f"initial coefficients have shape {c0.shape}, expected ({N},) or ({M}, {N})")
    terminal = np.empty((M, N))
    diverged = np.zeros(M, dtype=bool)
    observed = np.empty((steps + 1, M)) if observe is not None else None
    path = np.empty((steps + 1, M, N)) if keep_path else None
    for lo in range(0, M, chunk):
        hi = min(M, lo + chunk)
        if increments is None:
            z = np.stack([trajectory_rng(seed, first_index + i).standard_normal((steps, N))
                          for i in range(lo, hi)], axis=1)
            eta = None
        else:
            eta = increments[:, lo:hi]
        c = starts[lo:hi].copy()
        bad = np.zeros(hi - lo, dtype=bool)
        if observed is not None:
            observed[0, lo:hi] = observe(c)
        if path is not None:
            path[0, lo:hi] = c
        for n in range(steps):
            with np.errstate(over="ignore", invalid="ignore"):
                new = stepper.step(c, None, eta[n]) if eta is not None else stepper.step(c, z[n])
                nrm = np.linalg.norm(new, axis=1)
            blown = ~np.isfinite(nrm) | (nrm > guard)
            bad |= blown
            c = np.where(bad[:, None], c, new)
            if observed is not None:
                observed[n + 1, lo:hi] = observe(c)
            if path is not None:
                path[n + 1, lo:hi] = c
        terminal[lo:hi] = c
        diverged[lo:hi] = bad
    times = tau * np.arange(steps + 1)
    return TrajectoryBatch(terminal, diverged, times, observed, path, seed)


@dataclass
class Trajectory:
    initial: np.ndarray
    tau: float
    steps: int
    states: list[GalerkinState]
    seed: int
    diverged: bool = False

    @property
    def terminal(self) -> GalerkinState:
        return self.states[-1]


def run_trajectory(basis: SpectralBasis, config: NoiseConfig, drift: DriftPreset, c0: np.ndarray,
                   tau: float, T: float, seed: int, *, index: int = 0, keep_path: bool = False,
                   scheme: str = "phi1", quad: int = 128) -> Trajectory:
    batch = run_trajectories(basis, config, drift, c0, tau, T, 1, seed, scheme=scheme, quad=quad,
                             keep_path=keep_path, first_index=index)
    if keep_path:
        states = [GalerkinState(batch.path[n, 0].copy(), float(t)) for n, t in enumerate(batch.times)]
    else:
        states = [GalerkinState(np.asarray(c0, dtype=float).copy(), 0.0),
                  GalerkinState(batch.terminal[0].copy(), float(batch.times[-1]))]
    return Trajectory(np.asarray(c0, dtype=float).copy(), tau, len(batch.times) - 1, states, seed,
                      bool(batch.diverged[0]))
