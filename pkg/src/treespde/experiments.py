"""Monte Carlo diagnostics: strong Feller decay, reachability and ergodic averages."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .engine import DriftPreset, TrajectoryBatch, run_trajectories
from .graph import MetricTree, NoiseConfig
from .spectral import SpectralBasis

FELLER_LOW = 0.3
FELLER_HIGH = 0.7
DEFAULT_EPSILONS = tuple(10.0 ** (-4.0 * k / 7.0) for k in range(8))

# Noise-free sets (1-based edge ids) swept for each preset, and the family probed by the
# Feller test. The star's first kernel vector is v2 - v5, living on e1 and e4.
CATALOG: dict[str, dict] = {
    "chain:4": {"family": 1, "noise_free": [[1, 2, 3, 4], [2, 3, 4], [3, 4], [4], []]},
    "star:4": {"family": 1, "noise_free": [[1, 2, 3, 4], [1, 3, 4], [1, 4], [4], []]},
    "t-prime": {"family": 6, "noise_free": [[1, 2, 3, 4, 5, 6, 7], [6, 7], [1, 6], [1, 4, 6], []]},
}


def default_family(tree: MetricTree) -> int:
    entry = CATALOG.get(tree.name)
    return entry["family"] if entry else 1


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    if len(x) == 0:
        return math.nan, math.nan
    # math.fsum keeps the aggregate independent of summation order
    mean = math.fsum(x) / len(x)
    sd = math.sqrt(math.fsum((x - mean) ** 2) / max(len(x) - 1, 1))
    return mean, sd / math.sqrt(len(x))


def _directions(basis: SpectralBasis, family: int) -> list[tuple[int, np.ndarray]]:
    dirs = basis.family_directions(family)
    if not dirs:
        raise ValueError(f"family {family} has no complete eigenspace inside the {basis.N}-mode basis")
    return dirs


# ---------------------------------------------------------------- strong Feller

@dataclass
class FellerSweep:
    epsilons: list[float]
    estimates: list[float]
    stderrs: list[float]
    family: int
    noisy_label: str
    M: int
    seed: int
    diverged: int = 0

    def verdict(self) -> bool | None:
        """True (decays) / False (stays high) at the smallest epsilon; None when in between."""
        i = int(np.argmin(self.epsilons))
        if self.estimates[i] < FELLER_LOW:
            return True
        if self.estimates[i] > FELLER_HIGH:
            return False
        return None


def feller_sweep(tree: MetricTree, config: NoiseConfig, drift: DriftPreset, basis: SpectralBasis, *,
                 family: int | None = None, epsilons=DEFAULT_EPSILONS, tau: float = 2.0**-5,
                 T: float = 0.5, M: int = 500, seed: int = 0, quad: int = 128,
                 scheme: str = "phi1") -> FellerSweep:
    """``|mean sgn <X(T, E_eps), Psi^{i,1}>|`` with ``E_eps = eps * sum_l Psi^{i,l}`` and X0 = 0.

    Every epsilon reuses the same trajectory streams (common random numbers).
    """
    family = default_family(tree) if family is None else family
    dirs = _directions(basis, family)
    probe = dirs[0][1]
    E = np.sum([v for _, v in dirs], axis=0)
    est, se, lost = [], [], 0
    for eps in epsilons:
        batch = run_trajectories(basis, config, drift, eps * E, tau, T, M, seed, scheme=scheme, quad=quad)
        ok = ~batch.diverged
        lost = max(lost, int(batch.diverged.sum()))
        mean, err = _mean_se(np.sign(batch.terminal[ok] @ probe))
        est.append(abs(mean))
        se.append(err)
    return FellerSweep([float(e) for e in epsilons], est, se, family, config.label(), M, seed, lost)


# ---------------------------------------------------------------- irreducibility

@dataclass
class ReachabilityReport:
    entries: list[tuple[int, int, float]]  # (family, rung, probability)
    delta: float
    M: int
    seed: int
    noisy_label: str
    diverged: int = 0

    def probabilities(self, family: int | None = None) -> np.ndarray:
        return np.array([p for f, _, p in self.entries if family is None or f == family])

    def verdict(self) -> bool:
        """True when every probed direction is reached with positive probability."""
        return bool(np.all(self.probabilities() > 0.0))


def reachability(tree: MetricTree, config: NoiseConfig, drift: DriftPreset, basis: SpectralBasis, *,
                 delta: float = 1e-6, tau: float = 2.0**-5, T: float = 0.5, M: int = 500, seed: int = 0,
                 quad: int = 128, scheme: str = "phi1", families: list[int] | None = None) -> ReachabilityReport:
    """``P(|<X(T), Psi^{i,l}>| > delta)`` from X0 = 0 for every family mode held by the basis."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    fams = [0] + [f.index for f in basis.families] if families is None else families
    batch = run_trajectories(basis, config, drift, np.zeros(basis.N), tau, T, M, seed, scheme=scheme, quad=quad)
    X = batch.terminal[~batch.diverged]
    entries = []
    for i in fams:
        for rung, v in basis.family_directions(i):
            hits = np.abs(X @ v) > delta
            entries.append((i, rung, float(np.count_nonzero(hits)) / len(X) if len(X) else math.nan))
    return ReachabilityReport(entries, delta, M, seed, config.label(), int(batch.diverged.sum()))


# ---------------------------------------------------------------- ergodicity

def ergodicity_initial_values(basis: SpectralBasis, seed: int) -> dict[str, np.ndarray]:
    """The three starting points: zero, the sum of sigma_1 modes with k >= 1, and random coefficients."""
    sig1 = [v for k, v in basis.family_directions(0) if k >= 1]
    x2 = np.sum(sig1, axis=0) if sig1 else np.zeros(basis.N)
    modes = sig1 + [v for f in basis.families for _, v in basis.family_directions(f.index)]
    # separate stream, so X0^(3) does not overlap any trajectory stream
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(2**32 - 1,))))
    x3 = np.asarray(rng.standard_normal(len(modes))) @ np.array(modes) if modes else np.zeros(basis.N)
    return {"X0_1": np.zeros(basis.N), "X0_2": x2, "X0_3": x3}


@dataclass
class ErgodicityCurves:
    times: np.ndarray
    labels: list[str]
    averages: np.ndarray  # (labels, times)
    stderrs: np.ndarray
    M: int
    seed: int
    diverged: int = 0
    warnings: list[str] = field(default_factory=list)

    def terminal_agreement(self, n_se: float = 3.0) -> list[tuple[str, str, float, float, bool]]:
        """Pairwise (a, b, |difference|, combined SE, within n_se) at the final time."""
        out = []
        for i in range(len(self.labels)):
            for j in range(i + 1, len(self.labels)):
                diff = abs(self.averages[i, -1] - self.averages[j, -1])
                se = math.hypot(self.stderrs[i, -1], self.stderrs[j, -1])
                out.append((self.labels[i], self.labels[j], float(diff), float(se), bool(diff <= n_se * se)))
        return out


def psi_sin_norm(c: np.ndarray) -> np.ndarray:
    return np.sin(np.linalg.norm(c, axis=-1))


def ergodicity_curves(tree: MetricTree, config: NoiseConfig, drift: DriftPreset, basis: SpectralBasis, *,
                      tau: float = 2.0**-3, T: float = 30.0, M: int = 1000, seed: int = 0, stride: int = 1,
                      quad: int = 128, scheme: str = "phi1") -> ErgodicityCurves:
    warnings = []
    if not drift.lipschitz < basis.mu1:
        warnings.append(f"drift Lipschitz constant {drift.lipschitz} is not below mu_1 = {basis.mu1:.6g}")
    inits = ergodicity_initial_values(basis, seed)
    avgs, ses, lost, times = [], [], 0, None
    for x0 in inits.values():
        batch = run_trajectories(basis, config, drift, x0, tau, T, M, seed, scheme=scheme, quad=quad,
                                 observe=psi_sin_norm)
        ok = ~batch.diverged
        lost += int(batch.diverged.sum())
        obs = batch.observed[::stride, ok]
        pairs = [_mean_se(row) for row in obs]
        avgs.append([p[0] for p in pairs])
        ses.append([p[1] for p in pairs])
        times = batch.times[::stride]
    return ErgodicityCurves(times, list(inits), np.array(avgs), np.array(ses), M, seed, lost, warnings)


@dataclass
class ContractionReport:
    times: np.ndarray
    gaps: np.ndarray  # (steps + 1, M)
    envelope: np.ndarray  # (steps + 1,), includes the slack factor
    rate: float
    perp_gaps: np.ndarray  # gap with the constant-mode component removed

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.gaps / self.envelope[:, None]))

    @property
    def violations(self) -> int:
        return int(np.sum(np.any(self.gaps > self.envelope[:, None], axis=0)))

    @property
    def perp_max_ratio(self) -> float:
        return float(np.max(self.perp_gaps / self.envelope[:, None]))


def contraction_check(basis: SpectralBasis, config: NoiseConfig, drift: DriftPreset, xa: np.ndarray,
                      xb: np.ndarray, *, tau: float = 2.0**-3, T: float = 30.0, M: int = 20, seed: int = 0,
                      slack: float = 0.05, quad: int = 128, scheme: str = "phi1") -> ContractionReport:
    """Pathwise gap between two starts under common noise versus ``|xa - xb| e^{-(mu_1 - K) t}``."""
    kw = dict(scheme=scheme, quad=quad, keep_path=True)
    a = run_trajectories(basis, config, drift, xa, tau, T, M, seed, **kw)
    b = run_trajectories(basis, config, drift, xb, tau, T, M, seed, **kw)
    diff = a.path - b.path
    rate = basis.mu1 - drift.lipschitz
    env = np.linalg.norm(np.asarray(xa) - np.asarray(xb)) * np.exp(-rate * a.times) * (1.0 + slack)
    return ContractionReport(a.times, np.linalg.norm(diff, axis=2), env, rate, np.linalg.norm(diff[:, :, 1:], axis=2))


def monotone_trend(series: np.ndarray, alpha: float = 0.01) -> tuple[bool, float]:
    """Mann-Kendall test (Kendall tau against time): (trend detected, p-value)."""
    series = np.asarray(series, dtype=float)
    res = stats.kendalltau(np.arange(len(series)), series)
    return bool(res.pvalue < alpha and res.statistic > 0), float(res.pvalue)


def second_moment_series(batch: TrajectoryBatch) -> np.ndarray:
    """Monte Carlo mean of ``|X(t)|^2`` over non-diverged trajectories of a kept path."""
    ok = ~batch.diverged
    return np.mean(np.sum(batch.path[:, ok] ** 2, axis=2), axis=1)


# ---------------------------------------------------------------- catalog helpers

def catalog_configs(tree: MetricTree) -> list[NoiseConfig]:
    entry = CATALOG.get(tree.name)
    if entry is None:
        return [NoiseConfig.all_noisy(tree)]
    return [NoiseConfig.from_noise_free(tree, [j - 1 for j in Z]) for Z in entry["noise_free"]]
