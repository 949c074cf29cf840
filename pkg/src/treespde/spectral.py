"""Eigenstructure of the Neumann-Kirchhoff Laplacian on a unit-length tree.

Every eigenfunction is stored edge-wise as ``a_j cos(w x) + b_j sin(w x)`` with
a common frequency ``w``; the eigenvalue of ``-Laplacian`` is ``w**2``. This
single representation covers the constant mode (w = 0), the trigonometric
modes at ``w = k pi`` and the modes generated by the normalized adjacency
spectrum, and makes all L2 inner products closed-form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .graph import MetricTree, bipartition, derive_matrices
from .nulldec import tree_kernel

SIN_GUARD = 1e-9
CLUSTER_TOL = 1e-8


def jacobi_eigh(S: np.ndarray, tol: float = 1e-15, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigensolver for a small symmetric matrix.

    Returns ascending eigenvalues and orthonormal eigenvectors (columns).
    """
    A = np.array(S, dtype=float, copy=True)
    n = A.shape[0]
    V = np.eye(n)
    scale = max(np.linalg.norm(A), 1.0)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp, cq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


@dataclass(frozen=True)
class AdjacencySpectrum:
    eigenvalues: np.ndarray  # ascending
    vectors: np.ndarray  # columns: eigenvectors of D^-1 A; zero eigenspace = exact kernel basis
    normalized_adjacency: np.ndarray

    def residual(self) -> float:
        At = self.normalized_adjacency
        out = 0.0
        for k, lam in enumerate(self.eigenvalues):
            u = self.vectors[:, k]
            out = max(out, float(np.max(np.abs(At @ u - lam * u)) / np.max(np.abs(u))))
        return out


def _canonical_sign(u: np.ndarray) -> np.ndarray:
    i = int(np.flatnonzero(np.abs(u) > 1e-12 * np.max(np.abs(u)))[0])
    return u if u[i] > 0 else -u


@lru_cache(maxsize=256)
def adjacency_spectrum(tree: MetricTree) -> AdjacencySpectrum:
    mats = derive_matrices(tree)
    A = mats.adjacency.astype(float)
    deg = np.diag(mats.degree).astype(float)
    dm = 1.0 / np.sqrt(deg)
    w, W = jacobi_eigh(dm[:, None] * A * dm[None, :])
    U = dm[:, None] * W
    kb = tree_kernel(tree)
    zero = np.flatnonzero(np.abs(w) <= CLUSTER_TOL)
    if len(zero) != kb.dimension:
        raise RuntimeError(
            f"{tree.name}: float nullity {len(zero)} disagrees with exact nullity {kb.dimension}"
        )
    w = w.copy()
    w[zero] = 0.0
    if kb.dimension:
        U[:, zero] = kb.as_array()
    for k in range(U.shape[1]):
        U[:, k] = _canonical_sign(U[:, k] / np.max(np.abs(U[:, k])))
    return AdjacencySpectrum(w, U, mats.normalized_adjacency_float())


@dataclass(frozen=True)
class Family:
    """An adjacency eigenvector generating a ladder of sigma_2 modes."""

    index: int  # 1-based, order used by experiments
    mu: float  # eigenvalue of the normalized adjacency in (-1, 1)
    vertex_values: np.ndarray

    @property
    def theta(self) -> float:
        return math.acos(self.mu)


def families(tree: MetricTree) -> list[Family]:
    """Nonzero eigenvalues in (-1, 1) by descending value, then kernel vectors in RREF order."""
    spec = adjacency_spectrum(tree)
    lam = spec.eigenvalues
    nonzero = [k for k in range(len(lam)) if CLUSTER_TOL < abs(lam[k]) < 1 - CLUSTER_TOL]
    nonzero.sort(key=lambda k: (-lam[k], k))
    zero = [k for k in range(len(lam)) if abs(lam[k]) <= CLUSTER_TOL]
    out = []
    for k in nonzero + zero:
        out.append(Family(len(out) + 1, float(lam[k]), spec.vectors[:, k].copy()))
    return out


@dataclass
class EigenMode:
    omega: float
    a: np.ndarray  # cos coefficients per edge
    b: np.ndarray  # sin coefficients per edge
    family: str  # "sigma1" | "sigma2"
    generator: float  # k for sigma1, adjacency eigenvalue for sigma2
    family_index: int = 0  # 0 for sigma1
    rung: int = 0  # k for sigma1, 1-based position on the family ladder for sigma2

    @property
    def eigenvalue(self) -> float:
        return self.omega**2

    def evaluate(self, j: int, x) -> np.ndarray:
        return self.a[j] * np.cos(self.omega * np.asarray(x)) + self.b[j] * np.sin(self.omega * np.asarray(x))

    def derivative(self, j: int, x) -> np.ndarray:
        w = self.omega
        return w * (-self.a[j] * np.sin(w * np.asarray(x)) + self.b[j] * np.cos(w * np.asarray(x)))


# ---------------------------------------------------------------- closed-form integrals

def _S(g: np.ndarray) -> np.ndarray:
    """int_0^1 cos(g x) dx."""
    return np.sinc(np.asarray(g, dtype=float) / np.pi)


def _T(g: np.ndarray) -> np.ndarray:
    """int_0^1 sin(g x) dx = (1 - cos g)/g, odd in g."""
    g = np.asarray(g, dtype=float)
    h = g / 2.0
    return h * np.sinc(h / np.pi) ** 2


def trig_integrals(wk: np.ndarray, wl: np.ndarray):
    """Matrices of int_0^1 cc, cs, sc, ss products for frequency vectors ``wk`` x ``wl``."""
    a = np.asarray(wk, dtype=float)[:, None]
    b = np.asarray(wl, dtype=float)[None, :]
    Icc = 0.5 * (_S(a - b) + _S(a + b))
    Iss = 0.5 * (_S(a - b) - _S(a + b))
    Ics = 0.5 * (_T(a + b) + _T(b - a))  # cos(a x) sin(b x)
    Isc = 0.5 * (_T(a + b) + _T(a - b))  # sin(a x) cos(b x)
    return Icc, Ics, Isc, Iss


def edge_gram(omega, A, B, weights=None, omega2=None, A2=None, B2=None) -> np.ndarray:
    """``sum_j w_j int_0^1 f_kj g_lj`` for modes given as (omega, A, B) arrays of shape (K, m)."""
    if omega2 is None:
        omega2, A2, B2 = omega, A, B
    w = np.ones(A.shape[1]) if weights is None else np.asarray(weights, dtype=float)
    Icc, Ics, Isc, Iss = trig_integrals(omega, omega2)
    return (
        Icc * ((A * w) @ A2.T)
        + Ics * ((A * w) @ B2.T)
        + Isc * ((B * w) @ A2.T)
        + Iss * ((B * w) @ B2.T)
    )


def inner_product(f: EigenMode, g: EigenMode) -> float:
    G = edge_gram(np.array([f.omega]), f.a[None, :], f.b[None, :],
                  omega2=np.array([g.omega]), A2=g.a[None, :], B2=g.b[None, :])
    return float(G[0, 0])


def _normalize(mode: EigenMode) -> EigenMode:
    nrm = math.sqrt(inner_product(mode, mode))
    mode.a = mode.a / nrm
    mode.b = mode.b / nrm
    return mode


# ---------------------------------------------------------------- mode construction

def sigma1_modes(tree: MetricTree, k_max: int) -> list[EigenMode]:
    m = tree.m
    cls0, _ = bipartition(tree)
    sign = np.array([1.0 if (u + 1) in cls0 else -1.0 for u, _ in tree.edges])
    modes = [EigenMode(0.0, np.full(m, 1 / math.sqrt(m)), np.zeros(m), "sigma1", 0.0, 0, 0)]
    amp = math.sqrt(2.0 / m)
    for k in range(1, k_max + 1):
        a = np.full(m, amp) if k % 2 == 0 else amp * sign
        modes.append(EigenMode(k * math.pi, a, np.zeros(m), "sigma1", float(k), 0, k))
    return modes


def family_frequencies(theta: float, freq_max: float) -> list[float]:
    out = []
    l = 0
    while theta + 2 * math.pi * l <= freq_max:
        out.append(theta + 2 * math.pi * l)
        w2 = 2 * math.pi - theta + 2 * math.pi * l
        if w2 <= freq_max:
            out.append(w2)
        l += 1
    return sorted(out)


def sigma2_mode(tree: MetricTree, fam: Family, omega: float, rung: int) -> EigenMode:
    s = math.sin(omega)
    if abs(s) < SIN_GUARD:
        raise ValueError(f"frequency {omega} too close to a multiple of pi")
    U = fam.vertex_values
    tails = np.array([U[u] for u, _ in tree.edges])
    heads = np.array([U[v] for _, v in tree.edges])
    # U0 sin(w(1-x)) + U1 sin(w x), divided by sin w
    a = tails.copy()
    b = (heads - tails * math.cos(omega)) / s
    return _normalize(EigenMode(omega, a, b, "sigma2", fam.mu, fam.index, rung))


def sigma2_modes(tree: MetricTree, freq_max: float) -> list[EigenMode]:
    out = []
    for fam in families(tree):
        for r, w in enumerate(family_frequencies(fam.theta, freq_max), start=1):
            out.append(sigma2_mode(tree, fam, w, r))
    return out


@dataclass
class SpectralBasis:
    tree: MetricTree
    modes: list[EigenMode]  # orthonormalized, ascending eigenvalue
    raw_modes: list[EigenMode]  # normalized but not orthogonalized, same order
    families: list[Family] = field(default_factory=list)
    complete_up_to: int = 0  # modes [0, complete_up_to) hold whole eigenspaces

    @property
    def N(self) -> int:
        return len(self.modes)

    @property
    def omega(self) -> np.ndarray:
        return np.array([md.omega for md in self.modes])

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.omega**2

    @property
    def A(self) -> np.ndarray:
        return np.array([md.a for md in self.modes])

    @property
    def B(self) -> np.ndarray:
        return np.array([md.b for md in self.modes])

    def gram(self) -> np.ndarray:
        return edge_gram(self.omega, self.A, self.B)

    def coefficients(self, mode: EigenMode) -> np.ndarray:
        """Coordinates of ``mode`` in the orthonormal basis."""
        G = edge_gram(self.omega, self.A, self.B, omega2=np.array([mode.omega]),
                      A2=mode.a[None, :], B2=mode.b[None, :])
        return G[:, 0]

    def family_directions(self, index: int) -> list[tuple[int, np.ndarray]]:
        """(rung, coefficient vector) of every raw mode of a family whose eigenspace is in the basis.

        Index 0 means the sigma_1 ladder, indexed by k starting at 0.
        """
        out = []
        for pos, md in enumerate(self.raw_modes):
            if pos >= self.complete_up_to:
                break
            if md.family_index == index and (index > 0 or md.family == "sigma1"):
                out.append((md.rung, self.coefficients(md)))
        return out

    @property
    def mu1(self) -> float:
        return float(self.eigenvalues[1])

    def values_at(self, x: np.ndarray) -> np.ndarray:
        """Mode values at points ``x`` on every edge, shape (N, m, len(x))."""
        wx = self.omega[:, None] * np.asarray(x)[None, :]
        return self.A[:, :, None] * np.cos(wx)[:, None, :] + self.B[:, :, None] * np.sin(wx)[:, None, :]


def _gram_schmidt(group: list[EigenMode]) -> list[EigenMode]:
    out: list[EigenMode] = []
    for md in group:
        a, b = md.a.copy(), md.b.copy()
        for q in out:
            probe = EigenMode(md.omega, a, b, md.family, md.generator)
            c = inner_product(probe, q)
            a, b = a - c * q.a, b - c * q.b
        new = EigenMode(md.omega, a, b, md.family, md.generator, md.family_index, md.rung)
        nrm = math.sqrt(max(inner_product(new, new), 0.0))
        if nrm < 1e-8:
            raise RuntimeError(
                f"dependent eigenfunction at eigenvalue {md.omega**2:.6g}; "
                "sigma_1 multiplicity assumption violated"
            )
        new.a, new.b = a / nrm, b / nrm
        out.append(new)
    return out


def build_basis(tree: MetricTree, N: int, freq_max: float | None = None) -> SpectralBasis:
    if N < 1:
        raise ValueError("N must be at least 1")
    fams = families(tree)
    if freq_max is None:
        freq_max = math.pi * (N / tree.m + 2.0)
    for _ in range(32):
        k_max = int(freq_max / math.pi)
        cand = sigma1_modes(tree, k_max) + [
            sigma2_mode(tree, f, w, r)
            for f in fams
            for r, w in enumerate(family_frequencies(f.theta, freq_max), start=1)
        ]
        if len(cand) > N:
            break
        freq_max *= 2.0
    else:
        raise RuntimeError("could not enumerate enough eigenmodes")
    # ascending eigenvalue; ties: sigma1 first, then family index, then rung
    cand.sort(key=lambda md: (round(md.omega, 9), md.family != "sigma1", md.family_index, md.rung))
    for md in cand:
        if md.family == "sigma2" and abs(md.omega / math.pi - round(md.omega / math.pi)) < 1e-9:
            raise RuntimeError(f"sigma_2 frequency {md.omega} coincides with a sigma_1 frequency")
    ortho: list[EigenMode] = []
    raw: list[EigenMode] = []
    i = 0
    while i < len(cand) and len(ortho) < N:
        j = i
        while j < len(cand) and abs(cand[j].omega - cand[i].omega) <= CLUSTER_TOL:
            j += 1
        group = cand[i:j]
        ortho.extend(_gram_schmidt(group))
        raw.extend(group)
        i = j
    complete = len(ortho) if len(ortho) <= N else _last_complete(raw, N)
    return SpectralBasis(tree, ortho[:N], raw[:N], fams, complete)


def _last_complete(raw: list[EigenMode], N: int) -> int:
    """Length of the prefix of ``raw[:N]`` made of whole eigenspaces."""
    last = raw[N - 1].omega
    k = N
    while k > 0 and abs(raw[k - 1].omega - last) <= CLUSTER_TOL:
        k -= 1
    return k


# ---------------------------------------------------------------- residual checks

def vertex_residuals(tree: MetricTree, mode: EigenMode) -> tuple[float, float]:
    """(max continuity mismatch, max Kirchhoff flux imbalance) over all vertices."""
    vals: list[list[float]] = [[] for _ in range(tree.n)]
    flux = np.zeros(tree.n)
    for j, (u, v) in enumerate(tree.edges):
        vals[u].append(float(mode.evaluate(j, 0.0)))
        vals[v].append(float(mode.evaluate(j, 1.0)))
        flux[u] += float(mode.derivative(j, 0.0))
        flux[v] -= float(mode.derivative(j, 1.0))
    cont = max((max(vs) - min(vs)) for vs in vals if vs)
    return cont, float(np.max(np.abs(flux)))


def eigenrelation_residual(mode: EigenMode, m: int, points: int = 10) -> float:
    """Max |phi'' + w^2 phi| at sample points, second derivative taken in closed form."""
    x = np.linspace(0.0, 1.0, points)
    w = mode.omega
    worst = 0.0
    for j in range(m):
        second = -w * w * (mode.a[j] * np.cos(w * x) + mode.b[j] * np.sin(w * x))
        worst = max(worst, float(np.max(np.abs(second + w * w * mode.evaluate(j, x)))))
    return worst


def vertex_values(tree: MetricTree, mode: EigenMode) -> np.ndarray:
    out = np.zeros(tree.n)
    for j, (u, v) in enumerate(tree.edges):
        out[u] = mode.evaluate(j, 0.0)
        out[v] = mode.evaluate(j, 1.0)
    return out
