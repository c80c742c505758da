"""Lyapunov spectra, invariant splittings, block-diagonalizing frames and the
constants derived from the spectrum.

Block numbering follows the spectrum: block 0 carries the largest exponent.
Functions that accept 1-based triples say so explicitly.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernels import qr_growth
from .system import MapSequence, OrbitMaps, RandomMapSystem

HYPERBOLICITY_TOL = 1e-2
CLUSTER_TOL = 1e-6
RESONANCE_TOL = 1e-9


class HyperbolicityError(ValueError):
    """An exponent is numerically zero."""


class SpectrumConvergenceError(RuntimeError):
    """Running averages of the exponents did not settle."""


class SplittingError(RuntimeError):
    """Complementary subspaces are too close to intersect reliably."""


@dataclass(frozen=True)
class Spectrum:
    """Distinct exponents in decreasing order with multiplicities.

    ``coords`` optionally lists, for each spectral block, the coordinate
    indices of the system that carry it.
    """

    exponents: tuple
    multiplicities: tuple
    coords: tuple | None = None

    def __post_init__(self):
        lam = np.asarray(self.exponents, dtype=float)
        if len(self.multiplicities) != lam.size:
            raise ValueError("one multiplicity per exponent expected")
        if np.any(np.diff(lam) >= 0):
            raise ValueError("exponents must be strictly decreasing")
        if np.any(lam == 0):
            raise HyperbolicityError("zero exponent")

    @classmethod
    def from_exponents(cls, exponents, multiplicities=None) -> "Spectrum":
        lam = tuple(float(v) for v in exponents)
        mult = tuple(multiplicities) if multiplicities is not None else (1,) * len(lam)
        coords, start = [], 0
        for m in mult:
            coords.append(tuple(range(start, start + m)))
            start += m
        return cls(lam, mult, tuple(coords))

    @property
    def p(self) -> int:
        return len(self.exponents)

    @property
    def d(self) -> int:
        return int(sum(self.multiplicities))

    @property
    def tau(self) -> int:
        return int(sum(1 for v in self.exponents if v > 0))

    def block_coords(self, j: int) -> np.ndarray:
        return np.asarray(self.coords[j], dtype=int)

    def split_coords(self, j: int):
        """Coordinates of spectral blocks < j and >= j."""
        plus = [c for b in self.coords[:j] for c in b]
        minus = [c for b in self.coords[j:] for c in b]
        return np.asarray(sorted(plus), dtype=int), np.asarray(sorted(minus), dtype=int)

    @property
    def unstable_coords(self) -> np.ndarray:
        return self.split_coords(self.tau)[0]

    @property
    def stable_coords(self) -> np.ndarray:
        return self.split_coords(self.tau)[1]

    def to_rows(self):
        return [(j + 1, self.exponents[j], self.multiplicities[j]) for j in range(self.p)]


def _cluster(values, tol=CLUSTER_TOL):
    values = np.sort(np.asarray(values, dtype=float))[::-1]
    groups = [[values[0]]]
    for v in values[1:]:
        ref = groups[-1][-1]
        if abs(ref - v) <= tol * max(1.0, abs(ref)):
            groups[-1].append(v)
        else:
            groups.append([v])
    return groups


def _symbol_mats(system: RandomMapSystem, driving, n0, n1):
    syms = driving.symbols(n0, n1)
    lp = system.linear_parts
    return lp[syms % lp.shape[0]] if lp.shape[0] > 1 else np.broadcast_to(lp[0], (n1 - n0,) + lp.shape[1:])


def lyapunov_exponents(system: RandomMapSystem, driving, n_steps: int = 10_000,
                       n_transient: int = 0, check_convergence: bool = True) -> Spectrum:
    """Exponents of the linearized cocycle at the fixed point.

    A full orthonormal frame is pushed through DF(n, omega, 0) with QR
    re-orthonormalization every step; the log stretch factors are averaged.
    Coordinate blocks are then matched to the clustered exponents.
    """
    if n_steps < 1000:
        raise ValueError("n_steps must be at least 1000")
    d = system.d
    mats = _symbol_mats(system, driving, 0, n_transient + n_steps)
    q = np.eye(d)
    if n_transient:
        _, q, _ = qr_growth(mats[:n_transient], q)
    half = n_steps // 2
    s1, q, _ = qr_growth(mats[n_transient:n_transient + half], q)
    s2, q, _ = qr_growth(mats[n_transient + half:], q)
    full = (s1 + s2) / n_steps
    if check_convergence:
        first = s1 / half
        drift = np.abs(np.sort(first) - np.sort(full)).max()
        if drift > 0.05 * max(1.0, np.abs(full).max()):
            raise SpectrumConvergenceError(f"running exponent averages drift by {drift:.3g}")
    return _assemble(full, system, mats[n_transient:])


def _assemble(values, system, mats) -> Spectrum:
    small = np.abs(values) < HYPERBOLICITY_TOL
    if np.any(small):
        raise HyperbolicityError(f"exponent {values[small][0]:.3g} is within "
                                 f"{HYPERBOLICITY_TOL} of zero")
    groups = _cluster(values)
    if len(groups) > 1:
        gaps = [abs(a[-1] - b[0]) for a, b in zip(groups, groups[1:])]
        if min(gaps) < 1e-3:
            warnings.warn("exponent gap below 1e-3; clustering may be unreliable")
    exps = [float(np.mean(g)) for g in groups]
    mult = [len(g) for g in groups]
    # per coordinate block growth rate, to attach coordinates to exponents
    coords = [[] for _ in groups]
    for sl in system.block_slices:
        sub = np.ascontiguousarray(mats[:, sl, sl])
        rate, _, _ = qr_growth(sub, np.eye(sl.stop - sl.start))
        rate = float(rate.mean()) / mats.shape[0]
        j = int(np.argmin([abs(rate - e) for e in exps]))
        coords[j].extend(range(sl.start, sl.stop))
    if [len(c) for c in coords] != mult:
        raise HyperbolicityError("a coordinate block carries more than one exponent")
    return Spectrum(tuple(exps), tuple(mult), tuple(tuple(c) for c in coords))


def system_spectrum(system: RandomMapSystem, driving, n_steps: int = 4000) -> Spectrum:
    """Spectrum with coordinate layout, without the convergence check."""
    mats = _symbol_mats(system, driving, 0, n_steps)
    values, _, _ = qr_growth(mats, np.eye(system.d))
    return _assemble(values / n_steps, system, mats)


# ----------------------------------------------------------------------
# constants budget and resonance triage
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class ConstantsBudget:
    lambda_max: float
    epsilon_bound: float
    epsilon: float
    beta: float
    beta_E: float
    beta_N: float
    beta_v: float
    beta_alpha: float
    varsigma_bound: float
    varsigma: float

    def delta_E(self, delta: float) -> float:
        return delta ** self.beta_E

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _triples(spectrum: Spectrum):
    tau, p = spectrum.tau, spectrum.p
    return [(i, k, j) for i in range(tau) for k in range(tau, p) for j in range(p)]


def constants_budget(spectrum: Spectrum, alpha: float = 1.0) -> ConstantsBudget:
    lam = np.asarray(spectrum.exponents)
    p, tau = spectrum.p, spectrum.tau
    lmax = max(2 * lam[0], -2 * lam[-1])
    gaps = lam[:-1] - lam[1:]
    defects = [abs(lam[i] + lam[k] - lam[j]) for i, k, j in _triples(spectrum)]
    terms = [1.0]
    if p > 1 and 0 < tau < p:
        terms.append(gaps.min() / (2 * lmax) * min(lam[tau - 1], -lam[tau]))
    if defects:
        terms.append(min(defects))
    eps_bound = min(terms) / 100
    eps = eps_bound / 2
    beta_terms = list(gaps / lmax) + [dv / (2 * lmax) for dv in defects]
    beta = min(beta_terms) if beta_terms else 1.0
    beta = min(beta, 1.0)
    beta_E = float(min((gaps - 3 * eps) / (6 * lmax))) if p > 1 else 1.0
    beta_N = min(eps / lmax, alpha)
    beta_v = min(beta_E, beta_N)
    beta_alpha = min(beta, beta_E, beta_N)
    vs_terms = []
    if tau >= 1:
        vs_terms.append(lam[tau - 1] / lmax)
    if tau < p:
        vs_terms.append(-lam[tau] / lmax)
    vs_terms += [abs(lam[k] - lam[j]) / lam[0] for k in range(tau, p) for j in range(p)
                 if lam[k] != lam[j] and lam[0] > 0]
    vs_bound = min(vs_terms) / 10 if vs_terms else 0.0
    return ConstantsBudget(float(lmax), float(eps_bound), float(eps), float(beta),
                           float(beta_E), float(beta_N), float(beta_v), float(beta_alpha),
                           float(vs_bound), float(vs_bound / 2))


@dataclass(frozen=True)
class ResonanceReport:
    belitskii_ok: bool
    violations: tuple  # 1-based (i, kappa, j)
    bunching_ok: bool
    budget: ConstantsBudget
    exponents: tuple = field(default=())

    def to_dict(self) -> dict:
        return {"exponents": list(self.exponents), "belitskii_ok": self.belitskii_ok,
                "violations": [list(v) for v in self.violations],
                "bunching_ok": self.bunching_ok, "budget": self.budget.to_dict()}


def resonance_report(spectrum: Spectrum, alpha: float = 1.0) -> ResonanceReport:
    lam = spectrum.exponents
    p, tau = spectrum.p, spectrum.tau
    scale = max(1.0, max(abs(v) for v in lam))
    bad = tuple((i + 1, k + 1, j + 1) for i, k, j in _triples(spectrum)
                if abs(lam[i] + lam[k] - lam[j]) <= RESONANCE_TOL * scale)
    if 0 < tau < p:
        bunching = (lam[0] - lam[tau - 1] < -lam[tau]) and (lam[tau] - lam[-1] < lam[tau - 1])
    else:
        bunching = True
    return ResonanceReport(not bad, bad, bool(bunching), constants_budget(spectrum, alpha),
                           tuple(lam))


def strict_radius(M: float, K: float, spectrum: Spectrum, C_u: float,
                  C_lambda: float = 1.0, delta_lambda: float = 1.0) -> float:
    """Pessimistic cut-off radius 1/(M_eps * frak_M) from the budget inequality.

    Tempered variables are constants here; C_lambda and delta_lambda are
    calibration constants that default to 1.
    """
    b = constants_budget(spectrum)
    lam, eps, lmax = spectrum.exponents, b.epsilon, b.lambda_max
    M_eps = (3 * C_u + 1) * M
    C_eps = 4 * K**2 * M_eps
    cands = [4.0, K / delta_lambda, 8 * C_lambda * K**3, (2 * M_eps * K**5) ** 2,
             (2 * K**2) ** 4, 2 * C_lambda * K * C_eps,
             2 * math.exp(lmax) * C_lambda**3 * K**2]
    for j in range(len(lam) - 1):
        g = lam[j] - lam[j + 1] - 3 * eps
        base = 12 * K**2 * math.exp(g)
        power = 4 * (2 * lmax - lam[j + 1] - eps) / g
        with np.errstate(over="ignore"):
            cands.append(float(np.float64(base) ** power))
    frak = max(cands)
    return 1.0 / (M_eps * frak) if np.isfinite(frak) and M_eps > 0 else 0.0


# ----------------------------------------------------------------------
# subspaces and Hölder estimates
# ----------------------------------------------------------------------
def _orth(E, name):
    E = np.atleast_2d(np.asarray(E, dtype=float))
    if E.shape[0] < E.shape[1]:
        E = E.T
    u, s, _ = np.linalg.svd(E, full_matrices=False)
    if s.size == 0 or s[-1] <= 1e-12 * max(1.0, s[0]):
        raise ValueError(f"basis {name} is rank deficient")
    return u


def subspace_distance(E, F) -> float:
    """Symmetrized max distance from unit vectors of one subspace to the other."""
    qe, qf = _orth(E, "E"), _orth(F, "F")
    a = qe - qf @ (qf.T @ qe)
    b = qf - qe @ (qe.T @ qf)
    return float(max(np.linalg.norm(a, 2), np.linalg.norm(b, 2)))


def holder_estimate(pairs, floor: float = 1e-14) -> float:
    """Least-squares slope of log(value distance) against log(point distance).

    Returns ``inf`` when every value distance is below ``floor`` (a locally
    constant map satisfies any Hölder bound); pairs below the floor are
    dropped otherwise.
    """
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 20:
        raise ValueError("at least 20 (x-distance, value-distance) pairs required")
    dx, dv = arr[:, 0], arr[:, 1]
    if np.any(dx <= 0):
        raise ValueError("degenerate pair: zero distance between points")
    keep = dv > floor
    if not np.any(keep):
        return math.inf
    if keep.sum() < 3 or np.ptp(np.log(dx[keep])) == 0:
        raise ValueError("too few non-degenerate pairs for a slope")
    slope = np.polyfit(np.log(dx[keep]), np.log(dv[keep]), 1)[0]
    return float(slope)


# ----------------------------------------------------------------------
# invariant splittings along orbits
# ----------------------------------------------------------------------
@dataclass
class Splitting:
    """Oseledets fibers at one orbit point, in spectral block order."""

    index: int
    x: np.ndarray
    bases: list
    P: np.ndarray
    Pinv: np.ndarray

    @property
    def condition(self) -> float:
        return float(np.linalg.cond(self.Pinv))


@dataclass
class BlockFrames:
    """Frames P(n), their inverses and the blocks of P(n+1) DF P(n)^-1."""

    n0: int
    points: np.ndarray  # (len, d)
    splittings: list
    Lbar: np.ndarray  # (len - 1, d, d)
    spectrum: Spectrum

    def P(self, n):
        return self.splittings[n - self.n0].P

    def Pinv(self, n):
        return self.splittings[n - self.n0].Pinv

    def block(self, n, j):
        c = self.spectrum.block_coords(j)
        return self.Lbar[n - self.n0][np.ix_(c, c)]

    def off_block_residual(self) -> float:
        mask = np.ones(self.Lbar.shape[1:], dtype=bool)
        for c in self.spectrum.coords:
            mask[np.ix_(c, c)] = False
        return float(np.abs(self.Lbar[:, mask]).max()) if mask.any() else 0.0


def _frame_from_bases(bases, spectrum: Spectrum, d: int, cond_cap: float):
    Pinv = np.zeros((d, d))
    for j, B in enumerate(bases):
        c = spectrum.block_coords(j)
        adapted = B @ np.linalg.inv(B[c])
        adapted /= np.linalg.norm(adapted, axis=0)
        own = adapted[c, np.arange(len(c))]
        adapted *= np.where(own < 0, -1.0, 1.0)
        Pinv[:, c] = adapted
    if np.linalg.cond(Pinv) > cond_cap:
        raise SplittingError("frame condition number exceeds the cap")
    return np.linalg.inv(Pinv), Pinv


def _intersect(A, B, k):
    # null space of [A, -B]; A and B have orthonormal columns spanning R^d together
    M = np.hstack([A, -B])
    _, s, vt = np.linalg.svd(M)
    if s[-1] < 1e-8:
        raise SplittingError("pseudo-stable and pseudo-unstable subspaces are not transversal")
    null = vt[-k:].T
    q, _ = np.linalg.qr(A @ null[:A.shape[1]])
    return q


def splittings_along(maps: MapSequence, spectrum: Spectrum, x, n0: int, n1: int,
                     horizon: int = 80, cond_cap: float = 1e8) -> BlockFrames:
    """Oseledets splittings at F(n, x) for n0 <= n <= n1 (n0 <= 0 <= n1).

    Fast subspaces are pushed forward from ``horizon`` steps in the past,
    slow subspaces are pulled back from ``horizon`` steps in the future; each
    fiber is the intersection of the two.
    """
    x = np.asarray(x, dtype=float)
    d = maps.d
    lo, hi = n0 - horizon, n1 + horizon
    pts = maps.orbit(x, lo, hi)
    jac = np.stack([maps.F(k, pts[k - lo], 1) for k in range(lo, hi)])
    order = [c for b in spectrum.coords for c in b]
    fast0 = np.eye(d)[:, order]
    slow0 = np.eye(d)[:, order[::-1]]
    _, _, fwd = qr_growth(jac, fast0, store=True)  # fwd[k] lives at index lo + k
    inv = np.linalg.inv(jac[::-1])
    _, _, bwd = qr_growth(inv, slow0, store=True)  # bwd[k] lives at index hi - k
    splits = []
    dims = np.cumsum((0,) + spectrum.multiplicities)
    for n in range(n0, n1 + 1):
        F_ = fwd[n - lo]
        S_ = bwd[hi - n]
        bases = []
        for j in range(spectrum.p):
            a = dims[j + 1]            # fast dims: blocks 0..j
            b = d - dims[j]            # slow dims: blocks j..p-1
            k = spectrum.multiplicities[j]
            if j == 0 and spectrum.p == 1:
                bases.append(np.eye(d))
                continue
            if a == d:
                bases.append(S_[:, :b])
                continue
            if b == d:
                bases.append(F_[:, :a])
                continue
            bases.append(_intersect(F_[:, :a], S_[:, :b], k))
        P, Pinv = _frame_from_bases(bases, spectrum, d, cond_cap)
        splits.append(Splitting(n, pts[n - lo], bases, P, Pinv))
    Lbar = np.stack([splits[k + 1].P @ jac[n0 + k - lo] @ splits[k].Pinv
                     for k in range(n1 - n0)]) if n1 > n0 else np.zeros((0, d, d))
    return BlockFrames(n0, pts[n0 - lo:n1 - lo + 1], splits, Lbar, spectrum)


def oseledets_splitting(system: RandomMapSystem, driving, x, horizon: int = 80,
                        spectrum: Spectrum | None = None) -> Splitting:
    maps = OrbitMaps(system, driving)
    spectrum = spectrum or system_spectrum(system, driving)
    return splittings_along(maps, spectrum, x, 0, 0, horizon).splittings[0]


def block_diagonalize(system: RandomMapSystem, driving, x, n_steps: int = 10,
                      horizon: int = 80, spectrum: Spectrum | None = None,
                      n_start: int = 0) -> BlockFrames:
    """Frames and conjugated blocks along the orbit of x for n_steps steps."""
    maps = OrbitMaps(system, driving)
    spectrum = spectrum or system_spectrum(system, driving)
    return splittings_along(maps, spectrum, x, min(n_start, 0), max(n_start + n_steps, 0),
                            horizon)


def invariance_defect(system: RandomMapSystem, driving, x, spectrum: Spectrum,
                      horizon: int = 80) -> float:
    """max_j dist(DF(x) E_j(x), E_j(F(x))) from two independently computed splittings."""
    maps = OrbitMaps(system, driving)
    x = np.asarray(x, dtype=float)
    here = splittings_along(maps, spectrum, x, 0, 0, horizon).splittings[0]
    there = splittings_along(maps.shifted(1), spectrum, maps.F(0, x), 0, 0, horizon).splittings[0]
    J = maps.F(0, x, 1)
    return max(subspace_distance(J @ here.bases[j], there.bases[j]) for j in range(spectrum.p))


def frame_deviation(frames: BlockFrames) -> float:
    """max_n of the norm of P(n) - identity."""
    d = frames.points.shape[-1]
    return float(max(np.linalg.norm(s.P - np.eye(d), 2) for s in frames.splittings))


__all__ = [
    "Spectrum", "ConstantsBudget", "ResonanceReport", "Splitting", "BlockFrames",
    "lyapunov_exponents", "system_spectrum", "constants_budget", "resonance_report",
    "strict_radius", "subspace_distance", "holder_estimate", "oseledets_splitting",
    "splittings_along", "block_diagonalize", "invariance_defect", "frame_deviation",
]
