"""Conjugacy to the linear part.

The construction has three layers:

* ``decouple``: phi(x) = x + pi_s p_0(x, 0) + pi_u q_0(x, 0) sends every point
  to the sum of the intersections of its unstable leaf with X_s and of its
  stable leaf with X_u, which splits F into F_s on X_s and F_u on X_u;
* one-sided limits linearize each part: psi_u(x) = lim L_u(k) F_u(-k, x)
  for the expansion and psi_s(x) = lim L_s(k)^-1 F_s(k, x) for the
  contraction;
* Phi = psi o phi with psi(z) = psi_s(pi_s z) + psi_u(pi_u z).

All of it requires the stable and unstable manifolds of the fixed point to
be the coordinate subspaces X_s and X_u; :class:`Decoupler` checks this.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .foliation import (LPConfig, _base_orbit, _solve_on_orbit, as_maps, intermediate_leaf,
                        leaf_chart)
from .normalform import ResonanceError
from .spectrum import Spectrum, constants_budget, resonance_report, system_spectrum
from .system import ConvergenceError, MapSequence, OrbitMaps


class PreconditionError(ValueError):
    """The stable or unstable manifold of the fixed point is not straight."""


class LimitError(RuntimeError):
    """A one-sided limit failed to converge."""


# ----------------------------------------------------------------------
# one-sided limits
# ----------------------------------------------------------------------
def limit_from_orbit(blocks, points):
    """lim_k L(-1) ... L(-k) z_{-k} from a stored backward orbit.

    ``blocks`` are the block matrices at indices -K..-1 and ``points`` the
    orbit z at indices -K..0, shape (K + 1, Q, m).  Returns the value at
    k = K and the successive differences (max over points) for k = 1..K.
    """
    blocks = np.asarray(blocks, dtype=float)
    points = np.asarray(points, dtype=float)
    K = blocks.shape[0]
    M = np.eye(blocks.shape[1])
    val = points[K]
    diffs = np.empty(K)
    for k in range(1, K + 1):
        M = M @ blocks[K - k]
        new = points[K - k] @ M.T
        diffs[k - 1] = float(np.abs(new - val).max())
        val = new
    return val, diffs


@dataclass
class LimitResult:
    value: np.ndarray
    iterations: int
    differences: np.ndarray


def _one_sided(step, matrix, x, k_max, tol, escape, what):
    """Iterate z <- step(k, z), M <- M matrix(k) and track M z."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = x.copy()
    M = np.eye(x.shape[1])
    val = x.copy()
    diffs = []
    start = np.linalg.norm(x, axis=1).max()
    for k in range(1, k_max + 1):
        z = step(k, z)
        M = M @ matrix(k)
        new = z @ M.T
        diff = float(np.abs(new - val).max())
        diffs.append(diff)
        val = new
        if not np.all(np.isfinite(val)) or np.linalg.norm(z, axis=1).max() > escape * max(start, 1.0):
            raise LimitError(f"{what}: iterates escape the chart")
        if diff < tol:
            return LimitResult(val, k, np.asarray(diffs))
    raise LimitError(f"{what}: limit not Cauchy after {k_max} steps "
                     f"(last difference {diffs[-1]:.2e})")


def block_linearize(maps: MapSequence, x, k_max: int = 400, tol: float = 1e-13) -> LimitResult:
    """phi_*(x) = lim_k L(-1) ... L(-k) F(-k, x) for an expanding map sequence.

    ``maps`` acts on the block alone (for instance a :class:`BlockChart` or
    a system of the block's dimension).
    """
    return _one_sided(lambda k, z: maps.Finv(-k, z), lambda k: maps.A(-k), x, k_max, tol,
                      1e3, "block linearization")


def block_conjugation_residual(maps: MapSequence, x, **kw) -> float:
    """max |L(0) phi_*(0, x) - phi_*(1, F(0, x))|."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    here = block_linearize(maps, x, **kw).value
    there = block_linearize(maps.shifted(1), maps.F(0, x), **kw).value
    return float(np.abs(here @ maps.A(0).T - there).max())


class BlockChart(MapSequence):
    """Restriction of a map sequence to the intermediate manifold of block i.

    The manifold through 0 tangent to spectral block i (0-based) at index n
    is the graph x_i -> x_i + gamma_i(n, x_i).  The restricted map is
    F_i(n, x_i) = pi_i F(n, x_i + gamma_i(n, x_i)).
    """

    def __init__(self, maps: MapSequence, spectrum: Spectrum, i: int):
        self.maps = maps
        self.spectrum = spectrum
        self.i = i
        self.coords = spectrum.block_coords(i)
        self.blocks = (self.coords.size,)
        self._leaves: dict = {}

    def leaf(self, n):
        if n not in self._leaves:
            self._leaves[n] = intermediate_leaf(self.maps.shifted(n), None, np.zeros(self.maps.d),
                                                self.i + 1, spectrum=self.spectrum)
        return self._leaves[n]

    def graph(self, n, x):
        return self.leaf(n).chart(np.atleast_2d(x))

    def gamma(self, n, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        pt = self.graph(n, x).copy()
        pt[:, self.coords] -= x
        return pt

    def A(self, n):
        return self.maps.A(n)[np.ix_(self.coords, self.coords)]

    def F(self, n, x, order=0):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        pt = self.graph(n, x)
        if order == 0:
            return self.maps.F(n, pt)[:, self.coords]
        D = self.leaf(n).derivative(x)
        return np.einsum("qab,qbm->qam", self.maps.F(n, pt, 1)[:, self.coords], D)

    def Finv(self, n, y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return self.maps.Finv(n, self.graph(n + 1, y))[:, self.coords]

    def shifted(self, m):
        out = BlockChart(self.maps.shifted(m), self.spectrum, self.i)
        return out


# ----------------------------------------------------------------------
# decoupling
# ----------------------------------------------------------------------
def _embed(d, coords, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros((x.shape[0], d))
    out[:, coords] = x
    return out


class Decoupler:
    """phi and its fixed-point inverse at index 0 of a map sequence."""

    def __init__(self, maps: MapSequence, spectrum: Spectrum, horizon: int | None = None,
                 tol: float = 1e-13, check: bool = True, straight_tol: float = 1e-10):
        self.maps = maps
        self.spectrum = spectrum
        self.s = spectrum.stable_coords
        self.u = spectrum.unstable_coords
        self.d = maps.d
        self.cfg_s = LPConfig("stable", horizon=horizon, tol=tol).resolve(spectrum)
        self.cfg_u = LPConfig("unstable", horizon=horizon, tol=tol).resolve(spectrum)
        self._opts = (horizon, tol, straight_tol)
        if check:
            self.straightness = self.check_straight(straight_tol)

    def check_straight(self, tol):
        """Largest distance of sampled manifold points from X_s and X_u."""
        zero = np.zeros(self.d)
        radius = getattr(getattr(self.maps, "system", None), "rho", 1.0)
        t = np.linspace(-radius, radius, 9)
        Ys = np.stack(np.meshgrid(*[t] * self.s.size), -1).reshape(-1, self.s.size)
        Yu = np.stack(np.meshgrid(*[t] * self.u.size), -1).reshape(-1, self.u.size)
        ws = leaf_chart(self.maps, None, zero, "stable", spectrum=self.spectrum).chart(Ys)
        wu = leaf_chart(self.maps, None, zero, "unstable", spectrum=self.spectrum).chart(Yu)
        dev = max(float(np.abs(ws[:, self.u]).max()), float(np.abs(wu[:, self.s]).max()))
        if dev > tol:
            raise PreconditionError(f"invariant manifolds of 0 are not straight "
                                    f"(deviation {dev:.2e}); straighten them first")
        return dev

    def _leaf_points(self, cfg, x, y):
        base, n0 = _base_orbit(self.maps, x, cfg)
        return x + _solve_on_orbit(self.maps, cfg, base, n0, y).first

    def phi(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        Q = x.shape[0]
        check = self._leaf_points(self.cfg_u, x, np.zeros((Q, self.u.size)))   # in X_s
        hat = self._leaf_points(self.cfg_s, x, np.zeros((Q, self.s.size)))     # in X_u
        out = np.empty_like(x)
        out[:, self.s] = check[:, self.s]
        out[:, self.u] = hat[:, self.u]
        return out

    def phi_inv(self, z, tol: float = 1e-13, max_iter: int = 100):
        """Fixed point of x -> (unstable leaf of pi_s z over pi_u x, stable leaf of pi_u z over pi_s x)."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        zs = _embed(self.d, self.s, z[:, self.s])
        zu = _embed(self.d, self.u, z[:, self.u])
        base_u, n0u = _base_orbit(self.maps, zs, self.cfg_u)
        base_s, n0s = _base_orbit(self.maps, zu, self.cfg_s)
        x = z.copy()
        for it in range(max_iter):
            wu = zs + _solve_on_orbit(self.maps, self.cfg_u, base_u, n0u, x[:, self.u]).first
            ws = zu + _solve_on_orbit(self.maps, self.cfg_s, base_s, n0s, x[:, self.s]).first
            new = np.empty_like(x)
            new[:, self.s] = wu[:, self.s]
            new[:, self.u] = ws[:, self.u]
            diff = float(np.abs(new - x).max())
            x = new
            if diff < tol:
                return x
        raise ConvergenceError(f"decoupler inverse did not converge (difference {diff:.2e})")

    def Fs(self, n, xs):
        return self.maps.F(n, _embed(self.d, self.s, xs))[:, self.s]

    def Fu(self, n, xu):
        return self.maps.F(n, _embed(self.d, self.u, xu))[:, self.u]

    def decoupled(self, z):
        """F_s(pi_s z) + F_u(pi_u z) at index 0."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        out = np.empty_like(z)
        out[:, self.s] = self.Fs(0, z[:, self.s])
        out[:, self.u] = self.Fu(0, z[:, self.u])
        return out

    def shifted(self, m):
        h, t, st = self._opts
        return Decoupler(self.maps.shifted(m), self.spectrum, h, t, check=False, straight_tol=st)


def decouple(system, driving=None, spectrum: Spectrum | None = None, **kw) -> Decoupler:
    maps = as_maps(system, driving)
    sp = spectrum or getattr(maps, "spectrum", None) or system_spectrum(maps.system, maps.driving)
    return Decoupler(maps, sp, **kw)


def decoupling_residual(dec: Decoupler, z) -> float:
    """max |phi(1, F(0, phi^-1(z))) - (F_s(pi_s z) + F_u(pi_u z))|."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    x = dec.phi_inv(z)
    lhs = dec.shifted(1).phi(dec.maps.F(0, x))
    return float(np.abs(lhs - dec.decoupled(z)).max())


# ----------------------------------------------------------------------
# linearization of the parts
# ----------------------------------------------------------------------
class PartMaps(MapSequence):
    """F restricted to an invariant coordinate subspace."""

    def __init__(self, maps: MapSequence, coords):
        self.maps = maps
        self.coords = np.asarray(coords, dtype=int)
        self.blocks = (self.coords.size,)

    def A(self, n):
        return self.maps.A(n)[np.ix_(self.coords, self.coords)]

    def F(self, n, x, order=0):
        X = _embed(self.maps.d, self.coords, x)
        if order == 0:
            return self.maps.F(n, X)[:, self.coords]
        return self.maps.F(n, X, 1)[:, self.coords][:, :, self.coords]

    def Finv(self, n, y):
        return self.maps.Finv(n, _embed(self.maps.d, self.coords, y))[:, self.coords]

    def shifted(self, m):
        return PartMaps(self.maps.shifted(m), self.coords)


class OneSidedLinearizer:
    """psi for an expanding (backward limit) or contracting (forward limit) part."""

    def __init__(self, part: MapSequence, kind: str, k_max: int = 600, tol: float = 1e-14):
        if kind not in ("expanding", "contracting"):
            raise ValueError(f"unknown kind {kind!r}")
        self.part, self.kind = part, kind
        self.k_max, self.tol = k_max, tol

    def limit(self, x) -> LimitResult:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] == 0:
            return LimitResult(x.copy(), 0, np.zeros(0))
        if self.kind == "expanding":
            return block_linearize(self.part, x, self.k_max, self.tol)
        part = self.part
        return _one_sided(lambda k, z: part.F(k - 1, z), lambda k: np.linalg.inv(part.A(k - 1)),
                          x, self.k_max, self.tol, 1e3, "contracting linearization")

    def __call__(self, x):
        return self.limit(x).value

    def inverse(self, y, tol: float = 1e-13, max_iter: int = 100):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        x = y.copy()
        for _ in range(max_iter):
            r = self(x) - y
            if np.abs(r).max() < tol:
                return x
            x = x - r
        raise ConvergenceError("linearizer inverse did not converge")

    def residual(self, x) -> float:
        """max |psi(1, F(0, x)) - L(0) psi(0, x)|."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        other = OneSidedLinearizer(self.part.shifted(1), self.kind, self.k_max, self.tol)
        return float(np.abs(other(self.part.F(0, x)) - self(x) @ self.part.A(0).T).max())

    def shifted(self, m):
        return OneSidedLinearizer(self.part.shifted(m), self.kind, self.k_max, self.tol)


def one_sided_linearize(maps: MapSequence, coords, kind: str, **kw) -> OneSidedLinearizer:
    """Linearizer of F restricted to the invariant subspace spanned by ``coords``."""
    return OneSidedLinearizer(PartMaps(maps, coords), kind, **kw)


# ----------------------------------------------------------------------
# the conjugacy
# ----------------------------------------------------------------------
class Conjugacy:
    """Phi = psi o phi at index 0 of a map sequence, with its inverse."""

    def __init__(self, maps: MapSequence, spectrum: Spectrum, radius: float,
                 decoupler: Decoupler | None = None, k_max: int = 600):
        self.maps = maps
        self.spectrum = spectrum
        self.radius = radius
        self.decoupler = decoupler or Decoupler(maps, spectrum)
        self.s, self.u = spectrum.stable_coords, spectrum.unstable_coords
        self.psi_s = one_sided_linearize(maps, self.s, "contracting", k_max=k_max)
        self.psi_u = one_sided_linearize(maps, self.u, "expanding", k_max=k_max)
        self.k_max = k_max

    def psi(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        out = np.empty_like(z)
        out[:, self.s] = self.psi_s(z[:, self.s])
        out[:, self.u] = self.psi_u(z[:, self.u])
        return out

    def psi_inv(self, w):
        w = np.atleast_2d(np.asarray(w, dtype=float))
        out = np.empty_like(w)
        out[:, self.s] = self.psi_s.inverse(w[:, self.s])
        out[:, self.u] = self.psi_u.inverse(w[:, self.u])
        return out

    def __call__(self, x):
        return self.psi(self.decoupler.phi(x))

    def inverse(self, y):
        return self.decoupler.phi_inv(self.psi_inv(y))

    def shifted(self, m) -> "Conjugacy":
        return Conjugacy(self.maps.shifted(m), self.spectrum, self.radius,
                         self.decoupler.shifted(m), self.k_max)

    def derivative(self, x, h: float = 1e-5):
        """Central-difference Jacobian of Phi at the points x, (Q, d, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        Q, d = x.shape
        E = h * np.eye(d)
        pts = np.concatenate([x[:, None, :] + E[None], x[:, None, :] - E[None]], axis=1)
        vals = self(pts.reshape(-1, d)).reshape(Q, 2 * d, d)
        return np.transpose((vals[:, :d] - vals[:, d:]) / (2 * h), (0, 2, 1))


def halton_ball(n: int, d: int, radius: float, seed: int = 0) -> np.ndarray:
    """First n Halton points (in the cube [-1, 1]^d) inside the unit ball, scaled."""
    sampler = qmc.Halton(d, scramble=seed != 0, seed=seed or None)
    out = []
    total = 0
    while total < n:
        pts = 2.0 * sampler.random(max(2 * n, 64)) - 1.0
        pts = pts[np.linalg.norm(pts, axis=1) <= 1.0]
        out.append(pts)
        total += pts.shape[0]
    return radius * np.concatenate(out)[:n]


@dataclass
class ConjugacyReport:
    points: np.ndarray
    residuals: np.ndarray
    derivative_deviation: np.ndarray
    roundtrip: np.ndarray
    derivative_at_zero: float
    radius: float
    timings: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max())

    @property
    def max_roundtrip(self) -> float:
        return float(self.roundtrip.max())

    def summary(self) -> dict:
        return {"radius": self.radius, "points": int(self.points.shape[0]),
                "max_residual": self.max_residual,
                "mean_residual": float(self.residuals.mean()),
                "max_roundtrip": self.max_roundtrip,
                "derivative_at_zero_deviation": self.derivative_at_zero,
                "max_derivative_deviation": float(self.derivative_deviation.max()),
                "timings": self.timings}


def verify_conjugacy(conj: Conjugacy, n_points: int = 1000, radius: float | None = None,
                     seed: int = 0, local_derivatives: bool = True) -> ConjugacyReport:
    """Residual |Phi(1, F(x)) - L(0) Phi(0, x)|, round trip and derivative checks."""
    import time

    radius = conj.radius if radius is None else radius
    d = conj.maps.d
    x = halton_ball(n_points, d, radius, seed)
    t = time.perf_counter()
    here = conj(x)
    there = conj.shifted(1)(conj.maps.F(0, x))
    res = np.abs(there - here @ conj.maps.A(0).T).max(axis=1)
    t1 = time.perf_counter()
    back = conj.inverse(here)
    rt = np.abs(back - x).max(axis=1)
    t2 = time.perf_counter()
    D0 = conj.derivative(np.zeros((1, d)))[0]
    dev0 = float(np.abs(D0 - np.eye(d)).max())
    if local_derivatives:
        Dx = conj.derivative(x, h=1e-6)
        ddev = np.abs(Dx - np.eye(d)[None]).max(axis=(1, 2))
    else:
        ddev = np.full(x.shape[0], np.nan)
    t3 = time.perf_counter()
    return ConjugacyReport(x, res, ddev, rt, dev0, radius,
                           {"residual": t1 - t, "roundtrip": t2 - t1, "derivatives": t3 - t2})


def full_conjugacy(system, driving=None, radius: float | None = None,
                   spectrum: Spectrum | None = None, check_resonance: bool = True) -> Conjugacy:
    """Conjugacy of the system to its linear part at index 0.

    ``radius`` is the verification radius (default rho/4).
    """
    maps = as_maps(system, driving)
    sp = spectrum or getattr(maps, "spectrum", None) or system_spectrum(maps.system, maps.driving)
    if check_resonance:
        rep = resonance_report(sp)
        if not rep.belitskii_ok:
            raise ResonanceError(f"resonant triples {rep.violations}")
    if radius is None:
        radius = 0.25 * getattr(getattr(maps, "system", None), "rho", 1.0)
    return Conjugacy(maps, sp, radius)


# ----------------------------------------------------------------------
# escape time
# ----------------------------------------------------------------------
@dataclass
class EscapeConstants:
    K: float          # dichotomy constant of the unstable block
    L_hat: float      # bound for psi_u and its inverse on the half ball
    L3: float         # |pi_u Phi^-1(y)| <= L3 |pi_u y|
    rate: float       # lam_tau - 3 eps


def measured_escape(maps: MapSequence, spectrum: Spectrum, x, n_max: int = 100_000,
                    threshold: float = 0.5) -> np.ndarray:
    """Least n >= 0 with |pi_u F(n, x)| > threshold, inf if never within n_max."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u = spectrum.unstable_coords
    out = np.full(x.shape[0], np.inf)
    cur = x.copy()
    active = np.linalg.norm(cur[:, u], axis=1) > 0
    for n in range(n_max + 1):
        hit = active & (np.linalg.norm(cur[:, u], axis=1) > threshold) & np.isinf(out)
        out[hit] = n
        if np.all(~active | np.isfinite(out)):
            break
        cur = maps.F(n, cur)
    return out


def escape_constants(conj: Conjugacy, samples=None, n_dichotomy: int = 200,
                     seed: int = 0) -> EscapeConstants:
    """Measured constants for the escape-time bound."""
    sp, maps = conj.spectrum, conj.maps
    u = sp.unstable_coords
    b = constants_budget(sp)
    rate = sp.exponents[sp.tau - 1] - 3 * b.epsilon
    A = maps.A_many(0, n_dichotomy)
    M = np.eye(u.size)
    K = 1.0
    for n in range(1, n_dichotomy + 1):
        M = A[n - 1][np.ix_(u, u)] @ M
        smin = np.linalg.svd(M, compute_uv=False)[-1]
        K = max(K, math.exp(rate * n) / smin)
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(16, u.size))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    mags = np.linspace(0.5 / 64, 0.5, 64)
    xu = (mags[:, None, None] * dirs[None]).reshape(-1, u.size)
    L_hat = 1.0
    for m in range(2):
        c = conj.shifted(m) if m else conj
        pu = c.psi_u(xu)
        L_hat = max(L_hat, float((np.linalg.norm(pu, axis=1) / np.linalg.norm(xu, axis=1)).max()))
        pinv = c.psi_u.inverse(xu)
        L_hat = max(L_hat, float((np.linalg.norm(pinv, axis=1)
                                  / np.linalg.norm(xu, axis=1)).max()))
    if samples is None:
        samples = halton_ball(200, maps.d, 0.5, seed)
    samples = np.atleast_2d(samples)
    y = conj(samples)
    nu_x = np.linalg.norm(samples[:, u], axis=1)
    nu_y = np.linalg.norm(y[:, u], axis=1)
    ok = nu_y > 0
    L3 = float((nu_x[ok] / nu_y[ok]).max()) if ok.any() else 1.0
    return EscapeConstants(float(K), float(L_hat), max(L3, 1e-300), float(rate))


@dataclass
class EscapeResult:
    measured: np.ndarray
    bound: np.ndarray
    constants: EscapeConstants

    @property
    def ok(self) -> bool:
        """Every integer n >= bound escapes, so the least one is at most ceil(bound)."""
        fin = np.isfinite(self.measured)
        return bool(np.all(self.measured[fin] <= np.ceil(self.bound[fin])))


def escape_time(system, driving=None, x=None, spectrum: Spectrum | None = None,
                conjugacy: Conjugacy | None = None, constants: EscapeConstants | None = None,
                n_max: int = 100_000) -> EscapeResult:
    """Measured escape times and the closed-form bound with measured constants.

    Points on the stable leaf of 0 (zero unstable part after decoupling)
    get measured and bound values of infinity.  The Hölder exponent of the
    conjugacy in the bound is taken as 1.
    """
    maps = as_maps(system, driving)
    sp = spectrum or getattr(maps, "spectrum", None) or system_spectrum(maps.system, maps.driving)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    conj = conjugacy or full_conjugacy(maps, None, spectrum=sp, check_resonance=False)
    u = sp.unstable_coords
    zu = conj.decoupler.phi(x)[:, u]
    on_leaf = np.linalg.norm(zu, axis=1) <= 1e-14
    measured = measured_escape(maps, sp, x, n_max)
    measured[on_leaf] = np.inf
    if constants is None:
        constants = escape_constants(conj, samples=np.concatenate([x[~on_leaf]])
                                     if np.any(~on_leaf) else None)
    c = constants
    y = conj(x)
    nu_x = np.linalg.norm(x[:, u], axis=1)
    nu_y = np.linalg.norm(y[:, u], axis=1)
    bound = np.full(x.shape[0], np.inf)
    small = nu_y < 1.0 / c.L_hat
    with np.errstate(divide="ignore"):
        b1 = np.log(c.K * c.L_hat * c.L3 / nu_x) / c.rate
    b2 = math.log(c.K * c.L_hat ** 2) / c.rate
    bound = np.where(small, b1, b2)
    bound[on_leaf] = np.inf
    return EscapeResult(measured, bound, c)


__all__ = ["limit_from_orbit", "block_linearize", "block_conjugation_residual", "BlockChart",
           "Decoupler", "decouple", "decoupling_residual", "PartMaps", "OneSidedLinearizer",
           "one_sided_linearize", "Conjugacy", "full_conjugacy", "halton_ball",
           "verify_conjugacy", "ConjugacyReport", "measured_escape", "escape_constants",
           "escape_time", "EscapeResult", "EscapeConstants", "PreconditionError", "LimitError"]
