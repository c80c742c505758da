"""Second-order normal form killing the mixed unstable-stable Taylor terms.

Along the orbit of a base point x̄ the map is first written in the
block-diagonalizing frames (the *hat* map), then conjugated by
N(n, x) = x + u(x) a_n(x, x) where the symmetric bilinear coefficients a_n
solve, for every fast block i, slow block k and target block j,

    a_{n+1}(L_i(n) x_i, L_k(n) x_k) - L_j(n) a_n(x_i, x_k) = c_n(x_i, x_k),

with c_n = -1/2 of the mixed Hessian of the hat map at 0 and L the frame
blocks.  The equation is solved by summing whichever of its two orbit series
converges.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectrum import BlockFrames, Spectrum, resonance_report, splittings_along, system_spectrum
from .system import CUTOFF_CONSTANT, Cutoff, ConvergenceError, MapSequence, OrbitMaps

MAX_TERMS = 200
ABS_TOL = 1e-14
REL_TOL = 1e-12


class ResonanceError(ValueError):
    """A resonant triple prevents the normal form."""


class SeriesError(RuntimeError):
    """A coefficient series failed to converge."""


class HatMaps(MapSequence):
    """Maps of the system written in the block frames along the orbit of x̄.

    Index n is the map from the frame at x̄_n to the frame at x̄_{n+1}.
    Frames are computed on a window that grows on demand.
    """

    def __init__(self, system, driving, xbar=None, spectrum: Spectrum | None = None,
                 window: int = 160, horizon: int = 80):
        self.base = OrbitMaps(system, driving)
        self.system = self.base.system
        self.driving = self.base.driving
        self.blocks = tuple(self.system.blocks)
        self.spectrum = spectrum or system_spectrum(self.system, self.driving)
        self.xbar = np.zeros(self.system.d) if xbar is None else np.asarray(xbar, dtype=float)
        self.horizon = horizon
        self._lo = self._hi = 0
        self._frames: BlockFrames | None = None
        self._ensure(-window, window)

    def _ensure(self, n0, n1):
        if self._frames is not None and self._lo <= n0 and n1 <= self._hi:
            return
        lo = min(n0, self._lo) if self._frames is not None else n0
        hi = max(n1, self._hi) if self._frames is not None else n1
        span = hi - lo
        lo, hi = lo - span // 4, hi + span // 4
        self._frames = splittings_along(self.base, self.spectrum, self.xbar, lo, hi,
                                        self.horizon)
        self._lo, self._hi = lo, hi
        mask = np.zeros((self.d, self.d), dtype=bool)
        for c in self.spectrum.coords:
            mask[np.ix_(c, c)] = True
        self._blockdiag = np.where(mask, self._frames.Lbar, 0.0)

    @property
    def frames(self) -> BlockFrames:
        return self._frames

    def point(self, n):
        self._ensure(n, n + 1)
        return self._frames.points[n - self._lo]

    def P(self, n):
        self._ensure(n, n + 1)
        return self._frames.P(n)

    def Pinv(self, n):
        self._ensure(n, n + 1)
        return self._frames.Pinv(n)

    def A(self, n):
        self._ensure(n, n + 1)
        return self._blockdiag[n - self._lo]

    def A_many(self, n0, n1):
        self._ensure(n0, n1)
        return self._blockdiag[n0 - self._lo:n1 - self._lo]

    def block(self, n, j):
        c = self.spectrum.block_coords(j)
        return self.A(n)[np.ix_(c, c)]

    def hat(self, n, x, order=0):
        """F̂(n, x) (order 0), its Jacobian (1) or Hessian (2)."""
        x = np.asarray(x, dtype=float)
        xb, Pn1, Pinv = self.point(n), self.P(n + 1), self.Pinv(n)
        z = x @ Pinv.T + xb
        if order == 0:
            return (self.base.F(n, z) - self.point(n + 1)) @ Pn1.T
        if order == 1:
            return Pn1 @ self.base.F(n, z, 1) @ Pinv
        H = self.base.F(n, z, 2)
        return np.einsum("ai,...ijk,jb,kc->...abc", Pn1, H, Pinv, Pinv)

    def hat_inv(self, n, y):
        y = np.asarray(y, dtype=float)
        z = self.base.Finv(n, y @ self.Pinv(n + 1).T + self.point(n + 1))
        return (z - self.point(n)) @ self.P(n).T

    def F(self, n, x, order=0):
        return self.hat(n, x, order)

    def Finv(self, n, y):
        return self.hat_inv(n, y)

    def shifted(self, m):
        return _ShiftedHat(self, m)


class _ShiftedHat(MapSequence):
    def __init__(self, base, m):
        self.base, self.m = base, m
        self.blocks = base.blocks
        self.spectrum = base.spectrum

    def A(self, n):
        return self.base.A(n + self.m)

    def A_many(self, n0, n1):
        return self.base.A_many(n0 + self.m, n1 + self.m)

    def F(self, n, x, order=0):
        return self.base.F(n + self.m, x, order)

    def Finv(self, n, y):
        return self.base.Finv(n + self.m, y)

    def shifted(self, m):
        return _ShiftedHat(self.base, self.m + m)


def hat_map(system, driving, xbar=None, spectrum=None, **kw) -> HatMaps:
    """F̂(n, x) = P(n+1)[F(P(n)^-1 x + x̄_n) - x̄_{n+1}] along the orbit of x̄."""
    return HatMaps(system, driving, xbar, spectrum, **kw)


# ----------------------------------------------------------------------
# coefficients
# ----------------------------------------------------------------------
@dataclass
class TripleCoeff:
    i: int      # 1-based spectral blocks
    kappa: int
    j: int
    branch: str
    k_star: int
    tensor: np.ndarray   # (d_j, d_i, d_kappa)
    norm: float
    residual: float
    tail: float


@dataclass
class BilinearCoeffs:
    """Coefficients a_n at one orbit index as a full symmetric tensor."""

    index: int
    full: np.ndarray         # (d, d, d), a(x, x)[o] = sum full[o, k, l] x_k x_l
    triples: list = field(default_factory=list)

    def quad(self, x):
        x = np.asarray(x, dtype=float)
        return np.einsum("okl,...k,...l->...o", self.full, x, x)

    def norm(self) -> float:
        return float(np.abs(self.full).sum(axis=(1, 2)).max())


def _mode(T, B, axis):
    # contract tensor axis ``axis`` (1 or 2) with matrix B on the input side
    return np.moveaxis(np.tensordot(T, B, axes=([axis], [0])), -1, axis)


class CoefficientSolver:
    """Orbit-indexed solutions of the homological equation on a HatMaps."""

    def __init__(self, hat: HatMaps, check_resonance: bool = True):
        self.hat = hat
        self.spectrum = hat.spectrum
        rep = resonance_report(self.spectrum)
        if check_resonance and not rep.belitskii_ok:
            raise ResonanceError(f"resonant triples {rep.violations}")
        self.report = rep
        self._c: dict = {}
        self._a: dict = {}

    def source(self, n, i, k, j):
        key = (n, i, k, j)
        if key not in self._c:
            H = self.hat.hat(n, np.zeros(self.hat.d), 2)
            sp = self.spectrum
            ci, ck, cj = sp.block_coords(i), sp.block_coords(k), sp.block_coords(j)
            self._c[key] = -0.5 * H[np.ix_(cj, ci, ck)]
        return self._c[key]

    def branch(self, i, k, j) -> str:
        lam = self.spectrum.exponents
        return "forward" if lam[i] + lam[k] - lam[j] > 0 else "backward"

    def solve(self, n, i, k, j):
        """Coefficient tensor at index n for the 0-based triple (i, k, j)."""
        key = (n, i, k, j)
        if key in self._a:
            return self._a[key]
        hat, br = self.hat, self.branch(i, k, j)
        dj = self.spectrum.multiplicities[j]
        Bj = np.eye(dj)
        Ri = np.eye(self.spectrum.multiplicities[i])
        Rk = np.eye(self.spectrum.multiplicities[k])
        total = None
        terms = []
        for m in range(1, MAX_TERMS + 1):
            if br == "forward":
                # sum_m L_j(n-1..n-m+1) c_{n-m}(L_i(-m) ., L_k(-m) .)
                Ri = np.linalg.solve(hat.block(n - m, i), Ri)
                Rk = np.linalg.solve(hat.block(n - m, k), Rk)
                c = self.source(n - m, i, k, j)
                term = Bj @ _mode(_mode(c, Ri, 1), Rk, 2).reshape(dj, -1)
                term = term.reshape(c.shape)
                Bj = Bj @ hat.block(n - m, j)
            else:
                # -sum_m L_j(n..n+m-1)^-1 c_{n+m-1}(L_i(m-1) ., L_k(m-1) .)
                Bj = Bj @ np.linalg.inv(hat.block(n + m - 1, j))
                c = self.source(n + m - 1, i, k, j)
                term = -(Bj @ _mode(_mode(c, Ri, 1), Rk, 2).reshape(dj, -1)).reshape(c.shape)
                Ri = hat.block(n + m - 1, i) @ Ri
                Rk = hat.block(n + m - 1, k) @ Rk
            total = term if total is None else total + term
            tn = float(np.abs(term).max())
            terms.append(tn)
            if m > 1 and (tn < ABS_TOL or tn < REL_TOL * float(np.abs(total).max())):
                break
            if m > 12 and tn > 10 * terms[m - 13] and tn > ABS_TOL:
                raise SeriesError(f"{br} series terms grow for triple {(i + 1, k + 1, j + 1)}")
        else:
            raise SeriesError(f"{br} series for triple {(i + 1, k + 1, j + 1)} "
                              f"not converged in {MAX_TERMS} terms")
        self._a[key] = (total, br, m, terms)
        return self._a[key]

    def residual(self, n, i, k, j) -> float:
        a0 = self.solve(n, i, k, j)[0]
        a1 = self.solve(n + 1, i, k, j)[0]
        lhs = _mode(_mode(a1, self.hat.block(n, i), 1), self.hat.block(n, k), 2)
        lhs = lhs - np.tensordot(self.hat.block(n, j), a0, axes=([1], [0]))
        return float(np.abs(lhs - self.source(n, i, k, j)).max())

    def triples(self):
        sp = self.spectrum
        return [(i, k, j) for i in range(sp.tau) for k in range(sp.tau, sp.p) for j in range(sp.p)]

    def coeffs(self, n: int, with_residual: bool = True) -> BilinearCoeffs:
        d = self.hat.d
        full = np.zeros((d, d, d))
        out = []
        sp = self.spectrum
        for i, k, j in self.triples():
            T, br, kstar, terms = self.solve(n, i, k, j)
            ci, ck, cj = sp.block_coords(i), sp.block_coords(k), sp.block_coords(j)
            full[np.ix_(cj, ci, ck)] += T
            full[np.ix_(cj, ck, ci)] += np.transpose(T, (0, 2, 1))
            res = self.residual(n, i, k, j) if with_residual else float("nan")
            out.append(TripleCoeff(i + 1, k + 1, j + 1, br, kstar, T,
                                   float(np.abs(T).max()), res, terms[-1]))
        return BilinearCoeffs(n, full, out)


def homological_coeffs(system, driving, xbar=None, spectrum=None, index: int = 0,
                       hat: HatMaps | None = None) -> BilinearCoeffs:
    """Normal-form coefficients at orbit index ``index`` with residuals."""
    hat = hat or HatMaps(system, driving, xbar, spectrum)
    return CoefficientSolver(hat).coeffs(index)


# ----------------------------------------------------------------------
# the transformation and the transformed maps
# ----------------------------------------------------------------------
class NormalFormChart:
    """N(x) = x + u(x) a(x, x) with a smooth cut-off of radius ``radius``."""

    def __init__(self, coeffs: BilinearCoeffs, radius: float):
        self.coeffs = coeffs
        self.radius = radius
        self.cutoff = Cutoff(radius)

    def __call__(self, x, order=0):
        x = np.asarray(x, dtype=float)
        a = self.coeffs.full
        u = self.cutoff.derivatives(x, order)
        q = np.einsum("okl,...k,...l->...o", a, x, x)
        if order == 0:
            return x + u[0][..., None] * q
        dq = 2 * np.einsum("okl,...l->...ok", a, x)
        return (np.eye(x.shape[-1]) + u[0][..., None, None] * dq
                + q[..., :, None] * u[1][..., None, :])

    def inverse(self, y, tol=1e-15, max_iter=60):
        y = np.asarray(y, dtype=float)
        x = y.copy()
        scale = np.abs(y).max(axis=-1)
        for _ in range(max_iter):
            r = self(x) - y
            if np.all(np.abs(r).max(axis=-1) <= tol * scale):
                return x
            x = x - np.linalg.solve(self(x, 1), r[..., None])[..., 0]
        if np.any(np.abs(self(x) - y).max(axis=-1) > 1e-12 * np.maximum(scale, 1e-300)):
            raise ConvergenceError("normal-form chart inversion failed")
        return x


def chart_radius(system, coeffs_norm: float) -> float:
    """Cut-off radius keeping DN within 1/2 of the identity.

    |D(u a(x,x))| <= |a| (2 r + r^2 sup|Du|) with sup|Du| <= 19/r for the
    smooth step used here, so r = 1/(42 |a|) suffices.
    """
    rho = system.rho / 2
    if coeffs_norm <= 0:
        return rho
    return min(rho, 1.0 / (42.0 * coeffs_norm))


class NormalFormMaps(MapSequence):
    """F̄(n, .) = N(n+1, .) o F̂(n, .) o N(n, .)^-1 along the orbit of x̄."""

    def __init__(self, system, driving, xbar=None, spectrum=None, radius=None,
                 hat: HatMaps | None = None, check_resonance: bool = True):
        self.hat = hat or HatMaps(system, driving, xbar, spectrum)
        self.spectrum = self.hat.spectrum
        self.blocks = self.hat.blocks
        self.solver = CoefficientSolver(self.hat, check_resonance)
        self._charts: dict = {}
        self._radius = radius

    def chart(self, n) -> NormalFormChart:
        if n not in self._charts:
            co = self.solver.coeffs(n, with_residual=False)
            if self._radius is None:
                c0 = self.solver.coeffs(0, with_residual=False)
                self._radius = chart_radius(self.hat.system, max(c0.norm(), 1e-300))
            self._charts[n] = NormalFormChart(co, self._radius)
        return self._charts[n]

    @property
    def radius(self):
        self.chart(0)
        return self._radius

    def A(self, n):
        return self.hat.A(n)

    def A_many(self, n0, n1):
        return self.hat.A_many(n0, n1)

    def F(self, n, x, order=0):
        x = np.asarray(x, dtype=float)
        N0, N1 = self.chart(n), self.chart(n + 1)
        w = N0.inverse(x)
        v = self.hat.hat(n, w)
        if order == 0:
            return N1(v)
        return N1(v, 1) @ self.hat.hat(n, w, 1) @ np.linalg.inv(N0(w, 1))

    def Finv(self, n, y):
        y = np.asarray(y, dtype=float)
        return self.chart(n)(self.hat.hat_inv(n, self.chart(n + 1).inverse(y)))

    def shifted(self, m):
        return _ShiftedNF(self, m)


class _ShiftedNF(_ShiftedHat):
    pass


def apply_normal_form(system, driving, xbar=None, spectrum=None, radius=None):
    """Build the transformation at index 0 and the transformed map sequence."""
    maps = NormalFormMaps(system, driving, xbar, spectrum, radius)
    return maps.chart(0), maps


def mixed_derivative(maps: MapSequence, n: int = 0, h: float = 1e-4,
                     fast=None, slow=None) -> float:
    """max |d^2 F(n, 0)/dx_a dx_b| over fast a, slow b by central differences."""
    sp = maps.spectrum
    fast = sp.unstable_coords if fast is None else fast
    slow = sp.stable_coords if slow is None else slow
    d = maps.d
    eye = np.eye(d)
    pts, idx = [], []
    for a in fast:
        for b in slow:
            for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                pts.append(h * (sa * eye[a] + sb * eye[b]))
            idx.append((a, b))
    vals = maps.F(n, np.array(pts)).reshape(len(idx), 4, d)
    mixed = (vals[:, 0] - vals[:, 1] - vals[:, 2] + vals[:, 3]) / (4 * h * h)
    return float(np.abs(mixed).max()) if idx else 0.0


__all__ = ["HatMaps", "hat_map", "CoefficientSolver", "homological_coeffs", "BilinearCoeffs",
           "TripleCoeff", "NormalFormChart", "NormalFormMaps", "apply_normal_form",
           "mixed_derivative", "chart_radius", "ResonanceError", "SeriesError",
           "CUTOFF_CONSTANT"]
