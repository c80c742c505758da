"""Random maps F(omega, x) = Lambda(omega) x + f(omega, x) and their cocycles.

Conventions: points are arrays whose last axis has length ``d``; any leading
axes are batch axes.  The driving state enters only through its integer
symbol, which selects the linear part and a scale factor for ``f``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.special import roots_legendre

from .driving import DrivingSystem, OmegaOrbit, driving_from_dict

DATA_DIR = Path(__file__).parent / "data"


class SystemError_(ValueError):
    """Invalid system description."""


class ConvergenceError(RuntimeError):
    """An iterative solver did not converge."""


# ----------------------------------------------------------------------
# norms
# ----------------------------------------------------------------------
def block_norm(x, blocks) -> np.ndarray:
    """Max over blocks of the Euclidean norm of each block."""
    x = np.asarray(x, dtype=float)
    out = None
    start = 0
    for b in blocks:
        part = np.linalg.norm(x[..., start:start + b], axis=-1)
        out = part if out is None else np.maximum(out, part)
        start += b
    return out


def opnorm(a) -> np.ndarray:
    """Row-sum norm of a matrix or multilinear form (entrywise bound per output)."""
    a = np.asarray(a, dtype=float)
    if a.ndim < 2:
        return np.abs(a).sum(axis=-1)
    extra = a.ndim - 2 if a.ndim > 2 else 0
    # treat trailing axes after the first output axis as inputs
    return np.abs(a).reshape(a.shape[:-1 - extra] + (-1,)).sum(axis=-1).max(axis=-1)


# ----------------------------------------------------------------------
# smooth cut-off
# ----------------------------------------------------------------------
CUTOFF_CONSTANT = (6.0 * (4 * math.exp(-4) + 4.5 * math.exp(-3) + 8 * math.exp(-2))
                   * (1 / 16 - 1 / (math.log(2) + 16)) ** -0.5 * math.exp(16))

_GL_X, _GL_W = roots_legendre(24)
_N_NODES = 512


def _bump(t):
    """exp(1/((t-1/2)(t-1))) on (1/2, 1), zero elsewhere, with two derivatives."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0.5) & (t < 1.0)
    tt = np.where(inside, t, 0.75)
    P = (tt - 0.5) * (tt - 1.0)
    dP = 2 * tt - 1.5
    q = 1.0 / P
    dq = -dP / P**2
    d2q = (2 * dP**2 - 2 * P) / P**3
    with np.errstate(under="ignore"):
        g = np.where(inside, np.exp(q), 0.0)
    g1 = np.where(inside, g * dq, 0.0)
    g2 = np.where(inside, g * (d2q + dq**2), 0.0)
    return g, g1, g2


def _gl(a, b):
    """Gauss-Legendre integral of the bump over [a, b] (arrays)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mid, half = (a + b) / 2, (b - a) / 2
    pts = mid[..., None] + half[..., None] * _GL_X
    return half * (_bump(pts)[0] * _GL_W).sum(axis=-1)


def _tail_table():
    nodes = np.linspace(0.5, 1.0, _N_NODES + 1)
    pieces = _gl(nodes[:-1], nodes[1:])
    tails = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])
    return nodes, tails


_NODES, _TAILS = _tail_table()
_BUMP_MASS = _TAILS[0]


def unit_step(t, order: int = 0):
    """Smooth step equal to 1 for t <= 1/2 and 0 for t >= 1 (and derivatives)."""
    t = np.asarray(t, dtype=float)
    # only the transition region needs quadrature
    mid = (t > 0.5) & (t < 1.0)
    if order == 0:
        out = np.where(t <= 0.5, 1.0, 0.0)
        if np.any(mid):
            tc = t[mid]
            k = np.minimum(((tc - 0.5) * 2 * _N_NODES).astype(int), _N_NODES - 1) + 1
            out[mid] = (_TAILS[k] + _gl(tc, _NODES[k])) / _BUMP_MASS
        return out
    out = np.zeros(t.shape)
    if np.any(mid):
        out[mid] = -_bump(t[mid])[order - 1] / _BUMP_MASS
    return out


@dataclass(frozen=True)
class Cutoff:
    """u(x) = h(|x|^2) with h a smooth step between rho^2/2 and rho^2."""

    rho: float
    C_u: float = CUTOFF_CONSTANT

    @property
    def inner(self) -> float:
        return self.rho / 2

    def _s(self, x):
        with np.errstate(over="ignore"):
            return (np.asarray(x, dtype=float) ** 2).sum(axis=-1) / self.rho**2

    def value(self, x):
        return unit_step(self._s(x))

    def derivatives(self, x, order: int = 3):
        """(u, Du, D^2u, D^3u) up to ``order`` via the chain rule."""
        x = np.asarray(x, dtype=float)
        r2 = self.rho**2
        t = self._s(x)
        x = np.where((t < 1.0)[..., None], x, 0.0)
        h = [unit_step(t)] + [unit_step(t, k) / r2**k for k in range(1, order + 1)]
        out = [h[0]]
        if order >= 1:
            out.append(2 * h[1][..., None] * x)
        if order >= 2:
            eye = np.eye(x.shape[-1])
            out.append(4 * h[2][..., None, None] * x[..., :, None] * x[..., None, :]
                       + 2 * h[1][..., None, None] * eye)
        if order >= 3:
            eye = np.eye(x.shape[-1])
            xxx = x[..., :, None, None] * x[..., None, :, None] * x[..., None, None, :]
            sym = (eye[:, :, None] * x[..., None, None, :] + eye[:, None, :] * x[..., None, :, None]
                   + eye[None, :, :] * x[..., :, None, None])
            out.append(8 * h[3][..., None, None, None] * xxx
                       + 4 * h[2][..., None, None, None] * sym)
        return out


# ----------------------------------------------------------------------
# nonlinearity catalog
# ----------------------------------------------------------------------
class Nonlinearity:
    name = "base"

    def __init__(self, d: int, params: dict | None = None):
        self.d = d
        self.params = dict(params or {})

    def value(self, x):
        raise NotImplementedError

    def jac(self, x):
        raise NotImplementedError

    def hess(self, x):
        raise NotImplementedError


class Zero(Nonlinearity):
    name = "zero"

    def value(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def jac(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (self.d,))

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (self.d, self.d))


class Polynomial(Nonlinearity):
    """Sum of monomials coef * prod x_k^p_k placed in output ``out``.

    Every monomial must have total degree >= 2 so that f(0) = 0, Df(0) = 0.
    """

    name = "polynomial"

    def __init__(self, d, params=None):
        super().__init__(d, params)
        terms = self.params.get("terms", [])
        outs, pows, coefs = [], [], []
        for t in terms:
            p = np.asarray(t["powers"], dtype=int)
            if p.shape != (d,) or np.any(p < 0):
                raise SystemError_(f"polynomial term powers must be {d} non-negative ints")
            if p.sum() < 2:
                raise SystemError_("polynomial terms need total degree >= 2")
            if not 0 <= int(t["out"]) < d:
                raise SystemError_(f"polynomial term output {t['out']} out of range")
            outs.append(int(t["out"]))
            pows.append(p)
            coefs.append(float(t["coef"]))
        self.outs = np.asarray(outs, dtype=int)
        self.pows = np.asarray(pows, dtype=int).reshape(-1, d)
        self.coefs = np.asarray(coefs, dtype=float)

    @staticmethod
    def _mono(x, p):
        # x^p with the convention that negative exponents kill the term
        if np.any(p < 0):
            return np.zeros(x.shape[:-1])
        return np.prod(x ** p, axis=-1)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for o, p, c in zip(self.outs, self.pows, self.coefs):
            out[..., o] += c * self._mono(x, p)
        return out

    def jac(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (self.d,))
        eye = np.eye(self.d, dtype=int)
        for o, p, c in zip(self.outs, self.pows, self.coefs):
            for k in range(self.d):
                if p[k]:
                    out[..., o, k] += c * p[k] * self._mono(x, p - eye[k])
        return out

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (self.d, self.d))
        eye = np.eye(self.d, dtype=int)
        for o, p, c in zip(self.outs, self.pows, self.coefs):
            for k in range(self.d):
                for m in range(self.d):
                    pk = p - eye[k]
                    if p[k] and pk[m] > 0:
                        out[..., o, k, m] += c * p[k] * pk[m] * self._mono(x, pk - eye[m])
        return out


def quadratic(d, params):
    """Quadratic coupling given as rows [out, i, k, coef] meaning coef*x_i*x_k."""
    terms = []
    for out, i, k, c in params.get("terms", []):
        p = [0] * d
        p[int(i)] += 1
        p[int(k)] += 1
        terms.append({"out": int(out), "powers": p, "coef": float(c)})
    poly = Polynomial(d, {"terms": terms})
    poly.name = "quadratic"
    poly.params = dict(params)
    return poly


class BumpCoupling(Nonlinearity):
    """f_target = amplitude * s^2 * step(s^2 / width^2) with s = x_source."""

    name = "bump_coupling"

    def __init__(self, d, params=None):
        super().__init__(d, params)
        self.source = int(self.params.get("source", 1))
        self.target = int(self.params.get("target", 2))
        self.amp = float(self.params.get("amplitude", 1.0))
        self.width = float(self.params.get("width", 1.0))
        if not (0 <= self.source < d and 0 <= self.target < d):
            raise SystemError_("bump_coupling source/target out of range")

    def _phi(self, s):
        w2 = self.width**2
        t = s**2 / w2
        H, H1, H2 = unit_step(t), unit_step(t, 1), unit_step(t, 2)
        phi = self.amp * s**2 * H
        dphi = self.amp * (2 * s * H + 2 * s**3 * H1 / w2)
        d2phi = self.amp * (2 * H + 10 * s**2 * H1 / w2 + 4 * s**4 * H2 / w2**2)
        return phi, dphi, d2phi

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., self.target] = self._phi(x[..., self.source])[0]
        return out

    def jac(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (self.d,))
        out[..., self.target, self.source] = self._phi(x[..., self.source])[1]
        return out

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (self.d, self.d))
        out[..., self.target, self.source, self.source] = self._phi(x[..., self.source])[2]
        return out


CATALOG = {
    "zero": Zero,
    "polynomial": Polynomial,
    "quadratic": quadratic,
    "bump_coupling": BumpCoupling,
}


def make_nonlinearity(name: str, d: int, params: dict | None = None) -> Nonlinearity:
    try:
        ctor = CATALOG[name]
    except KeyError:
        raise SystemError_(f"unknown catalog entry {name!r}") from None
    return ctor(d, params or {})


# ----------------------------------------------------------------------
# the system
# ----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class RandomMapSystem:
    blocks: tuple
    linear_parts: np.ndarray  # (symbols, d, d)
    nonlinearity: Nonlinearity
    rho: float = 1.0
    alpha: float = 1.0
    scales: tuple = (1.0,)
    extended: bool = False
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        A = np.asarray(self.linear_parts, dtype=float)
        if A.ndim == 2:
            A = A[None]
        d = sum(self.blocks)
        if A.shape[1:] != (d, d):
            raise SystemError_(f"linear part has shape {A.shape[1:]}, expected {(d, d)}")
        object.__setattr__(self, "linear_parts", A)
        for s, M in enumerate(A):
            if abs(np.linalg.det(M)) < 1e-300 or np.linalg.cond(M) > 1e12:
                raise SystemError_(f"linear part for symbol {s} is not invertible")
            off = M.copy()
            for sl in self.block_slices:
                off[sl, sl] = 0.0
            if np.abs(off).max() > 0:
                raise SystemError_(f"linear part for symbol {s} is not block diagonal")
        if len(self.scales) not in (1, A.shape[0]):
            raise SystemError_("per_symbol_scale length must match the symbol count")
        if self.rho <= 0:
            raise SystemError_("rho must be positive")
        if not 0 < self.alpha <= 1:
            raise SystemError_("alpha must lie in (0, 1]")

    # structure --------------------------------------------------------
    @property
    def d(self) -> int:
        return sum(self.blocks)

    @cached_property
    def block_slices(self) -> list:
        out, start = [], 0
        for b in self.blocks:
            out.append(slice(start, start + b))
            start += b
        return out

    @cached_property
    def cutoff(self) -> Cutoff:
        return Cutoff(self.rho)

    @cached_property
    def _inverses(self) -> np.ndarray:
        return np.linalg.inv(self.linear_parts)

    def _sym(self, sym: int) -> int:
        return int(sym) % self.linear_parts.shape[0] if self.linear_parts.shape[0] > 1 else 0

    def _scale(self, sym: int) -> float:
        return self.scales[int(sym) % len(self.scales)] if len(self.scales) > 1 else self.scales[0]

    def linear(self, sym: int) -> np.ndarray:
        return self.linear_parts[self._sym(sym)]

    def linear_inv(self, sym: int) -> np.ndarray:
        return self._inverses[self._sym(sym)]

    # nonlinear part ---------------------------------------------------
    def f(self, sym, x, order: int = 0):
        """f (order 0), Df (order 1) or D^2f (order 2), cut off if extended."""
        return self._scale(sym) * self.f_unit(x, order)

    def f_unit(self, x, order: int = 0):
        """The nonlinearity with unit symbol scale (cut off if extended)."""
        x = np.asarray(x, dtype=float)
        nl = self.nonlinearity
        if not self.extended:
            return (nl.value, nl.jac, nl.hess)[order](x)
        u = self.cutoff.derivatives(x, order)
        # the nonlinearity is only evaluated inside the outer ball
        with np.errstate(over="ignore"):
            inside = (x**2).sum(axis=-1) < self.rho**2
        x = np.where(inside[..., None], x, 0.0)
        g = nl.value(x)
        if order == 0:
            return u[0][..., None] * g
        Dg = nl.jac(x)
        if order == 1:
            return u[0][..., None, None] * Dg + g[..., :, None] * u[1][..., None, :]
        D2g = nl.hess(x)
        return (u[0][..., None, None, None] * D2g
                + Dg[..., :, :, None] * u[1][..., None, None, :]
                + Dg[..., :, None, :] * u[1][..., None, :, None]
                + g[..., :, None, None] * u[2][..., None, :, :])

    def symbol_scales(self, syms) -> np.ndarray:
        sc = np.asarray(self.scales, dtype=float)
        return sc[np.asarray(syms) % sc.size]

    def evaluate(self, sym, x, order: int = 0):
        """F (order 0), its Jacobian (1) or its Hessian (2)."""
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        x = np.asarray(x, dtype=float)
        A = self.linear(sym)
        if order == 0:
            return x @ A.T + self.f(sym, x, 0)
        if order == 1:
            return A + self.f(sym, x, 1)
        return self.f(sym, x, 2)

    def inverse(self, sym, y, tol: float = 1e-14, max_iter: int = 100):
        """Solve F(sym, x) = y by damped Newton from the linear guess.

        The tolerance is relative to |y| so that small points keep full
        relative accuracy.
        """
        y = np.asarray(y, dtype=float)
        x = y @ self.linear_inv(sym).T
        if isinstance(self.nonlinearity, Zero):
            return x
        scale = np.abs(y).max(axis=-1)
        res = self.evaluate(sym, x) - y
        err = np.abs(res).max(axis=-1)
        for _ in range(max_iter):
            todo = err > tol * scale
            if not np.any(todo):
                return x
            J = self.evaluate(sym, x, 1)
            step = np.linalg.solve(J, res[..., None])[..., 0]
            t = np.ones(err.shape)
            for _ in range(30):
                xn = x - t[..., None] * step
                rn = self.evaluate(sym, xn) - y
                en = np.abs(rn).max(axis=-1)
                bad = (en > err) & todo & (en > tol * scale)
                if not np.any(bad):
                    break
                t = np.where(bad, t / 2, t)
            x = np.where(todo[..., None], xn, x)
            res = np.where(todo[..., None], rn, res)
            err = np.where(todo, en, err)
        if np.any(err > 1e3 * tol * np.maximum(scale, 1e-300)):
            raise ConvergenceError(f"inverse map Newton failed (residual {err.max():.3e})")
        return x

    def to_dict(self) -> dict:
        lp = self.linear_parts
        linear = ({"constant": lp[0].tolist()} if lp.shape[0] == 1
                  else {"per_symbol": lp.tolist()})
        params = dict(self.nonlinearity.params)
        if len(self.scales) > 1:
            params["per_symbol_scale"] = list(self.scales)
        return {"name": self.name, "dimension": self.d, "blocks": list(self.blocks),
                "linear_part": linear,
                "nonlinearity": {"name": self.nonlinearity.name, "params": params},
                "rho": self.rho, "alpha": self.alpha}


def extend(system: RandomMapSystem) -> RandomMapSystem:
    """Globalize with the smooth cut-off: Lambda x + u(x) f(x)."""
    return system if system.extended else replace(system, extended=True)


def make_system(linear, blocks=None, nonlinearity="zero", params=None, rho=1.0,
                alpha=1.0, scales=(1.0,), extended=True, name="") -> RandomMapSystem:
    A = np.asarray(linear, dtype=float)
    d = A.shape[-1]
    blocks = tuple(blocks) if blocks is not None else (1,) * d
    nl = nonlinearity if isinstance(nonlinearity, Nonlinearity) else \
        make_nonlinearity(nonlinearity, d, params)
    return RandomMapSystem(blocks=blocks, linear_parts=A, nonlinearity=nl, rho=float(rho),
                           alpha=float(alpha), scales=tuple(scales), extended=extended,
                           name=name)


# ----------------------------------------------------------------------
# description files
# ----------------------------------------------------------------------
def system_from_dict(spec: dict) -> tuple[RandomMapSystem, DrivingSystem]:
    """Validate a system description; returns (system, driving)."""
    def need(key):
        if key not in spec:
            raise SystemError_(f"missing field '{key}'")
        return spec[key]

    d = need("dimension")
    if not isinstance(d, int) or d < 1:
        raise SystemError_("field 'dimension': positive integer expected")
    blocks = need("blocks")
    if not all(isinstance(b, int) and b > 0 for b in blocks):
        raise SystemError_("field 'blocks': positive integers expected")
    if sum(blocks) != d:
        raise SystemError_(f"field 'blocks': sums to {sum(blocks)}, dimension is {d}")
    driving = driving_from_dict(spec.get("driving", {"kind": "identity"}))
    lp = need("linear_part")
    if "constant" in lp:
        mats = np.asarray(lp["constant"], dtype=float)[None]
    elif "per_symbol" in lp:
        mats = np.asarray(lp["per_symbol"], dtype=float)
        if mats.shape[0] != driving.symbol_count:
            raise SystemError_(f"field 'linear_part.per_symbol': {mats.shape[0]} matrices for "
                               f"{driving.symbol_count} driving symbols")
    else:
        raise SystemError_("field 'linear_part': needs 'constant' or 'per_symbol'")
    if mats.shape[1:] != (d, d):
        raise SystemError_(f"field 'linear_part': matrices must be {d}x{d}")
    nl = spec.get("nonlinearity", {"name": "zero"})
    params = dict(nl.get("params", {}))
    scales = tuple(float(s) for s in params.pop("per_symbol_scale", [1.0]))
    system = RandomMapSystem(
        blocks=tuple(blocks), linear_parts=mats,
        nonlinearity=make_nonlinearity(nl.get("name", "zero"), d, params),
        rho=float(spec.get("rho", 1.0)), alpha=float(spec.get("alpha", 1.0)),
        scales=scales, extended=False, name=str(spec.get("name", "")))
    return system, driving


def load_system(path) -> tuple[RandomMapSystem, DrivingSystem]:
    path = Path(path)
    if not path.exists():
        for folder in (DATA_DIR, DATA_DIR / "extra"):
            if (folder / f"{path}.json").exists():
                path = folder / f"{path}.json"
                break
    with open(path) as fh:
        return system_from_dict(json.load(fh))


def catalog_names() -> list:
    return sorted(p.stem for p in DATA_DIR.glob("*.json"))


# ----------------------------------------------------------------------
# maps along an orbit of the driving system
# ----------------------------------------------------------------------
class MapSequence:
    """Index-n maps x -> A_n x + g_n(x) with block-diagonal A_n.

    ``blocks`` are the coordinate blocks; every consumer (foliations, normal
    forms, linearization) is written against this interface.
    """

    blocks: tuple = ()

    @property
    def d(self) -> int:
        return sum(self.blocks)

    def A(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def Ainv(self, n: int) -> np.ndarray:
        return np.linalg.inv(self.A(n))

    def F(self, n: int, x, order: int = 0):
        raise NotImplementedError

    def Finv(self, n: int, y):
        raise NotImplementedError

    def A_many(self, n0: int, n1: int) -> np.ndarray:
        """Stacked A_n for n0 <= n < n1."""
        return np.stack([self.A(n) for n in range(n0, n1)])

    def g_many(self, n0: int, X, order: int = 0) -> np.ndarray:
        """g_n(X[n - n0]) for a stack X of shape (T, ..., d)."""
        return np.stack([self.g(n0 + k, X[k], order) for k in range(X.shape[0])])

    def g(self, n: int, x, order: int = 0):
        """Nonlinear part g_n = F_n - A_n (order 0 or 1)."""
        x = np.asarray(x, dtype=float)
        if order == 0:
            return self.F(n, x) - x @ self.A(n).T
        return self.F(n, x, 1) - self.A(n)

    def orbit(self, x, n0: int, n1: int) -> np.ndarray:
        """Points F(k, x) for k = n0..n1 (n0 <= 0 <= n1); axis 0 is k - n0."""
        x = np.asarray(x, dtype=float)
        out = np.empty((n1 - n0 + 1,) + x.shape)
        out[-n0] = x
        cur = x
        for k in range(0, n1):
            cur = self.F(k, cur)
            out[k + 1 - n0] = cur
        cur = x
        for k in range(-1, n0 - 1, -1):
            cur = self.Finv(k, cur)
            out[k - n0] = cur
        return out

    def shifted(self, m: int) -> "MapSequence":
        return _Shifted(self, m)


class _Shifted(MapSequence):
    def __init__(self, base: MapSequence, m: int):
        self.base, self.m = base, m
        self.blocks = base.blocks

    def A(self, n):
        return self.base.A(n + self.m)

    def Ainv(self, n):
        return self.base.Ainv(n + self.m)

    def F(self, n, x, order=0):
        return self.base.F(n + self.m, x, order)

    def Finv(self, n, y):
        return self.base.Finv(n + self.m, y)

    def shifted(self, m):
        return _Shifted(self.base, self.m + m)


class OrbitMaps(MapSequence):
    """The maps F(theta^n omega, .) of a system along a driving orbit."""

    def __init__(self, system: RandomMapSystem, driving: DrivingSystem | OmegaOrbit):
        if isinstance(driving, OmegaOrbit):
            driving = driving.driving
        self.system = extend(system)
        self.driving = driving
        self.blocks = self.system.blocks
        self._sym_cache: dict = {}

    def symbol(self, n: int) -> int:
        s = self._sym_cache.get(n)
        if s is None:
            lo = n - 64
            syms = self.driving.symbols(lo, n + 65)
            for k, v in enumerate(syms):
                self._sym_cache[lo + k] = int(v)
            s = self._sym_cache[n]
        return s

    def symbols(self, n0: int, n1: int) -> np.ndarray:
        return self.driving.symbols(n0, n1)

    def A(self, n):
        return self.system.linear(self.symbol(n))

    def A_many(self, n0, n1):
        lp = self.system.linear_parts
        return lp[self.symbols(n0, n1) % lp.shape[0]]

    def g(self, n, x, order=0):
        return self.system.f(self.symbol(n), x, order)

    def g_many(self, n0, X, order=0):
        X = np.asarray(X, dtype=float)
        sc = self.system.symbol_scales(self.symbols(n0, n0 + X.shape[0]))
        base = self.system.f_unit(X, order)
        return sc.reshape((-1,) + (1,) * (base.ndim - 1)) * base

    def Ainv(self, n):
        return self.system.linear_inv(self.symbol(n))

    def F(self, n, x, order=0):
        return self.system.evaluate(self.symbol(n), x, order)

    def Finv(self, n, y):
        return self.system.inverse(self.symbol(n), y)

    def shifted(self, m):
        return OrbitMaps(self.system, self.driving.advanced(m))


def iterate(system: RandomMapSystem, orbit, n: int, x):
    """(F(n, omega, x), DF(n, omega, x)) for the extended system."""
    maps = OrbitMaps(system, orbit)
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    J = np.broadcast_to(np.eye(d), x.shape + (d,)).copy()
    cur = x
    if n >= 0:
        for k in range(n):
            J = maps.F(k, cur, 1) @ J
            cur = maps.F(k, cur)
        return cur, J
    for k in range(-1, n - 1, -1):
        cur = maps.Finv(k, cur)
        J = np.linalg.solve(maps.F(k, cur, 1), J)
    return cur, J


def bound_constants(system: RandomMapSystem, n_points: int = 2000, seed: int = 0) -> dict:
    """Measured M, L on the cut-off ball and the derived extension constants."""
    rng = np.random.default_rng(seed)
    d, rho = system.d, system.rho
    raw = replace(system, extended=False)
    x = rng.uniform(-rho, rho, size=(n_points, d))
    M = 0.0
    L = 0.0
    for s in range(system.linear_parts.shape[0]):
        Df = raw.f(s, x, 1)
        D2f = raw.f(s, x, 2)
        M = max(M, float(opnorm(Df).max()), float(opnorm(D2f).max()))
        y = x + rng.normal(scale=rho / 20, size=x.shape)
        dist = block_norm(x - y, system.blocks) ** system.alpha
        diff = opnorm(D2f - raw.f(s, y, 2))
        L = max(L, float((diff / np.maximum(dist, 1e-300)).max()))
    C_u = CUTOFF_CONSTANT
    M_eps = (3 * C_u + 1) * M
    return {"M": M, "L": L, "C_u": C_u, "M_eps": M_eps, "delta": M_eps * rho,
            "L_eps_rho": 7 * C_u * M / rho + L}
