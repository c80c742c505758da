"""Lyapunov-Perron solvers for stable, unstable, pseudo and intermediate leaves.

A *split* ``j`` (1 <= j < p) separates the spectral blocks into a fast part
(blocks 1..j, called ``plus``) and a slow part (blocks j+1..p, ``minus``).
The stable-like problem seeks forward difference sequences q_n, n = 0..N,
whose slow part starts at y - pi_minus x; the unstable-like problem seeks
backward sequences p_n, n = -N..0, whose fast part ends at y - pi_plus x.
The stable and unstable foliations use j = tau.

All solvers are batched over queries: base points and graph coordinates
are arrays of shape (Q, d) and (Q, m).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import affine_backward, affine_forward
from .spectrum import Spectrum, constants_budget, system_spectrum
from .system import MapSequence, OrbitMaps, RandomMapSystem

DEFAULT_HORIZON = 80


class ContractionError(RuntimeError):
    """Picard iterates stopped contracting (perturbation too large)."""


class HorizonError(ValueError):
    """Truncation horizon too short for the requested tolerance."""


class IntersectionError(RuntimeError):
    """Newton iteration for an intermediate leaf failed."""


def as_maps(system, driving=None) -> MapSequence:
    if isinstance(system, MapSequence):
        return system
    return OrbitMaps(system, driving)


@dataclass(frozen=True)
class LPConfig:
    """Lyapunov-Perron problem settings.

    ``side`` is "stable" or "unstable"; ``split`` is the number of fast blocks
    (defaults to the unstable count).  ``weight`` defaults to the midpoint of
    the admissible window and ``horizon`` to the smallest N >= 80 whose
    geometric tail bound is below ``tol``.
    """

    side: str = "stable"
    split: int | None = None
    weight: float | None = None
    horizon: int | None = None
    tol: float = 1e-13
    max_iter: int = 200

    def resolve(self, spectrum: Spectrum) -> "ResolvedConfig":
        if self.side not in ("stable", "unstable"):
            raise ValueError(f"unknown side {self.side!r}")
        j = spectrum.tau if self.split is None else int(self.split)
        if not 1 <= j < spectrum.p:
            raise ValueError(f"split {j} outside 1..{spectrum.p - 1}")
        lam = spectrum.exponents
        eps = constants_budget(spectrum).epsilon
        lo, hi = lam[j] + 3 * eps, lam[j - 1] - 3 * eps
        rho = 0.5 * (lo + hi) if self.weight is None else float(self.weight)
        if not lo < rho < hi:
            raise ValueError(f"weight {rho} outside the admissible window ({lo}, {hi})")
        # tail factor of the truncated sums per step
        rate = min(rho - lam[j] - eps, lam[j - 1] - eps - rho)
        needed = math.ceil(math.log(self.tol) / -rate)
        if self.horizon is None:
            N = max(DEFAULT_HORIZON, needed)
        else:
            N = int(self.horizon)
            if N < 1:
                raise HorizonError("horizon must be positive")
            if math.exp(-rate * N) > self.tol:
                raise HorizonError(f"horizon {N} too short: tail bound {math.exp(-rate * N):.2e} "
                                   f"exceeds tolerance {self.tol:.1e} (need {needed})")
        plus, minus = spectrum.split_coords(j)
        return ResolvedConfig(self.side, j, rho, N, self.tol, self.max_iter, plus, minus)


@dataclass(frozen=True)
class ResolvedConfig:
    side: str
    split: int
    weight: float
    horizon: int
    tol: float
    max_iter: int
    plus: np.ndarray
    minus: np.ndarray

    @property
    def graph(self) -> np.ndarray:
        """Coordinates parametrizing the leaf."""
        return self.minus if self.side == "stable" else self.plus


@dataclass
class LPSolution:
    """Solved difference sequence; axis 0 runs over n = n0..n0+N."""

    side: str
    split: int
    n0: int
    seq: np.ndarray       # (N+1, Q, d)
    base: np.ndarray      # (N+1, Q, d) orbit of the base points
    y: np.ndarray
    residual: np.ndarray  # (Q,) weighted re-substitution defect
    iterations: int
    weight: float

    @property
    def first(self) -> np.ndarray:
        """q_0 or p_0."""
        return self.seq[-self.n0]

    def at(self, n: int) -> np.ndarray:
        return self.seq[n - self.n0]


def _weights(n0, N, rho):
    n = np.arange(n0, n0 + N + 1)
    return np.exp(-rho * n)


def _sweep(cfg, A_plus, A_minus, Ainv_plus, start, src):
    """One application of the truncated Lyapunov-Perron operator.

    ``src`` holds the perturbation terms Xi_n (T, Q, d) for the T = N steps;
    ``start`` is the prescribed graph part at n = 0.
    """
    T, Q, _ = src.shape
    P, M = cfg.plus, cfg.minus
    out = np.empty((T + 1, Q, P.size + M.size))
    if cfg.side == "stable":
        s = affine_forward(A_minus, src[:, :, M], start)
        u = affine_backward(Ainv_plus, src[:, :, P], np.zeros((Q, P.size)))
    else:
        s = affine_forward(A_minus, src[:, :, M], np.zeros((Q, M.size)))
        u = affine_backward(Ainv_plus, src[:, :, P], start)
    out[:, :, M] = s
    out[:, :, P] = u
    return out


def _linear_parts(maps, cfg, n0):
    N = cfg.horizon
    A = maps.A_many(n0, n0 + N)
    P, M = cfg.plus, cfg.minus
    A_plus = np.ascontiguousarray(A[:, P][:, :, P])
    A_minus = np.ascontiguousarray(A[:, M][:, :, M])
    Ainv_plus = np.ascontiguousarray(np.linalg.inv(A_plus)) if P.size else A_plus
    return A_plus, A_minus, Ainv_plus


def _picard(cfg, parts, start, xi, seq0, weights, what="Lyapunov-Perron"):
    seq = seq0
    diffs = []
    for it in range(1, cfg.max_iter + 1):
        new = _sweep(cfg, *parts, start, xi(seq))
        diff = (np.abs(new - seq).max(axis=(2,)) * weights[:, None]).max(axis=0)
        seq = new
        dmax = float(diff.max())
        diffs.append(dmax)
        if dmax < cfg.tol:
            return seq, it
        if it >= 8 and dmax > 0.95 * diffs[-6] and dmax > 1e3 * cfg.tol:
            raise ContractionError(f"{what} iteration is not contracting "
                                   f"(difference {dmax:.2e} after {it} steps); shrink the radius")
        if not np.isfinite(dmax):
            raise ContractionError(f"{what} iteration diverged")
    raise ContractionError(f"{what} iteration did not reach tol {cfg.tol:.1e} "
                           f"in {cfg.max_iter} steps (last difference {diffs[-1]:.2e})")


def _base_orbit(maps, x, cfg):
    N = cfg.horizon
    if cfg.side == "stable":
        return maps.orbit(x, 0, N), 0
    return maps.orbit(x, -N, 0), -N


def solve_lp(system, driving, x, y, config: LPConfig = LPConfig(),
             spectrum: Spectrum | None = None) -> LPSolution:
    """Solve the truncated Lyapunov-Perron equation for each (x, y) query."""
    maps = as_maps(system, driving)
    spectrum = spectrum or _spectrum_for(maps, driving)
    cfg = config.resolve(spectrum)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if y.shape[0] == 1 and x.shape[0] > 1:
        y = np.repeat(y, x.shape[0], axis=0)
    if x.shape[0] == 1 and y.shape[0] > 1:
        x = np.repeat(x, y.shape[0], axis=0)
    base, n0 = _base_orbit(maps, x, cfg)
    return _solve_on_orbit(maps, cfg, base, n0, y)


def _solve_on_orbit(maps, cfg, base, n0, y):
    N = cfg.horizon
    parts = _linear_parts(maps, cfg, n0)
    graph = cfg.graph
    x0 = base[-n0]
    start = y - x0[:, graph]
    g_base = maps.g_many(n0, base[:-1])

    def xi(seq):
        return maps.g_many(n0, base[:-1] + seq[:-1]) - g_base

    weights = _weights(n0, N, cfg.weight)
    seq0 = _sweep(cfg, *parts, start, np.zeros((N,) + x0.shape))
    seq, its = _picard(cfg, parts, start, xi, seq0, weights)
    resid = (np.abs(_sweep(cfg, *parts, start, xi(seq)) - seq).max(axis=2)
             * weights[:, None]).max(axis=0)
    return LPSolution(cfg.side, cfg.split, n0, seq, base, y, resid, its, cfg.weight)


def lp_derivative(maps: MapSequence, cfg: ResolvedConfig, sol: LPSolution) -> np.ndarray:
    """d(first)/dy from the differentiated equation, shape (Q, d, m)."""
    N, n0 = cfg.horizon, sol.n0
    parts = _linear_parts(maps, cfg, n0)
    Q = sol.y.shape[0]
    m = cfg.graph.size
    d = maps.d
    Dg = maps.g_many(n0, sol.base[:-1] + sol.seq[:-1], 1)  # (N, Q, d, d)
    Dg = np.repeat(Dg, m, axis=1)                          # (N, Q*m, d, d)
    start = np.tile(np.eye(m), (Q, 1))                     # (Q*m, m)

    def xi(seq):
        return np.einsum("tqab,tqb->tqa", Dg, seq[:-1])

    weights = _weights(n0, N, cfg.weight)
    seq0 = _sweep(cfg, *parts, start, np.zeros((N, Q * m, d)))
    seq, _ = _picard(cfg, parts, start, xi, seq0, weights, "differentiated Lyapunov-Perron")
    first = seq[-n0].reshape(Q, m, d)
    return np.transpose(first, (0, 2, 1))


def _spectrum_for(maps, driving):
    sp = getattr(maps, "spectrum", None)
    if sp is not None:
        return sp
    if isinstance(maps, OrbitMaps):
        return system_spectrum(maps.system, maps.driving)
    raise ValueError("a spectrum is required for this map sequence")


# ----------------------------------------------------------------------
# leaves
# ----------------------------------------------------------------------
@dataclass
class Leaf:
    """Leaf through ``x`` as a graph over the coordinates ``graph``.

    ``chart(Y)`` returns points of the leaf whose ``graph`` coordinates are Y;
    ``derivative(Y)`` returns the Jacobian of the chart in Y, (Q, d, m).
    """

    maps: MapSequence
    spectrum: Spectrum
    x: np.ndarray
    kind: str
    graph: np.ndarray
    _chart: object
    _deriv: object
    _cache: dict = field(default_factory=dict)

    def chart(self, Y) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        key = ("c", Y.tobytes())
        if key not in self._cache:
            self._cache[key] = self._chart(Y)
        return self._cache[key]

    def derivative(self, Y) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        key = ("d", Y.tobytes())
        if key not in self._cache:
            self._cache[key] = self._deriv(Y)
        return self._cache[key]

    def base_coords(self) -> np.ndarray:
        return self.x[self.graph]

    def shifted_leaf(self, x_new) -> "Leaf":
        """The same type of leaf through x_new for the next-index maps."""
        return self._rebuild(self.maps.shifted(1), x_new)


def _lp_leaf(maps, spectrum, x, config: LPConfig, kind) -> Leaf:
    cfg = config.resolve(spectrum)
    x = np.asarray(x, dtype=float)
    base, n0 = _base_orbit(maps, x[None], cfg)

    def solve(Y):
        b = np.repeat(base, Y.shape[0], axis=1)
        return _solve_on_orbit(maps, cfg, b, n0, Y)

    def chart(Y):
        return x + solve(Y).first

    def deriv(Y):
        return lp_derivative(maps, cfg, solve(Y))

    leaf = Leaf(maps, spectrum, x, kind, cfg.graph, chart, deriv)
    leaf._rebuild = lambda m, xn: _lp_leaf(m, spectrum, xn, config, kind)
    leaf.config = cfg
    return leaf


SIDES = ("stable", "unstable", "strong-stable", "strong-unstable",
         "pseudo-stable", "pseudo-unstable")


def leaf_chart(system, driving, x, side: str = "stable", split: int | None = None,
               config: LPConfig | None = None, spectrum: Spectrum | None = None) -> Leaf:
    """Leaf of the requested foliation through x.

    ``stable``/``unstable`` use the split at tau; ``strong-stable`` is the
    leaf tangent to the slowest block (split p-1); ``strong-unstable`` the
    leaf tangent to the fastest block (split 1); ``pseudo-*`` need ``split``.
    """
    maps = as_maps(system, driving)
    spectrum = spectrum or _spectrum_for(maps, driving)
    base = config or LPConfig()
    if side not in SIDES:
        raise ValueError(f"unknown side {side!r}")
    lp_side = "stable" if side.endswith("stable") and not side.endswith("unstable") else "unstable"
    if side in ("stable", "unstable"):
        j = spectrum.tau
    elif side == "strong-stable":
        j = spectrum.p - 1
    elif side == "strong-unstable":
        j = 1
    else:
        if split is None:
            raise ValueError("pseudo leaves need a split")
        j = split
    cfg = LPConfig(lp_side, j, base.weight, base.horizon, base.tol, base.max_iter)
    return _lp_leaf(maps, spectrum, x, cfg, side)


def intermediate_leaf(system, driving, x, j: int, config: LPConfig | None = None,
                      spectrum: Spectrum | None = None, tol: float = 1e-13,
                      max_iter: int = 30) -> Leaf:
    """Leaf of the intermediate foliation tangent to block j (1-based).

    It is the intersection of the pseudo-unstable leaf over blocks 1..j and
    the pseudo-stable leaf over blocks j..p, parametrized by block j and
    found by Newton iteration on the two graph conditions.
    """
    maps = as_maps(system, driving)
    spectrum = spectrum or _spectrum_for(maps, driving)
    p = spectrum.p
    if not 1 <= j <= p:
        raise ValueError(f"block {j} outside 1..{p}")
    x = np.asarray(x, dtype=float)
    base = config or LPConfig()
    mid = spectrum.block_coords(j - 1)
    before = spectrum.split_coords(j - 1)[0]   # blocks < j
    after = spectrum.split_coords(j)[1]        # blocks > j
    s_leaf = u_leaf = None
    if j > 1:   # pseudo-stable leaf over blocks j..p, graph of the fast part
        s_leaf = _lp_leaf(maps, spectrum, x, LPConfig("stable", j - 1, None, base.horizon,
                                                       base.tol, base.max_iter), "pseudo-stable")
    if j < p:   # pseudo-unstable leaf over blocks 1..j, graph of the slow part
        u_leaf = _lp_leaf(maps, spectrum, x, LPConfig("unstable", j, None, base.horizon,
                                                       base.tol, base.max_iter), "pseudo-unstable")
    d = x.size

    def solve(Y):
        Q = Y.shape[0]
        z = np.repeat(x[None], Q, axis=0)
        z[:, mid] = Y
        for it in range(max_iter):
            res = []
            jac_rows = []
            if s_leaf is not None:
                ys = z[:, s_leaf.graph]
                pt = s_leaf.chart(ys)
                D = s_leaf.derivative(ys)          # (Q, d, |graph|)
                res.append(z[:, before] - pt[:, before])
                # d/dz of z_before - S(z_graph)
                J = np.zeros((Q, before.size, d))
                J[:, np.arange(before.size), before] = 1.0
                J[:, :, s_leaf.graph] -= D[:, before, :]
                jac_rows.append(J)
            if u_leaf is not None:
                yu = z[:, u_leaf.graph]
                pt = u_leaf.chart(yu)
                D = u_leaf.derivative(yu)
                res.append(z[:, after] - pt[:, after])
                J = np.zeros((Q, after.size, d))
                J[:, np.arange(after.size), after] = 1.0
                J[:, :, u_leaf.graph] -= D[:, after, :]
                jac_rows.append(J)
            r = np.concatenate(res, axis=1)
            err = np.abs(r).max()
            if err < tol:
                return z
            Jfull = np.concatenate(jac_rows, axis=1)
            free = np.concatenate([before, after])
            step = np.linalg.solve(Jfull[:, :, free], r[..., None])[..., 0]
            z = z.copy()
            z[:, free] -= step
        raise IntersectionError(f"intermediate leaf Newton failed (residual {err:.2e})")

    def chart(Y):
        return solve(Y)

    def deriv(Y):
        z = solve(Y)
        Q = Y.shape[0]
        free = np.concatenate([before, after])
        rows, rhs = [], []
        if s_leaf is not None:
            D = s_leaf.derivative(z[:, s_leaf.graph])
            J = np.zeros((Q, before.size, d))
            J[:, np.arange(before.size), before] = 1.0
            J[:, :, s_leaf.graph] -= D[:, before, :]
            rows.append(J)
        if u_leaf is not None:
            D = u_leaf.derivative(z[:, u_leaf.graph])
            J = np.zeros((Q, after.size, d))
            J[:, np.arange(after.size), after] = 1.0
            J[:, :, u_leaf.graph] -= D[:, after, :]
            rows.append(J)
        J = np.concatenate(rows, axis=1)
        dfree = -np.linalg.solve(J[:, :, free], J[:, :, mid])
        out = np.zeros((Q, d, mid.size))
        out[:, mid, :] = np.eye(mid.size)
        out[:, free, :] = dfree
        return out

    leaf = Leaf(maps, spectrum, x, f"intermediate-{j}", mid, chart, deriv)
    leaf._rebuild = lambda m, xn: intermediate_leaf(m, None, xn, j, config, spectrum, tol, max_iter)
    return leaf


def invariance_residual(leaf: Leaf, samples: int = 20, radius: float | None = None,
                        seed: int = 0) -> float:
    """max distance from F(z) to the image leaf through F(x), over leaf points z.

    Sample graph coordinates are drawn in a box of half-width ``radius``
    around the base point's graph coordinates.
    """
    maps = leaf.maps
    rng = np.random.default_rng(seed)
    if radius is None:
        radius = 0.5 * float(np.abs(leaf.x).max()) + 1e-2
    Y = leaf.base_coords() + rng.uniform(-radius, radius, size=(samples, leaf.graph.size))
    Z = leaf.chart(Y)
    FZ = maps.F(0, Z)
    image = leaf.shifted_leaf(maps.F(0, leaf.x[None])[0])
    back = image.chart(FZ[:, image.graph])
    return float(np.abs(back - FZ).max())


def graph_projection_defect(sol: LPSolution, cfg_graph: np.ndarray) -> float:
    """|graph part of first - (y - graph part of x)|, structurally zero."""
    x0 = sol.base[-sol.n0]
    return float(np.abs(sol.first[:, cfg_graph] - (sol.y - x0[:, cfg_graph])).max())
