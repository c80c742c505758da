"""Driving systems and reproducible samples of their orbits.

Three kinds are supported: the identity (deterministic maps), a circle
rotation by a fixed fraction of a turn, and a Bernoulli shift on a finite
alphabet.  Every state is reduced to an integer *symbol* that selects the
linear part and the nonlinearity scale of a system; rotation states also
carry their angle.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

_CHUNK = 1024


class DrivingError(ValueError):
    pass


@dataclass(frozen=True)
class DrivingSystem:
    kind: str = "identity"
    angle: float = 0.0
    alphabet: int = 1
    probabilities: tuple = (1.0,)
    seed: int = 0
    offset: int = 0  # position of the base state along the underlying orbit
    n_symbols: int = 1  # arcs used to turn a rotation angle into a symbol

    def advanced(self, k: int) -> "DrivingSystem":
        """The same driving system started at theta^k(omega)."""
        return DrivingSystem(self.kind, self.angle, self.alphabet, self.probabilities,
                             self.seed, self.offset + int(k), self.n_symbols)

    # states -----------------------------------------------------------
    def state(self, n: int):
        if self.kind == "identity":
            return 0.0
        if self.kind == "rotation":
            return _rotation_angle(self.seed, self.angle, self.offset + n)
        return int(self.symbols(n, n + 1)[0])

    def symbols(self, n0: int, n1: int) -> np.ndarray:
        """Symbols of theta^n(omega) for n0 <= n < n1."""
        if n1 <= n0:
            return np.zeros(0, dtype=np.int64)
        if self.kind == "identity":
            return np.zeros(n1 - n0, dtype=np.int64)
        if self.kind == "rotation":
            n = np.arange(self.offset + n0, self.offset + n1, dtype=float)
            ang = (_rotation_base(self.seed) + n * self.angle) % 1.0
            return np.minimum((ang * self.n_symbols).astype(np.int64), self.n_symbols - 1)
        return _bernoulli_window(self.seed, self.probabilities,
                                 self.offset + n0, self.offset + n1)

    @property
    def symbol_count(self) -> int:
        if self.kind == "bernoulli":
            return self.alphabet
        if self.kind == "rotation":
            return self.n_symbols
        return 1

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "seed": self.seed}
        if self.kind == "rotation":
            out.update(angle=self.angle, n_symbols=self.n_symbols)
        if self.kind == "bernoulli":
            out.update(alphabet=self.alphabet, probabilities=list(self.probabilities))
        return out


@lru_cache(maxsize=64)
def _rotation_base(seed: int) -> float:
    return float(np.random.default_rng(seed).random())


def _rotation_angle(seed: int, angle: float, n: int) -> float:
    return float((_rotation_base(seed) + n * angle) % 1.0)


@lru_cache(maxsize=4096)
def _bernoulli_chunk(seed: int, probs: tuple, chunk: int) -> np.ndarray:
    # chunk index is mapped to a non-negative key so negative positions work
    key = 2 * chunk if chunk >= 0 else -2 * chunk - 1
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, key])
    out = rng.choice(len(probs), size=_CHUNK, p=np.asarray(probs))
    out.setflags(write=False)
    return out


def _bernoulli_window(seed: int, probs: tuple, a: int, b: int) -> np.ndarray:
    c0, c1 = a // _CHUNK, (b - 1) // _CHUNK
    parts = [_bernoulli_chunk(seed, probs, c) for c in range(c0, c1 + 1)]
    whole = np.concatenate(parts)
    start = a - c0 * _CHUNK
    return whole[start:start + (b - a)].astype(np.int64)


def make_driving(kind: str = "identity", *, angle: float = 0.0, alphabet: int = 1,
                 probabilities=None, seed: int = 0, n_symbols: int = 1) -> DrivingSystem:
    """Validate and build a driving system."""
    seed = int(seed)
    if kind == "identity":
        return DrivingSystem("identity", seed=seed)
    if kind == "rotation":
        if not 0.0 <= angle < 1.0:
            raise DrivingError(f"rotation angle {angle} outside [0, 1)")
        if n_symbols < 1:
            raise DrivingError("n_symbols must be positive")
        return DrivingSystem("rotation", angle=float(angle), seed=seed, n_symbols=int(n_symbols))
    if kind == "bernoulli":
        if alphabet < 1:
            raise DrivingError("alphabet size must be positive")
        if probabilities is None:
            probabilities = [1.0 / alphabet] * alphabet
        p = np.asarray(probabilities, dtype=float)
        if p.shape != (alphabet,):
            raise DrivingError(f"expected {alphabet} probabilities, got {p.size}")
        if np.any(p < 0):
            raise DrivingError("probabilities must be non-negative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise DrivingError(f"probabilities do not sum to 1 (sum = {p.sum():.15g})")
        return DrivingSystem("bernoulli", alphabet=int(alphabet),
                             probabilities=tuple(float(v) for v in p), seed=seed)
    raise DrivingError(f"unknown driving kind {kind!r}")


def driving_from_dict(spec: dict) -> DrivingSystem:
    spec = dict(spec or {"kind": "identity"})
    kind = spec.pop("kind", "identity")
    return make_driving(kind, **spec)


@dataclass
class OmegaOrbit:
    """Window of a driving orbit, indexed by n in [-N, N].

    ``states[origin + n]`` is theta^n(omega).  Requests outside the window are
    served by extending lazily from the driving system, so the same object can
    feed long cocycle computations.
    """

    driving: DrivingSystem
    N: int
    states: list = field(default_factory=list)
    origin: int = 0

    def symbol(self, n: int) -> int:
        return int(self.driving.symbols(n, n + 1)[0])

    def symbols(self, n0: int, n1: int) -> np.ndarray:
        return self.driving.symbols(n0, n1)

    def shifted(self, k: int) -> "OmegaOrbit":
        return orbit(self.driving.advanced(k), self.N)

    def state(self, n: int):
        if -self.N <= n <= self.N:
            return self.states[self.origin + n]
        return self.driving.state(n)


def orbit(driving: DrivingSystem, N: int) -> OmegaOrbit:
    if N < 1:
        raise DrivingError("orbit half-width must be at least 1")
    if driving.kind == "bernoulli":
        states = [int(s) for s in driving.symbols(-N, N + 1)]
    else:
        states = [driving.state(n) for n in range(-N, N + 1)]
    return OmegaOrbit(driving=driving, N=N, states=states, origin=N)
