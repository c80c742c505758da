"""Numerical construction and verification of C^1 linearizations of
hyperbolic fixed points of random dynamical systems."""

__version__ = "0.1.0"

from .driving import DrivingSystem, OmegaOrbit, make_driving, orbit
from .system import RandomMapSystem, extend, iterate, load_system, make_system

__all__ = [
    "DrivingSystem", "OmegaOrbit", "make_driving", "orbit",
    "RandomMapSystem", "extend", "iterate", "load_system", "make_system",
]
