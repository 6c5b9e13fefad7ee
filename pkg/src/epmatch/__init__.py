"""Controlled Lagrangians for Euler-Poincare systems on SE(3) x| R^4."""

from ._backend import BACKEND

__version__ = "0.1.0"
