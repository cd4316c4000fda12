"""Desk-scale decentralized matrix-completion simulator.

Dense kernels live in a compiled extension when available; see
dmcsim.linalg.BACKEND for which backend was selected at import.
"""

from .linalg import BACKEND

__all__ = ["BACKEND"]
__version__ = "0.1.0"
