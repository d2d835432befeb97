"""Perturbed time-frequency point sequences and their Bargmann-Fock generating functions."""

__version__ = "0.1.0"

from .errors import FockLabError, NumericResourceError, WindowError  # noqa: F401
