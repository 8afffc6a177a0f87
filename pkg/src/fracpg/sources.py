"""Catalog of temporal source terms with closed-form slab integrals.

The solvers only ever need two things from a time-dependent source: its
pointwise values (for reference convolutions) and its exact integrals over
mesh cells (for load assembly).  Restricting to a small catalog keeps both
available in closed form, so no quadrature error enters the right-hand side.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "Constant",
    "Exp",
    "ExpMinusOne",
    "Sin",
    "Power",
    "TimeSource",
    "source_values",
    "source_slab_integrals",
    "source_label",
]


@dataclass(frozen=True)
class Constant:
    """f(t) = value."""

    value: float = 1.0


@dataclass(frozen=True)
class Exp:
    """f(t) = exp(t)."""


@dataclass(frozen=True)
class ExpMinusOne:
    """f(t) = exp(t) - 1 (vanishes at t = 0)."""


@dataclass(frozen=True)
class Sin:
    """f(t) = sin(t)."""


@dataclass(frozen=True)
class Power:
    """f(t) = t**exponent with exponent > -1 (integrable at zero)."""

    exponent: float

    def __post_init__(self) -> None:
        if not self.exponent > -1.0:
            raise ValueError(
                f"power source needs exponent > -1, got {self.exponent}"
            )


TimeSource = Union[Constant, Exp, ExpMinusOne, Sin, Power]


def source_values(source: TimeSource, t):
    """Evaluate the source at scalar or array times."""
    t = np.asarray(t, dtype=float)
    if isinstance(source, Constant):
        return np.full_like(t, source.value)
    if isinstance(source, Exp):
        return np.exp(t)
    if isinstance(source, ExpMinusOne):
        return np.expm1(t)
    if isinstance(source, Sin):
        return np.sin(t)
    if isinstance(source, Power):
        with np.errstate(divide="ignore"):
            return t**source.exponent
    raise ValueError(f"unknown time source {source!r}")


def source_slab_integrals(source: TimeSource, edges: np.ndarray) -> np.ndarray:
    """Exact integrals of the source over consecutive cells ``[e_l, e_{l+1}]``."""
    edges = np.asarray(edges, dtype=float)
    if isinstance(source, Constant):
        return source.value * np.diff(edges)
    if isinstance(source, Exp):
        return np.diff(np.exp(edges))
    if isinstance(source, ExpMinusOne):
        # antiderivative e^t - t, written with expm1 to keep small cells exact
        return np.diff(np.expm1(edges) - edges)
    if isinstance(source, Sin):
        return -np.diff(np.cos(edges))
    if isinstance(source, Power):
        g = source.exponent
        return np.diff(edges ** (g + 1.0)) / (g + 1.0)
    raise ValueError(f"unknown time source {source!r}")


def source_label(source: TimeSource) -> str:
    """Short human-readable tag used in reports."""
    if isinstance(source, Constant):
        return f"const({source.value:g})"
    if isinstance(source, Exp):
        return "exp(t)"
    if isinstance(source, ExpMinusOne):
        return "exp(t)-1"
    if isinstance(source, Sin):
        return "sin(t)"
    if isinstance(source, Power):
        return f"t^{source.exponent:g}"
    raise ValueError(f"unknown time source {source!r}")
