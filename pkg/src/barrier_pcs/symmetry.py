"""Barrier reflection of coefficients and payoffs.

A down barrier K is handled by reflecting the coefficients through K so the
modified process is symmetric about K in law; the knock-out price is then a
difference of two terminal expectations. A corridor (K, K+K') is handled by
folding the coefficients periodically with period 2K', which gives the same
symmetry at both edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels as K_
from .errors import DimensionMismatchError, InvalidParameterError
from .models import CoefficientSet


@dataclass(frozen=True)
class BarrierContract:
    """Vanilla call with strike ``strike`` knocked out at ``barrier``.

    With ``width`` set the contract is a double knock-out on the corridor
    ``(barrier, barrier + width)``; otherwise it is a down-and-out call.
    """

    strike: float
    barrier: float
    maturity: float = 1.0
    width: float | None = None

    def __post_init__(self) -> None:
        if not (self.maturity > 0 and math.isfinite(self.maturity)):
            raise InvalidParameterError(f"maturity T must be > 0, got {self.maturity}")
        if not (self.strike > 0 and math.isfinite(self.strike)):
            raise InvalidParameterError(f"strike S must be > 0, got {self.strike}")
        if not math.isfinite(self.barrier):
            raise InvalidParameterError(f"barrier K must be finite, got {self.barrier}")
        if self.width is not None and not (self.width > 0 and math.isfinite(self.width)):
            raise InvalidParameterError(f"corridor width K' must be > 0, got {self.width}")

    @property
    def is_double(self) -> bool:
        return self.width is not None

    @property
    def upper(self) -> float:
        return math.inf if self.width is None else self.barrier + self.width

    def alive(self, x: float) -> bool:
        return self.barrier < x < self.upper

    def check_start(self, x0: float) -> None:
        if not self.alive(x0):
            where = f"({self.barrier}, {self.upper})" if self.is_double else f"above {self.barrier}"
            raise InvalidParameterError(f"x0 = {x0} must lie {where}")

    def payoff(self, x):
        return np.maximum(np.asarray(x, dtype=float) - self.strike, 0.0)


def call_payoff(strike: float) -> Callable:
    return lambda x: np.maximum(np.asarray(x, dtype=float) - strike, 0.0)


@dataclass(frozen=True, eq=False)
class SymmetrizedCoefficients(CoefficientSet):
    """Barrier-transformed coefficients of ``base``.

    V coefficients are inherited untouched; only the X diffusion and drift
    are reflected (single barrier) or folded (corridor).
    """

    base: CoefficientSet | None = None
    geometry: str = "single"

    def reflected_payoff(self, f: Callable, x):
        if self.geometry == "double":
            return unfold_payoff_double(f, self.barrier, self.width, x)
        return reflect_payoff_single(f, self.barrier, x)


def _derive(coeffs: CoefficientSet, transform: int, K: float, width: float, geometry: str):
    if getattr(coeffs, "transform", K_.T_NONE) != K_.T_NONE:
        raise InvalidParameterError("coefficients are already barrier-transformed")
    return SymmetrizedCoefficients(
        coeffs.dimension, coeffs.code, coeffs.params.copy(), transform, float(K), float(width),
        base=coeffs, geometry=geometry,
    )


def symmetrize_single_1d(coeffs: CoefficientSet, K: float) -> SymmetrizedCoefficients:
    """Reflect a 1-D diffusion through K.

    Below or at K the diffusion is ``sigma(2K - x)`` and the drift is
    ``-mu(2K - x)``; above K both are unchanged.
    """
    if coeffs.dimension != 1:
        raise DimensionMismatchError("symmetrize_single_1d needs 1-D coefficients")
    return _derive(coeffs, K_.T_SINGLE_1D, K, 0.0, "single")


def symmetrize_single_sv(coeffs: CoefficientSet, K: float) -> SymmetrizedCoefficients:
    """Reflect the price component of an SV model through K.

    Below K both ``sigma11`` and ``mu1`` are replaced by the negated value at
    ``(2K - x, v)``. The volatility equation is left alone.
    """
    if coeffs.dimension != 2:
        raise DimensionMismatchError("symmetrize_single_sv needs 2-D coefficients")
    return _derive(coeffs, K_.T_SINGLE_SV, K, 0.0, "single")


def fold_double(coeffs: CoefficientSet, K: float, Kprime: float) -> SymmetrizedCoefficients:
    """Periodic fold of the price coefficients onto the corridor [K, K+K').

    With band index ``m = floor((x - K) / K')``, even bands translate by
    ``m K'`` and odd bands reflect to ``2K - (x - (m+1) K')`` with a sign flip.
    This is the closed form of the two-sided infinite image series.
    """
    if not Kprime > 0:
        raise InvalidParameterError(f"corridor width K' must be > 0, got {Kprime}")
    return _derive(coeffs, K_.T_DOUBLE, K, Kprime, "double")


def reflect_payoff_single(f: Callable, K: float, x):
    """``f(x) 1{x > K} - f(2K - x) 1{x < K}``; zero at ``x == K``."""
    x = np.asarray(x, dtype=float)
    upper = np.where(x > K, f(np.where(x > K, x, K)), 0.0)
    lower = np.where(x < K, f(np.where(x < K, 2.0 * K - x, K)), 0.0)
    out = upper - lower
    return float(out) if out.ndim == 0 else out


def fold_points(K: float, Kprime: float, x):
    """Band index, mapped argument in [K, K+K') and sign of the fold."""
    x = np.asarray(x, dtype=float)
    m = np.floor((x - K) / Kprime)
    odd = np.mod(m, 2.0) == 1.0
    mapped = np.where(odd, 2.0 * K - (x - (m + 1.0) * Kprime), x - m * Kprime)
    return m, mapped, np.where(odd, -1.0, 1.0)


def unfold_payoff_double(f: Callable, K: float, Kprime: float, x):
    """Payoff of the folded process that reproduces the corridor knock-out price.

    Even bands pay ``f(x - m K')``, odd bands pay ``-f(2K - (x - (m+1) K'))``.
    """
    if not Kprime > 0:
        raise InvalidParameterError(f"corridor width K' must be > 0, got {Kprime}")
    _, mapped, sign = fold_points(K, Kprime, x)
    out = sign * f(mapped)
    return float(out) if np.ndim(out) == 0 else out
