"""Drift and diffusion coefficients for the supported price models.

One-dimensional models follow ``dX = sigma(X) dW + mu(X) dt``. Stochastic
volatility models follow

    dX = sigma11(X, V) dW + mu1(X, V) dt
    dV = sigma21(V) dW + sigma22(V) dB + mu2(V) dt

with W and B independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import _kernels as K_
from .errors import DimensionMismatchError, InvalidParameterError

Kind1D = Literal["bs", "cev", "abm"]
KindSV = Literal["heston", "lambda_sabr"]


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise InvalidParameterError(msg)


def _finite(**values: float) -> None:
    for name, val in values.items():
        _require(math.isfinite(val), f"{name} must be finite, got {val!r}")


@dataclass(frozen=True)
class Model1D:
    """Black-Scholes, CEV or arithmetic Brownian motion.

    ``beta`` is only read for CEV; Black-Scholes is the ``beta == 1`` member
    of the same family.
    """

    kind: Kind1D = "bs"
    r: float = 0.0
    sigma: float = 0.2
    beta: float = 1.0
    x0: float = 100.0

    def __post_init__(self) -> None:
        _require(self.kind in ("bs", "cev", "abm"), f"unknown 1-D model kind {self.kind!r}")
        _finite(r=self.r, sigma=self.sigma, beta=self.beta, x0=self.x0)
        _require(self.r >= 0, f"rate r must be >= 0, got {self.r}")
        _require(self.sigma >= 0, f"volatility sigma must be >= 0, got {self.sigma}")
        if self.kind == "bs":
            _require(self.beta == 1.0, "Black-Scholes has beta = 1; use kind='cev' for other elasticities")
        if self.kind == "abm":
            _require(self.r == 0.0, "arithmetic Brownian motion has no drift; r must be 0")
        if self.kind == "cev":
            _require(self.beta >= 0.5, f"CEV elasticity beta must be >= 1/2, got {self.beta}")

    @property
    def dimension(self) -> int:
        return 1

    @property
    def v0(self) -> float:
        return 0.0


@dataclass(frozen=True)
class SvModel:
    """Heston (``v0`` is a variance) or lambda-SABR (``v0`` is a volatility).

    ``kappa`` is the mean-reversion speed for both kinds (lambda for SABR).
    """

    kind: KindSV = "heston"
    r: float = 0.0
    kappa: float = 1.0
    theta: float = 0.03
    nu: float = 0.03
    rho: float = -0.7
    beta: float = 1.0
    x0: float = 100.0
    v0: float = 0.03

    def __post_init__(self) -> None:
        _require(self.kind in ("heston", "lambda_sabr"), f"unknown SV model kind {self.kind!r}")
        _finite(r=self.r, kappa=self.kappa, theta=self.theta, nu=self.nu,
                rho=self.rho, beta=self.beta, x0=self.x0, v0=self.v0)
        _require(self.r >= 0, f"rate r must be >= 0, got {self.r}")
        _require(self.kappa > 0, f"mean reversion must be > 0, got {self.kappa}")
        _require(self.theta > 0, f"long-run level theta must be > 0, got {self.theta}")
        _require(self.nu > 0, f"vol of vol nu must be > 0, got {self.nu}")
        _require(abs(self.rho) <= 1, f"correlation rho must lie in [-1, 1], got {self.rho}")
        _require(self.v0 >= 0, f"initial volatility state v0 must be >= 0, got {self.v0}")
        if self.kind == "lambda_sabr":
            _require(self.beta >= 0.5, f"lambda-SABR elasticity beta must be >= 1/2, got {self.beta}")

    @property
    def dimension(self) -> int:
        return 2


def _as_arrays(x, v):
    x_arr, v_arr = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
    shape = x_arr.shape
    return np.ascontiguousarray(x_arr).ravel(), np.ascontiguousarray(v_arr).ravel(), shape


def _shaped(arr: np.ndarray, shape):
    if shape == ():
        return float(arr[0])
    return arr.reshape(shape)


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    """Immutable evaluator of a model's coefficients.

    The X coefficients may be composed with a barrier transform; plain
    model coefficients use no transform. All evaluation goes through the
    same compiled functions the path engine uses.
    """

    dimension: int
    code: int
    params: np.ndarray = field(repr=False)
    transform: int = K_.T_NONE
    barrier: float = 0.0
    width: float = 0.0

    def __post_init__(self) -> None:
        self.params.setflags(write=False)

    def _x(self, x, v):
        xs, vs, shape = _as_arrays(x, v)
        s = np.empty_like(xs)
        m = np.empty_like(xs)
        K_.eval_x_coeffs(self.code, self.params, self.transform, self.barrier, self.width, xs, vs, s, m)
        return _shaped(s, shape), _shaped(m, shape)

    def _v(self, v):
        vs = np.ascontiguousarray(np.asarray(v, dtype=float))
        shape = vs.shape
        vs = vs.ravel()
        a, b, c = np.empty_like(vs), np.empty_like(vs), np.empty_like(vs)
        K_.eval_v_coeffs(self.code, self.params, vs, a, b, c)
        return _shaped(a, shape), _shaped(b, shape), _shaped(c, shape)

    def _need(self, dim: int) -> None:
        if self.dimension != dim:
            raise DimensionMismatchError(f"evaluator needs a {dim}-D coefficient set, this one is {self.dimension}-D")

    # 1-D surface
    def sigma(self, x):
        self._need(1)
        return self._x(x, 0.0)[0]

    def mu(self, x):
        self._need(1)
        return self._x(x, 0.0)[1]

    # 2-D surface; sigma11/mu1 also accept 1-D sets (v is ignored)
    def sigma11(self, x, v=0.0):
        return self._x(x, v)[0]

    def mu1(self, x, v=0.0):
        return self._x(x, v)[1]

    def sigma21(self, v):
        return self._v(v)[0]

    def sigma22(self, v):
        return self._v(v)[1]

    def mu2(self, v):
        return self._v(v)[2]


def _params(r=0.0, a=0.0, b=0.0, c=0.0, d=0.0, beta=1.0) -> np.ndarray:
    return np.array([r, a, b, c, d, beta], dtype=float)


def coefficients_1d(model: Model1D) -> CoefficientSet:
    if not isinstance(model, Model1D):
        raise DimensionMismatchError("coefficients_1d expects a Model1D")
    if model.kind == "abm":
        return CoefficientSet(1, K_.ABM, _params(a=model.sigma))
    beta = 1.0 if model.kind == "bs" else model.beta
    return CoefficientSet(1, K_.POWER, _params(r=model.r, a=model.sigma, beta=beta))


def coefficients_sv(model: SvModel) -> CoefficientSet:
    if not isinstance(model, SvModel):
        raise DimensionMismatchError("coefficients_sv expects an SvModel")
    code = K_.HESTON if model.kind == "heston" else K_.SABR
    beta = model.beta if model.kind == "lambda_sabr" else 1.0
    return CoefficientSet(
        2, code, _params(r=model.r, a=model.kappa, b=model.theta, c=model.nu, d=model.rho, beta=beta)
    )


def coefficients(model: Model1D | SvModel) -> CoefficientSet:
    if isinstance(model, SvModel):
        return coefficients_sv(model)
    return coefficients_1d(model)
