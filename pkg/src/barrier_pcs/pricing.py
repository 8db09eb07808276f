"""Monte-Carlo barrier estimators and closed-form oracles.

Prices are undiscounted expectations ``E[(X_T - S)^+ 1{no knock-out}]``;
the rate only enters through the drift.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy.special import ndtr

from .engine import CHUNK, SobolNormals, TimeGrid, chunk_bounds, lds_chunk, simulate_batch
from .errors import DomainError, InvalidParameterError
from .models import Model1D, SvModel, coefficients
from .symmetry import (
    BarrierContract,
    fold_double,
    symmetrize_single_1d,
    symmetrize_single_sv,
)

RngMode = Literal["pseudo", "lds"]


@dataclass(frozen=True)
class McConfig:
    steps: int = 100
    trials: int = 1_000_000
    seed: int = 0
    workers: int = 1
    rng: RngMode = "pseudo"

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise InvalidParameterError(f"time steps n must be >= 1, got {self.steps}")
        if self.trials < 1:
            raise InvalidParameterError(f"trials M must be >= 1, got {self.trials}")
        if self.workers < 1:
            raise InvalidParameterError(f"workers must be >= 1, got {self.workers}")
        if self.rng not in ("pseudo", "lds"):
            raise InvalidParameterError(f"rng mode must be 'pseudo' or 'lds', got {self.rng!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidParameterError(f"seed must fit in 64 unsigned bits, got {self.seed}")


@dataclass(frozen=True)
class PriceEstimate:
    mean: float
    stderr: float
    trials: int
    steps: int
    elapsed: float = 0.0


class _Moments:
    """Streaming mean/variance; chunks are merged in a fixed order."""

    def __init__(self) -> None:
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def add(self, values: np.ndarray) -> None:
        k = values.size
        if k == 0:
            return
        mu = float(values.mean())
        m2 = float(np.square(values - mu).sum())
        n = self.n + k
        delta = mu - self.mean
        self.mean += delta * k / n
        self.m2 += m2 + delta * delta * self.n * k / n
        self.n = n

    def stderr(self) -> float:
        if self.n < 2:
            return 0.0
        return math.sqrt(max(self.m2, 0.0) / (self.n - 1) / self.n)


def _estimate(coeffs, model, grid: TimeGrid, cfg: McConfig, payoff: Callable,
              contract: BarrierContract | None) -> PriceEstimate:
    t0 = time.perf_counter()
    acc = _Moments()
    sobol = None
    chunk = CHUNK
    if cfg.rng == "lds":
        if contract is not None:
            raise InvalidParameterError("low-discrepancy mode is only available for path-independent estimators")
        sobol = SobolNormals(grid.steps, coeffs.dimension, cfg.seed)
        chunk = lds_chunk(grid.steps)
    v0 = model.v0 if coeffs.dimension == 2 else None
    pool_cm = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else nullcontext()
    with pool_cm as pool:
        for lo, hi in chunk_bounds(cfg.trials, chunk):
            normals = sobol.draw(hi - lo) if sobol is not None else None
            batch = simulate_batch(
                coeffs, model.x0, v0, grid, seed=cfg.seed, first_path=lo, n_paths=hi - lo,
                contract=contract, normals=normals, pool=pool,
            )
            acc.add(payoff(batch))
    return PriceEstimate(acc.mean, acc.stderr(), cfg.trials, cfg.steps, time.perf_counter() - t0)


def price_pathwise(model: Model1D | SvModel, contract: BarrierContract, cfg: McConfig) -> PriceEstimate:
    """Grid-monitored Euler estimator: mean of ``f(X_T^n) 1{alive at every t_k}``.

    A start outside the alive region is knocked out at k = 0 and prices 0.
    """
    grid = TimeGrid(contract.maturity, cfg.steps)

    def payoff(b):
        return np.where(b.alive, contract.payoff(b.x), 0.0)

    return _estimate(coefficients(model), model, grid, cfg, payoff, contract)


def price_pcs(model: Model1D | SvModel, contract: BarrierContract, cfg: McConfig) -> PriceEstimate:
    """Down-and-out price from terminal draws of the reflected process.

    No barrier is monitored: the estimator averages
    ``f(X) 1{X > K} - f(2K - X) 1{X < K}`` over terminal values.
    """
    if contract.is_double:
        return price_pcs_double(model, contract, cfg)
    contract.check_start(model.x0)
    base = coefficients(model)
    if base.dimension == 2:
        sym = symmetrize_single_sv(base, contract.barrier)
    else:
        sym = symmetrize_single_1d(base, contract.barrier)
    grid = TimeGrid(contract.maturity, cfg.steps)
    return _estimate(sym, model, grid, cfg, lambda b: sym.reflected_payoff(contract.payoff, b.x), None)


def price_pcs_double(model: Model1D | SvModel, contract: BarrierContract, cfg: McConfig) -> PriceEstimate:
    """Corridor knock-out price from terminal draws of the folded process."""
    if not contract.is_double:
        raise InvalidParameterError("price_pcs_double needs a corridor contract (width set)")
    contract.check_start(model.x0)
    sym = fold_double(coefficients(model), contract.barrier, contract.width)
    grid = TimeGrid(contract.maturity, cfg.steps)
    return _estimate(sym, model, grid, cfg, lambda b: sym.reflected_payoff(contract.payoff, b.x), None)


def norm_cdf(z):
    """Standard normal distribution function."""
    out = ndtr(np.asarray(z, dtype=float))
    return float(out) if out.ndim == 0 else out


def _norm_pdf(z: float) -> float:
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def bs_barrier_exact(x0: float, S: float, K: float, sigma: float, r: float, T: float) -> float:
    """Undiscounted down-and-out call under Black-Scholes, strike S >= barrier K."""
    if not (x0 > K > 0 and sigma > 0 and T > 0 and S > 0 and r >= 0):
        raise DomainError(f"need x0 > K > 0, sigma > 0, T > 0, S > 0, r >= 0; got x0={x0}, K={K}, "
                          f"sigma={sigma}, T={T}, S={S}, r={r}")
    if S < K:
        raise DomainError(f"the image formula needs strike S >= barrier K, got S={S}, K={K}")
    sd = sigma * math.sqrt(T)

    def vanilla(x: float) -> float:
        d_plus = (math.log(S / x) - (r + 0.5 * sigma * sigma) * T) / sd
        d_minus = (math.log(S / x) - (r - 0.5 * sigma * sigma) * T) / sd
        return x * math.exp(r * T) * norm_cdf(-d_plus) - S * norm_cdf(-d_minus)

    power = 2.0 * r / (sigma * sigma) - 1.0
    return vanilla(x0) - (K / x0) ** power * vanilla(K * K / x0)


def bs_call_undiscounted(x0: float, S: float, sigma: float, r: float, T: float) -> float:
    """``E[(X_T - S)^+]`` for geometric Brownian motion with drift r."""
    sd = sigma * math.sqrt(T)
    fwd = x0 * math.exp(r * T)
    d1 = (math.log(fwd / S) + 0.5 * sd * sd) / sd
    return fwd * norm_cdf(d1) - S * norm_cdf(d1 - sd)


def bachelier_call(x: float, S: float, sigma: float, T: float) -> float:
    """``E[(x + sigma W_T - S)^+]``."""
    sd = sigma * math.sqrt(T)
    if sd == 0:
        return max(x - S, 0.0)
    d = (x - S) / sd
    return (x - S) * norm_cdf(d) + sd * _norm_pdf(d)


def _bachelier_tail(x: float, S: float, K: float, sigma: float, T: float) -> float:
    # E[(X_T - S)^+ 1{X_T > K}] with X_T = x + sigma W_T
    s_eff = max(S, K)
    sd = sigma * math.sqrt(T)
    if sd == 0:
        prob = 1.0 if x > s_eff else 0.0
    else:
        prob = norm_cdf((x - s_eff) / sd)
    return bachelier_call(x, s_eff, sigma, T) + (s_eff - S) * prob


def bachelier_barrier_exact(x0: float, S: float, K: float, sigma: float, T: float) -> float:
    """Down-and-out call on arithmetic Brownian motion via the reflection principle."""
    if not (x0 > K and sigma >= 0 and T > 0):
        raise DomainError(f"need x0 > K, sigma >= 0, T > 0; got x0={x0}, K={K}, sigma={sigma}, T={T}")
    # the reflected leg pays (2K - X_T - S)^+ on {X_T < K}; 2K - X_T is again Bachelier from 2K - x0
    return _bachelier_tail(x0, S, K, sigma, T) - _bachelier_tail(2.0 * K - x0, S, K, sigma, T)


def relative_error(estimate: float, truth: float) -> float:
    if truth == 0:
        raise ZeroDivisionError("relative error against a zero reference price")
    return abs(estimate - truth) / abs(truth)
