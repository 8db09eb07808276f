"""Euler-Maruyama path engine.

Every path owns a counter-based Gaussian stream addressed by
``(master seed, path index, step)``, so a path's increments do not depend on
which worker simulates it or in which order. Paths are processed in
fixed-size blocks whose boundaries depend only on the path count; outputs
land in per-path slots and are reduced in path order, which makes every
result independent of the worker count.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from . import _kernels as K_
from .errors import DimensionMismatchError, InvalidParameterError, NonFiniteStateError
from .models import CoefficientSet
from .symmetry import BarrierContract

log = logging.getLogger(__name__)

BLOCK = 1 << 14
CHUNK = 1 << 20
_LDS_BUDGET = 1 << 23  # Gaussian draws materialized per low-discrepancy chunk
_NO_NORMALS = np.empty((0, 1, 2))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform net ``t_k = k T / n``."""

    maturity: float
    steps: int

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise InvalidParameterError(f"time steps n must be >= 1, got {self.steps}")
        if not self.maturity > 0:
            raise InvalidParameterError(f"maturity T must be > 0, got {self.maturity}")

    @property
    def dt(self) -> float:
        return self.maturity / self.steps

    @property
    def times(self) -> np.ndarray:
        return self.maturity * np.arange(self.steps + 1) / self.steps


def _key(seed: int) -> tuple[np.uint64, np.uint64]:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise InvalidParameterError(f"seed must fit in 64 unsigned bits, got {seed}")
    return np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32)


@dataclass(frozen=True)
class PathStream:
    """Gaussian stream of one path."""

    seed: int
    index: int

    def normals(self, steps: int) -> np.ndarray:
        """Standard normal pairs ``(dW, dB)`` for steps 0..steps-1, shape (steps, 2)."""
        out = np.empty((1, steps, 2))
        k0, k1 = _key(self.seed)
        K_.normals_block(k0, k1, steps, self.index, out)
        return out[0]

    def increments(self, grid: TimeGrid) -> np.ndarray:
        return self.normals(grid.steps) * math.sqrt(grid.dt)


def gaussian_increment(stream: PathStream, k: int) -> float:
    """Standard normal driving the price equation at step ``k`` of ``stream``."""
    if k < 0:
        raise InvalidParameterError(f"step index must be >= 0, got {k}")
    k0, k1 = _key(stream.seed)
    return K_.normal_pair(k0, k1, k, stream.index)[0]


@dataclass(frozen=True)
class PathOutcome:
    x: float
    v: float
    survived: bool


@dataclass
class Batch:
    """Terminal states of a contiguous range of paths."""

    x: np.ndarray
    v: np.ndarray
    alive: np.ndarray


def _monitor(contract: BarrierContract | None) -> tuple[int, float, float]:
    if contract is None:
        return K_.MON_NONE, 0.0, 0.0
    if contract.is_double:
        return K_.MON_CORRIDOR, contract.barrier, contract.width
    return K_.MON_DOWN, contract.barrier, 0.0


def _normals_arg(normals, steps: int) -> np.ndarray:
    if normals is None:
        return _NO_NORMALS
    arr = np.ascontiguousarray(normals, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.shape[1:] != (steps, 2):
        raise InvalidParameterError(f"normals must have shape (paths, {steps}, 2), got {arr.shape}")
    return arr


def _check_dim(coeffs: CoefficientSet, v0) -> float:
    if coeffs.dimension == 2 and v0 is None:
        raise DimensionMismatchError("2-D coefficients need an initial volatility state v0")
    return 0.0 if v0 is None else float(v0)


def simulate_batch(
    coeffs: CoefficientSet,
    x0: float,
    v0: float | None,
    grid: TimeGrid,
    *,
    seed: int,
    first_path: int = 0,
    n_paths: int = 1,
    contract: BarrierContract | None = None,
    normals: np.ndarray | None = None,
    workers: int = 1,
    pool: ThreadPoolExecutor | None = None,
) -> Batch:
    """Simulate paths ``first_path .. first_path + n_paths - 1``.

    With ``contract`` the paths are monitored on the grid and stop at the
    first knock-out; otherwise only the terminal state is kept. ``normals``
    overrides the built-in streams with explicit draws of shape
    ``(n_paths, n, 2)``.
    """
    v0 = _check_dim(coeffs, v0)
    mon, K, Kp = _monitor(contract)
    if contract is None:
        K, Kp = coeffs.barrier, coeffs.width
    elif coeffs.transform != K_.T_NONE:
        raise InvalidParameterError("barrier monitoring uses the original, untransformed coefficients")
    ext = _normals_arg(normals, grid.steps)
    if ext.shape[0] and ext.shape[0] != n_paths:
        raise InvalidParameterError("normals must supply exactly one row per path")
    k0, k1 = _key(seed)
    out = Batch(np.empty(n_paths), np.empty(n_paths), np.empty(n_paths, dtype=np.bool_))

    def run(lo: int) -> int:
        hi = min(lo + BLOCK, n_paths)
        return K_.simulate_block(
            coeffs.code, coeffs.params, coeffs.dimension, coeffs.transform, K, Kp, mon,
            float(x0), v0, grid.maturity, grid.steps, k0, k1, first_path + lo,
            ext[lo:hi] if ext.shape[0] else ext,
            out.x[lo:hi], out.v[lo:hi], out.alive[lo:hi],
        )

    starts = range(0, n_paths, BLOCK)
    if pool is not None:
        bad = sum(pool.map(run, starts))
    elif workers > 1 and n_paths > BLOCK:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            bad = sum(ex.map(run, starts))
    else:
        bad = sum(run(lo) for lo in starts)
    if bad:
        raise NonFiniteStateError(
            f"{bad} of {n_paths} paths produced a non-finite state "
            f"(paths {first_path}..{first_path + n_paths - 1}, n={grid.steps}); coefficients blew up"
        )
    return out


def simulate_terminal(coeffs: CoefficientSet, x0: float, v0: float | None, grid: TimeGrid,
                      stream: PathStream | np.ndarray) -> PathOutcome:
    """Terminal Euler iterate of one path; ``survived`` is vacuously true.

    ``stream`` is either a ``PathStream`` or explicit standard normals of
    shape ``(n, 2)``.
    """
    if isinstance(stream, PathStream):
        b = simulate_batch(coeffs, x0, v0, grid, seed=stream.seed, first_path=stream.index)
    else:
        b = simulate_batch(coeffs, x0, v0, grid, seed=0, normals=stream)
    return PathOutcome(float(b.x[0]), float(b.v[0]), True)


def simulate_pathwise(coeffs: CoefficientSet, x0: float, v0: float | None, contract: BarrierContract,
                      grid: TimeGrid, stream: PathStream | np.ndarray) -> PathOutcome:
    """One grid-monitored path; stops at the first grid point outside the alive region."""
    if isinstance(stream, PathStream):
        b = simulate_batch(coeffs, x0, v0, grid, seed=stream.seed, first_path=stream.index, contract=contract)
    else:
        b = simulate_batch(coeffs, x0, v0, grid, seed=0, normals=stream, contract=contract)
    return PathOutcome(float(b.x[0]), float(b.v[0]), bool(b.alive[0]))


def simulate_path(coeffs: CoefficientSet, x0: float, v0: float | None, grid: TimeGrid,
                  stream: PathStream | np.ndarray) -> np.ndarray:
    """All grid iterates of one path, shape ``(n+1, 2)`` holding ``(x, v)``."""
    v0 = _check_dim(coeffs, v0)
    out = np.empty((grid.steps + 1, 2))
    if isinstance(stream, PathStream):
        k0, k1 = _key(stream.seed)
        ext, index = _NO_NORMALS, stream.index
    else:
        k0, k1 = _key(0)
        ext, index = _normals_arg(stream, grid.steps), 0
    K_.simulate_trajectory(coeffs.code, coeffs.params, coeffs.dimension, coeffs.transform,
                           coeffs.barrier, coeffs.width, float(x0), v0, grid.maturity, grid.steps,
                           k0, k1, index, ext, out)
    return out


class SobolNormals:
    """Scrambled Sobol points mapped to Gaussian increments.

    Dimension ``2k`` drives dW at step k and ``2k+1`` drives dB, so the first
    coordinates carry the coarsest time steps. 1-D models only consume the
    even coordinates, which are then the only ones generated.
    """

    def __init__(self, steps: int, dimension: int, seed: int):
        self.steps = steps
        self.width = 2 if dimension == 2 else 1
        self._engine = qmc.Sobol(d=steps * self.width, scramble=True, rng=np.random.default_rng(seed))

    def draw(self, n_paths: int) -> np.ndarray:
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message=".*balance properties.*")
            u = self._engine.random(n_paths)
        z = ndtri(np.clip(u, 1e-16, 1.0 - 1e-16))
        out = np.zeros((n_paths, self.steps, 2))
        out[:, :, : self.width] = z.reshape(n_paths, self.steps, self.width)
        return out


def chunk_bounds(n_paths: int, chunk: int) -> Iterator[tuple[int, int]]:
    for lo in range(0, n_paths, chunk):
        yield lo, min(lo + chunk, n_paths)


def lds_chunk(steps: int) -> int:
    c = max(1, _LDS_BUDGET // (2 * steps))
    return 1 << (c.bit_length() - 1)
