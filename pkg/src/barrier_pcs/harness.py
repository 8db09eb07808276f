"""Convergence tables, high-budget benchmarks and their on-disk records."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import warnings
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Literal, TextIO

import numpy as np

from .errors import InvalidParameterError
from .models import Model1D, SvModel
from .pricing import (
    McConfig,
    PriceEstimate,
    bs_barrier_exact,
    price_pathwise,
    price_pcs,
    price_pcs_double,
    relative_error,
)
from .symmetry import BarrierContract
from .verify import verify_properties  # noqa: F401  (re-exported)

log = logging.getLogger(__name__)

DEFAULT_SCHEDULE = tuple(range(10, 101, 10))
CSV_HEADER = ["M", "n", "em_mean", "em_stderr", "pcm_mean", "pcm_stderr", "em_err_pct", "pcm_err_pct"]
BENCHMARK_LIMIT = 10**10  # path-steps before make_benchmark warns

TruthSource = Literal["analytic", "value", "benchmark"]


class BudgetWarning(UserWarning):
    pass


def derive_seed(master: int, *labels: int) -> int:
    """Independent 64-bit seed for one cell of an experiment."""
    words = np.random.SeedSequence(int(master), spawn_key=tuple(int(x) for x in labels)).generate_state(2)
    return int(words[0]) | (int(words[1]) << 32)


@dataclass(frozen=True)
class Experiment:
    """One convergence table: a contract, a truth, and a step schedule.

    ``trials=None`` applies the cube rule M = n**3.
    """

    name: str
    model: Model1D | SvModel
    contract: BarrierContract
    truth_source: TruthSource = "analytic"
    truth: float | None = None
    schedule: tuple[int, ...] = DEFAULT_SCHEDULE
    trials: int | None = None
    seed: int = 0
    benchmark_steps: int = 5000
    benchmark_trials: int = 50_000_000

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.schedule, self.schedule[1:])):
            raise InvalidParameterError(f"step schedule must be strictly increasing, got {self.schedule}")
        if any(n < 1 for n in self.schedule):
            raise InvalidParameterError("step counts must be >= 1")
        if self.trials is not None and self.trials < 1:
            raise InvalidParameterError(f"trials must be >= 1, got {self.trials}")
        if self.truth_source not in ("analytic", "value", "benchmark"):
            raise InvalidParameterError(f"unknown truth source {self.truth_source!r}")
        if self.truth_source == "value" and self.truth is None:
            raise InvalidParameterError("truth_source='value' needs a truth price")
        if self.truth_source == "analytic":
            m = self.model
            if not (isinstance(m, Model1D) and m.kind == "bs" and not self.contract.is_double):
                raise InvalidParameterError("an analytic truth exists only for Black-Scholes down-and-out calls")

    def trials_for(self, steps: int) -> int:
        return steps**3 if self.trials is None else self.trials


@dataclass(frozen=True)
class TableRow:
    trials: int
    steps: int
    em: PriceEstimate
    pcm: PriceEstimate
    em_err: float
    pcm_err: float


def analytic_truth(model: Model1D, contract: BarrierContract) -> float:
    return bs_barrier_exact(model.x0, contract.strike, contract.barrier, model.sigma, model.r, contract.maturity)


def reference_price(exp: Experiment, store: "BenchmarkStore | None" = None, workers: int = 1) -> float:
    if exp.truth_source == "analytic":
        return analytic_truth(exp.model, exp.contract)
    if exp.truth_source == "value":
        return float(exp.truth)
    rec = make_benchmark(exp.model, exp.contract, exp.benchmark_steps, exp.benchmark_trials,
                         seed=derive_seed(exp.seed, 99), store=store, workers=workers)
    return rec.mean


def pcs_estimator(contract: BarrierContract):
    return price_pcs_double if contract.is_double else price_pcs


def run_convergence_table(exp: Experiment, *, workers: int = 1, truth: float | None = None,
                          store: "BenchmarkStore | None" = None) -> list[TableRow]:
    """Both estimators at every schedule entry, each cell on its own derived seed."""
    if not exp.schedule:
        return []
    if truth is None:
        truth = reference_price(exp, store=store, workers=workers)
    pcm_fn = pcs_estimator(exp.contract)
    rows = []
    for n in exp.schedule:
        m = exp.trials_for(n)
        em = price_pathwise(exp.model, exp.contract, McConfig(n, m, derive_seed(exp.seed, 0, n), workers))
        pcm = pcm_fn(exp.model, exp.contract, McConfig(n, m, derive_seed(exp.seed, 1, n), workers))
        log.info("%s n=%d M=%d EM=%.5f PCM=%.5f", exp.name, n, m, em.mean, pcm.mean)
        rows.append(TableRow(m, n, em, pcm, relative_error(em.mean, truth), relative_error(pcm.mean, truth)))
    return rows


def _g6(x: float) -> str:
    return f"{x:.6g}"


def format_table_csv(rows: Iterable[TableRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.trials, r.steps, _g6(r.em.mean), _g6(r.em.stderr), _g6(r.pcm.mean), _g6(r.pcm.stderr),
                    _g6(100 * r.em_err), _g6(100 * r.pcm_err)])
    return buf.getvalue()


def write_table_csv(rows: Iterable[TableRow], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_table_csv(rows))
    return path


# --- benchmarks -------------------------------------------------------------

def _digest(obj) -> str:
    payload = {"type": type(obj).__name__, **asdict(obj)}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def model_hash(model: Model1D | SvModel) -> str:
    return _digest(model)


def contract_hash(contract: BarrierContract) -> str:
    return _digest(contract)


@dataclass(frozen=True)
class BenchmarkRecord:
    model_hash: str
    contract_hash: str
    steps: int
    trials: int
    seed: int
    mean: float
    stderr: float
    timestamp: str = field(default="", compare=False)

    def to_line(self) -> str:
        return ",".join([self.model_hash, self.contract_hash, str(self.steps), str(self.trials), str(self.seed),
                         repr(self.mean), repr(self.stderr), self.timestamp])

    @classmethod
    def from_line(cls, line: str) -> "BenchmarkRecord":
        parts = line.strip().split(",")
        if len(parts) != 8:
            raise ValueError(f"benchmark record needs 8 fields, got {len(parts)}: {line!r}")
        mh, ch, n, m, seed, mean, se, ts = parts
        return cls(mh, ch, int(n), int(m), int(seed), float(mean), float(se), ts)


class BenchmarkStore:
    """Append-only flat file of benchmark records, one per line."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def records(self) -> list[BenchmarkRecord]:
        if not self.path.exists():
            return []
        with self.path.open() as fh:
            return [BenchmarkRecord.from_line(ln) for ln in fh if ln.strip() and not ln.startswith("#")]

    def append(self, rec: BenchmarkRecord) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a") as fh:
            fh.write(rec.to_line() + "\n")

    def find(self, model, contract, steps: int, trials: int) -> BenchmarkRecord | None:
        mh, ch = model_hash(model), contract_hash(contract)
        for rec in reversed(self.records()):
            if (rec.model_hash, rec.contract_hash, rec.steps, rec.trials) == (mh, ch, steps, trials):
                return rec
        return None


def make_benchmark(model: Model1D | SvModel, contract: BarrierContract, steps: int, trials: int, *,
                   seed: int = 0, store: BenchmarkStore | None = None, workers: int = 1,
                   limit: int = BENCHMARK_LIMIT, reuse: bool = True) -> BenchmarkRecord:
    """Path-wise Euler estimate at a large budget, used as truth where no closed form exists."""
    if reuse and store is not None:
        hit = store.find(model, contract, steps, trials)
        if hit is not None:
            return hit
    if steps * trials > limit:
        warnings.warn(f"benchmark budget {steps} x {trials} = {steps * trials:.3g} path-steps exceeds "
                      f"the configured limit {limit:.3g}", BudgetWarning, stacklevel=2)
    est = price_pathwise(model, contract, McConfig(steps, trials, seed, workers))
    rec = BenchmarkRecord(model_hash(model), contract_hash(contract), steps, trials, seed, est.mean, est.stderr,
                          datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"))
    if store is not None:
        store.append(rec)
    return rec


# --- preset experiments ----------------------------------------------

def _bs(sigma, r):
    return Model1D("bs", r=r, sigma=sigma)


def _heston(r, v0=0.03, theta=0.03):
    return SvModel("heston", r=r, kappa=1.0, theta=theta, nu=0.03, rho=-0.7, x0=100.0, v0=v0)


def _sabr(r, v0, theta):
    return SvModel("lambda_sabr", r=r, kappa=1.0, theta=theta, nu=0.3, rho=-0.7, beta=0.75, x0=100.0, v0=v0)


_DOWN = BarrierContract(strike=95.0, barrier=90.0, maturity=1.0)

PRESET_EXPERIMENTS: dict[str, Experiment] = {
    e.name: e
    for e in [
        Experiment("bs-sigma0.2-r0", _bs(0.2, 0.0), _DOWN),
        Experiment("bs-sigma0.2-r0.02", _bs(0.2, 0.02), _DOWN),
        Experiment("bs-sigma0.5-r0", _bs(0.5, 0.0), _DOWN),
        Experiment("bs-sigma0.5-r0.02", _bs(0.5, 0.02), _DOWN),
        Experiment("cev-r0", Model1D("cev", r=0.0, sigma=0.45, beta=0.75), _DOWN, "value", 7.50095),
        Experiment("cev-r0.02", Model1D("cev", r=0.02, sigma=0.45, beta=0.75), _DOWN, "value", 8.82718),
        Experiment("heston-r0", _heston(0.0), _DOWN, "value", 7.92706),
        Experiment("heston-r0.02", _heston(0.02), _DOWN, "value", 9.15602),
        Experiment("sabr-r0", _sabr(0.0, 0.5, 0.03), _DOWN, "value", 6.59534),
        Experiment("sabr-r0.02", _sabr(0.02, 0.5, 0.03), _DOWN, "value", 8.71005),
        Experiment("heston-double", _heston(0.02), BarrierContract(95.0, 85.0, 1.0, width=30.0),
                   "value", 1.40319930),
        Experiment("sabr-double", _sabr(0.02, 0.3, 0.3), BarrierContract(95.0, 90.0, 1.0, width=20.0),
                   "value", 2.46950606),
    ]
}


def print_table(rows: list[TableRow], out: TextIO) -> None:
    out.write(f"{'M':>9} {'n':>5} {'EM':>9} {'PCM':>9} {'EM err%':>8} {'PCM err%':>9}\n")
    for r in rows:
        out.write(f"{r.trials:>9d} {r.steps:>5d} {r.em.mean:>9.4f} {r.pcm.mean:>9.4f} "
                  f"{100 * r.em_err:>8.2f} {100 * r.pcm_err:>9.2f}\n")
