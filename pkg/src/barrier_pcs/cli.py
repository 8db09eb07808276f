"""Command-line front end.

    barrier-pcs price --config bs.ini --method pcs
    barrier-pcs table --config bs.ini --out table.csv
    barrier-pcs benchmark --config cev.ini --steps 2000 --trials 1000000
    barrier-pcs verify

Configuration is an INI file with sections ``[run]``, ``[model]``,
``[contract]``, ``[mc]`` and ``[output]``. Flags override file values, file
values override defaults.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from .errors import InvalidParameterError, NonFiniteStateError
from .harness import (
    DEFAULT_SCHEDULE,
    BenchmarkStore,
    Experiment,
    format_table_csv,
    make_benchmark,
    run_convergence_table,
)
from .models import Model1D, SvModel
from .pricing import McConfig, bs_barrier_exact, price_pathwise, price_pcs, relative_error
from .symmetry import BarrierContract
from .verify import format_report, verify_properties

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3, 4
COMMANDS = ("price", "table", "benchmark", "verify")

log = logging.getLogger(__name__)


class ConfigParseError(ValueError):
    """Malformed config text or an unknown key; carries the line when known."""


_MODEL_KEYS = {
    "bs": {"kind", "r", "sigma", "x0"},
    "cev": {"kind", "r", "sigma", "beta", "x0"},
    "abm": {"kind", "sigma", "x0"},
    "heston": {"kind", "r", "kappa", "theta", "nu", "rho", "x0", "v0"},
    "lambda_sabr": {"kind", "r", "lambda", "theta", "nu", "rho", "beta", "x0", "v0"},
}
_SECTION_KEYS = {
    "run": {"command", "method"},
    "contract": {"strike", "barrier", "maturity", "width", "truth"},
    "mc": {"steps", "trials", "seed", "workers", "rng", "schedule", "trials_rule",
           "benchmark_steps", "benchmark_trials"},
    "output": {"path", "store"},
}


@dataclass(frozen=True)
class RunConfig:
    command: str = "price"
    method: str = "pcs"
    model: Model1D | SvModel = field(default_factory=Model1D)
    contract: BarrierContract = field(default_factory=lambda: BarrierContract(95.0, 90.0))
    mc: McConfig = field(default_factory=McConfig)
    schedule: tuple[int, ...] = DEFAULT_SCHEDULE
    trials_rule: str = "cube"
    truth: str | float | None = None
    benchmark_steps: int = 5000
    benchmark_trials: int = 50_000_000
    path: str | None = None
    store: str | None = None

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise InvalidParameterError(f"command must be one of {', '.join(COMMANDS)}, got {self.command!r}")
        if self.method not in ("pcs", "pathwise"):
            raise InvalidParameterError(f"method must be 'pcs' or 'pathwise', got {self.method!r}")
        if self.trials_rule not in ("cube", "fixed"):
            raise InvalidParameterError(f"trials_rule must be 'cube' or 'fixed', got {self.trials_rule!r}")
        if isinstance(self.truth, str) and self.truth not in ("analytic", "benchmark"):
            raise InvalidParameterError(f"truth must be a number, 'analytic' or 'benchmark', got {self.truth!r}")

    def experiment(self) -> Experiment:
        if self.truth is None:
            source, value = ("analytic", None) if _has_analytic(self.model, self.contract) else ("value", None)
        elif isinstance(self.truth, str):
            source, value = self.truth, None
        else:
            source, value = "value", float(self.truth)
        return Experiment(
            name="config", model=self.model, contract=self.contract, truth_source=source, truth=value,
            schedule=self.schedule, trials=self.mc.trials if self.trials_rule == "fixed" else None,
            seed=self.mc.seed, benchmark_steps=self.benchmark_steps, benchmark_trials=self.benchmark_trials,
        )


def _has_analytic(model, contract) -> bool:
    return isinstance(model, Model1D) and model.kind == "bs" and not contract.is_double


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    current = None
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            if key is None and current == section:
                return i
        elif current == section and key is not None and "=" in s and s.split("=", 1)[0].strip() == key:
            return i
    return None


def _where(text: str, section: str, key: str | None = None) -> str:
    line = _line_of(text, section, key)
    loc = f"[{section}]" + (f" {key}" if key else "")
    return f"line {line}: {loc}" if line else loc


def _num(text, section, key, raw, kind=float):
    try:
        return kind(raw)
    except ValueError:
        raise ConfigParseError(f"{_where(text, section, key)}: expected a number, got {raw!r}") from None


def parse_config(text: str) -> RunConfig:
    """Strict parse of a run configuration; unknown sections and keys are rejected."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigParseError(f"config syntax error: {exc}") from None

    allowed = set(_SECTION_KEYS) | {"model"}
    for sec in cp.sections():
        if sec not in allowed:
            raise ConfigParseError(f"{_where(text, sec)}: unknown section (allowed: {', '.join(sorted(allowed))})")

    def sect(name):
        return dict(cp[name]) if cp.has_section(name) else {}

    for sec, keys in _SECTION_KEYS.items():
        for k in sect(sec):
            if k not in keys:
                raise ConfigParseError(f"{_where(text, sec, k)}: unknown key (allowed: {', '.join(sorted(keys))})")

    run = sect("run")
    kw: dict = {}
    if "command" in run:
        kw["command"] = run["command"].strip()
    if "method" in run:
        kw["method"] = run["method"].strip()

    m = sect("model")
    if m or cp.has_section("model"):
        kind = m.get("kind", "bs").strip()
        if kind not in _MODEL_KEYS:
            raise ConfigParseError(f"{_where(text, 'model', 'kind')}: unknown model kind {kind!r} "
                                   f"(allowed: {', '.join(_MODEL_KEYS)})")
        for k in m:
            if k not in _MODEL_KEYS[kind]:
                raise ConfigParseError(f"{_where(text, 'model', k)}: key not valid for model kind {kind!r} "
                                       f"(allowed: {', '.join(sorted(_MODEL_KEYS[kind]))})")
        vals = {k: _num(text, "model", k, v) for k, v in m.items() if k != "kind"}
        if kind in ("heston", "lambda_sabr"):
            if "lambda" in vals:
                vals["kappa"] = vals.pop("lambda")
            kw["model"] = SvModel(kind=kind, **vals)
        else:
            kw["model"] = Model1D(kind=kind, **vals)

    c = sect("contract")
    if c:
        truth = c.pop("truth", None)
        vals = {k: _num(text, "contract", k, v) for k, v in c.items()}
        kw["contract"] = BarrierContract(
            strike=vals.get("strike", 95.0), barrier=vals.get("barrier", 90.0),
            maturity=vals.get("maturity", 1.0), width=vals.get("width"),
        )
        if truth is not None:
            t = truth.strip()
            kw["truth"] = t if t in ("analytic", "benchmark") else _num(text, "contract", "truth", t)

    mc = sect("mc")
    mc_kw = {}
    for k in ("steps", "trials", "seed", "workers"):
        if k in mc:
            mc_kw[k] = _num(text, "mc", k, mc[k], int)
    if "rng" in mc:
        mc_kw["rng"] = _rng_name(mc["rng"].strip())
    if mc_kw:
        kw["mc"] = McConfig(**mc_kw)
    if "schedule" in mc:
        raw = mc["schedule"].strip()
        kw["schedule"] = tuple(_num(text, "mc", "schedule", s.strip(), int) for s in raw.split(",") if s.strip())
    if "trials_rule" in mc:
        kw["trials_rule"] = mc["trials_rule"].strip()
    for k in ("benchmark_steps", "benchmark_trials"):
        if k in mc:
            kw[k] = _num(text, "mc", k, mc[k], int)

    out = sect("output")
    for k in ("path", "store"):
        if k in out and out[k].strip():
            kw[k] = out[k].strip()

    cfg = RunConfig(**kw)
    if cfg.command == "table":
        cfg.experiment()  # validates truth source against the model
    return cfg


def _rng_name(raw: str) -> str:
    return "lds" if raw in ("lds", "sobol", "low-discrepancy") else raw


def _fmt(x: float) -> str:
    return repr(float(x))


def to_text(cfg: RunConfig) -> str:
    """Serialize a ``RunConfig`` back to config text; ``parse_config`` inverts it."""
    lines = ["[run]", f"command = {cfg.command}", f"method = {cfg.method}", "", "[model]"]
    m = cfg.model
    lines.append(f"kind = {m.kind}")
    if isinstance(m, SvModel):
        rate_key = "lambda" if m.kind == "lambda_sabr" else "kappa"
        items = [("r", m.r), (rate_key, m.kappa), ("theta", m.theta), ("nu", m.nu), ("rho", m.rho)]
        if m.kind == "lambda_sabr":
            items.append(("beta", m.beta))
        items += [("x0", m.x0), ("v0", m.v0)]
    else:
        items = [("sigma", m.sigma), ("x0", m.x0)]
        if m.kind != "abm":
            items.insert(0, ("r", m.r))
        if m.kind == "cev":
            items.append(("beta", m.beta))
    lines += [f"{k} = {_fmt(v)}" for k, v in items]
    c = cfg.contract
    lines += ["", "[contract]", f"strike = {_fmt(c.strike)}", f"barrier = {_fmt(c.barrier)}",
              f"maturity = {_fmt(c.maturity)}"]
    if c.width is not None:
        lines.append(f"width = {_fmt(c.width)}")
    if cfg.truth is not None:
        lines.append(f"truth = {cfg.truth if isinstance(cfg.truth, str) else _fmt(cfg.truth)}")
    mc = cfg.mc
    lines += ["", "[mc]", f"steps = {mc.steps}", f"trials = {mc.trials}", f"seed = {mc.seed}",
              f"workers = {mc.workers}", f"rng = {mc.rng}",
              f"schedule = {', '.join(str(n) for n in cfg.schedule)}", f"trials_rule = {cfg.trials_rule}",
              f"benchmark_steps = {cfg.benchmark_steps}", f"benchmark_trials = {cfg.benchmark_trials}"]
    out = [f"{k} = {v}" for k, v in (("path", cfg.path), ("store", cfg.store)) if v]
    if out:
        lines += ["", "[output]", *out]
    return "\n".join(lines) + "\n"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="barrier-pcs", description="Monte-Carlo barrier option pricing by path-wise Euler "
                                                "and by barrier symmetrization.")
    p.add_argument("command", nargs="?", choices=COMMANDS, help="overrides [run] command")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--method", choices=("pcs", "pathwise"))
    p.add_argument("--steps", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--rng", choices=("pseudo", "lds"))
    p.add_argument("--out", metavar="PATH", help="CSV path for `table`, store path for `benchmark`")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def apply_flags(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    mc_kw = {k: getattr(args, k) for k in ("steps", "trials", "seed", "workers", "rng") if getattr(args, k) is not None}
    kw = {}
    if mc_kw:
        kw["mc"] = replace(cfg.mc, **mc_kw)
    if args.command:
        kw["command"] = args.command
    if args.method:
        kw["method"] = args.method
    if args.out:
        kw["store" if (args.command or cfg.command) == "benchmark" else "path"] = args.out
    return replace(cfg, **kw) if kw else cfg


def _truth_for_price(cfg: RunConfig) -> float | None:
    if isinstance(cfg.truth, float):
        return cfg.truth
    if _has_analytic(cfg.model, cfg.contract):
        m, c = cfg.model, cfg.contract
        if c.strike >= c.barrier and m.sigma > 0:
            return bs_barrier_exact(m.x0, c.strike, c.barrier, m.sigma, m.r, c.maturity)
    return None


def run(cfg: RunConfig, out=None) -> int:
    """Execute one command; returns the process exit status."""
    out = out or sys.stdout
    if cfg.command == "verify":
        checks = verify_properties(seed=cfg.mc.seed or 20240601)
        out.write(format_report(checks) + "\n")
        return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY

    if cfg.command == "price":
        fn = price_pcs if cfg.method == "pcs" else price_pathwise
        est = fn(cfg.model, cfg.contract, cfg.mc)
        out.write(f"method   {cfg.method}\nmean     {est.mean:.6f}\nstderr   {est.stderr:.6f}\n"
                  f"M        {est.trials}\nn        {est.steps}\nelapsed  {est.elapsed:.2f}s\n")
        truth = _truth_for_price(cfg)
        if truth is not None:
            out.write(f"truth    {truth:.6f}\nrel_err  {100 * relative_error(est.mean, truth):.3f}%\n")
        return EXIT_OK

    if cfg.command == "table":
        exp = cfg.experiment()
        store = BenchmarkStore(cfg.store) if cfg.store else None
        rows = run_convergence_table(exp, workers=cfg.mc.workers, store=store)
        text = format_table_csv(rows)
        if cfg.path:
            Path(cfg.path).parent.mkdir(parents=True, exist_ok=True)
            Path(cfg.path).write_text(text)
            out.write(f"wrote {len(rows)} rows to {cfg.path}\n")
        else:
            out.write(text)
        return EXIT_OK

    store = BenchmarkStore(cfg.store or "benchmarks.csv")
    rec = make_benchmark(cfg.model, cfg.contract, cfg.mc.steps, cfg.mc.trials, seed=cfg.mc.seed,
                         store=store, workers=cfg.mc.workers, reuse=False)
    out.write(f"benchmark {rec.mean:.6f} +/- {rec.stderr:.6f} (n={rec.steps}, M={rec.trials}, "
              f"seed={rec.seed}) -> {store.path}\n")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.config:
            try:
                with open(args.config) as fh:
                    text = fh.read()
            except OSError as exc:
                print(f"barrier-pcs: cannot read config: {exc}", file=sys.stderr)
                return EXIT_USAGE
            cfg = parse_config(text)
        else:
            cfg = RunConfig()
        cfg = apply_flags(cfg, args)
        if not args.config and not args.command:
            print("barrier-pcs: give a command or a --config with [run] command", file=sys.stderr)
            return EXIT_USAGE
    except ConfigParseError as exc:
        print(f"barrier-pcs: parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidParameterError, TypeError) as exc:
        print(f"barrier-pcs: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return run(cfg)
    except NonFiniteStateError as exc:
        print(f"barrier-pcs: simulation failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (InvalidParameterError, ValueError) as exc:
        print(f"barrier-pcs: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
