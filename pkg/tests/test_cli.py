import io
import textwrap

import pytest

from barrier_pcs.cli import (
    EXIT_OK,
    EXIT_RUNTIME,
    EXIT_USAGE,
    EXIT_VALIDATION,
    ConfigParseError,
    RunConfig,
    main,
    parse_config,
    run,
    to_text,
)
from barrier_pcs.errors import InvalidParameterError
from barrier_pcs.harness import CSV_HEADER
from barrier_pcs.models import Model1D, SvModel
from barrier_pcs.pricing import McConfig
from barrier_pcs.symmetry import BarrierContract

TABLE1 = textwrap.dedent(
    """\
    [run]
    command = table

    [model]
    kind = bs
    r = 0
    sigma = 0.2

    [contract]
    strike = 95
    barrier = 90
    maturity = 1
    """
)


def test_defaults():
    cfg = parse_config("")
    assert (cfg.mc.steps, cfg.mc.trials) == (100, 1_000_000)
    assert cfg.command == "price" and cfg.method == "pcs"


def test_table_config_uses_cube_rule():
    exp = parse_config(TABLE1).experiment()
    assert exp.schedule == tuple(range(10, 101, 10))
    assert exp.trials is None and exp.trials_for(40) == 64_000
    assert exp.truth_source == "analytic"


def test_correlation_out_of_range():
    text = "[model]\nkind = heston\nrho = 1.5\n"
    with pytest.raises(InvalidParameterError, match="correlation"):
        parse_config(text)


def test_unknown_key_reports_line():
    text = "[model]\nkind = bs\nsigma = 0.2\nsigmaa = 0.3\n"
    with pytest.raises(ConfigParseError, match="line 4"):
        parse_config(text)


@pytest.mark.parametrize(
    "text",
    [
        "[modle]\nkind = bs\n",
        "[model]\nkind = heston\nlambda = 1\n",
        "[model]\nkind = bs\nsigma = abc\n",
        "not an ini file",
    ],
)
def test_parse_errors(text):
    with pytest.raises(ConfigParseError):
        parse_config(text)


@pytest.mark.parametrize(
    "cfg",
    [
        RunConfig(),
        RunConfig(command="table", model=Model1D("cev", r=0.02, sigma=0.45, beta=0.75), truth=8.82718,
                  schedule=(10, 20), trials_rule="fixed", mc=McConfig(20, 5000, 7, 2, "lds")),
        RunConfig(command="benchmark", model=SvModel("lambda_sabr", r=0.02, theta=0.3, nu=0.3, beta=0.75, v0=0.3),
                  contract=BarrierContract(95.0, 90.0, 1.0, 20.0), store="b.csv", path="t.csv"),
        RunConfig(model=Model1D("abm", sigma=10.0), truth="benchmark", schedule=()),
    ],
)
def test_round_trip(cfg):
    assert parse_config(to_text(cfg)) == cfg


def test_price_output():
    out = io.StringIO()
    cfg = RunConfig(mc=McConfig(20, 20_000, 1))
    assert run(cfg, out) == EXIT_OK
    text = out.getvalue()
    for label in ("mean", "stderr", "rel_err"):
        assert label in text


def test_price_without_analytic_truth_omits_error():
    out = io.StringIO()
    run(RunConfig(model=SvModel(), mc=McConfig(10, 2000, 1)), out)
    assert "rel_err" not in out.getvalue()


def test_empty_schedule_writes_header_only(tmp_path):
    cfg_path = tmp_path / "t.ini"
    cfg_path.write_text(TABLE1 + "\n[mc]\nschedule =\n")
    out = tmp_path / "t.csv"
    assert main(["--config", str(cfg_path), "--out", str(out)]) == EXIT_OK
    assert out.read_text() == ",".join(CSV_HEADER) + "\n"


def test_flags_override_file(tmp_path):
    cfg_path = tmp_path / "t.ini"
    cfg_path.write_text(TABLE1 + "\n[mc]\nschedule = 2, 3\nworkers = 1\n")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["--config", str(cfg_path), "--out", str(a), "--seed", "4"]) == EXIT_OK
    assert main(["--config", str(cfg_path), "--out", str(b), "--seed", "4", "--workers", "8"]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 3


def test_benchmark_appends(tmp_path):
    store = tmp_path / "store.csv"
    args = ["benchmark", "--steps", "5", "--trials", "500", "--out", str(store)]
    assert main(args) == EXIT_OK
    assert main(args) == EXIT_OK
    assert len(store.read_text().splitlines()) == 2


def test_exit_codes(tmp_path, capsys):
    assert main([]) == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["price", "--steps", "ten"])
    assert exc.value.code == EXIT_USAGE
    assert main(["--config", str(tmp_path / "missing.ini")]) == EXIT_USAGE

    bad = tmp_path / "bad.ini"
    bad.write_text("[model]\nkind = heston\nrho = 1.5\n")
    assert main(["price", "--config", str(bad)]) == EXIT_VALIDATION
    assert "correlation" in capsys.readouterr().err

    assert main(["price", "--trials", "0"]) == EXIT_VALIDATION

    blow = tmp_path / "blow.ini"
    blow.write_text("[model]\nkind = bs\nsigma = 1e300\nx0 = 1e10\n")
    assert main(["price", "--config", str(blow), "--method", "pathwise", "--steps", "5", "--trials", "10"]) == EXIT_RUNTIME


def test_price_command_end_to_end(capsys):
    assert main(["price", "--steps", "10", "--trials", "1000", "--method", "pathwise"]) == EXIT_OK
    assert "method   pathwise" in capsys.readouterr().out


@pytest.mark.parametrize("path", sorted((__import__("pathlib").Path(__file__).parent.parent / "configs").glob("*.ini")))
def test_shipped_configs_parse(path):
    cfg = parse_config(path.read_text())
    assert parse_config(to_text(cfg)) == cfg
