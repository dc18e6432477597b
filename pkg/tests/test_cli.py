import json

import pandas as pd
import pytest

from cncscsg.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, build_parser, cli_main, parse_iterate, parse_seeds
from cncscsg.core.config import settings
from cncscsg.core.exceptions import ConfigError
from cncscsg.models.trace import TRACE_COLUMNS

SMALL_RUN = 'n = 20\nd = 2\nbound_draws = 0\nk_thres = 1\n'


@pytest.fixture
def run_file(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL_RUN)
    return path


def test_validate_config_names_the_gamma_row(tmp_path, capsys):
    path = tmp_path / "theory.toml"
    path.write_text('mode = "theory"\nn = 400\nb = 5\ngamma = 0.4\ng_thres = 1e-9\n'
                    'L = 2.0\nrho = 1.0\nl = 1.5\ntau = 0.5\n')
    assert cli_main(["validate-config", str(path)]) == EXIT_CONFIG
    out = capsys.readouterr().out
    assert "γ ≤ 1/3" in out
    assert "✗" in out


def test_validate_config_accepts_practical_defaults(run_file, capsys):
    assert cli_main(["validate-config", str(run_file)]) == EXIT_OK
    assert "no violations" in capsys.readouterr().out


def test_run_with_zero_epochs(tmp_path):
    out = tmp_path / "gd.csv"
    code = cli_main(["--log-level", "ERROR", "run", "--method", "gd", "--epochs", "0", "--out", str(out)])
    assert code == EXIT_OK
    assert out.read_text().splitlines() == [",".join(TRACE_COLUMNS)]
    assert (tmp_path / "gd.summary.json").exists()


def test_unknown_flag_is_a_configuration_error():
    assert cli_main(["run", "--no-such-flag"]) == EXIT_CONFIG


def test_unknown_run_file_key(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("learning_rate = 0.1\n")
    assert cli_main(["run", str(path), "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG


def test_divergent_run_exits_with_runtime_code(tmp_path):
    path = tmp_path / "saddle.toml"
    path.write_text('problem = "saddle"\nmethod = "gd"\neta = 1.0\nx0 = [0.0, 1.0]\n'
                    'divergence_bound = 1000.0\nmax_epochs = 100\n')
    assert cli_main(["run", str(path), "--out", str(tmp_path / "saddle.csv")]) == EXIT_RUNTIME


def test_gen_data(tmp_path):
    out = tmp_path / "data.csv"
    assert cli_main(["gen-data", "--n", "10", "--d", "2", "--seed", "3", "--out", str(out)]) == EXIT_OK
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["y", "z_1", "z_2"]
    assert len(frame) == 10


def test_sweep_over_a_seed_range(run_file, tmp_path, capsys):
    out = tmp_path / "sweep"
    code = cli_main(["--log-level", "ERROR", "sweep", str(run_file), "--seeds", "0..2", "--epochs", "3",
                     "--out", str(out)])
    assert code == EXIT_OK
    assert sorted(p.name for p in out.glob("seed_*.csv")) == ["seed_0000.csv", "seed_0001.csv", "seed_0002.csv"]
    printed = json.loads(capsys.readouterr().out)
    assert printed["runs"] == 3
    assert "seeds" not in printed


def test_sweep_with_a_diverged_seed_exits_with_runtime_code(tmp_path, capsys):
    path = tmp_path / "saddle.toml"
    path.write_text('problem = "saddle"\nmethod = "gd"\neta = 1.0\nx0 = [0.0, 1.0]\n'
                    'divergence_bound = 1000.0\nmax_epochs = 100\n')
    code = cli_main(["--log-level", "ERROR", "sweep", str(path), "--seeds", "0..1", "--out", str(tmp_path / "sweep")])
    assert code == EXIT_RUNTIME
    assert json.loads(capsys.readouterr().out)["reasons"] == {"diverged": 2}


def test_parser_description_comes_from_settings():
    assert build_parser().description == settings.app_name


def test_certify_prints_a_verdict(tmp_path, capsys):
    path = tmp_path / "quartic.toml"
    path.write_text('problem = "saddle"\nquartic = 1.0\n')
    assert cli_main(["--log-level", "ERROR", "certify", str(path), "--iterate", "0,1", "--eps-g", "1e-6"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["second_order_stationary"] is True
    assert report["eps_g"] == 1e-6


def test_parse_seeds():
    assert parse_seeds("0..4") == [0, 1, 2, 3, 4]
    assert parse_seeds("1,4,9") == [1, 4, 9]
    assert parse_seeds("7") == [7]
    with pytest.raises(ConfigError):
        parse_seeds("-1..3")


def test_parse_iterate_from_a_summary(tmp_path):
    path = tmp_path / "run.summary.json"
    path.write_text(json.dumps({"x_final": [0.5, -0.5]}))
    assert parse_iterate(str(path)).tolist() == [0.5, -0.5]
    with pytest.raises(ConfigError):
        parse_iterate("a,b")
