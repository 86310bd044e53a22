from spikesplit.auto.__main__ import build_parser, config_from_args, main
from spikesplit.auto.launcher import run_experiment
from spikesplit.frame.report import summary_path_of

from unittest import mock
import json
import pytest


#### Test for config_from_args ####
class TestConfigFromArgs:
    def test_empty(self):
        args = build_parser().parse_args(["run"])
        assert config_from_args(args) == {}

    def test_flags(self):
        args = build_parser().parse_args(
            ["run", "--label", "F+B", "--t-max", "4", "--alpha", "0.8"]
        )
        assert config_from_args(args) == {"label": "F+B", "t_max": 4, "alpha": 0.8}

    def test_precedence(self, tmpdir):
        path = str(tmpdir.join("config.json"))
        with open(path, "w") as f:
            json.dump({"alpha": 0.7, "samples": 5, "t_max": 8}, f)
        args = build_parser().parse_args(
            [
                "run",
                "--config",
                path,
                "--conf",
                "t_max=3",
                "--conf",
                "alpha=0.6",
                "--alpha",
                "0.5",
            ]
        )
        assert config_from_args(args) == {"alpha": 0.5, "samples": 5, "t_max": 3}

    def test_list_value(self):
        args = build_parser().parse_args(["run", "--label", '["F-B", "D-B"]'])
        assert config_from_args(args)["label"] == ["F-B", "D-B"]

    def test_invalid_override(self):
        args = build_parser().parse_args(["run", "--conf", "alpha"])
        with pytest.raises(ValueError, match="expected format is key=value"):
            config_from_args(args)


#### Test for main ####
class TestMain:
    def test_run(self):
        with mock.patch("spikesplit.auto.__main__.run_experiment") as run:
            assert main(["run", "--samples", "3", "--mode", "socket"]) == 0
        run.assert_called_once()
        assert run.call_args[0][0] == {"samples": 3, "mode": "socket"}

    def test_sweep(self):
        with mock.patch("spikesplit.auto.__main__.sweep") as sweep:
            assert (
                main(["sweep", "--axis", "alpha", "--values", "0.5, 0.9,", "--label", "D-B"])
                == 0
            )
        sweep.assert_called_once_with("alpha", [0.5, 0.9], {"label": "D-B"})

    def test_sweep_split(self):
        with mock.patch("spikesplit.auto.__main__.sweep") as sweep:
            main(["sweep", "--axis", "split", "--values", "SP1,SP3"])
        sweep.assert_called_once_with("split", ["SP1", "SP3"], {})

    def test_sweep_invalid_axis(self):
        with pytest.raises(SystemExit):
            main(["sweep", "--axis", "beta", "--values", "1"])

    def test_serve(self):
        with mock.patch("spikesplit.auto.__main__.serve_cloud") as serve:
            assert main(["serve", "--label", "D+B", "--port", "9000"]) == 0
        serve.assert_called_once_with({"label": "D+B", "port": 9000})

    def test_no_command(self, capsys):
        assert main([]) == 1
        assert "usage" in capsys.readouterr().out

    def test_report(self, tmpdir, capsys):
        path = str(tmpdir.join("rows.csv"))
        run_experiment({"label": "D-B", "samples": 2, "output": path})
        with open(summary_path_of(path), newline="") as f:
            summary = f.read()
        output = str(tmpdir.join("rebuilt.csv"))

        assert main(["report", "--input", path, "--output", output]) == 0
        captured = capsys.readouterr()
        assert captured.out == summary
        assert f"Summary saved to {output}" in captured.err
        with open(output, newline="") as f:
            assert f.read() == summary

    def test_report_default_output(self, tmpdir):
        path = str(tmpdir.join("rows.csv"))
        run_experiment({"label": "F-B", "samples": 2, "output": path})
        with open(summary_path_of(path), newline="") as f:
            summary = f.read()
        with mock.patch("builtins.print"):
            assert main(["report", "--input", path]) == 0
        with open(summary_path_of(path), newline="") as f:
            assert f.read() == summary
