import json

import pytest

from qrc_chaos.config.settings import (
    ExperimentConfig,
    QRCSettings,
    parse_config,
    read_config_file,
    read_manifest_file,
    write_config_file,
)
from qrc_chaos.schemas.common import MapKind, PredictionMode
from qrc_chaos.utils.errors import ConfigError


def _write(tmp_path, text, name="experiment.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestParseConfig:
    def test_empty_file_gives_defaults(self, tmp_path):
        cfg = parse_config(_write(tmp_path, ""))
        assert cfg.map_kind == MapKind.LOGISTIC
        assert (cfg.d, cfg.n_rep, cfg.n_hidden) == (2, 2, 4)
        assert cfg.epsilon == 1e-8
        assert cfg.tau == 1.0
        assert cfg.prediction_mode == PredictionMode.TEACHER_FORCED

    def test_no_file_gives_defaults(self):
        assert parse_config() == ExperimentConfig()

    def test_written_config_reads_back(self, tmp_path):
        cfg = ExperimentConfig(map_kind="henon", a=1.35, gamma=0.05, include_bias=True, epsilon=1e-6)
        path = write_config_file(cfg, tmp_path / "config.cfg")
        assert "include_bias=true" in path.read_text().splitlines()
        assert parse_config(path) == cfg

    def test_manifest_config_and_arguments(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps({"config": {"r": 3.9}, "arguments": {"layers": "1..2"}}))
        assert read_manifest_file(path) == ({"r": 3.9}, {"layers": "1..2"})
        path.write_text(json.dumps({"config": {"r": 3.9}}))
        assert read_manifest_file(path)[1] == {}
        with pytest.raises(ConfigError, match="Manifest not found"):
            read_manifest_file(tmp_path / "absent.json")

    def test_henon_architecture_defaults(self, tmp_path):
        cfg = parse_config(_write(tmp_path, "map_kind=henon\n"))
        assert (cfg.d, cfg.n_rep, cfg.n_hidden) == (1, 2, 3)
        assert cfg.n_vars == 2
        assert cfg.control_value == 1.4

    def test_values_and_comments(self, tmp_path):
        text = "# reservoir\ntau=0.5\nn_hidden = 3\ngamma=0.01  # dephasing\n"
        cfg = parse_config(_write(tmp_path, text))
        assert cfg.tau == 0.5
        assert cfg.n_hidden == 3
        assert cfg.gamma == 0.01

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError, match="foo"):
            parse_config(_write(tmp_path, "tau=1.0\nfoo=1\n"))

    def test_out_of_range_value(self, tmp_path):
        with pytest.raises(ConfigError, match="r:"):
            parse_config(_write(tmp_path, "r=5\n"))

    def test_parse_error_reports_line(self, tmp_path):
        with pytest.raises(ConfigError, match="line 2"):
            read_config_file(_write(tmp_path, "tau=1.0\nfoo bar\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config(tmp_path / "absent.cfg")

    def test_qubit_limit(self, tmp_path):
        with pytest.raises(ConfigError, match="exceeds"):
            parse_config(_write(tmp_path, "map_kind=henon\nn_rep=5\nn_hidden=3\n"))


class TestExperimentConfig:
    def test_map_params_override(self):
        cfg = ExperimentConfig(r=3.0)
        assert cfg.map_params().r == 3.0
        assert cfg.map_params(3.9).r == 3.9

    def test_reservoir_config_overrides(self):
        cfg = ExperimentConfig(map_kind="henon")
        rcfg = cfg.reservoir_config(n_rep=1, gamma=0.2)
        assert rcfg.n_qubits == 2 + 3
        assert rcfg.gamma == 0.2
        assert rcfg.seed == cfg.reservoir_seed

    def test_frozen(self):
        cfg = ExperimentConfig()
        with pytest.raises(Exception):
            cfg.tau = 2.0


class TestQRCSettings:
    def test_environment_prefix(self, monkeypatch, tmp_path):
        monkeypatch.setenv("QRC_LOG_LEVEL", "DEBUG")
        settings = QRCSettings()
        assert settings.log_level == "DEBUG"
        assert settings.out_dir == str(tmp_path / "results")
        assert settings.save_plots is False
        assert settings.n_jobs == 1
