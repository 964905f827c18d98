import pytest

from inpaintkit.config import (
    ConfigError,
    ExperimentConfig,
    build_config,
    parse_value,
    read_config_file,
    write_config_file,
)


class TestParsing:
    def test_typed_scalars(self):
        assert parse_value("42") == 42
        assert parse_value("0.25") == 0.25
        assert parse_value("true") is True
        assert parse_value("false") is False
        assert parse_value("central") == "central"

    def test_lists(self):
        assert parse_value("16, 32, 64") == [16, 32, 64]
        assert parse_value("a, 1, 2.5") == ["a", 1, 2.5]

    def test_file_round_trip(self, tmp_path):
        cfg = ExperimentConfig(eval_n=12, mask_strategy="random_blocks",
                               channels=[8, 16], learning_rate=0.004,
                               standardize=True, out_dir="somewhere")
        path = tmp_path / "run.cfg"
        write_config_file(cfg, path)
        back = build_config(path)
        assert back == cfg

    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("# comment\n\neval_n = 5 # inline\n")
        assert read_config_file(path) == {"eval_n": 5}

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("eval_n 5\n")
        with pytest.raises(ConfigError, match="key = value"):
            read_config_file(path)


class TestPrecedence:
    def test_flag_beats_file_beats_default(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("eval_n = 20\neval_k = 30\n")
        cfg = build_config(path, {"eval_n": 99})
        assert cfg.eval_n == 99      # flag wins
        assert cfg.eval_k == 30      # file wins over default
        assert cfg.eval_seed == 0    # default

    def test_none_overrides_skipped(self):
        cfg = build_config(None, {"eval_n": None})
        assert cfg.eval_n == 100

    def test_unknown_file_key_rejected(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("no_such_key = 1\n")
        with pytest.raises(ConfigError, match="unknown config key"):
            build_config(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            build_config(tmp_path / "absent.cfg")


class TestValidation:
    def test_defaults_match_protocol_constants(self):
        cfg = ExperimentConfig()
        assert cfg.eval_n == 100 and cfg.eval_k == 250
        assert cfg.lambda_rec == 0.999 and cfg.lambda_adv == 0.001
        assert cfg.channels == [16, 32, 64]

    def test_bad_strategy(self):
        with pytest.raises(ConfigError, match="mask_strategy"):
            build_config(None, {"mask_strategy": "diagonal"})

    def test_odd_size(self):
        with pytest.raises(ConfigError, match="even"):
            build_config(None, {"synth_size": 15})

    def test_eval_n_minimum(self):
        with pytest.raises(ConfigError, match="eval_n"):
            build_config(None, {"eval_n": 1})

    def test_train_config_respects_adversarial_switch(self):
        cfg = ExperimentConfig()  # adversarial disabled but lambda_adv 0.001
        tc = cfg.train_config()
        assert tc.lambda_adv == 0.0
        cfg2 = ExperimentConfig(adversarial_enabled=True)
        assert cfg2.train_config().lambda_adv == 0.001

    def test_env_out_root(self, monkeypatch):
        monkeypatch.setenv("INPAINTKIT_OUT_ROOT", "/tmp/elsewhere")
        assert ExperimentConfig().out_dir == "/tmp/elsewhere"

    def test_sampler_uses_mask_settings(self):
        import numpy as np

        cfg = ExperimentConfig(mask_strategy="central", mask_fraction=0.25)
        m = cfg.sampler(8, 8)(np.random.default_rng(0))
        assert m.bits.sum() == 16
