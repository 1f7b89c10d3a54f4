"""key=value run-configuration parsing: round trips and strict rejection."""

import pytest

from spikedrive.config import ConfigError, RunConfig, format_config, load_config, parse_config
from spikedrive.model import ModelConfig, SpsStage

MINIMAL = """
t_steps = 2
in_channels = 2
in_h = 8
in_w = 8
sps_out_channels = 8,8
sps_kernel = 3,3
sps_stride = 1,1
sps_padding = 1,1
sps_pool_kernel = 2,0
sps_pool_stride = 2,0
sps_residual = 0,1
embed_dim = 8
n_blocks = 1
n_heads = 2
mlp_ratio = 2
v_th_attn = 1
gamma = 0.5
v_th = 0.5
v_reset = 0
act_width = 10
act_scale_exp = -6
weight_width = 10
pos_width = 8
n_classes = 3
"""


def test_parse_minimal():
    cfg = parse_config(MINIMAL)
    assert isinstance(cfg, RunConfig)
    assert cfg.model.t_steps == 2
    assert cfg.model.sps_stages == (
        SpsStage(out_channels=8, pool_kernel=2, pool_stride=2),
        SpsStage(out_channels=8, residual=True),
    )
    assert cfg.seed == 0
    assert cfg.power_watts is None
    assert cfg.hardware.lanes == 1536
    assert cfg.hardware.freq_hz == 200e6


def test_format_parse_round_trip():
    cfg = RunConfig(model=ModelConfig.toy(), seed=17, power_watts=12.0,
                    hw_lanes=768, hw_freq_mhz=100.0)
    assert parse_config(format_config(cfg)) == cfg


def test_round_trip_toy_defaults():
    cfg = RunConfig(model=ModelConfig.toy())
    assert parse_config(format_config(cfg)) == cfg


def test_load_config_reads_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(format_config(RunConfig(model=ModelConfig.toy(), seed=3)))
    assert load_config(path).seed == 3


def test_comments_and_blank_lines_ignored():
    text = "# leading comment\n\n" + MINIMAL + "\nn_classes = 3  # trailing\n"
    # trailing duplicate would be an error; re-comment the duplicate line
    text = MINIMAL + "# n_classes = 99\n   \n"
    cfg = parse_config(text)
    assert cfg.model.n_classes == 3


def test_optional_keys():
    cfg = parse_config(MINIMAL + "seed = 9\npower_watts = 6.5\n"
                       "hw_lanes = 96\nhw_freq_mhz = 150\n")
    assert cfg.seed == 9
    assert cfg.power_watts == 6.5
    assert cfg.hardware.lanes == 96
    assert cfg.hardware.freq_hz == 150e6


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(MINIMAL + "volume = 11\n")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(MINIMAL + "t_steps = 3\n")


def test_missing_key_rejected():
    trimmed = "\n".join(
        line for line in MINIMAL.splitlines() if not line.startswith("embed_dim")
    )
    with pytest.raises(ConfigError, match="missing"):
        parse_config(trimmed)


def test_malformed_line_rejected():
    with pytest.raises(ConfigError, match="expected key = value"):
        parse_config(MINIMAL + "just some words\n")


def test_non_integer_value_rejected():
    with pytest.raises(ConfigError, match="as int"):
        parse_config(MINIMAL.replace("t_steps = 2", "t_steps = two"))


def test_non_numeric_float_rejected():
    with pytest.raises(ConfigError, match="as float"):
        parse_config(MINIMAL.replace("gamma = 0.5", "gamma = half"))


def test_stage_list_length_mismatch_rejected():
    with pytest.raises(ConfigError, match="per-stage values"):
        parse_config(MINIMAL.replace("sps_kernel = 3,3", "sps_kernel = 3"))


def test_residual_flag_must_be_binary():
    with pytest.raises(ConfigError, match="0 or 1"):
        parse_config(MINIMAL.replace("sps_residual = 0,1", "sps_residual = 0,2"))


def test_model_validation_errors_become_config_errors():
    # embed_dim not divisible by n_heads
    with pytest.raises(ConfigError, match="n_heads"):
        parse_config(MINIMAL.replace("n_heads = 2", "n_heads = 3"))


def test_non_dyadic_gamma_rejected():
    with pytest.raises(ConfigError):
        parse_config(MINIMAL.replace("gamma = 0.5", "gamma = 0.3"))
