"""End-to-end command-line behaviour: artifacts, exit codes, determinism."""

import json

import pytest

from spikedrive.cli import main
from spikedrive.config import RunConfig, format_config
from spikedrive.model import ModelConfig, SpsStage

SMALL_MODEL = ModelConfig(
    t_steps=2, in_channels=2, in_h=8, in_w=8,
    sps_stages=(
        SpsStage(out_channels=8, pool_kernel=2, pool_stride=2),
        SpsStage(out_channels=8, residual=True),
    ),
    embed_dim=8, n_blocks=1, n_heads=2, mlp_ratio=2, n_classes=3,
)


@pytest.fixture
def cfg_path(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(format_config(RunConfig(model=SMALL_MODEL, seed=5)))
    return path


@pytest.fixture
def artifacts(tmp_path, cfg_path):
    weights = tmp_path / "weights.sdtw"
    inputs = tmp_path / "input.sdtw"
    rc = main(["gen", "--config", str(cfg_path),
               "--weights", str(weights), "--input", str(inputs)])
    assert rc == 0
    return cfg_path, weights, inputs


def test_gen_writes_manifests(artifacts):
    _, weights, inputs = artifacts
    assert weights.stat().st_size > 0
    assert inputs.stat().st_size > 0
    assert weights.read_bytes()[:4] == b"SDTW"


def test_gen_is_deterministic(tmp_path, cfg_path):
    a, b = tmp_path / "a.sdtw", tmp_path / "b.sdtw"
    assert main(["gen", "--config", str(cfg_path), "--weights", str(a)]) == 0
    assert main(["gen", "--config", str(cfg_path), "--weights", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_seed_flag_changes_bytes(tmp_path, cfg_path):
    a, b = tmp_path / "a.sdtw", tmp_path / "b.sdtw"
    main(["gen", "--config", str(cfg_path), "--weights", str(a)])
    main(["gen", "--config", str(cfg_path), "--weights", str(b), "--seed", "99"])
    assert a.read_bytes() != b.read_bytes()


def test_run_prints_logits_json(artifacts, capsys):
    cfg, weights, inputs = artifacts
    rc = main(["run", "--config", str(cfg), "--weights", str(weights),
               "--input", str(inputs)])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert set(out) == {"argmax", "logits", "scale_exp", "width"}
    assert len(out["logits"]) == SMALL_MODEL.n_classes
    assert out["argmax"] == max(range(3), key=lambda i: out["logits"][i])
    assert out["width"] == 16


def test_run_is_deterministic(artifacts, capsys):
    cfg, weights, inputs = artifacts
    args = ["run", "--config", str(cfg), "--weights", str(weights),
            "--input", str(inputs)]
    main(args)
    first = capsys.readouterr().out
    main(args)
    assert capsys.readouterr().out == first


def test_run_writes_perf_report(artifacts, tmp_path, capsys):
    cfg, weights, inputs = artifacts
    report = tmp_path / "perf.json"
    rc = main(["run", "--config", str(cfg), "--weights", str(weights),
               "--input", str(inputs), "--report", str(report)])
    assert rc == 0
    capsys.readouterr()
    doc = json.loads(report.read_text())
    assert doc["hardware"]["peak_gsops_per_s"] == pytest.approx(307.2)
    assert doc["totals"]["sop_count"] + doc["totals"]["skipped"] == \
        doc["totals"]["dense_op_count"]
    names = [layer["name"] for layer in doc["layers"]]
    assert "sps0.conv" in names and "block0.sdsa" in names


def test_stats_csv_to_stdout(artifacts, capsys):
    cfg, weights, inputs = artifacts
    rc = main(["stats", "--config", str(cfg), "--weights", str(weights),
               "--input", str(inputs), "--format", "csv"])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    header = lines[0].split(",")
    assert header[:3] == ["name", "kind", "sop_count"]
    assert len(lines) > 5


def test_verify_clean_exits_zero(cfg_path, capsys):
    rc = main(["verify", "--config", str(cfg_path), "--seeds", "3"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "3 instances" in out and "all match" in out


def test_verify_failure_exits_one(tmp_path, capsys, monkeypatch):
    # force a mismatch by making the engine disagree with the reference
    import spikedrive.cli as cli
    from spikedrive.verify import InstanceResult, Mismatch, VerifySummary

    def fake_verify_many(config, n_seeds, start_seed=0, fault=None, on_result=None):
        bad = InstanceResult(seed=0, ok=False, mismatch=Mismatch(
            layer="sps0", flat_index=3, engine_value=1, reference_value=0))
        if on_result:
            on_result(bad)
        return VerifySummary(total=1, failed=1, elapsed_s=0.1, first_failure=bad)

    monkeypatch.setattr(cli, "verify_many", fake_verify_many)
    cfg = tmp_path / "run.cfg"
    cfg.write_text(format_config(RunConfig(model=SMALL_MODEL)))
    rc = main(["verify", "--config", str(cfg), "--seeds", "1"])
    assert rc == 1
    assert "sps0" in capsys.readouterr().out


def test_missing_config_file_exits_two(tmp_path, capsys):
    rc = main(["run", "--config", str(tmp_path / "absent.cfg"),
               "--weights", "w", "--input", "x"])
    assert rc == 2
    assert "absent.cfg" in capsys.readouterr().err


def test_bad_config_contents_exits_two(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("t_steps = 2\n")
    rc = main(["gen", "--config", str(cfg), "--weights", str(tmp_path / "w")])
    assert rc == 2
    assert "missing" in capsys.readouterr().err


def test_corrupt_manifest_exits_two(tmp_path, cfg_path, capsys):
    weights = tmp_path / "weights.sdtw"
    main(["gen", "--config", str(cfg_path), "--weights", str(weights)])
    weights.write_bytes(weights.read_bytes()[:-5])
    rc = main(["run", "--config", str(cfg_path), "--weights", str(weights),
               "--input", str(weights)])
    assert rc == 2
    assert "truncated" in capsys.readouterr().err


def test_usage_error_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["run"])  # missing required flags
    assert exc.value.code == 2


def test_unknown_command_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_run_rejects_wrong_input_manifest(artifacts, capsys):
    cfg, weights, _ = artifacts
    rc = main(["run", "--config", str(cfg), "--weights", str(weights),
               "--input", str(weights)])  # weights file where input belongs
    assert rc == 2
