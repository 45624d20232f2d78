import json

import numpy as np
import pytest

from glasskit import cli, data, labelkit
from glasskit.configfile import format_config, parse_config_text, read_config_file
from glasskit.data import SceneConfig
from glasskit.errors import ConfigError
from glasskit.network import NetworkConfig
from glasskit.trainer import TrainConfig

TOY_CONFIG = """
# toy run
net.input_size = 32
net.encoder_channels = 4, 6, 8, 8, 8
net.decoder_width = 8
train.max_iters = 6
train.eval_every = 3
train.val_count = 2
train.seed = 1
data.size = 32
data.seed = 9
"""


def run_cli(*argv):
    return cli.main(list(argv))


# -- config file ---------------------------------------------------------------


def test_parse_config_round_trip():
    net, train, scene = parse_config_text(TOY_CONFIG)
    assert net.input_size == 32
    assert net.encoder_channels == (4, 6, 8, 8, 8)
    assert train.max_iters == 6
    assert scene.seed == 9
    text = format_config(net, train, scene)
    net2, train2, scene2 = parse_config_text(text)
    assert (net2, train2, scene2) == (net, train, scene)


def test_parse_config_rejects_unknown_and_malformed():
    with pytest.raises(ConfigError):
        parse_config_text("net.not_a_field = 3")
    with pytest.raises(ConfigError):
        parse_config_text("banana = 3")
    with pytest.raises(ConfigError):
        parse_config_text("weird.size = 3")
    with pytest.raises(ConfigError):
        parse_config_text("net.input_size near 64")
    with pytest.raises(ConfigError):
        parse_config_text("net.input_size = 64\nnet.input_size = 32")
    with pytest.raises(ConfigError):
        parse_config_text("train.use_iou_loss = maybe")


def test_parse_config_defaults_and_comments():
    net, train, scene = parse_config_text("# nothing but comments\n\n")
    assert net == NetworkConfig()
    assert train == TrainConfig()
    assert scene == SceneConfig()


# -- usage ----------------------------------------------------------------------


def test_help_exits_zero(capsys):
    assert run_cli("--help") == 0
    out = capsys.readouterr().out
    for sub in ("synth", "decouple", "train", "eval", "predict", "gradcheck"):
        assert sub in out


def test_subcommand_help_exits_zero(capsys):
    for sub in ("synth", "decouple", "train", "eval", "predict", "gradcheck"):
        assert run_cli(sub, "--help") == 0
        assert "--" in capsys.readouterr().out


def test_unknown_flag_is_usage_error(capsys):
    assert run_cli("synth", "--bogus", "1") == 1
    assert "error" in capsys.readouterr().err


def test_unknown_subcommand_is_usage_error():
    assert run_cli("fly") == 1


def test_missing_required_flag_is_usage_error():
    assert run_cli("synth", "--count", "3") == 1


# -- synth / decouple -------------------------------------------------------------


def test_synth_writes_dataset(tmp_path, capsys):
    out = tmp_path / "ds"
    assert run_cli("synth", "--out", str(out), "--count", "4", "--size", "32", "--seed", "5") == 0
    manifest = data.read_manifest(out)
    assert len(manifest) == 4
    data.validate_manifest(manifest)


def test_synth_idempotent_given_seed(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_cli("synth", "--out", str(a), "--count", "3", "--size", "32", "--seed", "8")
    run_cli("synth", "--out", str(b), "--count", "3", "--size", "32", "--seed", "8")
    for i in range(3):
        assert (a / f"images/{i:05d}.png").read_bytes() == (b / f"images/{i:05d}.png").read_bytes()
        assert (a / f"masks/{i:05d}.png").read_bytes() == (b / f"masks/{i:05d}.png").read_bytes()


def test_decouple_outputs_recompose(tmp_path):
    ds = tmp_path / "ds"
    run_cli("synth", "--out", str(ds), "--count", "3", "--size", "32", "--seed", "2")
    out = tmp_path / "lab"
    assert run_cli("decouple", "--gt", str(ds / "masks"), "--out", str(out)) == 0
    for i in range(3):
        gt = data.load_mask(ds / "masks" / f"{i:05d}.png")
        bl_png = np.asarray(data.load_gray_map(out / f"{i:05d}_bl.png") * 255, dtype=np.int64)
        dl_png = np.asarray(data.load_gray_map(out / f"{i:05d}_dl.png") * 255, dtype=np.int64)
        assert np.abs(bl_png + dl_png - gt.astype(np.int64) * 255).max() <= 1
        bl = labelkit.read_float_map(out / f"{i:05d}_bl.gldt")
        dl = labelkit.read_float_map(out / f"{i:05d}_dl.gldt")
        assert np.abs(bl + dl - gt).max() <= 1e-6


def test_decouple_missing_dir_is_io_error(tmp_path, capsys):
    assert run_cli("decouple", "--gt", str(tmp_path / "nope"), "--out", str(tmp_path / "out")) == 2
    assert "i/o error" in capsys.readouterr().err


def test_decouple_empty_dir_is_validation_error(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert run_cli("decouple", "--gt", str(empty), "--out", str(tmp_path / "out")) == 3


# -- eval -------------------------------------------------------------------------


def test_eval_identical_dirs_perfect_scores(tmp_path, capsys):
    ds = tmp_path / "ds"
    run_cli("synth", "--out", str(ds), "--count", "3", "--size", "32", "--seed", "3")
    report = tmp_path / "report.txt"
    code = run_cli("eval", "--pred", str(ds / "masks"), "--gt", str(ds / "masks"), "--report", str(report))
    assert code == 0
    out = capsys.readouterr().out
    assert "1.000" in out and "0.00" in out
    lines = dict(line.split(": ") for line in report.read_text().strip().splitlines())
    assert set(lines) == {"acc", "iou", "fbeta", "mae", "ber", "n_images"}
    assert float(lines["acc"]) == 1.0
    assert float(lines["ber"]) == 0.0
    assert int(lines["n_images"]) == 3


def test_eval_json_report(tmp_path):
    ds = tmp_path / "ds"
    run_cli("synth", "--out", str(ds), "--count", "2", "--size", "32", "--seed", "4")
    report = tmp_path / "report.json"
    assert run_cli("eval", "--pred", str(ds / "masks"), "--gt", str(ds / "masks"), "--report", str(report)) == 0
    payload = json.loads(report.read_text())
    assert payload["iou"] == 1.0 and payload["n_images"] == 2


def test_eval_missing_prediction_is_validation_error(tmp_path):
    ds = tmp_path / "ds"
    run_cli("synth", "--out", str(ds), "--count", "2", "--size", "32", "--seed", "6")
    partial = tmp_path / "partial"
    partial.mkdir()
    (partial / "00000.png").write_bytes((ds / "masks" / "00000.png").read_bytes())
    assert run_cli("eval", "--pred", str(partial), "--gt", str(ds / "masks")) == 3


def test_eval_corrupt_png_is_io_error(tmp_path):
    gt = tmp_path / "gt"
    pred = tmp_path / "pred"
    gt.mkdir()
    pred.mkdir()
    (gt / "x.png").write_bytes(b"not a png at all")
    (pred / "x.png").write_bytes(b"not a png at all")
    assert run_cli("eval", "--pred", str(pred), "--gt", str(gt)) == 2


# -- train / predict ----------------------------------------------------------------


@pytest.fixture(scope="module")
def trained_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli-train")
    ds = root / "ds"
    run_cli("synth", "--out", str(ds), "--count", "8", "--size", "32", "--seed", "7")
    config = root / "run.cfg"
    config.write_text(TOY_CONFIG)
    out = root / "run"
    code = run_cli("train", "--data", str(ds), "--config", str(config), "--out", str(out))
    return code, ds, out


def test_train_runs_and_writes_artifacts(trained_run):
    code, ds, out = trained_run
    assert code == 0
    assert (out / "final.ckpt").exists()
    assert (out / "best.ckpt").exists()
    assert (out / "config.txt").exists()
    history = (out / "history.txt").read_text().strip().splitlines()
    assert len(history) == 2  # evals at iters 3 and 6

    net_cfg, train_cfg, _ = read_config_file(out / "config.txt")
    assert net_cfg.input_size == 32
    assert train_cfg.max_iters == 6


def test_train_missing_config_is_io_error(tmp_path):
    ds = tmp_path / "ds"
    run_cli("synth", "--out", str(ds), "--count", "4", "--size", "32", "--seed", "1")
    assert run_cli("train", "--data", str(ds), "--config", str(tmp_path / "none.cfg"), "--out", str(tmp_path / "o")) == 2


def test_train_bad_config_is_validation_error(tmp_path):
    ds = tmp_path / "ds"
    run_cli("synth", "--out", str(ds), "--count", "4", "--size", "32", "--seed", "1")
    bad = tmp_path / "bad.cfg"
    bad.write_text("net.mystery = 3\n")
    assert run_cli("train", "--data", str(ds), "--config", str(bad), "--out", str(tmp_path / "o")) == 3


def test_predict_writes_probability_map(trained_run, tmp_path):
    code, ds, out = trained_run
    assert code == 0
    target = tmp_path / "prob.png"
    assert run_cli("predict", "--ckpt", str(out / "final.ckpt"), "--image", str(ds / "images" / "00000.png"), "--out", str(target)) == 0
    prob = data.load_gray_map(target)
    assert prob.shape == (32, 32)
    assert prob.min() >= 0.0 and prob.max() <= 1.0


def test_predict_without_sibling_config_is_io_error(trained_run, tmp_path):
    code, ds, out = trained_run
    orphan = tmp_path / "orphan.ckpt"
    orphan.write_bytes((out / "final.ckpt").read_bytes())
    assert run_cli("predict", "--ckpt", str(orphan), "--image", str(ds / "images" / "00000.png"), "--out", str(tmp_path / "p.png")) == 2


# -- gradcheck ---------------------------------------------------------------------


def test_gradcheck_exits_zero(capsys):
    assert run_cli("gradcheck", "--seed", "7") == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out
