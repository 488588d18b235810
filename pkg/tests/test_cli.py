import csv
import json

import numpy as np
import pytest

from mimowave.cli import build_parser, main
from mimowave.config import DEFAULTS, load_config
from mimowave.dataset import read_codes

DESK_CONFIG = {
    "paths": {"dataset_dir": "data", "checkpoint": "model.ckpt", "metric_log": "log.csv", "output_dir": "out"},
    "array": {"M": 4},
    "N": 16,
    "catalog": {"rect_widths": [20, 40, 60]},
    "dataset": {"samples_per_class": 50},
    "covfit": {"restarts": 2},
    "generator": {"embed_hidden": 16, "recurrent_hidden": 16, "recurrent_layers": 1},
    "discriminator": {"channels": [4, 8, 8], "paddings": [[2, 2], [2, 2], [2, 2]]},
    "train": {"n_steps": 10, "batch_size": 16, "lr": 5e-4, "checkpoint_every": 5},
    "eval": {"samples_per_class": 20, "bench_repeats": 1},
}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "config.json").write_text(json.dumps(DESK_CONFIG))
    return d


def run(workdir, *args):
    return main([args[0], "--config", str(workdir / "config.json"), *args[1:]])


@pytest.fixture(scope="module")
def built(workdir):
    assert run(workdir, "dataset") == 0
    assert run(workdir, "train") == 0
    return workdir


def test_defaults_are_full_scale():
    cfg = load_config()
    assert (cfg.N, cfg.M) == (41, 10)
    assert len(cfg.catalog()) == 27
    assert DEFAULTS["dataset"]["samples_per_class"] == 1000
    t = cfg.train_config()
    assert (t.critic_iters, t.lambda_gp, t.nu_corr) == (5, 10.0, 10.0)


def test_dataset_outputs_and_determinism(built, tmp_path):
    names = sorted(p.name for p in (built / "data").iterdir())
    assert names == ["class_0.bin", "class_1.bin", "class_2.bin", "fit_report.csv", "manifest.json"]
    for c in range(3):
        assert read_codes(built / "data" / f"class_{c}.bin").shape == (50, 16, 4)
    other = dict(DESK_CONFIG, paths=dict(DESK_CONFIG["paths"], dataset_dir=str(tmp_path / "again")))
    (tmp_path / "c.json").write_text(json.dumps(other))
    assert main(["dataset", "--config", str(tmp_path / "c.json")]) == 0
    for name in names:
        assert (built / "data" / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_train_log_schedule(built):
    with open(built / "log.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 60
    for step in range(10):
        phases = [r["phase"] for r in rows if int(r["step"]) == step]
        assert phases == ["critic"] * 5 + ["generator"]


def test_resume_reproduces_log(built, tmp_path):
    cfg = dict(DESK_CONFIG, paths=dict(DESK_CONFIG["paths"], dataset_dir=str(built / "data"),
                                       checkpoint=str(tmp_path / "r.ckpt"), metric_log=str(tmp_path / "r.csv")))
    (tmp_path / "r.json").write_text(json.dumps(cfg))
    assert main(["train", "--config", str(tmp_path / "r.json"), "--steps", "4"]) == 0
    assert main(["train", "--config", str(tmp_path / "r.json"), "--resume"]) == 0
    assert (tmp_path / "r.csv").read_text() == (built / "log.csv").read_text()
    assert (tmp_path / "r.ckpt").read_bytes() == (built / "model.ckpt").read_bytes()


def test_generate_batch(built, capsys):
    assert run(built, "generate", "--count", "100", "--class-id", "1") == 0
    X = read_codes(built / "out" / "generated.bin")
    assert X.shape == (100, 16, 4)
    assert np.max(np.abs(np.abs(X) - 1)) <= 1e-9
    assert "mean correlation penalty" in capsys.readouterr().out
    with open(built / "out" / "generated_phases.csv") as fh:
        assert sum(1 for _ in fh) == 1 + 100 * 16 * 4


def test_generate_from_outside_catalog(built, tmp_path):
    R = np.eye(4) * (1 + 0j)
    R[0, 1] = R[1, 0] = 0.3
    (tmp_path / "r.json").write_text(json.dumps({"real": R.real.tolist(), "imag": R.imag.tolist()}))
    assert run(built, "generate", "--r-file", str(tmp_path / "r.json"), "--count", "3", "--name", "novel") == 0
    assert read_codes(built / "out" / "novel.bin").shape == (3, 16, 4)
    np.save(tmp_path / "bad.npy", np.eye(3))
    assert run(built, "generate", "--r-file", str(tmp_path / "bad.npy")) == 3


def test_eval_diversity(built, capsys):
    assert run(built, "eval", "diversity") == 0
    out = capsys.readouterr().out.splitlines()
    assert [ln.split()[0] for ln in out[-3:]] == ["C_in(GAN)", "C_in(Data)", "C_nn"]


def test_eval_autocorr(built):
    assert run(built, "eval", "autocorr") == 0
    with open(built / "out" / "autocorr.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["source", "tau", "magnitude"]
    for source in ("data", "gan"):
        taus = [int(r["tau"]) for r in rows if r["source"] == source]
        assert taus == list(range(-15, 16))


def test_eval_beampattern(built):
    assert run(built, "eval", "beampattern") == 0
    with open(built / "out" / "beampattern.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["class_id", "angle_deg", "desired", "achieved_fit", "achieved_data", "achieved_gan"]
    assert len(rows) == 3 * 181


def test_eval_bench(built, capsys):
    assert run(built, "eval", "bench") == 0
    with open(built / "out" / "bench.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [(r["method"], r["scenario"]) for r in rows] == [("cyclic", "single"), ("generator", "single"),
                                                            ("generator", "batch100")]
    assert "Single Sample" in capsys.readouterr().out


@pytest.mark.parametrize("cmd", ["dataset", "train", "generate", "eval"])
def test_help_lists_flags(cmd, capsys):
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args([cmd, "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for flag in ("--config", "--seed", "--set"):
        assert flag in text


def test_unknown_flag_fails_fast():
    with pytest.raises(SystemExit) as exc:
        main(["dataset", "--no-such-flag"])
    assert exc.value.code != 0


def test_missing_dataset_is_data_error(tmp_path):
    cfg = dict(DESK_CONFIG, paths=dict(DESK_CONFIG["paths"], dataset_dir=str(tmp_path / "nothing")))
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert main(["train", "--config", str(tmp_path / "c.json")]) == 3


def test_bad_override_is_config_error(workdir):
    assert run(workdir, "dataset", "--set", "nope.key=1") == 2
    assert run(workdir, "dataset", "--set", "train.n_steps") == 2


def test_shipped_desk_config_loads():
    import pathlib

    cfg = load_config(pathlib.Path(__file__).parent.parent / "configs" / "desk.json")
    assert (cfg.N, cfg.M, len(cfg.catalog())) == (16, 4, 3)
    from mimowave.gan import conv_output_shapes

    assert all(min(s) > 0 for s in conv_output_shapes(cfg.discriminator_config()))
