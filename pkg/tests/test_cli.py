import json

import numpy as np
import pytest
import torch
from PIL import Image

from udcnet import cli
from udcnet import config as C
from udcnet import data as D
from udcnet import engine
from udcnet import metrics as M

TINY = ["model.toy_channels=[8, 8, 16, 16]", "model.channels=8", "train.batch_size=2", "train.augment=true"]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds")
    D.write_dataset(D.synth_dataset(4, 64, seed=0), root, "train")
    D.write_dataset(D.synth_dataset(3, 64, seed=1), root, "test")
    return root


@pytest.fixture(scope="module")
def trained(dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    args = ["train", "--profile", "toy", "--output", str(out), "--override", f"dataset_root={dataset}",
            "--override", "train.max_steps=2", "--override", "train.epochs=1"]
    for o in TINY:
        args += ["--override", o]
    assert cli.main(args) == 0
    return out, args


def test_reference_values(capsys):
    code, out, _ = run(capsys, "reference", "--dataset", "orssd")
    assert code == 0
    lines = out.strip().splitlines()
    assert "not locally reproduced" in lines[0]
    row = dict(zip(lines[1].split("\t"), lines[2].split("\t")))
    assert row["dataset"] == "ORSSD" and row["backbone"] == "resnet50"
    assert float(row["mae"]) == pytest.approx(0.0068) and float(row["s_measure"]) == pytest.approx(0.9389)


def test_unknown_dataset_error_is_one_json_line(capsys):
    code, out, err = run(capsys, "reference", "--dataset", "nowhere")
    assert code != 0 and out == ""
    lines = err.strip().splitlines()
    assert len(lines) == 1
    blob = json.loads(lines[0])
    assert blob["error"] == "KeyError" and "ORSSD" in blob["message"]


@pytest.mark.parametrize("argv", [["bogus"], ["train", "--override", "model.nope=1"], ["eval"]])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code != 0 and json.loads(err.strip().splitlines()[-1])["error"] == "ConfigError"


def test_count_params_toy(capsys):
    code, out, _ = run(capsys, "count-params", "--profile", "toy")
    blob = json.loads(out)
    assert code == 0 and blob["params"] > 0 and blob["macs"] > 0


def test_print_config_matches_dump(capsys):
    code, out, _ = run(capsys, "train", "--profile", "toy", "--seed", "9", "--print-config")
    cfg = C.toy_profile()
    cfg.seed = 9
    assert code == 0 and out == C.dump_config(cfg)


def test_lr_schedule():
    tc = C.TrainConfig()
    assert engine.lr_at_epoch(tc, 0) == tc.lr
    assert engine.lr_at_epoch(tc, 59) == tc.lr
    assert engine.lr_at_epoch(tc, 60) == pytest.approx(1e-5)
    assert engine.lr_at_epoch(tc, 120) == pytest.approx(1e-6)


def _tiny(**train):
    cfg = C.apply_overrides(C.toy_profile(), TINY)
    for k, v in train.items():
        setattr(cfg.train, k, v)
    return cfg


@pytest.mark.parametrize("split_at", [2, 3])  # epoch boundary and mid-epoch
def test_resume_reproduces_losses(tmp_path, split_at):
    samples = D.synth_dataset(4, 64, seed=0)
    _, full = engine.fit(_tiny(max_steps=5, epochs=10), samples)
    engine.fit(_tiny(max_steps=split_at, epochs=10), samples, output_dir=tmp_path)
    _, rest = engine.fit(_tiny(max_steps=5, epochs=10), samples, resume=tmp_path / "last.pt")
    assert rest.step == 5
    assert rest.history == full.history[split_at:]


def test_scheduler_follows_epochs():
    samples = D.synth_dataset(2, 64, seed=0)
    cfg = _tiny(epochs=3, decay_every=2, lr=1e-3)
    lrs = []
    engine.fit(cfg, samples, on_step=lambda s, b, m: lrs.append(s.epoch))
    assert lrs == [0, 1, 2]


def test_gt_against_itself_is_perfect(dataset, tmp_path):
    manifest = D.load_manifest(dataset, "test")
    reports = []
    for pair in manifest.pairs:
        s = D.load_sample(*pair)
        reports.append(M.evaluate_pair(s.sal_gt[0], s.sal_gt[0]))
    agg = engine.write_report(reports, manifest.stems, tmp_path, "self")
    assert agg.mae == 0 and agg.f_max == pytest.approx(1, abs=1e-6) and agg.s_measure == pytest.approx(1)
    blob = json.loads((tmp_path / "self.json").read_text())
    for key in M.MetricReport.SCALARS:
        mean = np.mean([r[key] for r in blob["per_image"].values()])
        if key != "f_max":
            assert blob["aggregate"][key] == pytest.approx(mean)


def test_train_writes_checkpoints(trained):
    out, _ = trained
    assert (out / "last.pt").exists() and (out / "best.pt").exists()
    assert C.load_config(out / "config.json").model.channels == 8


def test_eval_and_export_curves(capsys, dataset, trained, tmp_path):
    out, _ = trained
    args = ["eval", "--profile", "toy", "--checkpoint", str(out / "last.pt"), "--output", str(tmp_path),
            "--override", f"dataset_root={dataset}"] + sum((["--override", o] for o in TINY), [])
    code, stdout, err = run(capsys, *args)
    assert code == 0, err
    scalars = json.loads(stdout)
    assert 0 <= scalars["mae"] <= 1 and 0 <= scalars["s_measure"] <= 1
    code, _, _ = run(capsys, "export-curves", "--report", str(tmp_path / "eval_test.json"),
                     "--csv", str(tmp_path / "curves.csv"))
    rows = (tmp_path / "curves.csv").read_text().splitlines()
    assert code == 0 and rows[0] == "threshold,precision,recall,f" and len(rows) == 257


def test_infer_is_deterministic(capsys, dataset, trained, tmp_path):
    out, _ = trained
    images = dataset / "test" / "images"
    for target in ("a", "b"):
        args = ["infer", "--profile", "toy", "--checkpoint", str(out / "last.pt"), "--images", str(images),
                "--output", str(tmp_path / target)] + sum((["--override", o] for o in TINY), [])
        code, stdout, err = run(capsys, *args)
        assert code == 0, err
        assert json.loads(stdout) == {"images": 3}
    for kind in ("saliency", "edge"):
        files = sorted((tmp_path / "a" / kind).iterdir())
        assert len(files) == 3
        for f in files:
            arr = np.asarray(Image.open(f))
            assert arr.dtype == np.uint8 and arr.shape == (64, 64)
            assert f.read_bytes() == (tmp_path / "b" / kind / f.name).read_bytes()


def test_checkpoint_roundtrip_predictions(trained, dataset):
    from udcnet.model import load_checkpoint

    out, _ = trained
    cfg = C.apply_overrides(C.toy_profile(), TINY)
    a, _ = load_checkpoint(out / "last.pt", cfg.model)
    b, _ = load_checkpoint(out / "last.pt", cfg.model)
    x = torch.randn(1, 3, 64, 64)
    assert torch.equal(engine.predict(a, x)[0], engine.predict(b, x)[0])
