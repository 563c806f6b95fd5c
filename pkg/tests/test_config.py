import json

import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from udcnet import config as C


def test_json_roundtrip_is_idempotent(tmp_path):
    text = C.dump_config(C.toy_profile())
    path = tmp_path / "c.json"
    path.write_text(text)
    assert C.dump_config(C.load_config(path)) == text


def test_yaml_partial_config(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump({"seed": 7, "model": {"channels": 64, "dse": {"channels": 0}}}))
    cfg = C.load_config(path)
    assert cfg.seed == 7 and cfg.model.channels == 64 and cfg.model.dse.channels == 0
    assert cfg.train.lr == C.TrainConfig().lr


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("")
    assert C.load_config(path) == C.RunConfig()


@given(st.integers(1, 512), st.floats(1e-6, 1.0), st.integers(0, 10**6))
def test_overrides_apply(channels, lr, seed):
    cfg = C.apply_overrides(C.RunConfig(), [f"model.channels={channels}", f"train.lr={lr!r}", f"seed={seed}"])
    assert (cfg.model.channels, cfg.train.lr, cfg.seed) == (channels, lr, seed)
    again = C.from_dict(json.loads(C.dump_config(cfg)))
    assert again == cfg


def test_override_lists_and_bools():
    cfg = C.apply_overrides(C.RunConfig(), ["model.dse.dilations=[1, 2, 4]", "model.use_djo=false"])
    assert cfg.model.dse.dilations == [1, 2, 4] and cfg.model.use_djo is False


@pytest.mark.parametrize("override", ["model.nope=1", "nope.x=1", "seed.x=1", "no_equals_sign"])
def test_bad_override_keys(override):
    with pytest.raises(C.ConfigError):
        C.apply_overrides(C.RunConfig(), [override])


def test_unknown_file_keys_are_named(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"model": {"chanels": 3}}))
    with pytest.raises(C.ConfigError, match="chanels"):
        C.load_config(path)


@pytest.mark.parametrize("override", [
    "model.backbone=vgg",
    "model.channels=0",
    "model.image_size=100",
    "model.toy_channels=[1, 2]",
    "model.fsdt.dw_kernels=[2, 5]",
    "model.fsdt.cdffn_global_mode=bogus",
    "model.dse.dilations=[4, 2]",
    "model.djo.freq_path=bogus",
    "train.optimizer=sgd",
    "train.lr=0",
    "train.lr_decay=1.5",
    "train.batch_size=0",
    "train.max_steps=-1",
    "train.loss_window=4",
])
def test_validation_rejects(override):
    with pytest.raises(C.ConfigError):
        C.apply_overrides(C.RunConfig(), [override])


def test_toy_profile_is_valid():
    cfg = C.toy_profile().validate()
    assert cfg.model.backbone == "toy" and cfg.model.image_size % 32 == 0


def test_exponent_override_is_a_float():
    assert C.apply_overrides(C.RunConfig(), ["train.lr=1e-4"]).train.lr == 1e-4
    assert C.apply_overrides(C.RunConfig(), ["train.lr=1"]).train.lr == 1.0


@pytest.mark.parametrize("override", ["train.epochs=ten", "train.augment=3", "model.channels=true",
                                      "model.dse.dilations=3", "train.lr=fast"])
def test_type_errors(override):
    with pytest.raises(C.ConfigError):
        C.apply_overrides(C.RunConfig(), [override])
