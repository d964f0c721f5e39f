import pytest

from capsner.config import coerce, format_value, read_keyvalue
from capsner.corpus import SyntheticConfig
from capsner.numerics import ConfigurationError
from capsner.training import TrainConfig


def test_read_keyvalue(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nlearning-rate = 0.01  # trailing\n\nepochs=3\n", encoding="utf-8")
    assert read_keyvalue(p) == {"learning_rate": "0.01", "epochs": "3"}
    p.write_text("epochs 3\n", encoding="utf-8")
    with pytest.raises(ConfigurationError, match=":1:"):
        read_keyvalue(p)


def test_coerce_types():
    raw = {
        "learning_rate": "0.01",
        "epochs": "3",
        "scale_by_head_dim": "yes",
        "hard_mask": "auto",
        "clip_norm": "5",
        "ablation": "no_attention",
    }
    cfg = TrainConfig(**coerce(TrainConfig, raw))
    assert cfg.learning_rate == 0.01 and cfg.epochs == 3
    assert cfg.scale_by_head_dim is True and cfg.hard_mask is None
    assert cfg.clip_norm == 5.0 and cfg.ablation == "no_attention"
    syn = coerce(SyntheticConfig, {"entity_types": "PER, LOC"})
    assert syn["entity_types"] == ("PER", "LOC")


def test_coerce_rejects_unknown_and_malformed():
    with pytest.raises(ConfigurationError, match="bogus, zzz"):
        coerce(TrainConfig, {"zzz": "1", "bogus": "2"})
    with pytest.raises(ConfigurationError, match="epochs"):
        coerce(TrainConfig, {"epochs": "many"})
    with pytest.raises(ConfigurationError, match="use_stop"):
        coerce(TrainConfig, {"use_stop": "maybe"})


def test_format_value_round_trips_through_coerce():
    cfg = TrainConfig(hard_mask=False, clip_norm=None)
    raw = {k: format_value(v) for k, v in cfg.to_dict().items()}
    assert TrainConfig(**coerce(TrainConfig, raw)) == cfg
