import json

import pytest

from ssmrecon.config import load_config
from ssmrecon.errors import ConfigError


def write_config(tmp_path, doc):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


def test_empty_document_uses_defaults(tmp_path):
    cfg = load_config(write_config(tmp_path, {}))
    assert cfg.ssm.components == 50
    assert cfg.slicer.resolution == 192
    assert cfg.slicer.offsets == (0.35, 0.50, 0.65)
    assert cfg.split.train_fraction == pytest.approx(0.74)
    assert cfg.train.hidden == 256
    assert cfg.fit.smoothness == 1.0


def test_unknown_section_rejected(tmp_path):
    with pytest.raises(ConfigError, match="unknown config section"):
        load_config(write_config(tmp_path, {"slicerr": {}}))


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="resolutoin"):
        load_config(write_config(tmp_path, {"slicer": {"resolutoin": 192}}))


def test_bad_value_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, {"split": {"train_fraction": 1.5}}))
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, {"synth": {"amplitude": 0.9}}))


def test_paths_resolve_relative_to_config(tmp_path):
    cfg = load_config(write_config(tmp_path, {"paths": {"population_dir": "data/pop"}}))
    assert cfg.population_dir == tmp_path / "data" / "pop"


def test_invalid_json_rejected(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(path)


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.json")


def test_offsets_list_becomes_tuple(tmp_path):
    cfg = load_config(write_config(tmp_path, {"slicer": {"offsets": [0.4, 0.6]}}))
    assert cfg.slicer.offsets == (0.4, 0.6)
