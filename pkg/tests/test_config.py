import json

import pytest

from pggsvd.config import DEFAULTS, ConfigError, ExperimentConfig, load_config


def test_every_field_has_a_default():
    cfg = ExperimentConfig.from_dict({})
    assert cfg.raw == DEFAULTS
    assert (cfg.n_t, cfg.n_r, cfg.n_e) == (4, 3, 2)


def test_nested_defaults_merge():
    cfg = ExperimentConfig.from_dict({"optimizer": {"n_iter": 3}})
    assert cfg["optimizer"]["n_iter"] == 3
    assert cfg["optimizer"]["restarts"] == DEFAULTS["optimizer"]["restarts"]


@pytest.mark.parametrize("given,field", [
    ({"bogus": 1}, "bogus"),
    ({"optimizer": {"nope": 1}}, "optimizer"),
    ({"dims": [4, 3]}, "dims"),
    ({"dims": [4, 0, 2]}, "N_r"),
    ({"constellation": "FSK"}, "constellation"),
    ({"constellation": "QAM-M"}, "constellation/M"),
    ({"csi_mode": "partial"}, "csi_mode"),
    ({"schemes": ["pg_gsvd_an"]}, "pg_gsvd_an"),
    ({"csi_mode": "statistical", "schemes": ["gsvd_baseline"]}, "gsvd_baseline"),
    ({"schemes": []}, "schemes"),
    ({"snr_grid_db": []}, "snr_grid_db"),
    ({"snr_grid_db": [0, "x"]}, "snr_grid_db[1]"),
    ({"N_s": 5}, "N_s"),
    ({"dims": [12, 3, 2], "N_s": 9}, "cap"),
    ({"optimizer": {"restarts": 0}}, "optimizer.restarts"),
    ({"seeds": [-1]}, "seeds[0]"),
    ({"correlation": {"rank": 9}}, "correlation.rank"),
    ({"sigma": 0}, "sigma"),
    ({"record_timing": "yes"}, "record_timing"),
])
def test_field_level_errors(given, field):
    with pytest.raises(ConfigError, match=field.replace("[", r"\[").replace("]", r"\]")):
        ExperimentConfig.from_dict(given)


def test_an_only_in_statistical_mode():
    cfg = ExperimentConfig.from_dict({"csi_mode": "statistical", "schemes": ["pg_gsvd_an"]})
    assert cfg["schemes"] == ["pg_gsvd_an"]


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"constellation": "BPSK"}))
    assert load_config(p).constellation().M == 2


def test_load_config_bad_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(p)


def test_load_config_missing(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")
