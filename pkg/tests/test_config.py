import json

import pytest

from risota.config import (
    ConfigError, ExperimentConfig, config_from_dict, config_to_dict, load_config,
)
from risota.transport import PowerPolicy


def test_empty_object_gives_defaults(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{}")
    cfg = load_config(p)
    assert cfg == ExperimentConfig()
    assert cfg.topology.n_users == 10 and cfg.topology.n_elements == 45
    assert cfg.topology.carrier_hz == 915e6
    assert cfg.channel.path_loss_exponent == 4
    assert (cfg.channel.g_ps_dbi, cfg.channel.g_ris_dbi, cfg.channel.g_u_dbi) == (5, 5, 0)
    assert (cfg.power.uplink_snr_db, cfg.power.downlink_snr_db) == (20, 30)
    assert cfg.variant == "proposed"


def test_snr_arithmetic():
    cfg = config_from_dict({"power": {"uplink_snr_db": 20, "p_up": 1}})
    pol = PowerPolicy.from_snr(cfg.power.p_up, 1.0, 1.0, cfg.power.uplink_snr_db, 30)
    assert pol.sigma2_u == pytest.approx(0.01)


@pytest.mark.parametrize("raw, path", [
    ({"topology": {"n_elements": -3}}, "topology.n_elements"),
    ({"topology": {"n_elemnts": 3}}, "topology.n_elemnts"),
    ({"power": {"beta_u": 0}}, "power.beta_u"),
    ({"learning": {"tau_max": 1.5}}, "learning.tau_max"),
    ({"variant": "best"}, "variant"),
    ({"bogus": 1}, "bogus"),
    ({"sca": {"max_iters": 0}}, "sca"),
    ({"topology": 7}, "topology"),
])
def test_rejections_carry_key_path(raw, path):
    with pytest.raises(ConfigError) as err:
        config_from_dict(raw)
    assert err.value.path == path
    assert str(err.value).startswith(path)


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{nope")
    with pytest.raises(ConfigError):
        load_config(p)


def test_non_object():
    with pytest.raises(ConfigError):
        config_from_dict([1, 2])


def test_replace_dotted_keys():
    cfg = ExperimentConfig().replace(**{"topology.n_elements": 15, "seed": 3})
    assert cfg.topology.n_elements == 15 and cfg.seed == 3
    with pytest.raises(ConfigError):
        ExperimentConfig().replace(**{"learning.rounds": 0})


def test_per_user_power_list():
    cfg = config_from_dict({"topology": {"n_users": 2}, "power": {"p_up": [1.0, 2.0]}})
    assert cfg.power.p_up == (1.0, 2.0)
    with pytest.raises(ConfigError):
        config_from_dict({"topology": {"n_users": 3}, "power": {"p_up": [1.0, 2.0]}})


def test_round_trip_through_dict():
    cfg = config_from_dict({"topology": {"n_elements": 15}, "variant": "static_phase",
                            "power": {"downlink_snr_db": None}})
    again = config_from_dict(json.loads(json.dumps(config_to_dict(cfg))))
    assert again == cfg


def test_shipped_acceptance_config_loads():
    from pathlib import Path
    cfg = load_config(Path(__file__).parent.parent / "configs" / "fig2.json")
    assert cfg.power.beta_u == 100.0 and cfg.learning.rounds == 500
