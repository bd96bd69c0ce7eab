import pytest

from paoi_relay.config_manager import ConfigManager, db_to_linear, default_scenario, dbm_to_watts
from paoi_relay.errors import ConfigError, InvalidScenarioError


def write_ini(tmp_path, body, name='scenario.ini'):
    path = tmp_path / name
    path.write_text(body)
    return str(path)


def test_defaults_without_file():
    manager = ConfigManager()
    scn = manager.load_scenario()
    assert scn == default_scenario()
    assert scn.gain_ref == pytest.approx(10 ** -4.7)
    assert scn.snr_gap == pytest.approx(10.0)
    assert scn.noise_w == pytest.approx(1e-13)
    assert scn.source_pos == (-800.0, 800.0)


def test_unit_conversions():
    assert db_to_linear(10.0) == pytest.approx(10.0)
    assert db_to_linear(-47.0) == pytest.approx(1.9952623e-5)
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert dbm_to_watts(-100.0) == pytest.approx(1e-13)


def test_get_value_types_follow_default(tmp_path):
    path = write_ini(tmp_path, "[scenario]\nflag = yes\ncount = 4\nratio = 0.5\nname = relay\npoint = 1, -2\n")
    manager = ConfigManager(path)
    assert manager.get_value('flag', False) is True
    assert manager.get_value('count', 0) == 4
    assert manager.get_value('ratio', 1.0) == 0.5
    assert manager.get_value('name', '') == 'relay'
    assert manager.get_value('point', (0.0, 0.0)) == (1.0, -2.0)
    assert manager.get_value('missing', 7) == 7


def test_bad_value_is_a_config_error(tmp_path):
    manager = ConfigManager(write_ini(tmp_path, "[scenario]\nn_packets = ten\nuav_start = 1;2\n"))
    with pytest.raises(ConfigError):
        manager.get_value('n_packets', 10)
    with pytest.raises(ConfigError):
        manager.get_value('uav_start', (0.0, 0.0))


def test_scenario_from_db_and_mega_keys(tmp_path):
    path = write_ini(tmp_path, "[scenario]\n"
                               "n_packets = 4\n"
                               "packet_size_mbits = 2\n"
                               "bandwidth_mhz = 0.5\n"
                               "gain_ref_db = -50\n"
                               "snr_gap_db = 0\n"
                               "noise_dbm = -90\n"
                               "uav_end = 0, 100\n"
                               "e_source_j = 2.5\n")
    scn = ConfigManager(path).load_scenario()
    assert scn.n_packets == 4
    assert scn.packet_size_bits == pytest.approx(2e6)
    assert scn.bandwidth_hz == pytest.approx(5e5)
    assert scn.s_bar == pytest.approx(4.0)
    assert scn.gain_ref == pytest.approx(1e-5)
    assert scn.snr_gap == pytest.approx(1.0)
    assert scn.noise_w == pytest.approx(1e-12)
    assert scn.uav_end == (0.0, 100.0)
    assert scn.e_source_j == 2.5
    assert scn.e_uav_j == default_scenario().e_uav_j


def test_linear_and_db_twins_conflict(tmp_path):
    path = write_ini(tmp_path, "[scenario]\ngain_ref = 1e-5\ngain_ref_db = -50\n")
    with pytest.raises(ConfigError):
        ConfigManager(path).load_scenario()


def test_unknown_key_is_rejected(tmp_path):
    with pytest.raises(ConfigError):
        ConfigManager(write_ini(tmp_path, "[scenario]\nheight = 100\n")).load_scenario()


def test_invalid_values_surface_as_scenario_errors(tmp_path):
    with pytest.raises(InvalidScenarioError):
        ConfigManager(write_ini(tmp_path, "[scenario]\nn_packets = 1\n")).load_scenario()


def test_missing_or_broken_file(tmp_path):
    with pytest.raises(ConfigError):
        ConfigManager(str(tmp_path / 'nope.ini'))
    with pytest.raises(ConfigError):
        ConfigManager(write_ini(tmp_path, "no section header here\n"))


def test_save_and_reload_scenario(tmp_path):
    scn = default_scenario().replace(e_source_j=0.75, uav_start=(-700.5, 12.25))
    path = str(tmp_path / 'saved.ini')
    ConfigManager().save_scenario(scn, path)
    assert ConfigManager(path).load_scenario() == scn


def test_solver_section(tmp_path):
    manager = ConfigManager(write_ini(tmp_path, "[scenario]\n[solver]\neps = 1e-4\nmax_outer = 5\n"))
    settings = manager.load_settings()
    assert settings.eps == 1e-4
    assert settings.max_outer == 5
    assert settings.max_sca == ConfigManager().load_settings().max_sca
