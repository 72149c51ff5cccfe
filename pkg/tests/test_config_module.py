import json

from spinkeldysh.config import load_config, quadrature_defaults, resolve_workers, save_config


def test_load_config_missing(tmp_path, monkeypatch):
    """load_config returns empty dict if config file does not exist."""
    monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path))
    cfg = load_config()
    assert cfg == {}
    # directory should be created
    assert (tmp_path / 'spinkeldysh').exists()


def test_load_and_save_cycle(tmp_path, monkeypatch):
    """Data written with save_config is returned by load_config."""
    monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path))
    data = {"workers": 4, "n_theta": 16}
    save_config(data)
    cfg_path = tmp_path / 'spinkeldysh' / 'config.json'
    assert cfg_path.exists()
    assert load_config() == data
    assert json.loads(cfg_path.read_text()) == data


def test_load_config_invalid_json(tmp_path, monkeypatch):
    """Corrupted or non-mapping config files result in an empty dict."""
    monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path))
    cfg_path = tmp_path / 'spinkeldysh' / 'config.json'
    cfg_path.parent.mkdir(parents=True)
    cfg_path.write_text("{invalid")
    assert load_config() == {}
    cfg_path.write_text("[1, 2]")
    assert load_config() == {}


def test_resolve_workers_precedence(tmp_path, monkeypatch):
    """CLI option beats the environment, which beats the user config."""
    monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path))
    monkeypatch.delenv("SPINKELDYSH_WORKERS", raising=False)
    assert resolve_workers() == 1
    save_config({"workers": 3})
    assert resolve_workers() == 3
    monkeypatch.setenv("SPINKELDYSH_WORKERS", "5")
    assert resolve_workers() == 5
    assert resolve_workers(2) == 2


def test_resolve_workers_ignores_nonsense(monkeypatch):
    monkeypatch.setenv("SPINKELDYSH_WORKERS", "many")
    assert resolve_workers(0, cfg={"workers": -2}) == 1


def test_quadrature_defaults():
    assert quadrature_defaults({"n_theta": 16, "n_phi": "x", "workers": 2}) == {"n_theta": 16}
    assert quadrature_defaults({}) == {}
