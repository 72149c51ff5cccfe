import json
import logging
import os
from pathlib import Path

CONFIG_DIR = 'spinkeldysh'
CONFIG_FILE = 'config.json'
WORKERS_ENV = 'SPINKELDYSH_WORKERS'

logger = logging.getLogger("spinkeldysh.config")


def _get_config_path() -> Path:
    base = Path(os.environ.get('XDG_CONFIG_HOME', Path.home() / '.config'))
    cfg_dir = base / CONFIG_DIR
    cfg_dir.mkdir(parents=True, exist_ok=True)
    return cfg_dir / CONFIG_FILE


def load_config() -> dict:
    """User defaults: ``workers``, ``n_theta``, ``n_phi``. Unreadable files count as empty."""
    path = _get_config_path()
    if path.is_file():
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError):
            logger.warning("Ignoring unreadable user config %s", path)
            return {}
        return data if isinstance(data, dict) else {}
    return {}


def save_config(cfg: dict) -> None:
    path = _get_config_path()
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(cfg, f, indent=4, sort_keys=True)


def _positive_int(value) -> int | None:
    try:
        n = int(value)
    except (TypeError, ValueError):
        return None
    return n if n >= 1 else None


def resolve_workers(option: int | None = None, cfg: dict | None = None) -> int:
    """Worker count from the CLI option, then the environment, then the user config, else 1."""
    if option is not None and _positive_int(option):
        return int(option)
    env = _positive_int(os.environ.get(WORKERS_ENV))
    if env:
        return env
    cfg = load_config() if cfg is None else cfg
    return _positive_int(cfg.get('workers')) or 1


def quadrature_defaults(cfg: dict | None = None) -> dict:
    """User-level n_theta/n_phi overrides, used when an experiment file leaves them out."""
    cfg = load_config() if cfg is None else cfg
    out = {}
    for key in ('n_theta', 'n_phi'):
        value = _positive_int(cfg.get(key))
        if value:
            out[key] = value
    return out
