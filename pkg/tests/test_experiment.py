import json

import pytest

from spinkeldysh.contour import Ordering
from spinkeldysh.errors import ConfigParseError, ConfigValidationError, HamiltonianError, InvalidContour
from spinkeldysh.experiment import load_experiment, parse_experiment, read_config_file

BUNDLED = [
    "demo_extrapolation_table.yml",
    "demo_unordered_correlators.yml",
    "demo_ztilde_check.yml",
    "free_spin_exact.yml",
    "single_spin_mc.yml",
]


def _minimal(**overrides):
    data = {
        "task": "exact",
        "hamiltonian": {"sites": 1, "terms": []},
        "contour": {"beta": 1.0},
        "observables": [{"x": 0, "i": 3, "x_prime": 0, "i_prime": 3, "t": 0.0}],
    }
    data.update(overrides)
    return data


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_configs_load(configs_dir, name):
    config = load_experiment(configs_dir / name)
    assert config.observables
    assert config.source.endswith(name)


def test_demo_lattice_config_expands_time_grid(configs_dir):
    config = load_experiment(configs_dir / "demo_unordered_correlators.yml")
    assert config.task == "lattice-correlator"
    assert config.ns == [5000]
    times = config.observables[0].times
    assert len(times) == 100
    assert times[0] == pytest.approx(0.1)
    assert times[-1] == pytest.approx(10.0)
    assert all(config.contour().time_index(t) >= 1 for t in times)
    assert config.observables[1].name == "neighbor_site"


def test_extrapolation_config_windows(configs_dir):
    config = load_experiment(configs_dir / "demo_extrapolation_table.yml")
    assert config.windows[0] == (300, 400, 500)
    assert config.windows[-1] == (10000, 12500, 15000)
    assert config.observables[0].ordering is Ordering.UNORDERED


def test_mc_config_settings(configs_dir):
    config = load_experiment(configs_dir / "single_spin_mc.yml")
    assert config.mc.chains == 4
    assert config.mc.proposal_width == pytest.approx(1.5)
    assert config.seed == 1234
    assert config.output_format == "json"


def test_json_config(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(_minimal()))
    config = load_experiment(path)
    assert config.task == "exact"
    assert config.output_format == "csv"


def test_resolved_config_is_complete():
    config = parse_experiment(_minimal(seed=5))
    resolved = config.resolved()
    assert resolved["task"] == "exact"
    assert resolved["hamiltonian"]["sites"] == 1
    assert resolved["quadrature"] == {"n_theta": 12, "n_phi": 24, "check": True}
    assert resolved["observables"][0]["t"] == [0.0]
    assert resolved["seed"] == 5
    json.dumps(resolved)


def test_unparsable_file(tmp_path):
    path = tmp_path / "broken.yml"
    path.write_text("task: [unclosed\n")
    with pytest.raises(ConfigParseError):
        read_config_file(path)
    with pytest.raises(ConfigParseError):
        read_config_file(tmp_path / "missing.yml")
    path.write_text("- just\n- a list\n")
    with pytest.raises(ConfigParseError):
        read_config_file(path)


@pytest.mark.parametrize("overrides, error", [
    ({"task": "plot"}, ConfigValidationError),
    ({"task": None}, ConfigValidationError),
    ({"contour": {"t_max": 1.0}}, ConfigValidationError),
    ({"contour": {"beta": -1.0}}, InvalidContour),
    ({"contour": {"beta": 1.0, "n": 2.5}}, ConfigValidationError),
    ({"observables": []}, ConfigValidationError),
    ({"observables": [{"ordering": "sideways", "t": 1.0}]}, ConfigValidationError),
    ({"observables": [{"t": [2.0, 1.0]}]}, ConfigValidationError),
    ({"observables": [{"t_grid": {"start": 1.0, "stop": 0.0, "count": 3}}]}, ConfigValidationError),
    ({"hamiltonian": {"sites": 1, "terms": [{"coupling": 1.0, "factors": [[3, 1]]}]}}, HamiltonianError),
    ({"output": {"format": "xml"}}, ConfigValidationError),
])
def test_invalid_configs(overrides, error):
    with pytest.raises(error):
        parse_experiment(_minimal(**overrides))


def test_task_specific_requirements():
    with pytest.raises(ConfigValidationError):
        parse_experiment(_minimal(task="continuum-table"))
    with pytest.raises(ConfigValidationError):
        parse_experiment(_minimal(task="lattice-correlator", contour={"beta": 1.0, "n": [10, 20]}))
    with pytest.raises(ConfigValidationError):
        parse_experiment(_minimal(task="mc", mc={"n_samples": 1}))
    config = parse_experiment(_minimal(task="ztilde-check", observables=[], contour={"beta": 1.0, "n": [10, 20]}))
    assert config.ns == [10, 20]


@pytest.mark.parametrize("window", [[20, 10, 30], [10, 20], [10, 10, 30]])
def test_continuum_windows_must_increase(window):
    with pytest.raises(ConfigValidationError, match="strictly increasing"):
        parse_experiment(_minimal(task="continuum-table", windows=[window]))


def test_load_experiment_fills_quadrature_defaults(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(_minimal(quadrature={"n_phi": 30})))
    config = load_experiment(path, {"n_theta": 16, "n_phi": 20})
    assert (config.n_theta, config.n_phi) == (16, 30)


def test_load_experiment_wraps_malformed_values(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(_minimal(hamiltonian={"sites": 1, "two_s": "abc"})))
    with pytest.raises(ConfigValidationError, match="Invalid config"):
        load_experiment(path, {"n_theta": 16})
