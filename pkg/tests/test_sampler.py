import math

import numpy as np
import pytest
from scipy import stats

from spinkeldysh.coherent import build_grid
from spinkeldysh.contour import ContourParams, Leg, Ordering
from spinkeldysh.errors import ConfigValidationError, DimensionMismatch, InvalidBlochPoint, InvalidContour, ZeroOverlap
from spinkeldysh.evaluator import LatticeEvaluator, build_propagators, partition_trace
from spinkeldysh.lattice import HamiltonianSpec, LatticeSpec, SpinRep
from spinkeldysh.sampler import (
    PathConfig,
    binned_ratio,
    brute_force_partition,
    correlator_observable,
    jackknife_ratio,
    metropolis_run,
    sk_action,
    spin_observable,
)
from spinkeldysh.snapshots import load_snapshot


def test_constant_path_free_action_vanishes(free_spins):
    path = PathConfig.constant(3, 2, theta=1.0, phi=2.0)
    action = sk_action(free_spins, ContourParams(1.0, 1.0, 3), path)
    assert action.log_magnitude == pytest.approx(0.0, abs=1e-12)
    assert action.phase == pytest.approx(0.0, abs=1e-12)
    assert action.weight == pytest.approx(1.0, abs=1e-12)


def test_constant_path_demo_action_is_euclidean_only(demo_spec):
    """Real-time legs cancel; the Euclidean leg gives -beta h(north pole)."""
    path = PathConfig.constant(4, 2)
    action = sk_action(demo_spec, ContourParams(3.0, 10.0, 4), path)
    assert action.log_magnitude == pytest.approx(3.0 * 9 / 8, abs=1e-12)
    assert action.phase == pytest.approx(0.0, abs=1e-12)


def test_antipodal_neighbours_raise(free_spins):
    theta = np.zeros((3, 2, 2))
    theta[0, 1, 1] = np.pi
    with pytest.raises(ZeroOverlap):
        sk_action(free_spins, ContourParams(1.0, 1.0, 2), PathConfig(theta, np.zeros_like(theta)))


def test_path_validation(free_spins):
    with pytest.raises(DimensionMismatch):
        PathConfig(np.zeros((2, 2, 2)), np.zeros((2, 2, 2)))
    with pytest.raises(InvalidBlochPoint):
        PathConfig(np.full((3, 1, 1), 4.0), np.zeros((3, 1, 1)))
    with pytest.raises(DimensionMismatch):
        sk_action(free_spins, ContourParams(1.0, 1.0, 3), PathConfig.constant(2, 2))
    with pytest.raises(InvalidContour):
        sk_action(free_spins, ContourParams(1.0, 1.0, 2, n_euclid=3), PathConfig.constant(2, 2))


def test_brute_force_free_single_site():
    spec = HamiltonianSpec((), LatticeSpec(1), SpinRep(1))
    grid = build_grid(spec.rep, 1, 4, 8)
    assert brute_force_partition(spec, ContourParams(1.0, 1.0, 1), grid) == pytest.approx(2.0, abs=1e-10)


def test_brute_force_matches_partition_trace(demo_spec):
    """Summing path weights over the grid is the matrix trace on the same grid."""
    grid = build_grid(demo_spec.rep, 2, 2, 4)
    contour = ContourParams(1.0, 1.0, 1)
    expected = partition_trace(build_propagators(demo_spec, contour, grid, check=False))
    assert brute_force_partition(demo_spec, contour, grid) == pytest.approx(expected, rel=1e-10)


def test_path_observables():
    path = PathConfig.constant(2, 1)
    obs = spin_observable(Leg.PLUS, 1, 0, 3)
    assert obs(path.theta[None], path.phi[None])[0] == pytest.approx(1.5)
    corr = correlator_observable(Ordering.UNORDERED, 2, 0, 0, 1, 0, 3, n=2)
    assert corr.factors == ((Leg.PLUS, 2, 0, 1), (Leg.MINUS, 2, 0, 3))
    assert corr.scale == pytest.approx(2.25)


def test_jackknife_constant_ratio():
    rng = np.random.default_rng(3)
    den = rng.random(50) + 0.5
    ratio, err = jackknife_ratio(2 * den + 0j, den + 0j)
    assert ratio == pytest.approx(2.0)
    assert abs(err) < 1e-12


def test_jackknife_of_plain_mean():
    rng = np.random.default_rng(4)
    x = rng.normal(size=1000) + 0j
    ratio, err = jackknife_ratio(x, np.ones(1000, dtype=complex))
    assert ratio == pytest.approx(x.mean())
    assert err.real == pytest.approx(np.std(x.real, ddof=1) / math.sqrt(1000), rel=1e-9)
    assert err.imag == pytest.approx(0.0, abs=1e-15)


def test_jackknife_needs_two_bins():
    with pytest.raises(ConfigValidationError):
        jackknife_ratio(np.ones(1, dtype=complex), np.ones(1, dtype=complex))


def test_binned_ratio_grows_bins_for_correlated_data():
    rng = np.random.default_rng(5)
    x = np.repeat(rng.normal(size=256), 64) + 0j
    ratio, err, size = binned_ratio(x, np.ones_like(x))
    assert 64 <= size <= 1024
    assert ratio == pytest.approx(x.mean())
    naive = np.std(x.real) / math.sqrt(x.size)
    assert err.real > 4 * naive


def test_metropolis_rejects_bad_settings(single_spin):
    contour = ContourParams(1.0, 1.0, 2)
    obs = spin_observable(Leg.PLUS, 1, 0, 3)
    with pytest.raises(ConfigValidationError):
        metropolis_run(single_spin, contour, 0.0, 100, 10, 1, obs)
    with pytest.raises(ConfigValidationError):
        metropolis_run(single_spin, contour, 1.0, 1, 10, 1, obs)
    with pytest.raises(InvalidContour):
        metropolis_run(single_spin, ContourParams(1.0, 1.0, 2, n_euclid=3), 1.0, 100, 10, 1, obs)


def test_metropolis_is_deterministic_in_seed(single_spin):
    contour = ContourParams(1.0, 1.0, 2)
    obs = spin_observable(Leg.PLUS, 1, 0, 3)
    first = metropolis_run(single_spin, contour, 1.0, 400, 50, 11, obs, n_chains=2, workers=1)
    second = metropolis_run(single_spin, contour, 1.0, 400, 50, 11, obs, n_chains=2, workers=2)
    assert first.mean == second.mean
    assert first.avg_sign == second.avg_sign
    assert first.seed == 11
    assert 0.0 < first.acceptance <= 1.0


def test_metropolis_writes_snapshot(single_spin, tmp_path):
    contour = ContourParams(1.0, 1.0, 2)
    target = tmp_path / "ensemble.sks"
    metropolis_run(
        single_spin, contour, 1.0, 100, 10, 7, spin_observable(Leg.EUCLID, 2, 0, 1), n_chains=2, snapshot=target
    )
    header, theta, phi = load_snapshot(target)
    assert header.seed == "7"
    assert header.n_chains == 2
    assert theta.shape == phi.shape == (2, 100, 3, 2, 1)
    assert np.all((theta >= 0) & (theta <= np.pi))


def test_sign_collapse_is_flagged(single_spin, mocker):
    rng = np.random.default_rng(6)
    mocker.patch(
        "spinkeldysh.sampler._log_weight_batch",
        side_effect=lambda spec, contour, theta, phi: 2j * np.pi * rng.random(theta.shape[:-3]),
    )
    est = metropolis_run(single_spin, ContourParams(1.0, 1.0, 2), 1.0, 4000, 10, 3, spin_observable(Leg.PLUS, 1, 0, 3))
    assert est.sign_collapse
    assert est.as_dict()["sign_collapse"] is True


def test_free_spin_magnetization_vanishes():
    spec = HamiltonianSpec((), LatticeSpec(1), SpinRep(1))
    est = metropolis_run(spec, ContourParams(1.0, 1.0, 2), 1.5, 20000, 2000, 21, spin_observable(Leg.PLUS, 1, 0, 3),
                         n_chains=4)
    assert abs(est.mean.real) <= 3 * est.stderr.real
    assert abs(est.avg_sign) <= 1 + abs(est.avg_sign_stderr)


def test_free_spin_average_sign_baseline():
    """With H = 0 only the overlap chain carries a phase; its average over |w| is about 0.36 at N = 2."""
    spec = HamiltonianSpec((), LatticeSpec(1), SpinRep(1))
    est = metropolis_run(spec, ContourParams(1.0, 1.0, 2), 1.5, 20000, 2000, 8, spin_observable(Leg.PLUS, 1, 0, 3),
                         n_chains=4)
    assert not est.sign_collapse
    assert abs(est.avg_sign) == pytest.approx(0.358, abs=4 * abs(est.avg_sign_stderr) + 0.03)


def _free_spin_polar_samples(proposal_width, seeds, thin=50):
    """cos(theta) of the first + slice, thinned, pooled over seeds."""
    spec = HamiltonianSpec((), LatticeSpec(1), SpinRep(1))
    pooled = []

    def capture(theta, phi):
        pooled.append(np.cos(theta[:, ::thin, 0, 0, 0]).ravel())
        return np.zeros(theta.shape[:-3], dtype=complex)

    for seed in seeds:
        metropolis_run(spec, ContourParams(1.0, 1.0, 2), proposal_width, 5000, 500, seed, capture, n_chains=2)
    return np.concatenate(pooled)


@pytest.mark.slow
def test_stationary_distribution_is_rotation_invariant():
    """|w| for H = 0 depends only on relative angles, so each slice is uniform on the sphere."""
    samples = _free_spin_polar_samples(math.pi, range(10))
    assert stats.kstest(samples, stats.uniform(loc=-1.0, scale=2.0).cdf).pvalue > 0.01


@pytest.mark.slow
def test_stationary_distribution_independent_of_proposal_width():
    narrow = _free_spin_polar_samples(1.2, range(10), thin=100)
    wide = _free_spin_polar_samples(math.pi, range(10, 20))
    assert stats.ks_2samp(narrow, wide).pvalue > 0.01


@pytest.mark.slow
def test_metropolis_agrees_with_lattice_correlator_across_seeds(single_spin):
    contour = ContourParams(1.0, 1.0, 2)
    grid = build_grid(single_spin.rep, 1, 12, 24)
    expected = LatticeEvaluator(single_spin, contour, grid, check=False).correlator(
        Ordering.UNORDERED, 2, 0, 0, 1, 0, 1
    )
    obs = correlator_observable(Ordering.UNORDERED, 2, 0, 0, 1, 0, 1, n=2)
    pulls = []
    for seed in range(10):
        est = metropolis_run(single_spin, contour, 1.5, 20000, 2000, seed, obs, n_chains=4, workers=2)
        assert not est.sign_collapse
        assert abs(est.mean.real - expected.real) <= 3 * est.stderr.real
        pulls += [(est.mean.real - expected.real) / est.stderr.real, (est.mean.imag - expected.imag) / est.stderr.imag]
    assert math.sqrt(np.mean(np.square(pulls))) < 1.6


@pytest.mark.slow
def test_two_site_demo_sign_collapses(demo_spec):
    contour = ContourParams(1.0, 1.0, 4)
    obs = correlator_observable(Ordering.UNORDERED, 2, 0, 0, 1, 0, 1, n=4)
    est = metropolis_run(demo_spec, contour, 1.5, 5000, 1000, 1234, obs, n_chains=4, workers=2)
    assert abs(est.avg_sign) < 0.05
    assert est.sign_collapse
