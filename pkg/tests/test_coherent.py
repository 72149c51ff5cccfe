import numpy as np
import pytest

from spinkeldysh.coherent import (
    BlochPoint,
    SphereConfig,
    build_grid,
    coherent_state,
    overlap,
    overlap_factors,
    quad_operator,
    site_coherent_state,
    spin_rep_matrices,
)
from spinkeldysh.errors import DimensionMismatch, InvalidBlochPoint, TooFewNodes
from spinkeldysh.lattice import SpinRep
from spinkeldysh.oracle import spin_matrix


def _random_config(rng, n_sites):
    theta = np.arccos(1 - 2 * rng.random(n_sites))
    phi = 2 * np.pi * rng.random(n_sites)
    return SphereConfig.from_angles(theta, phi)


@pytest.mark.parametrize("two_s", [1, 2, 3])
def test_spin_matrices_satisfy_su2(two_s):
    s1, s2, s3 = spin_rep_matrices(SpinRep(two_s))
    s = two_s / 2
    np.testing.assert_allclose(s1 @ s2 - s2 @ s1, 1j * s3, atol=1e-14)
    casimir = s1 @ s1 + s2 @ s2 + s3 @ s3
    np.testing.assert_allclose(casimir, s * (s + 1) * np.eye(two_s + 1), atol=1e-13)


def test_north_pole_is_highest_weight():
    np.testing.assert_array_equal(site_coherent_state(0.0, 0.0, SpinRep(1)), [1.0, 0.0])


def test_south_pole_is_lowest_weight():
    state = site_coherent_state(np.pi, 0.0, SpinRep(2))
    assert abs(state[-1]) == pytest.approx(1.0, abs=1e-12)


def test_bloch_point_range():
    with pytest.raises(InvalidBlochPoint):
        BlochPoint(-0.1, 0.0)
    with pytest.raises(InvalidBlochPoint):
        BlochPoint(0.5, 2 * np.pi)


@pytest.mark.parametrize("two_s", [1, 2, 3])
def test_closed_form_overlap_matches_inner_product(two_s):
    rep = SpinRep(two_s)
    rng = np.random.default_rng(two_s)
    for _ in range(1000):
        bra = _random_config(rng, 2)
        ket = _random_config(rng, 2)
        direct = np.vdot(coherent_state(bra, rep), coherent_state(ket, rep))
        assert overlap(bra, ket, rep) == pytest.approx(direct, abs=1e-12)


def test_overlap_self_and_antipodal():
    rep = SpinRep(1)
    config = SphereConfig.from_angles([1.1, 0.4], [2.0, 5.5])
    assert overlap(config, config, rep) == pytest.approx(1.0, abs=1e-14)
    assert abs(overlap_factors(0.0, 0.0, np.pi, 0.0)) < 1e-15


def test_overlap_site_mismatch():
    with pytest.raises(DimensionMismatch):
        overlap(SphereConfig.from_angles([0.0], [0.0]), SphereConfig.from_angles([0.0, 0.0], [0.0, 0.0]), SpinRep(1))


def test_build_grid_rejects_too_few_nodes():
    with pytest.raises(TooFewNodes):
        build_grid(SpinRep(1), 1, 1, 8)
    with pytest.raises(TooFewNodes):
        build_grid(SpinRep(1), 1, 4, 1)


@pytest.mark.parametrize("two_s", [1, 2, 3])
def test_weights_sum_to_dimension(two_s):
    grid = build_grid(SpinRep(two_s), 1, 5, 7)
    assert grid.weights.sum() == pytest.approx(two_s + 1, abs=1e-12)
    assert grid.nodes_per_sphere == 35
    assert len(grid.nodes) == 1


@pytest.mark.parametrize("two_s, n_sites", [(1, 1), (2, 1), (1, 2)])
def test_resolution_of_identity_at_minimum_grid(two_s, n_sites):
    rep = SpinRep(two_s)
    grid = build_grid(rep, n_sites, two_s + 2, 2 * two_s + 2)
    np.testing.assert_allclose(quad_operator(grid), np.eye(rep.dim ** n_sites), atol=1e-12)


@pytest.mark.parametrize("two_s, n_sites", [(1, 1), (2, 1), (1, 2)])
def test_quadrature_reproduces_spin_operators(two_s, n_sites):
    rep = SpinRep(two_s)
    grid = build_grid(rep, n_sites, two_s + 2, 2 * two_s + 2)
    for x in range(n_sites):
        for i in (1, 2, 3):
            op = quad_operator(grid, lambda omega: (rep.s + 1) * omega[:, x, i - 1])
            np.testing.assert_allclose(op, spin_matrix(rep, n_sites, x, i), atol=1e-12)


def test_quad_operator_stable_under_grid_doubling():
    rep = SpinRep(1)

    def symbol(omega):
        return np.exp(0.3j * 1.5 * omega[:, 0, 2])

    coarse = quad_operator(build_grid(rep, 1, 12, 24), symbol)
    fine = quad_operator(build_grid(rep, 1, 24, 48), symbol)
    np.testing.assert_allclose(coarse, fine, atol=1e-10)


def test_grid_blocks_cover_every_node():
    grid = build_grid(SpinRep(1), 2, 3, 4)
    total_weight = 0.0
    count = 0
    for omega, weights, psi in grid.blocks(block_size=50):
        assert omega.shape[1:] == (2, 3)
        assert psi.shape[1] == 4
        total_weight += weights.sum()
        count += weights.size
    assert count == grid.n_nodes == 144
    assert total_weight == pytest.approx(4.0, abs=1e-12)
