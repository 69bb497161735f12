import numpy as np
import pytest


@pytest.mark.parametrize("l,power", [(0, 0), (1, -1), (2, 1), (3, -2), (4, 2), (7, -4), (8, 4)])
def test_cmv_index(l, power):
    from molpuc.cmv import cmv_index, cmv_position

    assert cmv_index(l) == power
    assert cmv_position(power) == l


def test_cmv_index_negative():
    from molpuc.cmv import cmv_index

    with pytest.raises(ValueError):
        cmv_index(-1)


def test_chi_eval():
    from molpuc.cmv import chi_eval, chi_vector
    from molpuc.exceptions import DomainError

    z = 0.5 + 0.5j
    assert np.allclose(chi_eval(3, z, 2), z**-2 * np.eye(2))
    assert np.allclose(chi_eval(0, 0.0), np.eye(1))
    with pytest.raises(DomainError):
        chi_eval(1, 0.0)
    assert chi_vector(5, z, 2).shape == (10, 2)


@pytest.mark.parametrize("N,expected", [(1, 0), (2, 1), (3, 2), (4, 3), (5, 4), (12, 11)])
def test_required_moments(N, expected):
    from molpuc.cmv import required_moments

    assert required_moments(N) == expected


def test_lebesgue_moment_matrix(lebesgue):
    from molpuc.cmv import build_moment_matrix

    g = build_moment_matrix(lebesgue.moments(5), "L", 6)
    assert np.allclose(g.data, 2.0 * np.pi * np.eye(6))


def test_moment_matrix_entries(random_nonherm_measure):
    from molpuc.cmv import build_moment_matrix, cmv_index

    mom = random_nonherm_measure.moments(4)
    g_L = build_moment_matrix(mom, "L", 5)
    g_R = build_moment_matrix(mom, "R", 5)
    for i, j in [(0, 1), (2, 3), (4, 1), (3, 3)]:
        n = cmv_index(j) - cmv_index(i)
        assert np.allclose(g_L.block(i, j), 2.0 * np.pi * mom[n])
        assert np.allclose(g_R.block(i, j), 2.0 * np.pi * mom[-n])


def test_moment_matrix_needs_moments(lebesgue):
    from molpuc.cmv import build_moment_matrix
    from molpuc.exceptions import InsufficientMomentsError

    with pytest.raises(InsufficientMomentsError):
        build_moment_matrix(lebesgue.moments(2), "L", 6)


def test_upsilon_shifts_chi():
    from molpuc.cmv import chi_vector, upsilon

    z = 1.3 * np.exp(0.7j)
    N = 9
    ups = upsilon(N, 2).data
    lhs, rhs = ups @ chi_vector(N, z, 2), z * chi_vector(N, z, 2)
    # the last two block rows reach past the truncation
    assert np.allclose(lhs[: 2 * (N - 2)], rhs[: 2 * (N - 2)])


def test_eta_reflects_chi():
    from molpuc.cmv import chi_vector, eta

    z = 0.8 * np.exp(-0.3j)
    N = 7
    e = eta(N).data
    assert np.allclose(e @ chi_vector(N, z), chi_vector(N, 1.0 / z))
    assert np.allclose(e @ e, np.eye(N))


def test_upsilon_power_inverse():
    from molpuc.cmv import upsilon, upsilon_power

    ups = upsilon(8).data
    assert np.allclose(upsilon_power(8, -1).data, ups.T)
    assert np.allclose(upsilon_power(8, 2).data, ups @ ups)


@pytest.mark.parametrize("name", ["lebesgue", "bernstein_szego", "herm2", "nonherm2"])
def test_structural_checks(name):
    from molpuc.cmv import build_moment_matrix, eta, required_moments, structural_checks, upsilon
    from molpuc.measure import bundled_measure

    mu = bundled_measure(name)
    N = 10
    mom = mu.moments(required_moments(N))
    res = structural_checks(build_moment_matrix(mom, "L", N), build_moment_matrix(mom, "R", N), upsilon(N, mu.m), eta(N, mu.m))
    assert max(res.values()) < 1e-12


def test_block_matrix_helpers(random_herm_measure):
    from molpuc.cmv import block_diag_lift, block_mask, block_part, build_moment_matrix, interior

    g = build_moment_matrix(random_herm_measure.moments(5), "L", 6)
    assert g.N == 6
    assert g.leading(3).data.shape == (6, 6)
    assert np.allclose(g.dagger().data, g.data.conj().T)
    assert interior(g.data, 2, 2).shape == (8, 8)
    assert np.array_equal(interior(g.data, 2, 2), g.interior(2))
    assert interior(g.data, 2, 6).shape == (0, 0)
    lower = block_part(g.data, 2, "lower")
    assert np.allclose(lower[0:2, 2:4], 0.0)
    assert block_mask(6, 2, "upper")[0, 11]
    lift = block_diag_lift(np.diag([1.0, 2.0]), 3)
    assert np.allclose(np.diag(lift), [1.0, 2.0] * 3)
