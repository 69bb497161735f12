import numpy as np
import pytest


def _moment_matrices(mu, N):
    from molpuc.cmv import build_moment_matrix, required_moments

    mom = mu.moments(required_moments(N))
    return build_moment_matrix(mom, "L", N), build_moment_matrix(mom, "R", N)


def test_lebesgue_factorization(lebesgue):
    from molpuc.gauss_borel import block_lu

    g_L, g_R = _moment_matrices(lebesgue, 6)
    fact_l = block_lu(g_L, "L")
    fact_r = block_lu(g_R, "R")
    for d in fact_l.D + fact_r.D:
        assert np.allclose(d, 2.0 * np.pi)
    assert np.allclose(fact_l.S1, np.eye(6))
    assert np.allclose(fact_r.Z1, np.eye(6) / (2.0 * np.pi))


@pytest.mark.parametrize("fixture", ["random_herm_measure", "random_nonherm_measure", "herm2", "nonherm2"])
def test_reconstruction_and_schur(fixture, request):
    from molpuc.gauss_borel import block_lu, schur_residual

    mu = request.getfixturevalue(fixture)
    g_L, g_R = _moment_matrices(mu, 10)
    for g, side in ((g_L, "L"), (g_R, "R")):
        fact = block_lu(g, side)
        assert fact.reconstruction_residual(g) < 1e-11
        assert schur_residual(fact, g) < 1e-11
        assert fact.N == 10


def test_factor_views(random_nonherm_measure):
    from molpuc.gauss_borel import block_lu

    g_L, g_R = _moment_matrices(random_nonherm_measure, 8)
    fl, fr = block_lu(g_L, "L"), block_lu(g_R, "R")
    assert np.allclose(np.linalg.inv(fl.S1) @ fl.S2, g_L.data)
    assert np.allclose(fl.S2 @ fl.S2_inv, np.eye(16))
    assert np.allclose(fr.Z2 @ np.linalg.inv(fr.Z1), g_R.data)
    assert np.allclose(fr.Z2 @ fr.Z2_inv, np.eye(16))
    assert np.allclose(fl.normalized_upper()[:2, :2], np.eye(2))
    assert np.allclose(fr.Z1_hat[:2, :2], np.eye(2))
    assert np.allclose(fl.inverse_upper() @ fl.upper, np.eye(16))
    with pytest.raises(ValueError):
        fl.Z1


def test_hermitian_duality(herm2):
    from molpuc.gauss_borel import block_lu, hermitian_duality_residual

    g_L, g_R = _moment_matrices(herm2, 10)
    assert hermitian_duality_residual(block_lu(g_L, "L"), block_lu(g_R, "R")) < 1e-11


def test_nested_consistency(random_herm_measure):
    from molpuc.gauss_borel import block_lu, nested_consistency

    g_L, _ = _moment_matrices(random_herm_measure, 12)
    small = block_lu(g_L.leading(8), "L")
    large = block_lu(g_L, "L")
    assert nested_consistency(small, large) < 1e-12


def test_schur_complement():
    from molpuc.gauss_borel import schur_complement

    M = np.array([[4.0, 1.0, 2.0], [1.0, 3.0, 0.0], [2.0, 0.0, 5.0]])
    A, B, C, D = M[:2, :2], M[:2, 2:], M[2:, :2], M[2:, 2:]
    assert np.allclose(schur_complement(M, 2, 1), D - C @ np.linalg.solve(A, B))
    assert np.allclose(schur_complement(M, 0, 1), M)


def test_not_quasi_definite():
    from molpuc.exceptions import QuasiDefinitenessError
    from molpuc.gauss_borel import block_lu, quasi_definiteness_scan

    g = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(QuasiDefinitenessError) as e:
        block_lu(g, "L", 1)
    assert e.value.level == 1
    scan = quasi_definiteness_scan(g, 1)
    assert list(scan["passed"]) == [False, True]


def test_quasi_definiteness_scan(herm2):
    from molpuc.gauss_borel import quasi_definiteness_scan

    g_L, _ = _moment_matrices(herm2, 6)
    scan = quasi_definiteness_scan(g_L)
    assert list(scan.columns) == ["level", "abs_det", "min_singular", "passed"]
    assert scan["passed"].all()
    assert len(scan) == 6


def test_to_frame(herm2):
    from molpuc.gauss_borel import block_lu

    g_L, _ = _moment_matrices(herm2, 5)
    df = block_lu(g_L, "L").to_frame()
    assert list(df["level"]) == [0, 1, 2, 3, 4]
    assert (df["condition"] >= 1.0).all()
