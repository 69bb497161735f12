import numpy as np
import pytest


def test_laurent_poly_ops():
    from molpuc.exceptions import DomainError
    from molpuc.polynomials import MatrixLaurentPoly, constant_poly

    A, B = np.array([[1.0, 2.0], [0.0, 1.0]]), np.array([[0.0, 1j], [1.0, 0.0]])
    p = MatrixLaurentPoly({-1: A, 1: B}, 2, "p", 2)
    z = 0.6 - 0.3j
    assert np.allclose(p(z), A / z + B * z)
    assert np.allclose(p.evaluate([z, 2.0])[1], A / 2.0 + 2.0 * B)
    assert np.allclose((p @ p)(z), p(z) @ p(z))
    assert np.allclose((p - p)(z), 0.0)
    assert np.allclose(p.shift(1)(z), z * p(z))
    assert np.allclose(p.reflect()(z), p(1.0 / z))
    assert np.allclose(p.reversed(1)(z), z * p(1.0 / np.conj(z)).conj().T)
    assert np.allclose((p.negative_part() + p.nonnegative_part())(z), p(z))
    assert np.allclose((constant_poly(B) @ p)(z), B @ p(z))
    assert (p.min_power, p.max_power) == (-1, 1)
    with pytest.raises(DomainError):
        p(0)
    exported = p.to_dict()
    assert exported["family"] == "p"
    assert list(exported["coeffs"]) == ["-1", "1"]


def test_array_times_laurent_poly():
    from molpuc.polynomials import MatrixLaurentPoly

    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    B = np.array([[0.5, 0.0], [1j, 1.0]])
    p = MatrixLaurentPoly({0: np.eye(2), 2: B}, 2, "p", 1)
    z = 0.7 + 0.2j
    left = A @ p
    assert isinstance(left, MatrixLaurentPoly)
    assert np.allclose(left(z), A @ p(z))
    assert (left.family, left.index) == ("p", 1)
    assert np.allclose((p @ A)(z), p(z) @ A)
    assert isinstance(np.eye(2) @ MatrixLaurentPoly({0: np.eye(2)}, 2), MatrixLaurentPoly)


def test_lebesgue_families(lebesgue):
    from molpuc.cmv import cmv_index
    from molpuc.polynomials import families_from_measure

    fam = families_from_measure(lebesgue, 6)["families"]
    z = 0.9 * np.exp(0.4j)
    for l in range(6):
        chi = z ** cmv_index(l)
        assert np.isclose(fam.phi1L[l](z)[0, 0], chi)
        assert np.isclose(fam.phi2R[l](z)[0, 0], chi)
        assert np.isclose(fam.phi1R[l](z)[0, 0], chi / (2.0 * np.pi))
        assert np.isclose(fam.phi2L[l](z)[0, 0], chi / (2.0 * np.pi))


@pytest.mark.parametrize("built", ["built_herm", "built_nonherm"])
def test_biorthogonality(built, request):
    from molpuc.polynomials import biorthogonality_check, quasi_orthogonality_residual

    b = request.getfixturevalue(built)
    assert biorthogonality_check(b["families"], b["measure"]) < 1e-10
    assert quasi_orthogonality_residual(b["families"], b["measure"]) < 1e-10


@pytest.mark.parametrize("built", ["built_herm", "built_nonherm"])
def test_dual_route(built, request, example_points):
    from molpuc.polynomials import dual_route_residual, szego_dual_route_residual

    b = request.getfixturevalue(built)
    res = dual_route_residual(b["families"], b["g_L"], b["g_R"], example_points)
    assert set(res) == {"phi1L", "phi2L", "phi1R", "phi2R"}
    assert max(res.values()) < 1e-10
    assert szego_dual_route_residual(b["szego"], b["moments"]) < 1e-10


def test_family_lookup(built_herm):
    fam = built_herm["families"]
    assert fam.column("phi1L", 0.5j).shape == (20, 2)
    assert fam.row("phi2R", 0.5j).shape == (2, 20)
    with pytest.raises(ValueError):
        fam.family("phi3L")
    assert set(fam.to_dict()) == {"phi1L", "phi2L", "phi1R", "phi2R"}


def test_szego_are_monic(built_nonherm):
    szego = built_nonherm["szego"]
    for tag in ("P1L", "P1R", "P2L", "P2R"):
        for n, p in enumerate(getattr(szego, tag)):
            assert np.allclose(p.coefficient(n), np.eye(2))
            assert p.max_power == n and p.min_power >= 0


def test_bernstein_szego_verblunsky(bernstein_szego):
    from molpuc.polynomials import families_from_measure, verblunsky_extract

    b = families_from_measure(bernstein_szego, 8)
    table = verblunsky_extract(b["fact_l"], b["fact_r"], b["families"])
    for name in ("a", "b", "c", "d"):
        alpha = getattr(table, name)
        assert np.isclose(alpha[1, 0, 0], -0.5, atol=1e-12)
        assert np.abs(alpha[2:]).max() < 1e-12
    assert np.allclose(table.alpha("a", 20), 0.0)


def test_gram_schmidt_matches_szego(bernstein_szego):
    from molpuc.polynomials import families_from_measure, gram_schmidt_szego, szego_from_molpuc

    szego = szego_from_molpuc(families_from_measure(bernstein_szego, 8)["families"])
    oracle = gram_schmidt_szego(bernstein_szego, 7)
    for n, coeffs in enumerate(oracle):
        mine = np.array([szego.P1L[n].coefficient(k)[0, 0] for k in range(n + 1)])
        assert np.abs(mine - coeffs).max() < 1e-10


def test_gram_schmidt_needs_scalar(herm2):
    from molpuc.polynomials import gram_schmidt_szego

    with pytest.raises(ValueError):
        gram_schmidt_szego(herm2, 3)


@pytest.mark.parametrize("built", ["built_herm", "built_nonherm"])
def test_verblunsky_relations(built, request):
    from molpuc.polynomials import norm_integral_residuals, verblunsky_relations

    b = request.getfixturevalue(built)
    res = verblunsky_relations(b["table"])
    assert max(res.values()) < 1e-9
    assert norm_integral_residuals(b["szego"], b["measure"], b["table"]) < 1e-9


def test_hermitian_pairing(built_herm, built_nonherm):
    from molpuc.polynomials import hermitian_pairing_residual

    assert hermitian_pairing_residual(built_herm["table"]) < 1e-10
    assert hermitian_pairing_residual(built_nonherm["table"]) > 1e-6


def test_verblunsky_frame(built_herm):
    from molpuc.polynomials import VerblunskyTable

    table = built_herm["table"]
    df = table.to_frame()
    assert list(df.columns) == ["l", "component", "row", "col", "re", "im"]
    assert len(df) == 6 * 10 * 4
    again = VerblunskyTable.from_stack(table.stack())
    assert np.allclose(again.hL, table.hL)
    assert np.allclose(table.a[0], np.eye(2))


@pytest.mark.parametrize("built", ["built_herm", "built_nonherm"])
def test_second_kind(built, request):
    from molpuc.polynomials import second_kind_residuals

    b = request.getfixturevalue(built)
    res = second_kind_residuals(b["families"], b["measure"])
    assert max(res.values()) < 1e-9


def test_second_kind_domain(built_herm):
    from molpuc.exceptions import DomainError
    from molpuc.polynomials import cauchy_partial, second_kind

    with pytest.raises(DomainError):
        second_kind(built_herm["families"], built_herm["measure"], 1, 0)
    with pytest.raises(DomainError):
        cauchy_partial(built_herm["families"], built_herm["measure"], 1, np.exp(0.3j), "C2L")
