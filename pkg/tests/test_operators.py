import numpy as np
import pytest


@pytest.fixture
def ops_herm(built_herm):
    from molpuc.operators import dressed_catalog

    return dressed_catalog(built_herm["fact_l"], built_herm["fact_r"])


@pytest.fixture
def ops_nonherm(built_nonherm):
    from molpuc.operators import dressed_catalog

    return dressed_catalog(built_nonherm["fact_l"], built_nonherm["fact_r"])


def test_lebesgue_dressing(lebesgue):
    from molpuc.cmv import eta, interior, upsilon
    from molpuc.operators import C_MARGIN, dressed_catalog, synthetic_operators
    from molpuc.polynomials import families_from_measure, verblunsky_extract

    b = families_from_measure(lebesgue, 8)
    ops = dressed_catalog(b["fact_l"], b["fact_r"])
    assert np.allclose(ops["JL"].data, upsilon(8).data)
    assert np.allclose(ops["C[0]"].data, eta(8).data)
    table = verblunsky_extract(b["fact_l"], b["fact_r"])
    syn = synthetic_operators(table)
    assert np.allclose(interior(syn["C[0]"], 1, C_MARGIN), interior(eta(8).data, 1, C_MARGIN))
    assert np.allclose(interior(syn["JL"], 1, C_MARGIN), interior(upsilon(8).data, 1, C_MARGIN))
    assert np.allclose(interior(syn["JL_inv"], 1, C_MARGIN), interior(upsilon(8).data.T, 1, C_MARGIN))


def test_dress_unknown_kind(built_herm):
    from molpuc.operators import dress

    with pytest.raises(ValueError):
        dress(built_herm["fact_l"], built_herm["fact_r"], "K")


def test_catalog_contents(ops_herm):
    assert set(ops_herm) == {
        "JL", "JL_inv", "JR", "JR_inv", "C[0]", "C_inv[0]", "C[-1]", "C_inv[-1]", "C[1]", "C_inv[1]"
    }
    for op in ops_herm.values():
        assert op.route_residual < 1e-9
    assert ops_herm["C[1]"].margin == 3
    assert ops_herm["JL"].interior().shape == (16, 16)


@pytest.mark.parametrize("built,ops", [("built_herm", "ops_herm"), ("built_nonherm", "ops_nonherm")])
def test_closed_forms(built, ops, request):
    from molpuc.operators import closed_form_residuals, power_residuals

    b, o = request.getfixturevalue(built), request.getfixturevalue(ops)
    res = closed_form_residuals(o, b["table"])
    assert max(res.values()) < 1e-9
    assert "C[0]_subdiagonal_quasinorm_form" in res
    assert max(power_residuals(o).values()) < 1e-9


@pytest.mark.parametrize("built,ops", [("built_herm", "ops_herm"), ("built_nonherm", "ops_nonherm")])
def test_recursions(built, ops, request, example_points):
    from molpuc.operators import recursion_residuals, szego_recursion_check

    b, o = request.getfixturevalue(built), request.getfixturevalue(ops)
    res = recursion_residuals(b["families"], o, b["table"], example_points)
    assert max(res.values()) < 1e-9
    assert "five-term phi1L" in res
    szego = szego_recursion_check(b["szego"], b["table"], example_points)
    assert len(szego) == 8
    assert max(szego.values()) < 1e-9


def test_synthetic_inverses(built_nonherm):
    from molpuc.operators import synthetic_operators

    syn = synthetic_operators(built_nonherm["table"])
    k = 2 * 6
    assert np.allclose((syn["C[0]"] @ syn["C_inv[0]"])[:k, :k], np.eye(k))
    assert np.allclose((syn["JL"] @ syn["JL_inv"])[:k, :k], np.eye(k))


def test_c_margin():
    from molpuc.operators import c_margin

    assert c_margin(0) == 3
    assert c_margin(-1) == 3
    assert c_margin(2) == 5


@pytest.mark.parametrize("name", ["herm2", "nonherm2", "bernstein_szego"])
def test_adjoint_eigen_relations(name, example_points):
    from molpuc.measure import bundled_measure
    from molpuc.operators import DAGGER_MARGIN, dressed_catalog, recursion_residuals
    from molpuc.polynomials import families_from_measure, verblunsky_extract

    b = families_from_measure(bundled_measure(name), 12)
    table = verblunsky_extract(b["fact_l"], b["fact_r"], b["families"])
    res = recursion_residuals(b["families"], dressed_catalog(b["fact_l"], b["fact_r"]), table, example_points)
    daggers = {k: v for k, v in res.items() if "J" in k and "dag" in k}
    assert len(daggers) == 4
    assert max(daggers.values()) < 1e-9
    assert max(res.values()) < 1e-9
    assert DAGGER_MARGIN == 4
