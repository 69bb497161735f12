import numpy as np
import pytest


@pytest.fixture
def lebesgue():
    from molpuc.measure import bundled_measure

    return bundled_measure("lebesgue")


@pytest.fixture
def bernstein_szego():
    from molpuc.measure import bundled_measure

    return bundled_measure("bernstein_szego")


@pytest.fixture
def herm2():
    from molpuc.measure import bundled_measure

    return bundled_measure("herm2")


@pytest.fixture
def nonherm2():
    from molpuc.measure import bundled_measure

    return bundled_measure("nonherm2")


@pytest.fixture
def random_herm_measure():
    """Seeded m=2 Hermitian weight, positive definite since ||W_1|| + ||W_2|| < 4."""
    from molpuc.measure import MatrixMeasure

    rng = np.random.default_rng(7)
    W1 = 0.3 * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    W2 = 0.15 * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    W0 = np.array([[4.0, 0.5 - 0.2j], [0.5 + 0.2j, 4.5]])
    coeffs = {0: W0, 1: W1, -1: W1.conj().T, 2: W2, -2: W2.conj().T}
    return MatrixMeasure(2, "trig_poly", coeffs, hermitian=True, name="random_herm")


@pytest.fixture
def random_nonherm_measure():
    """Seeded m=2 weight with independent positive and negative coefficients."""
    from molpuc.measure import MatrixMeasure

    rng = np.random.default_rng(11)
    coeffs = {n: 0.25 * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) for n in (-2, -1, 1, 2)}
    coeffs[0] = np.array([[3.0, 0.4], [-0.2j, 2.5]])
    return MatrixMeasure(2, "trig_poly", coeffs, name="random_nonherm")


@pytest.fixture
def example_pairs():
    from molpuc.utils import sample_pairs

    return sample_pairs(6, seed=42)


@pytest.fixture
def example_points():
    from molpuc.utils import sample_points

    return sample_points(6, seed=42)


@pytest.fixture
def example_measure_dict():
    return {
        "m": 1,
        "kind": "trig_poly",
        "hermitian": True,
        "coeffs": {"-1": [[[0.5, 0.0]]], "0": [[[2.0, 0.0]]], "1": [[[0.5, 0.0]]]},
    }


@pytest.fixture
def built_herm(random_herm_measure):
    from molpuc.polynomials import families_from_measure, szego_from_molpuc, verblunsky_extract

    built = families_from_measure(random_herm_measure, 10)
    built["table"] = verblunsky_extract(built["fact_l"], built["fact_r"], built["families"])
    built["szego"] = szego_from_molpuc(built["families"])
    built["measure"] = random_herm_measure
    return built


@pytest.fixture
def built_nonherm(random_nonherm_measure):
    from molpuc.polynomials import families_from_measure, szego_from_molpuc, verblunsky_extract

    built = families_from_measure(random_nonherm_measure, 10)
    built["table"] = verblunsky_extract(built["fact_l"], built["fact_r"], built["families"])
    built["szego"] = szego_from_molpuc(built["families"])
    built["measure"] = random_nonherm_measure
    return built
