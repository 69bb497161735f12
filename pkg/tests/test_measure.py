import json

import numpy as np
import pytest


@pytest.mark.parametrize("name", ["lebesgue", "bernstein_szego", "herm2", "nonherm2"])
def test_bundled_measures_load(name):
    from molpuc.measure import bundled_measure

    mu = bundled_measure(name)
    assert mu.name == name
    assert mu.moments(4).data.shape == (9, mu.m, mu.m)


def test_bundled_measure_unknown():
    from molpuc.exceptions import MeasureConfigError
    from molpuc.measure import bundled_measure

    with pytest.raises(MeasureConfigError):
        bundled_measure("not_a_measure")


@pytest.mark.parametrize("name", ["lebesgue", "bernstein_szego", "herm2"])
def test_bundled_hermitian_measures_are_positive(name):
    from molpuc.measure import bundled_measure

    assert bundled_measure(name).is_positive_definite()


def test_check_bundled_rejects_indefinite_weight():
    from molpuc.exceptions import MeasureConfigError
    from molpuc.measure import MatrixMeasure, check_bundled

    # 1 + 2 cos θ changes sign
    indefinite = MatrixMeasure(1, "trig_poly", {0: 1.0, 1: 1.0, -1: 1.0}, hermitian=True, name="indefinite")
    with pytest.raises(MeasureConfigError, match="not positive definite"):
        check_bundled(indefinite)
    check_bundled(MatrixMeasure(1, "trig_poly", {0: 1.0, 1: 1.0, -1: 0.5}, name="plain"))


def test_lebesgue_moments(lebesgue):
    mom = lebesgue.moments(3)
    assert np.allclose(mom[0], np.eye(1))
    for n in (-3, -1, 1, 3):
        assert np.allclose(mom[n], 0.0)


def test_moments_insufficient(bernstein_szego):
    from molpuc.exceptions import InsufficientMomentsError

    with pytest.raises(InsufficientMomentsError):
        bernstein_szego.moments(65)
    with pytest.raises(InsufficientMomentsError):
        bernstein_szego.moments(3)[4]


def test_from_dict(example_measure_dict):
    from molpuc.measure import MatrixMeasure

    mu = MatrixMeasure.from_dict(example_measure_dict, name="example")
    assert mu.m == 1
    assert mu.bandwidth == 1
    assert np.isclose(mu.weight(0.0)[0, 0, 0], 3.0)
    assert np.isclose(mu.weight(np.pi)[0, 0, 0], 1.0)
    assert mu.is_positive_definite()


def test_from_dict_bad_config():
    from molpuc.exceptions import MeasureConfigError
    from molpuc.measure import MatrixMeasure

    with pytest.raises(MeasureConfigError):
        MatrixMeasure.from_dict({"m": 1, "kind": "trig_poly"})
    with pytest.raises(MeasureConfigError):
        MatrixMeasure.from_dict({"m": 1, "kind": "spline", "coeffs": {"0": 1.0}})
    with pytest.raises(MeasureConfigError):
        MatrixMeasure.from_dict({"m": 0, "kind": "trig_poly", "coeffs": {"0": 1.0}})


def test_declared_hermitian_is_checked():
    from molpuc.exceptions import MeasureConfigError
    from molpuc.measure import MatrixMeasure

    with pytest.raises(MeasureConfigError):
        MatrixMeasure(1, "trig_poly", {0: 1.0, 1: 0.3, -1: 0.1}, hermitian=True)


def test_moment_list_must_be_contiguous():
    from molpuc.exceptions import MeasureConfigError
    from molpuc.measure import MatrixMeasure

    with pytest.raises(MeasureConfigError):
        MatrixMeasure(1, "moment_list", {0: 1.0, 2: 0.1, -2: 0.1})


def test_from_file_and_object(tmp_path, example_measure_dict):
    from molpuc.measure import MatrixMeasure

    path = tmp_path / "measure.json"
    path.write_text(json.dumps(example_measure_dict))
    from_file = MatrixMeasure.from_file(str(path))
    from_object = MatrixMeasure.from_object(str(path))
    from_json = MatrixMeasure.from_object(json.dumps(example_measure_dict))
    assert from_file.name == "measure"
    assert from_file.fingerprint() == from_object.fingerprint() == from_json.fingerprint()
    assert MatrixMeasure.from_object(from_file) is from_file
    assert MatrixMeasure.from_object("lebesgue").name == "lebesgue"


def test_from_file_missing_or_empty(tmp_path):
    from molpuc.exceptions import MeasureConfigError
    from molpuc.measure import MatrixMeasure

    with pytest.raises(MeasureConfigError):
        MatrixMeasure.from_file(str(tmp_path / "nope.json"))
    empty = tmp_path / "empty.json"
    empty.write_text("")
    with pytest.raises(MeasureConfigError):
        MatrixMeasure.from_file(str(empty))
    with pytest.raises(MeasureConfigError):
        MatrixMeasure.from_object(42)


def test_fingerprint_is_stable(herm2):
    from molpuc.measure import MatrixMeasure

    again = MatrixMeasure.from_dict(herm2.to_dict())
    assert again.fingerprint() == herm2.fingerprint()
    assert len(herm2.fingerprint()) == 64


def test_trig_poly_moments_match_quadrature(random_herm_measure):
    from molpuc.measure import compute_moments, quadrature_moments

    exact = compute_moments(random_herm_measure, 5)
    quad = quadrature_moments(random_herm_measure, 5)
    assert np.abs(exact.data - quad.data).max() < 1e-13
    assert exact.hermitian_residual() < 1e-14


def test_bernstein_szego_weight(bernstein_szego):
    # w = 1/|1 - z/2|^2 normalized so that c_0 = 4/3
    theta = np.linspace(0.0, 2.0 * np.pi, 7)
    z = np.exp(1j * theta)
    expected = 1.0 / np.abs(1.0 - 0.5 * z) ** 2
    assert np.allclose(bernstein_szego.weight(theta)[:, 0, 0].real, expected, atol=1e-12)


def test_fourier_series(herm2):
    from molpuc.exceptions import DomainError
    from molpuc.measure import fourier_series_eval

    z = 0.7 + 0.2j
    direct = sum(herm2.coefficient(n) * z**n for n in range(-2, 3))
    assert np.allclose(fourier_series_eval(herm2, z), direct)
    assert np.allclose(herm2.fourier_series(z, dagger=True), herm2.fourier_series(np.conj(z)).conj().T)
    with pytest.raises(DomainError):
        herm2.fourier_series(0)


def test_positive_definiteness(herm2, nonherm2, random_herm_measure):
    assert herm2.is_positive_definite()
    assert random_herm_measure.is_positive_definite()
    assert not nonherm2.is_positive_definite()


@pytest.mark.parametrize("side", ["L", "R"])
@pytest.mark.parametrize("sign", [1, -1])
def test_multiply_linear_weight(random_herm_measure, side, sign):
    d = np.array([0.3, -0.2])
    shifted = random_herm_measure.multiply_linear(d, side, sign)
    theta = np.array([0.1, 1.3, 2.9])
    z = np.exp(1j * theta)
    w = random_herm_measure.weight(theta)
    factor = np.eye(2)[None] - np.diag(d)[None] * (z**sign)[:, None, None]
    expected = factor @ w if side == "L" else w @ factor
    assert np.allclose(shifted.weight(theta), expected)
    assert not shifted.hermitian


def test_multiply_linear_moment_list(bernstein_szego):
    shifted = bernstein_szego.multiply_linear(0.5, "L", 1)
    assert shifted.kind == "moment_list"
    assert shifted.bandwidth == 63
    assert np.isclose(shifted.coefficient(2)[0, 0], bernstein_szego.coefficient(2)[0, 0] - 0.5 * bernstein_szego.coefficient(1)[0, 0])


def test_deformed_measure_zero_times(herm2):
    from molpuc.toda import FlowTimes, deform_measure

    assert deform_measure(herm2, FlowTimes.zeros(2)) is herm2


def test_deformed_measure_moments(random_herm_measure):
    from molpuc.measure import DeformedMeasure, quadrature_moments
    from molpuc.toda import FlowTimes

    times = FlowTimes.from_values(2, tL1=0.1, tR2=[0.05, -0.02])
    mu = DeformedMeasure(random_herm_measure, times)
    fft = mu.moments(4)
    quad = quadrature_moments(mu, 4, n_nodes=1024)
    assert np.abs(fft.data - quad.data).max() < 1e-12
    z = 1.1 * np.exp(0.4j)
    left = np.exp(0.1 / z) * np.ones(2)
    right = np.exp(np.array([0.05, -0.02]) * z)
    expected = left[:, None] * random_herm_measure.fourier_series(z) * right[None, :]
    assert np.allclose(mu.fourier_series(z), expected)


def test_scalar_deformations_commute(lebesgue):
    from molpuc.measure import DeformedMeasure
    from molpuc.toda import FlowTimes

    a = DeformedMeasure(lebesgue, FlowTimes.from_values(1, tL1=0.2, tR2=0.1)).moments(3)
    b = DeformedMeasure(lebesgue, FlowTimes.from_values(1, tR1=0.2, tL2=0.1)).moments(3)
    assert np.abs(a.data - b.data).max() < 1e-14
