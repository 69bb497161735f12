import json

import numpy as np
import pandas as pd
import pytest


@pytest.mark.parametrize(
    "text,side,j,a",
    [("L:1:0", "L", 1, 0), ("R:2:1", "R", 2, 1), ("total:L1", "L", 1, None), ("total:R2", "R", 2, None)],
)
def test_flow_axis_from_string(text, side, j, a):
    from molpuc.toda import FlowAxis

    axis = FlowAxis.from_string(text)
    assert (axis.side, axis.j, axis.a) == (side, j, a)
    assert axis.label == text
    assert axis.is_total == (a is None)


@pytest.mark.parametrize("text", ["L:3:0", "X:1:0", "total:", "L1", "L:1:x"])
def test_flow_axis_bad(text):
    from molpuc.exceptions import MeasureConfigError
    from molpuc.toda import FlowAxis

    with pytest.raises(MeasureConfigError):
        FlowAxis.from_string(text)


@pytest.mark.parametrize("text,label", [("total:H1", "total:L1"), ("total:H2", "total:L2"), ("H:1:0", "L:1:0")])
def test_flow_axis_generic_side(text, label):
    from molpuc.toda import FlowAxis

    assert FlowAxis.from_string(text).label == label


def test_flow_axis_projector():
    from molpuc.exceptions import MeasureConfigError
    from molpuc.toda import FlowAxis

    assert np.allclose(FlowAxis("L", 1, 1).E(2), np.diag([0.0, 1.0]))
    assert np.allclose(FlowAxis("R", 2).E(2), np.eye(2))
    with pytest.raises(MeasureConfigError):
        FlowAxis("L", 1, 2).E(2)


def test_flow_times():
    from molpuc.toda import FlowAxis, FlowTimes

    t = FlowTimes.from_values(2, tL1=0.1, tR2=0.1)
    assert t.is_hermitian_compatible()
    moved = t.along(FlowAxis("L", 2, 0), 0.5)
    assert np.allclose(moved.tL2, [0.5, 0.0])
    assert moved.distance(t) == 0.5
    assert np.allclose(t.exponent("L", 2.0), [0.05, 0.05])
    again = FlowTimes.from_dict(moved.to_dict(), 2)
    assert again.distance(moved) == 0.0
    assert FlowTimes.zeros(3).is_zero()


def test_flow_config(tmp_path):
    from molpuc.exceptions import MeasureConfigError
    from molpuc.toda import load_flow_config

    config = {"axis": {"side": "R", "j": 1, "a": 0}, "t_end": 0.2, "steps": 10}
    path = tmp_path / "flow.json"
    path.write_text(json.dumps(config))
    for source in (config, json.dumps(config), str(path)):
        loaded = load_flow_config(source)
        assert loaded.axis.label == "R:1:0"
        assert (loaded.t_end, loaded.steps) == (0.2, 10)
    assert load_flow_config({"axis": {"side": "L", "j": 2}, "t_end": 1, "steps": 1}).axis.is_total
    with pytest.raises(MeasureConfigError):
        load_flow_config(str(tmp_path / "missing.json"))
    with pytest.raises(MeasureConfigError):
        load_flow_config({"axis": {"side": "L", "j": 1}, "t_end": 0.1, "steps": 0})
    with pytest.raises(MeasureConfigError):
        load_flow_config({"t_end": 0.1, "steps": 5})


def test_lebesgue_rhs(lebesgue):
    from molpuc.toda import FlowAxis, FlowTimes, oracle_table, toeplitz_rhs

    table = oracle_table(lebesgue, FlowTimes.zeros(1), 6)
    rhs = toeplitz_rhs(table, FlowAxis("L", 1))
    # first order in t the deformed weight is 1 + t/z, so a_1 = c_1 = -t
    assert np.isclose(rhs.c[1, 0, 0], -1.0)
    assert np.isclose(rhs.a[1, 0, 0], -1.0)
    assert np.allclose(rhs.a[0], 0.0)
    assert np.allclose(rhs.hL, 0.0)


@pytest.mark.parametrize("label", ["total:L1", "total:L2", "total:R1", "total:R2", "L:1:0", "R:2:1"])
def test_toeplitz_fd(herm2, label):
    from molpuc.toda import FlowAxis, toeplitz_fd_check

    assert toeplitz_fd_check(herm2, FlowAxis.from_string(label), 8) < 5e-7


def test_toeplitz_fd_nonhermitian(nonherm2):
    from molpuc.toda import FlowAxis, toeplitz_fd_check

    assert toeplitz_fd_check(nonherm2, FlowAxis("R", 1), 8) < 5e-7


@pytest.mark.parametrize("side,j", [("L", 1), ("L", 2), ("R", 1), ("R", 2)])
def test_total_is_sum_of_partials(built_nonherm, side, j):
    from molpuc.toda import total_flow_residual

    assert total_flow_residual(built_nonherm["table"], side, j) < 1e-12


def test_flow_integrate(herm2, tmp_path):
    from molpuc.toda import FlowAxis, flow_integrate

    traj = flow_integrate(herm2, FlowAxis("L", 1), 0.3, 100, 8)
    assert not traj.truncated
    assert len(traj.ts) == 101
    assert np.isclose(traj.ts[-1], 0.3)
    assert traj.oracle_gap < 1e-7
    path = tmp_path / "trajectory.csv"
    traj.to_csv(str(path))
    df = pd.read_csv(path)
    assert list(df.columns) == ["t", "l", "component", "value"]
    assert len(df) == 101 * 6 * 8 * 4 * 2


def test_flow_integrate_without_oracle(lebesgue):
    from molpuc.toda import FlowAxis, flow_integrate

    traj = flow_integrate(lebesgue, FlowAxis("R", 2), 0.1, 5, 6, compare_oracle=False)
    assert traj.oracle_gap is None
    assert traj.final.N == 6
    with pytest.raises(ValueError):
        flow_integrate(lebesgue, FlowAxis("R", 2), 0.1, 0, 6)


def test_rk4_order(herm2):
    from molpuc.toda import FlowAxis, rk4_convergence_ratio

    assert rk4_convergence_ratio(herm2, FlowAxis("L", 1), 12) >= 15.0


@pytest.mark.parametrize("label", ["total:L1", "total:R1", "total:R2", "L:2:0", "R:1:1"])
def test_wave_and_lax(herm2, label):
    from molpuc.toda import FlowAxis, wave_lax_checks

    res = wave_lax_checks(herm2, FlowAxis.from_string(label), 10)
    assert {"wave_W1L", "wave_W2R", "lax_JL", "lax_JR", "evolution_C[0]"} <= set(res)
    assert max(res.values()) < 5e-7


def test_zakharov_shabat(nonherm2):
    from molpuc.toda import FlowAxis, zakharov_shabat_check

    res = zakharov_shabat_check(nonherm2, FlowAxis("L", 1), FlowAxis("R", 1), 10)
    assert set(res) == {"zs_L", "zs_R"}
    assert max(res.values()) < 5e-7


@pytest.mark.parametrize("label", ["total:R1", "total:R2"])
def test_right_flows_on_lebesgue(lebesgue, label):
    from molpuc.toda import FlowAxis, wave_lax_checks, zakharov_shabat_check

    axis = FlowAxis.from_string(label)
    res = wave_lax_checks(lebesgue, axis, 12)
    assert set(res) == {
        "wave_W1L", "wave_W2L", "wave_W1R", "wave_W2R", "lax_JL", "lax_JR", "evolution_C[0]", "evolution_C[-1]"
    }
    assert max(res.values()) < 5e-7
    zs = zakharov_shabat_check(lebesgue, FlowAxis("L", 1), axis, 12)
    assert max(zs.values()) < 5e-7


def test_right_flow_generators(herm2):
    from molpuc.toda import FlowAxis, FlowTimes, generators, oracle_factorizations

    fact_l, fact_r = oracle_factorizations(herm2, FlowTimes.zeros(2), 8)
    for j in (1, 2):
        B = generators(fact_l, fact_r, FlowAxis("R", j))
        assert np.allclose(np.triu(B["L"]), 0.0)
        assert np.allclose(np.triu(B["R"]), 0.0)


def test_bilinear_equal_times(herm2):
    from molpuc.toda import FlowAxis, FlowTimes, bilinear_check

    t0 = FlowTimes.zeros(2)
    res = bilinear_check(herm2, t0, t0, 6, 1, 1)
    assert max(res.values()) < 1e-9
    moved = bilinear_check(herm2, t0, t0.along(FlowAxis("R", 1), 0.01), 6, 1, 2)
    assert "equal_times_L" not in moved
    assert max(moved.values()) < 1e-9


def test_bilinear_sweep(lebesgue):
    from molpuc.toda import bilinear_sweep

    res = bilinear_sweep(lebesgue, 6)
    assert "bilinear_L@total:L1" in res
    assert max(res.values()) < 1e-9
