import json
import math

import pandas as pd
import pytest


@pytest.fixture
def example_report():
    from molpuc.report import Report

    return Report.from_residuals(
        "recursion", "abc123", 12, 1e-9, {"JL phi1L": 3e-14, "five-term": ([4, 5], 2e-12), "C[0]": 5e-11}, seed=7
    )


def test_pass_rule(example_report):
    assert example_report.passed
    assert example_report.max_residual == 5e-11
    assert example_report.first_failure() is None
    example_report.add("late", 1e-9)
    # equality with the tolerance fails
    assert not example_report.passed
    assert example_report.first_failure() == {
        "id": "late",
        "indices": [],
        "residual": 1e-9,
        "anchor": "The following recursion relations for the left Laurent polynomials hold",
    }


def test_nan_is_failure():
    from molpuc.report import Report

    report = Report("products", "abc", 8, 1e-7)
    report.add("no_admissible_sample", float("nan"))
    assert math.isinf(report.max_residual)
    assert not report.passed
    assert report.to_dict()["max_residual"] is None
    assert report.to_dict()["items"][0]["residual"] is None


def test_empty_report_passes():
    from molpuc.report import Report

    report = Report("structure", "abc", 4, 1e-12)
    assert report.max_residual == 0.0
    assert report.passed


def test_to_dict_schema(example_report):
    d = example_report.to_dict()
    assert set(d) == {"check", "measure", "blocks", "tol", "seed", "max_residual", "pass", "items"}
    assert d["seed"] == 7
    assert [item["id"] for item in d["items"]] == ["JL phi1L", "five-term", "C[0]"]
    assert d["items"][1]["indices"] == [4, 5]
    assert d["items"][1]["anchor"] == "The five term CMV recursion relations"


def test_to_json_is_deterministic(example_report):
    from molpuc.report import Report

    again = Report.from_residuals(
        "recursion", "abc123", 12, 1e-9, {"JL phi1L": 3e-14, "five-term": ([4, 5], 2e-12), "C[0]": 5e-11}, seed=7
    )
    assert example_report.to_json() == again.to_json()
    assert json.loads(example_report.to_json())["pass"] is True


def test_extend(example_report):
    from molpuc.report import Report

    other = Report("flow", "abc123", 12, 1e-9)
    other.extend(example_report, prefix="inner/")
    assert list(other.items["id"]) == ["inner/JL phi1L", "inner/five-term", "inner/C[0]"]
    assert list(other.items["anchor"]) == list(example_report.items["anchor"])


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_write(example_report, tmp_path, fmt):
    out = tmp_path / "reports"
    path = example_report.write(str(out), fmt)
    assert path.endswith(f"recursion.{fmt}")
    if fmt == "json":
        assert json.loads((out / "recursion.json").read_text())["check"] == "recursion"
    else:
        df = pd.read_csv(out / "recursion.csv")
        assert list(df.columns) == ["check", "id", "indices", "residual", "anchor", "tol", "pass"]
        assert df["pass"].all()
        assert len(df) == 3


def test_write_bad_format(example_report, tmp_path):
    with pytest.raises(ValueError):
        example_report.write(str(tmp_path), "parquet")


def test_summary_table(example_report):
    from molpuc.report import Report, summary_table

    failing = Report.from_residuals("flow", "abc", 8, 5e-7, {"toeplitz_fd@total:L1": 1e-3})
    text = summary_table([example_report, failing])
    assert "PASS" in text and "FAIL" in text
    assert "toeplitz_fd@total:L1" in text
    assert "recursion" in repr(example_report)


@pytest.mark.parametrize(
    "check,item_id,anchor",
    [
        ("structure", "upsilon_commutes_gL", "The moment matrices commute with Υ"),
        ("recursion", "A_fwd", "recursion relations for the matrix Szegő polynomials"),
        ("recursion", "C[-1] phi1L = z^p phi2R(1/zbar)^dag", "The following relations hold true"),
        ("flow", "wave_W2L@total:R1", "Linear systems for the wave matrices"),
        ("flow", "zs_L@total:L1/total:R1", "Zakharov-Shabat equations"),
        ("flow", "rk4_ratio_shortfall@total:L1", "non-linear dynamical system for the matrix Verblunsky coefficients"),
        ("miwa", "rel3", "The following relations hold"),
        ("config", "error: bad", ""),
    ],
)
def test_anchor_for(check, item_id, anchor):
    from molpuc.report import anchor_for

    assert anchor_for(check, item_id) == anchor


def test_every_suite_has_a_default_anchor():
    from molpuc.molpuc import SUITES
    from molpuc.report import ANCHORS

    assert all(ANCHORS[suite][""] for suite in SUITES)


def test_failure_names_its_anchor():
    from molpuc.report import Report

    report = Report.from_residuals("cd", "abc", 8, 1e-9, {"closed_L_odd": 1e-12, "reproducing_L[1]": 2e-3})
    failure = report.first_failure()
    assert failure["id"] == "reproducing_L[1]"
    assert failure["anchor"] == "kernels have the reproducing property"
    assert report.to_dict()["items"][1]["anchor"] == "kernels have the reproducing property"
    assert "kernels have the reproducing property" in report.summary()
