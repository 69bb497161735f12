import json

import pandas as pd
import pytest


def _common(tmp_path, *extra):
    return ["--out", str(tmp_path / "out"), "--log-path", str(tmp_path), *extra]


def test_verify_passes(tmp_path, capsys):
    from molpuc.__main__ import main

    code = main(["verify", "--suite", "structure", "factorization", "--measure", "lebesgue", "--blocks", "6", *_common(tmp_path)])
    assert code == 0
    report = json.loads((tmp_path / "out" / "structure.json").read_text())
    assert report["pass"] is True
    assert report["blocks"] == 6
    assert (tmp_path / "out" / "factorization.json").exists()
    assert "PASS" in capsys.readouterr().out


def test_verify_fails_with_zero_tolerance(tmp_path):
    from molpuc.__main__ import main

    code = main(["verify", "--suite", "structure", "--measure", "herm2", "--blocks", "6", "--tol", "0", *_common(tmp_path)])
    assert code == 1


def test_bad_measure_path(tmp_path):
    from molpuc.__main__ import main

    code = main(["verify", "--suite", "structure", "--measure", str(tmp_path / "missing.json"), *_common(tmp_path)])
    assert code == 2
    report = json.loads((tmp_path / "out" / "config.json").read_text())
    assert report["pass"] is False
    assert report["items"][0]["id"].startswith("error:")


def test_too_few_blocks(tmp_path):
    from molpuc.__main__ import main

    assert main(["moments", "--measure", "lebesgue", "--blocks", "2", *_common(tmp_path)]) == 2


def test_unknown_suite(tmp_path):
    from molpuc.__main__ import main

    with pytest.raises(SystemExit):
        main(["verify", "--suite", "nope", *_common(tmp_path)])


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_moments_command(tmp_path, fmt):
    from molpuc.__main__ import main

    assert main(["moments", "--measure", "lebesgue", "--n-max", "3", "--format", fmt, *_common(tmp_path)]) == 0
    path = tmp_path / "out" / f"moments.{fmt}"
    df = pd.read_json(path) if fmt == "json" else pd.read_csv(path)
    assert len(df) == 7


def test_factorize_and_polys(tmp_path):
    from molpuc.__main__ import main

    assert main(["factorize", "--measure", "herm2", "--blocks", "6", *_common(tmp_path)]) == 0
    assert (tmp_path / "out" / "factorization.json").exists()
    assert main(["polys", "--measure", "herm2", "--blocks", "6", *_common(tmp_path)]) == 0
    polys = json.loads((tmp_path / "out" / "polys.json").read_text())
    assert len(polys["phi2R"]) == 6
    assert main(["verblunsky", "--measure", "herm2", "--blocks", "6", "--format", "csv", *_common(tmp_path)]) == 0
    assert (tmp_path / "out" / "verblunsky.csv").exists()


def test_flow_command(tmp_path):
    from molpuc.__main__ import main

    args = ["flow", "--measure", "herm2", "--blocks", "8", "--axis", "L:1:0", "--t-end", "0.1", "--steps", "10", "--compare-oracle"]
    assert main([*args, *_common(tmp_path)]) == 0
    df = pd.read_csv(tmp_path / "out" / "trajectory.csv")
    assert df["t"].max() == pytest.approx(0.1)
    report = json.loads((tmp_path / "out" / "flow-trajectory.json").read_text())
    assert report["items"][0]["id"] == "oracle_gap@L:1:0"


def test_flow_config_file(tmp_path):
    from molpuc.__main__ import main

    config = tmp_path / "flow.json"
    config.write_text(json.dumps({"axis": {"side": "R", "j": 2}, "t_end": 0.05, "steps": 5}))
    assert main(["flow", "--measure", "lebesgue", "--blocks", "6", "--config", str(config), *_common(tmp_path)]) == 0
    df = pd.read_csv(tmp_path / "out" / "trajectory.csv")
    assert df["t"].nunique() == 6


def test_bad_flow_axis(tmp_path):
    from molpuc.__main__ import main

    assert main(["flow", "--measure", "lebesgue", "--axis", "L:7:0", *_common(tmp_path)]) == 2


def test_single_suite_command(tmp_path):
    from molpuc.__main__ import main

    assert main(["darboux", "--measure", "lebesgue", "--blocks", "6", "--format", "csv", *_common(tmp_path)]) == 0
    df = pd.read_csv(tmp_path / "out" / "darboux.csv")
    assert df["pass"].all()


def test_verify_appendix_b_alias(tmp_path):
    from molpuc.__main__ import main

    code = main(["verify", "--suite", "appendixB", "--measure", "lebesgue", "--blocks", "6", *_common(tmp_path)])
    assert code == 0
    report = json.loads((tmp_path / "out" / "closed-forms.json").read_text())
    assert report["pass"] is True
    assert any(item["id"].startswith("explicit_") for item in report["items"])


def test_elteorema_command(tmp_path):
    from molpuc.__main__ import main

    assert main(["elteorema", "--measure", "lebesgue", "--blocks", "6", *_common(tmp_path)]) == 0
    report = json.loads((tmp_path / "out" / "products.json").read_text())
    assert report["check"] == "products"
    assert report["pass"] is True


def test_unexpected_error_writes_report(tmp_path):
    from molpuc.__main__ import main

    assert main(["moments", "--measure", "lebesgue", "--n-max", "-1", *_common(tmp_path)]) == 1
    report = json.loads((tmp_path / "out" / "error.json").read_text())
    assert report["pass"] is False
    assert report["items"][0]["id"].startswith("error: ValueError")
    assert report["items"][0]["residual"] is None


def test_flow_generic_axis(tmp_path):
    from molpuc.__main__ import main

    args = ["flow", "--measure", "lebesgue", "--blocks", "8", "--axis", "total:H1", "--t-end", "0.05", "--steps", "5"]
    assert main([*args, "--compare-oracle", *_common(tmp_path)]) == 0
    report = json.loads((tmp_path / "out" / "flow-trajectory.json").read_text())
    assert report["items"][0]["id"] == "oracle_gap@total:L1"
