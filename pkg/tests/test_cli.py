import json

import numpy as np
import pytest

from sss.cli import main, parse_angles, parse_bandwidths, parse_sigma, UsageError
from sss.grid import save_csv
from sss.inference import ANGLE_PRESETS
from sss.sim import Bump, generate_noise, generate_phantom


@pytest.fixture
def phantom_csv(tmp_path):
    p = tmp_path / "phantom.csv"
    save_csv(generate_phantom([Bump((32, 24), 10, 6), Bump((32, 56), -10, 6)], 64, 80, 1.0, 3), p)
    return p


def test_option_parsers():
    assert parse_bandwidths("8,2,4") == [2.0, 4.0, 8.0]
    assert parse_angles("table4") == ANGLE_PRESETS["table4"]
    assert parse_angles("custom:0,0.5") == (0.0, 0.5)
    assert parse_sigma("known:2.5") == 2.5 and parse_sigma("estimate") is None
    for bad in (lambda: parse_bandwidths("2,-1"), lambda: parse_angles("nine"), lambda: parse_sigma("known:0")):
        with pytest.raises(UsageError):
            bad()


def test_analyze_writes_outputs(phantom_csv, tmp_path):
    out = tmp_path / "out"
    rc = main(["analyze", "--input", str(phantom_csv), "--h", "4,2", "--sigma", "known:1.0", "--out-dir", str(out)])
    assert rc == 0
    names = sorted(p.name for p in out.iterdir())
    for h in ("2", "4"):
        for stem in (f"curvature_h{h}", f"slope_h{h}"):
            assert f"{stem}.png" in names and f"{stem}.csv" in names
        assert f"streamlines_h{h}.svg" in names
    summary = json.loads((out / "summary.json").read_text())
    assert summary["bandwidths"] == [2.0, 4.0]
    assert summary["sigma"] == {"mode": "known", "value": 1.0}
    curv = [r for r in summary["results"] if r["kind"] == "curvature" and r["h"] == 4.0][0]
    assert curv["counts"]["Peak"] > 0 and curv["counts"]["Hole"] > 0
    assert curv["threshold"]["n_directions"] == 6
    assert curv["region"]["non_square"] is True


def test_analyze_is_byte_deterministic(phantom_csv, tmp_path):
    args = ["analyze", "--input", str(phantom_csv), "--h", "4", "--outputs", "class-csv,summary-json"]
    main(args + ["--out-dir", str(tmp_path / "a")])
    main(args + ["--out-dir", str(tmp_path / "b")])
    for name in ("summary.json", "curvature_h4.csv", "slope_h4.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_missing_input(tmp_path, capsys):
    path = tmp_path / "missing.csv"
    assert main(["analyze", "--input", str(path)]) == 2
    err = capsys.readouterr().err
    assert err == f"error: input not found: {path}\n"


def test_usage_errors(phantom_csv, tmp_path, capsys):
    assert main(["analyze", "--input", str(phantom_csv), "--angles", "bogus", "--out-dir", str(tmp_path)]) == 2
    assert main(["analyze", "--input", str(phantom_csv), "--outputs", "", "--out-dir", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    errs = capsys.readouterr().err.strip().splitlines()
    assert all(line.startswith("error: ") for line in errs)


def test_numerical_failure_exit_code(phantom_csv, tmp_path, monkeypatch, capsys):
    import sss.cli

    def boom(*a, **k):
        raise FloatingPointError("overflow in moment sums")

    monkeypatch.setattr(sss.cli, "slope_analysis", boom)
    assert main(["analyze", "--input", str(phantom_csv), "--h", "4", "--out-dir", str(tmp_path / "o")]) == 3
    assert capsys.readouterr().err.startswith("error: numerical failure")


def test_constant_image_rejected_and_cleaned(tmp_path, capsys):
    p = tmp_path / "flat.csv"
    save_csv(np.full((40, 40), 3.0), p)
    out = tmp_path / "o"
    assert main(["analyze", "--input", str(p), "--h", "2", "--out-dir", str(out)]) == 2
    assert "sigma" in capsys.readouterr().err
    assert not out.exists() or not any(out.iterdir())


def test_too_small_image_removes_partial_outputs(tmp_path):
    p = tmp_path / "small.csv"
    save_csv(generate_noise(40, 40, 1), p)
    out = tmp_path / "o"
    # h=2 succeeds and writes files before h=8 fails on the margin
    assert main(["analyze", "--input", str(p), "--h", "2,8", "--sigma", "known:1", "--out-dir", str(out)]) == 2
    assert list(out.iterdir()) == []


def test_noise_input_has_no_structure(tmp_path):
    p = tmp_path / "noise.csv"
    save_csv(generate_noise(64, 64, 12), p)
    out = tmp_path / "o"
    rc = main(["analyze", "--input", str(p), "--h", "2,4,8,16", "--margin", "0", "--kind", "curvature",
               "--outputs", "summary-json", "--out-dir", str(out)])
    assert rc == 0
    summary = json.loads((out / "summary.json").read_text())
    assert all(r["n_significant"] == 0 for r in summary["results"])


def test_threshold_command(capsys):
    assert main(["threshold", "--alpha", "0.05", "--N", "2", "--g", "200", "--h", "4", "--order", "slope"]) == 0
    spec = json.loads(capsys.readouterr().out)
    assert spec["u_crit"] == pytest.approx(4.842033338897651, rel=1e-12)
    assert main(["threshold", "--g", "200", "--h", "4", "--order", "cubic"]) == 2


def test_simulate_command(tmp_path, capsys):
    cfg = tmp_path / "sim.toml"
    cfg.write_text('mode = "curvature_joint"\nrows = 64\ncols = 64\nmargin_override = 8\nbandwidths = [4.0]\n')
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--config", str(cfg), "--reps", "3", "--seed", "5", "--workers", "1", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[1].startswith("curvature_joint,4,joint,") and ",3," in lines[1]
    cfgj = tmp_path / "sim.json"
    cfgj.write_text(json.dumps({"rows": 64, "cols": 64, "bogus": 1}))
    assert main(["simulate", "--config", str(cfgj)]) == 2


def test_oracle_command(capsys):
    assert main(["oracle", "--size", "120", "--h", "4", "--seed", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "h,order,angle_deg,lag_i,lag_j,analytic,empirical,abs_diff"
    assert len(lines) == 1 + 2 * 3 * 4
