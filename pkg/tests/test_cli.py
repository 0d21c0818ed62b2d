import pandas as pd
import pytest

from qeflim.cli import main

RUN = """
[scene]
substrate = glass

[scan]
nx = 2
ny = 1
dwell_ms = 0.2
excitation_prob = 0.05
marker_divisor = 4
seed = 9

[reconstruct]
n_bins = 4

[calibration]
spectral = no

[hbt]
duration = 0.01
mean_rate = 1e5
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(RUN)
    return path


def test_help_and_version():
    with pytest.raises(SystemExit) as info:
        main(["--help"])
    assert info.value.code == 0
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0


def test_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["no-such-command"])
    assert info.value.code == 1


def test_missing_config_is_bad_input(tmp_path):
    assert main(["simulate", str(tmp_path / "missing.cfg"),
                 "--out", str(tmp_path)]) == 2


def test_missing_stream_is_bad_input(tmp_path):
    assert main(["reconstruct", str(tmp_path / "missing.qef"),
                 "--out", str(tmp_path)]) == 2


def test_short_approach_curve_is_a_numerical_failure(tmp_path):
    curve = tmp_path / "curve.csv"
    curve.write_text("height_nm,rate_per_us\n10,50\n20,49\n")
    assert main(["fit-approach", str(curve), "--out", str(tmp_path)]) == 3


def test_unknown_weighting_is_bad_input(tmp_path):
    curve = tmp_path / "curve.csv"
    curve.write_text("height_nm,rate_per_us\n10,50\n20,49\n40,48\n80,47\n")
    bad = tmp_path / "bad.cfg"
    bad.write_text(RUN + "\n[emitter]\nweighting = quadratic\n")
    assert main(["fit-approach", str(curve), str(bad), "--out", str(tmp_path)]) == 2
    assert main(["simulate", str(bad), "--out", str(tmp_path)]) == 2


def test_simulate_then_reconstruct(tmp_path, config):
    out = tmp_path / "run"
    assert main(["simulate", str(config), "--out", str(out), "--threads", "1"]) == 0
    for name in ("stream.qef", "heightmap.csv", "ground_truth.csv"):
        assert (out / name).exists()

    again = tmp_path / "again"
    assert main(["simulate", str(config), "--out", str(again), "--threads", "1"]) == 0
    assert (out / "stream.qef").read_bytes() == (again / "stream.qef").read_bytes()

    assert main(["reconstruct", str(out / "stream.qef"), str(out / "heightmap.csv"),
                 "--bins", "4", "--min-counts", "20", "--threads", "1",
                 "--gradient", "--out", str(out)]) == 0
    for name in ("volume_relative.csv", "volume.csv", "gradient.csv",
                 "quarter_closest.csv", "quarter_closest.pgm",
                 "quarter_distant.csv", "quarter_distant.pgm"):
        assert (out / name).exists()
    volume = pd.read_csv(out / "volume_relative.csv")
    assert len(volume) == 2 * 4


def test_hbt_and_g2(tmp_path, config):
    assert main(["simulate-hbt", str(config), "--out", str(tmp_path)]) == 0
    assert main(["g2", str(tmp_path / "hbt.qef"), "--window-ns", "100",
                 "--out", str(tmp_path)]) == 0
    g2 = pd.read_csv(tmp_path / "g2.csv")
    assert list(g2.columns) == ["lag_ns", "g2", "counts"]
    assert len(g2) == 200
    assert (tmp_path / "g2_report.ini").exists()


def test_approach_curve_then_fit(tmp_path, config):
    assert main(["approach-curve", str(config), "--z-min", "10", "--z-max", "700",
                 "--n", "30", "--out", str(tmp_path)]) == 0
    curve = pd.read_csv(tmp_path / "approach_curve.csv")
    assert len(curve) == 30
    curve[["height_nm", "rate_per_us"]].to_csv(tmp_path / "curve.csv", index=False)
    assert main(["fit-approach", str(tmp_path / "curve.csv"), str(config),
                 "--out", str(tmp_path)]) == 0
    report = (tmp_path / "calibration.ini").read_text()
    assert "phi_deg" in report
