import csv
import math

import numpy as np
import pytest

from lnpair.cli import run

FAST_FF = ["--set", "farfield.n_theta=60", "--set", "farfield.n_phi=72"]
FAST_HBT = ["--set", "hbt.duration_s=10"]


def table(path):
    rows = list(csv.reader(ln for ln in path.read_text().splitlines() if not ln.startswith("#")))
    return rows[0], rows[1:]


def kv(path):
    return dict(table(path)[1])


def test_rate_cube4_has_4um_row(tmp_path):
    assert run(["rate", "--preset", "cube4", "--out", str(tmp_path)]) == 0
    head, rows = table(tmp_path / "rate.csv")
    assert head == ["sweep", "size_um", "power_mw", "eta_per_w", "pair_rate_hz", "convention"]
    assert any(r[0] == "size" and float(r[1]) == 4.0 for r in rows)
    s = kv(tmp_path / "rate_summary.csv")
    assert float(s["convention_ratio_paper_over_physical"]) == pytest.approx(65536, rel=1e-9)
    assert (tmp_path / "rate.csv").read_text().startswith("# lnpair ")


def test_rate_power_linearity(tmp_path):
    assert run(["rate", "--preset", "cube4", "--powers", "30,60", "--out", str(tmp_path)]) == 0
    rows = [r for r in table(tmp_path / "rate.csv")[1] if r[0] == "power"]
    assert [float(r[2]) for r in rows] == [30, 60]
    assert float(rows[1][4]) / float(rows[0][4]) == pytest.approx(2.0, rel=1e-10)


def test_malformed_config_exits_2_without_output(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[optics]\nna = lots\n")
    out = tmp_path / "out"
    assert run(["rate", "--config", str(bad), "--out", str(out)]) == 2
    assert not out.exists()
    err = capsys.readouterr().err
    assert "optics.na" in err and "line 2" in err


@pytest.mark.parametrize("argv", [["rate", "--powers", ""], ["polarization", "--angles", ","],
                                  ["rate", "--set", "nokey"], ["bogus"],
                                  ["fit", "nope.csv"], ["fit"]])
def test_usage_errors_exit_2(tmp_path, argv):
    out = tmp_path / "o"
    assert run(argv + ["--out", str(out)]) == 2
    assert not out.exists()


@pytest.mark.parametrize("proj", [0.0, 30.0, 90.0])
def test_polarization_peak_tracks_projection(tmp_path, proj):
    assert run(["polarization", "--preset", "cube4", "--angles", "0:180:10",
                "--set", f"crystal.projection_deg={proj}", "--out", str(tmp_path)]) == 0
    s = kv(tmp_path / "polarization_fit.csv")
    d = abs(float(s["theta0_deg"]) - proj) % 180
    assert min(d, 180 - d) < 1.0


def test_polarization_two_angles(tmp_path):
    assert run(["polarization", "--angles", "0,90", "--out", str(tmp_path)]) == 0
    s = kv(tmp_path / "polarization_fit.csv")
    assert s["n_angles"] == "2" and float(s["max_min_ratio"]) > 1
    assert s["fit"].startswith("skipped")


def test_farfield_glass_vs_air_and_drift(tmp_path):
    res = {}
    for side in ("air", "glass"):
        out = tmp_path / side
        assert run(["farfield", "--side", side, "--grid", "8", "--grid", "16",
                    "--out", str(out)] + FAST_FF) == 0
        head, rows = table(out / "farfield_summary.csv")
        res[side] = [dict(zip(head, r)) for r in rows]
        assert float(res[side][1]["relative_drift"]) < 0.01
        pm = table(out / "polarization_matrix.csv")[1]
        assert len(pm) == 4
    assert res["air"][1]["na"] == "0.65"
    assert abs(float(res["air"][1]["forward_fraction"]) -
               float(res["glass"][1]["forward_fraction"])) > 0.05


def test_hbt_cube4(tmp_path):
    assert run(["hbt", "--preset", "cube4", "--out", str(tmp_path)] + FAST_HBT) == 0
    s = kv(tmp_path / "car.csv")
    assert float(s["g2_zero_minus_1"]) > 2
    car, err, ana = float(s["car"]), float(s["car_stderr"]), float(s["analytic_car"])
    assert abs(car - ana) < 4 * err
    head, rows = table(tmp_path / "histogram.csv")
    assert head == ["tau_s", "counts"] and len(rows) == 1001


def test_hbt_no_pairs_gives_flat_car(tmp_path):
    assert run(["hbt", "--pair-rate", "0", "--out", str(tmp_path)] + FAST_HBT) == 0
    s = kv(tmp_path / "car.csv")
    assert abs(float(s["car"]) - 1) < 3 * float(s["car_stderr"])


def test_hbt_determinism_threads_and_replay(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    base = ["hbt", "--preset", "cube4", "--seed", "5", "--write-tags",
            "--duration", "2", "--set", "hbt.background_hz1=20000",
            "--set", "hbt.background_hz2=20000"]
    assert run(base + ["--out", str(a), "--threads", "1"]) == 0
    assert run(base + ["--out", str(b), "--threads", "4"]) == 0
    for name in ("car.csv", "histogram.csv", "tags.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert run(["hbt", "--config", str(a / "car.csv"), "--out", str(c), "--threads", "3"]) == 0
    assert (a / "histogram.csv").read_bytes() == (c / "histogram.csv").read_bytes()
    assert (a / "car.csv").read_bytes() == (c / "car.csv").read_bytes()


def test_farfield_threads_identical(tmp_path):
    for t in ("1", "3"):
        assert run(["farfield", "--grid", "8", "--threads", t, "--out", str(tmp_path / t)]
                   + FAST_FF) == 0
    for name in ("farfield_map.csv", "farfield_summary.csv", "polarization_matrix.csv"):
        assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "3" / name).read_bytes()


def test_fit_table1(tmp_path):
    assert run(["fit", "--table1", "--out", str(tmp_path)]) == 0
    head, rows = table(tmp_path / "table1.csv")
    assert len(rows) == 4
    assert sorted(float(r[head.index("rate_hz")]) for r in rows) == [5.5, 6.6, 37, 80]
    assert "1.636" in (tmp_path / "table1.txt").read_text()


def test_fit_cos2_fixture(tmp_path):
    th = np.arange(0, 180, 10.0)
    y = 5 * np.cos(np.deg2rad(th - 30)) ** 2 + 1
    f = tmp_path / "scan.csv"
    f.write_text("angle,rate\n" + "".join(f"{a:g},{float(b)!r}\n" for a, b in zip(th, y)))
    out = tmp_path / "o"
    assert run(["fit", str(f), "--out", str(out)]) == 0
    head, rows = table(out / "fit.csv")
    r = dict(zip(head, rows[0]))
    assert abs(float(r["theta0_deg"]) - 30) < 1
    assert float(r["amplitude"]) == pytest.approx(5)
    assert run(["fit", str(f), "--kind", "linear", "--out", str(out)]) == 0
    r = dict(zip(*[table(out / "fit.csv")[0], table(out / "fit.csv")[1][0]]))
    assert r["kind"] == "linear" and math.isfinite(float(r["slope"]))


def test_domain_error_exit_3(tmp_path):
    f = tmp_path / "flat.csv"
    f.write_text("0,1\n10,1\n20,1\n")
    assert run(["fit", str(f), "--out", str(tmp_path / "o")]) == 3
