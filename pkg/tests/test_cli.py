import csv
import json
import math

import numpy as np
import pytest

from kreinwave import cli, strings


def run(tmp_path, command, config=None, *extra, name="out"):
    args = [command, "--out", str(tmp_path / name)]
    if config is not None:
        path = tmp_path / f"{name}.json"
        path.write_text(config if isinstance(config, str) else json.dumps(config))
        args += ["--config", str(path)]
    return cli.main(args + list(extra)), tmp_path / name


def read_csv(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def string_json(M):
    return json.loads(M.to_json())


HOMOGENEOUS = {"density": [{"to": 40.0, "rho": 1.0}], "atoms": [], "L": "inf", "xi_max": 40.0}


def test_classify_string_homogeneous(tmp_path):
    code, out = run(tmp_path, "classify-string", {"string": HOMOGENEOUS})
    assert code == 0
    rows = read_csv(out / "terms.csv")
    assert list(rows[0]) == ["n", "xi_n", "M_xi_n", "term", "partial_sum"]
    assert all(float(r["term"]) == 0 for r in rows)
    report = json.loads((out / "report.json").read_text())
    assert report["verdict"] == "Szego"
    assert report["diagnostics"]["tail_extended"] is True


def test_classify_string_log_pieces(tmp_path):
    M = strings.log_pieces_string(1, 10_000)
    code, out = run(tmp_path, "classify-string", {"string": string_json(M)})
    assert code == 0
    assert json.loads((out / "report.json").read_text())["verdict"] == "NotSzego"


def test_malformed_json_exit_1(tmp_path):
    assert run(tmp_path, "classify-string", "{not json")[0] == 1
    assert run(tmp_path, "classify-string", {"string": {"density": [{"rho": 1}]}}, name="o2")[0] == 1


def test_missing_config_exit_2(tmp_path):
    code = cli.main(["classify-string", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path)])
    assert code == 2


def test_classify_wvn_default_grid(tmp_path):
    code, out = run(tmp_path, "classify-wvn")
    assert code == 0
    rows = read_csv(out / "regions.csv")
    assert len(rows) == 33 * 15
    assert list(rows[0]) == ["alpha", "beta", "region", "numeric_verdict"]
    from kreinwave.dirac import wvn_region
    assert all(wvn_region(float(r["alpha"]), float(r["beta"])).region == r["region"] for r in rows)


def test_classify_wvn_single_point(tmp_path):
    code, out = run(tmp_path, "classify-wvn", {"alpha": [-1.0], "beta": [0.0], "numeric": True})
    assert code == 0
    (row,) = read_csv(out / "regions.csv")
    assert row["region"] == "A1" and row["numeric_verdict"] == "Szego"


def test_classify_wvn_empty_grid(tmp_path):
    assert run(tmp_path, "classify-wvn", {"alpha": [], "beta": [0.0]})[0] == 1


def test_classify_canonical_and_dirac(tmp_path):
    H = {"breaks": [0.0], "cells": [{"h1": 1.0, "h2": 1.0, "h": 0.0}], "tau_max": 100.0}
    code, out = run(tmp_path, "classify-canonical", {"hamiltonian": H}, name="c")
    assert code == 0 and json.loads((out / "report.json").read_text())["verdict"] == "Szego"
    Q = {"form": "diagonal", "q": {"kind": "pc", "breaks": [0.0], "values": [0.7]}, "tau_max": 500.0}
    code, out = run(tmp_path, "classify-dirac", {"potential": Q}, name="d")
    assert code == 0 and json.loads((out / "report.json").read_text())["verdict"] == "NotSzego"


def test_simulate_front_tracking(tmp_path):
    cfg = {"string": HOMOGENEOUS, "u0": {"kind": "ramp", "front": 2.0, "width": 0.05},
           "resolution": {"h": 0.01, "t_end": 20.0}, "snapshots": [0.0, 20.0]}
    code, out = run(tmp_path, "simulate", cfg)
    assert code == 0
    rows = read_csv(out / "diagnostics.csv")
    assert len(rows) == 21
    for r in rows:
        assert abs(float(r["front_detected"]) - float(r["front_predicted"])) <= 0.02 + 1e-12
    snaps = read_csv(out / "snapshots.csv")
    assert list(snaps[0]) == ["t", "xi", "u", "v", "cumulative_mass"]
    report = json.loads((out / "report.json").read_text())
    assert report["energy_drift"] < 1e-10 and report["xi_max"] == 40.0


def test_simulate_near_front_plateau(tmp_path):
    M = strings.two_material_string(2.0, 1.0, 1 / (np.arange(130) + 1.0) ** 2, 131)
    cfg = {"string": string_json(M), "u0": {"kind": "bump", "center": 0.0, "radius": 2.0},
           "resolution": {"t_end": 100.0}, "diag_every": 10.0, "snapshots": [100.0]}
    code, out = run(tmp_path, "simulate", cfg)
    assert code == 0
    nfm = {float(r["t"]): float(r["near_front_mass"]) for r in read_csv(out / "diagnostics.csv")}
    assert nfm[100.0] / nfm[10.0] > 0.3


def test_simulate_cfl_exit_3(tmp_path):
    cfg = {"string": HOMOGENEOUS, "u0": {"kind": "bump", "center": 5.0, "radius": 1.0}}
    assert run(tmp_path, "simulate", cfg, "--dt", "0.05")[0] == 3


def test_front_command(tmp_path):
    cfg = {"string": {"density": [{"to": 50.0, "rho": 4.0}], "xi_max": 50.0},
           "u0": {"kind": "ramp", "front": 2.0, "width": 0.1}, "times": [0.0, 6.0]}
    code, out = run(tmp_path, "front", cfg)
    assert code == 0
    rows = read_csv(out / "front.csv")
    assert [float(r["front_predicted"]) for r in rows] == pytest.approx([2.0, 5.0])


def test_spectrum_homogeneous(tmp_path):
    cfg = {"string": {"density": [{"to": 1000.0, "rho": 1.0}], "xi_max": 1000.0},
           "lambdas": [1.0, 4.0, 9.0], "resolution": {"eps": 0.01}}
    code, out = run(tmp_path, "spectrum", cfg)
    assert code == 0
    text = (out / "spectrum.csv").read_text()
    assert text.startswith("# command=spectrum")
    for r in read_csv(out / "spectrum.csv"):
        lam = float(r["lambda"])
        assert float(r["density_estimate"]) == pytest.approx(1 / (math.pi * math.sqrt(lam)), rel=0.05)


def test_profile_norm_identity(tmp_path):
    M = strings.two_material_string(2.0, 1.0, 1 / (np.arange(25) + 1.0) ** 2, 30)
    cfg = {"string": string_json(M), "u0": {"kind": "bump", "center": 2.0, "radius": 2.0}, "support": 4.0}
    code, out = run(tmp_path, "profile", cfg)
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["ratio"] == pytest.approx(1.0, abs=0.03)
    assert "ratio=" in (out / "profile.csv").read_text().splitlines()[3]


def test_profile_non_szego_exit_1(tmp_path):
    M = strings.two_material_string(2.0, 1.0, 1 / np.sqrt(np.arange(130) + 1.0), 131)
    cfg = {"string": string_json(M), "u0": {"kind": "bump", "center": 2.0, "radius": 2.0}, "support": 4.0}
    assert run(tmp_path, "profile", cfg)[0] == 1


def test_free_dirac_command(tmp_path):
    cfg = {"h": 0.01, "z1": [1.0] * 100, "z2": [0.0] * 100, "times": [5.0]}
    code, out = run(tmp_path, "free-dirac", cfg)
    assert code == 0
    rows = read_csv(out / "free_dirac.csv")
    assert len(rows) == 600
    assert float(rows[450]["re_z1"]) == 0.5 and float(rows[450]["im_z2"]) == -0.5
    assert json.loads((out / "report.json").read_text())["times"][0]["norm_change"] < 1e-12


def test_invalid_resolution_exit_1(tmp_path):
    assert run(tmp_path, "simulate", {"string": HOMOGENEOUS}, "--h", "-0.1")[0] == 1


def test_byte_deterministic(tmp_path):
    cfg = {"string": HOMOGENEOUS, "u0": {"kind": "bump", "center": 5.0, "radius": 1.0},
           "resolution": {"h": 0.05, "t_end": 5.0}, "seed": 3}
    run(tmp_path, "simulate", cfg, name="a")
    run(tmp_path, "simulate", cfg, name="b")
    for f in ("snapshots.csv", "diagnostics.csv", "report.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_plot_flag_writes_png(tmp_path):
    pytest.importorskip("matplotlib")
    code, out = run(tmp_path, "classify-wvn", {"alpha": [-1.0, 0.5], "beta": [0.0, 1.0]}, "--plot")
    assert code == 0 and (out / "regions.png").stat().st_size > 0
    code, out = run(tmp_path, "classify-wvn", {"alpha": [-1.0], "beta": [0.0]}, name="np")
    assert not (out / "regions.png").exists()
