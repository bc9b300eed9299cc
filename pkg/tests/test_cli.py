"""CLI: config handling, exit codes, artifacts, compare reports."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from hetsync.cli import compare, load_config, main, run, ConfigError
from conftest import (
    DELTA_N9,
    bernoulli_n9_adjacency,
    complete_adjacency,
)


def write_config(tmp_path, name="config.json", **overrides):
    cfg = {
        "analysis": "errormap",
        "model": "bernoulli",
        "network": {"adjacency": bernoulli_n9_adjacency().tolist()},
        "delta": DELTA_N9.tolist(),
        "sigma_grid": {"start": 0.22, "stop": 0.34, "num": 5},
        "epsilon_grid": [0.0, 0.1],
        "out_dir": str(tmp_path / "out"),
        "seed": 3,
        "sim": {"t_transient": 300, "t_average": 300},
    }
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def test_curvature_run_writes_negative_profile(tmp_path):
    path = write_config(
        tmp_path,
        analysis="curvature",
        model="chua_local",
        zeta_grid={"start": 6.05, "stop": 10.0, "step": 0.1},
    )
    assert run(path) == 0
    data = np.genfromtxt(tmp_path / "out" / "curvature.csv", delimiter=",", names=True)
    assert data.dtype.names == ("zeta_k", "U_ss_1", "U_ss_2")
    assert np.all(data["U_ss_1"] < 0) and np.all(data["U_ss_2"] < 0)
    assert (tmp_path / "out" / "run.log").exists()
    assert (tmp_path / "out" / "run_meta.json").exists()


def test_errormap_run_deterministic(tmp_path):
    path = write_config(tmp_path)
    assert run(path) == 0
    first = (tmp_path / "out" / "errormap.csv").read_bytes()
    assert run(path) == 0
    second = (tmp_path / "out" / "errormap.csv").read_bytes()
    assert first == second
    meta = json.loads((tmp_path / "out" / "errormap_meta.json").read_text())
    assert meta["seed"] == 3


def test_contour_run(tmp_path):
    path = write_config(
        tmp_path,
        analysis="contour",
        sigma_grid={"start": 0.05, "stop": 2.0, "num": 50},
        epsilon_grid=[-0.1, 0.0, 0.1],
    )
    assert run(path) == 0
    data = np.genfromtxt(tmp_path / "out" / "contour.csv", delimiter=",", names=True)
    assert data.shape[0] == 3
    assert np.all(np.isfinite(data["sigma_min_direct"]))


def test_malformed_json_exits_2_without_artifacts(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not valid json")
    out_dir = tmp_path / "out"
    assert run(path, out_dir=out_dir) == 2
    assert "config error" in capsys.readouterr().err
    assert not out_dir.exists()


@pytest.mark.parametrize(
    "overrides",
    [
        {"analysis": "frobnicate"},
        {"model": "rossler"},
        {"sigma_grid": None},
        {"sigma_grid": {"start": 1.0}},
        {"epsilon_grid": [0.2, 0.1]},
        {"delta": "sample-me"},
        {"network": {"wrong": 1}},
        {"sim": {"bogus_knob": 1}},
        {"transition": "sideways"},
    ],
)
def test_invalid_configs_exit_2(tmp_path, overrides, capsys):
    cleaned = {k: v for k, v in overrides.items() if v is not None}
    if "sigma_grid" in overrides and overrides["sigma_grid"] is None:
        cfg = json.loads(write_config(tmp_path).read_text())
        del cfg["sigma_grid"]
        path = tmp_path / "config.json"
        path.write_text(json.dumps(cfg))
    else:
        path = write_config(tmp_path, **cleaned)
    assert run(path) == 2
    assert not (tmp_path / "out").exists()


def test_missing_network_file_exits_2(tmp_path):
    path = write_config(tmp_path, network={"path": str(tmp_path / "nowhere.json")})
    assert run(path) == 2


def test_degenerate_gap_exits_3_with_logged_reason(tmp_path, capsys):
    # complete-graph Laplacian has repeated eigenvalues: the opto closed
    # form must abort, exit 3, and record the reason in the run log
    path = write_config(
        tmp_path,
        analysis="opto",
        model="opto",
        network={"adjacency": complete_adjacency(5).tolist()},
        delta=[-0.5323, -0.5265, 0.1526, 0.5058, 0.4003],
        sigma=1.2,
        epsilon_grid=[-0.2, 0.0, 0.2],
    )
    assert run(path) == 3
    assert "numerical abort" in capsys.readouterr().err
    log = (tmp_path / "out" / "run.log").read_text()
    assert "degeneracy floor" in log


def test_opto_analysis_writes_eigenvalue_sweep(tmp_path):
    # path graph: distinct transverse eigenvalues, closed form applicable
    path = write_config(
        tmp_path,
        analysis="opto",
        model="opto",
        network={"edges": [[0, 1], [1, 2], [2, 3], [3, 4]], "n": 5},
        delta=[-0.5323, 0.1526, -0.5265, 0.5058, 0.4003],
        sigma=0.936,
        epsilon_grid={"start": -0.4, "stop": 0.4, "num": 17},
    )
    assert run(path) == 0
    data = np.genfromtxt(tmp_path / "out" / "opto_eigs.csv", delimiter=",", names=True)
    assert data.shape[0] == 17
    mid = 8
    assert data["lambda_max"][mid] > 3.47
    # second-order column tracks the direct one near eps = 0
    assert data["lambda_max_pert"][mid] == pytest.approx(
        data["lambda_max"][mid], abs=1e-9
    )


def test_mle_analysis(tmp_path):
    path = write_config(
        tmp_path,
        analysis="mle",
        model="opto",
        mle={"iterations": 10**5, "transient": 10**3, "seed": 2},
    )
    assert run(path) == 0
    meta = json.loads((tmp_path / "out" / "mle_meta.json").read_text())
    assert 3.3 <= meta["crossings"][1] <= 3.6
    assert meta["iterations"] == 10**5


def test_random_delta_logged_and_reproducible(tmp_path):
    path = write_config(tmp_path, delta="random", delta_seed=9)
    assert run(path) == 0
    first = (tmp_path / "out" / "errormap.csv").read_bytes()
    assert run(path) == 0
    assert first == (tmp_path / "out" / "errormap.csv").read_bytes()


def test_renormalization_warning_recorded_in_log(tmp_path):
    path = write_config(tmp_path, delta=[2.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0])
    assert run(path) == 0
    assert "re-centered" in (tmp_path / "out" / "run.log").read_text()


# ---------------------------------------------------------------------------
# compare

def _rasterized_errormap(contour_path, out_path, eps_grid, sigma_grid):
    """Error map synthesized from the contour itself: perfect agreement."""
    contour = np.genfromtxt(contour_path, delimiter=",", names=True)
    eps_col = np.atleast_1d(contour["epsilon"])
    smin_col = np.atleast_1d(contour["sigma_min_direct"])
    smax_col = np.atleast_1d(contour["sigma_max_direct"])
    rows = []
    for eps in eps_grid:
        idx = int(np.argmin(np.abs(eps_col - eps)))
        smin, smax = smin_col[idx], smax_col[idx]
        for sig in sigma_grid:
            sync = (
                not np.isnan(smin)
                and sig >= smin
                and (not np.isfinite(smax) or sig <= smax)
            )
            rows.append((sig, eps, 0.0 if sync else 0.3, int(sync)))
    np.savetxt(out_path, np.asarray(rows), delimiter=",",
               header="sigma,epsilon,E,sync", comments="")


def test_compare_contour_with_own_rasterization(tmp_path):
    path = write_config(
        tmp_path,
        analysis="contour",
        sigma_grid={"start": 0.05, "stop": 2.0, "num": 50},
        epsilon_grid=[-0.1, 0.0, 0.1],
    )
    assert run(path) == 0
    contour_csv = tmp_path / "out" / "contour.csv"
    emap_csv = tmp_path / "emap.csv"
    _rasterized_errormap(
        contour_csv, emap_csv, [-0.1, 0.0, 0.1], np.linspace(0.05, 2.0, 50)
    )
    report = compare(contour_csv, emap_csv, out_path=tmp_path / "report.json")
    assert report["agreement_rate"] == 1.0
    assert report["cells_excluded_boundary_band"] > 0
    saved = json.loads((tmp_path / "report.json").read_text())
    assert saved["cells_total"] == 150


def test_compare_reports_empty_interval(tmp_path):
    contour_csv = tmp_path / "contour.csv"
    np.savetxt(
        contour_csv,
        np.array([[0.0, np.nan, np.nan, np.nan, np.nan]]),
        delimiter=",",
        header="epsilon,sigma_min_direct,sigma_max_direct,sigma_min_pert,sigma_max_pert",
        comments="",
    )
    emap_csv = tmp_path / "emap.csv"
    rows = [(s, 0.0, 0.4, 0) for s in (0.1, 0.2, 0.3)]
    np.savetxt(emap_csv, np.asarray(rows), delimiter=",",
               header="sigma,epsilon,E,sync", comments="")
    report = compare(contour_csv, emap_csv)
    assert report["agreement_rate"] == 1.0
    assert report["per_epsilon"][0]["stable_interval_empty"] is True


def test_compare_grid_mismatch_raises(tmp_path):
    contour_csv = tmp_path / "contour.csv"
    np.savetxt(
        contour_csv,
        np.array([[0.5, 1.0, 2.0, np.nan, np.nan]]),
        delimiter=",",
        header="epsilon,sigma_min_direct,sigma_max_direct,sigma_min_pert,sigma_max_pert",
        comments="",
    )
    emap_csv = tmp_path / "emap.csv"
    np.savetxt(emap_csv, np.asarray([(1.0, 0.0, 0.0, 1)]), delimiter=",",
               header="sigma,epsilon,E,sync", comments="")
    with pytest.raises(ValueError, match="missing from contour"):
        compare(contour_csv, emap_csv)


# ---------------------------------------------------------------------------
# entry point

def test_main_run_and_compare(tmp_path, capsys):
    path = write_config(
        tmp_path,
        analysis="contour",
        sigma_grid={"start": 0.05, "stop": 2.0, "num": 40},
        epsilon_grid=[0.0],
    )
    assert main(["run", str(path)]) == 0
    contour_csv = tmp_path / "out" / "contour.csv"
    emap_csv = tmp_path / "emap.csv"
    _rasterized_errormap(contour_csv, emap_csv, [0.0], np.linspace(0.05, 2.0, 40))
    assert main(["compare", str(contour_csv), str(emap_csv)]) == 0
    out = capsys.readouterr().out
    assert json.loads(out)["agreement_rate"] == 1.0


def test_console_script_help():
    env = dict(os.environ, PYTHONPATH="")
    proc = subprocess.run(
        [sys.executable, "-m", "hetsync.cli", "--help"],
        capture_output=True,
        text=True,
        env=env,
    )
    assert proc.returncode == 0
    assert "run" in proc.stdout and "compare" in proc.stdout


def test_workers_flag_round_trips(tmp_path):
    path = write_config(tmp_path)
    assert run(path, workers=2) == 0
    with_workers = (tmp_path / "out" / "errormap.csv").read_bytes()
    assert run(path, workers=None) == 0
    assert with_workers == (tmp_path / "out" / "errormap.csv").read_bytes()


def test_seed_override(tmp_path):
    path = write_config(tmp_path)
    assert run(path, seed=101) == 0
    meta = json.loads((tmp_path / "out" / "errormap_meta.json").read_text())
    assert meta["seed"] == 101
