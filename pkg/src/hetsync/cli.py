"""Command-line front end: JSON experiment configs to CSV/JSON artifacts.

``hetsync run config.json`` dispatches one analysis (curvature profile,
stability contour, synchronization-error map, Lyapunov curve, or opto
eigenvalue sweep) and writes its outputs plus a run log into the output
directory.  ``hetsync compare contour.csv errormap.csv`` quantifies how
well a spectral contour predicts a simulated error map.

Exit codes: 0 success, 2 configuration error (nothing written), 3 numerical
abort (reason recorded in the run log).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import models as models_mod
from . import network as network_mod
from .models import OptoModel, get_model
from .perturb import DegenerateGapError, curvature_contribution
from .sim import SimConfig, error_map
from .stability import contour_table, mle_curve, opto_assemble, opto_lambda2

logger = logging.getLogger("hetsync")

ANALYSES = ("curvature", "contour", "errormap", "mle", "opto")


class ConfigError(ValueError):
    """Bad experiment configuration; maps to exit code 2."""


def _parse_grid(spec, name) -> np.ndarray:
    if isinstance(spec, (list, tuple)):
        grid = np.asarray(spec, dtype=float)
    elif isinstance(spec, dict):
        try:
            if "num" in spec:
                grid = np.linspace(spec["start"], spec["stop"], int(spec["num"]))
            else:
                grid = np.arange(
                    spec["start"], spec["stop"] + 0.5 * spec["step"], spec["step"]
                )
        except KeyError as missing:
            raise ConfigError(f"{name}: missing grid key {missing}") from None
    else:
        raise ConfigError(f"{name}: expected list or start/stop spec")
    if grid.ndim != 1 or grid.size == 0:
        raise ConfigError(f"{name}: empty grid")
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise ConfigError(f"{name}: grid must be strictly increasing")
    return grid


@dataclass
class ExperimentConfig:
    """Validated experiment description (see README for the JSON schema)."""

    analysis: str
    model_name: str
    model_params: dict
    network_spec: dict
    delta_spec: object
    delta_seed: int
    sigma_grid: np.ndarray | None
    epsilon_grid: np.ndarray | None
    zeta_grid: np.ndarray | None
    zeta_i: float | None
    sigma: float | None
    transition: str
    out_dir: Path
    seed: int | None
    workers: int | None
    sim: dict
    mle: dict
    raw: dict = field(repr=False, default_factory=dict)


def load_config(path, *, out_override=None, seed_override=None,
                workers=None) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"malformed JSON in {path}: {err}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")

    analysis = raw.get("analysis")
    if analysis not in ANALYSES:
        raise ConfigError(f"analysis must be one of {ANALYSES}, got {analysis!r}")
    model_name = raw.get("model")
    if model_name not in models_mod.MODEL_BUILDERS:
        raise ConfigError(
            f"unknown model {model_name!r}; available: "
            f"{sorted(models_mod.MODEL_BUILDERS)}"
        )

    network_spec = raw.get("network")
    needs_network = analysis in ("contour", "errormap", "opto")
    if needs_network:
        if not isinstance(network_spec, dict):
            raise ConfigError("'network' must be an object")
        if "path" in network_spec:
            if not Path(network_spec["path"]).exists():
                raise ConfigError(f"network file not found: {network_spec['path']}")
        elif not ("adjacency" in network_spec or "edges" in network_spec):
            raise ConfigError("'network' needs 'adjacency', 'edges', or 'path'")

    delta_spec = raw.get("delta", "random")
    if not (delta_spec == "random" or isinstance(delta_spec, (list, tuple))):
        raise ConfigError("'delta' must be a vector or the string 'random'")

    grids = {}
    for name, needed_by in (
        ("sigma_grid", ("contour", "errormap")),
        ("epsilon_grid", ("contour", "errormap", "opto")),
        ("zeta_grid", ("curvature",)),
    ):
        if name in raw:
            grids[name] = _parse_grid(raw[name], name)
        elif analysis in needed_by:
            raise ConfigError(f"analysis {analysis!r} requires '{name}'")
        else:
            grids[name] = None

    sigma = raw.get("sigma")
    if analysis == "opto" and sigma is None:
        raise ConfigError("analysis 'opto' requires a fixed 'sigma'")

    transition = raw.get("transition", "lower")
    if transition not in ("lower", "upper"):
        raise ConfigError("'transition' must be 'lower' or 'upper'")

    sim = raw.get("sim", {})
    if not isinstance(sim, dict):
        raise ConfigError("'sim' must be an object of SimConfig fields")
    bad = set(sim) - set(SimConfig.__dataclass_fields__)
    if bad:
        raise ConfigError(f"unknown sim settings: {sorted(bad)}")

    out_dir = Path(out_override or raw.get("out_dir", "hetsync_out"))
    return ExperimentConfig(
        analysis=analysis,
        model_name=model_name,
        model_params=raw.get("model_params", {}),
        network_spec=network_spec,
        delta_spec=delta_spec,
        delta_seed=int(raw.get("delta_seed", 0)),
        sigma_grid=grids["sigma_grid"],
        epsilon_grid=grids["epsilon_grid"],
        zeta_grid=grids["zeta_grid"],
        zeta_i=raw.get("zeta_i"),
        sigma=sigma,
        transition=transition,
        out_dir=out_dir,
        seed=seed_override if seed_override is not None else raw.get("seed"),
        workers=workers,
        sim=sim,
        mle=raw.get("mle", {}),
        raw=raw,
    )


def _build_objects(cfg: ExperimentConfig):
    try:
        model = get_model(cfg.model_name, **cfg.model_params)
    except (TypeError, ValueError, KeyError) as err:
        raise ConfigError(f"bad model parameters: {err}") from None
    net = None
    mism = None
    if cfg.network_spec is not None:
        spec = cfg.network_spec
        source = spec["path"] if "path" in spec else spec
        try:
            net = network_mod.network_from_json(source)
        except network_mod.NetworkError as err:
            raise ConfigError(f"bad network: {err}") from None
        try:
            if cfg.delta_spec == "random":
                mism = network_mod.random_mismatch(net, cfg.delta_seed)
                logger.info("random mismatch drawn with seed %d", cfg.delta_seed)
            else:
                mism = network_mod.project_mismatch(net, np.asarray(cfg.delta_spec))
        except network_mod.NetworkError as err:
            raise ConfigError(f"bad delta: {err}") from None
    return model, net, mism


def _sim_config(cfg: ExperimentConfig) -> SimConfig:
    settings = dict(cfg.sim)
    if cfg.seed is not None:
        settings["seed"] = int(cfg.seed)
    try:
        return SimConfig(**settings)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad sim settings: {err}") from None


def _run_analysis(cfg: ExperimentConfig, model, net, mism) -> list:
    out = cfg.out_dir
    written = []

    if cfg.analysis == "curvature":
        zeta_i = cfg.zeta_i
        if zeta_i is None:
            zeta_i = model.msf_bounds[0] if cfg.transition == "lower" else model.msf_bounds[1]
        if zeta_i is None:
            raise ConfigError("zeta_i not given and model has no such bound")
        profile = curvature_contribution(model, float(zeta_i), cfg.zeta_grid)
        path = out / "curvature.csv"
        profile.write_csv(path)
        written.append(path)
        logger.info(
            "curvature profile at zeta_i=%.4f: %d grid points, all negative: %s",
            profile.zeta_i, profile.zeta_grid.size, bool((profile.values < 0).all()),
        )

    elif cfg.analysis == "contour":
        table = contour_table(net, mism, model, cfg.sigma_grid, cfg.epsilon_grid)
        path = out / "contour.csv"
        table.write_csv(path)
        written.append(path)
        logger.info("contour criterion: %s", table.criterion)
        if table.complex_modes_seen:
            logger.info("complex transverse eigenvalues occurred; modulus bound used")

    elif cfg.analysis == "errormap":
        sim_cfg = _sim_config(cfg)
        emap = error_map(net, mism, model, cfg.sigma_grid, cfg.epsilon_grid,
                         sim_cfg, workers=cfg.workers)
        csv_path = out / "errormap.csv"
        meta_path = out / "errormap_meta.json"
        emap.write_csv(csv_path)
        emap.write_metadata(meta_path)
        written += [csv_path, meta_path]

    elif cfg.analysis == "mle":
        if not isinstance(model, OptoModel):
            raise ConfigError("'mle' analysis applies to the opto model")
        settings = {k: int(v) for k, v in cfg.mle.items()
                    if k in ("iterations", "transient", "seed")}
        curve = mle_curve(model, **settings)
        csv_path = out / "mle.csv"
        curve.write_csv(csv_path)
        meta_path = out / "mle_meta.json"
        with open(meta_path, "w") as fh:
            json.dump(
                {
                    "crossings": list(curve.crossings),
                    "iterations": curve.iterations,
                    "transient": curve.transient,
                    "seed": curve.seed,
                },
                fh,
                indent=2,
            )
        written += [csv_path, meta_path]

    elif cfg.analysis == "opto":
        if not isinstance(model, OptoModel):
            raise ConfigError("'opto' analysis applies to the opto model")
        sigma = float(cfg.sigma)
        lam0, lam1, lam2 = opto_lambda2(net, mism, model, sigma)
        rows = []
        for eps in cfg.epsilon_grid:
            ev = np.linalg.eigvals(
                opto_assemble(net, mism, model, sigma, epsilon=eps)
            )
            approx = lam0 + eps * lam1 + eps * eps * lam2
            rows.append(
                (eps, ev.real.max(), ev.real.min(), approx.max(), approx.min())
            )
        path = out / "opto_eigs.csv"
        np.savetxt(
            path,
            np.asarray(rows),
            delimiter=",",
            header="epsilon,lambda_max,lambda_min,lambda_max_pert,lambda_min_pert",
            comments="",
        )
        written.append(path)

    return written


class _BufferHandler(logging.Handler):
    """Collects records emitted before the run log file can exist."""

    def __init__(self):
        super().__init__(logging.DEBUG)
        self.records = []

    def emit(self, record):
        self.records.append(record)


def run(config_path, *, out_dir=None, seed=None, workers=None) -> int:
    """Execute one experiment config; returns the process exit code."""
    # warnings raised while validating inputs (e.g. mismatch renormalization)
    # are buffered and replayed into the run log once the output dir exists;
    # config errors exit before anything is written
    buffer = _BufferHandler()
    logger.addHandler(buffer)
    previous_level = logger.level
    logger.setLevel(logging.DEBUG)
    try:
        cfg = load_config(config_path, out_override=out_dir,
                          seed_override=seed, workers=workers)
        model, net, mism = _build_objects(cfg)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        logger.removeHandler(buffer)
        logger.setLevel(previous_level)
        return 2
    finally:
        logger.removeHandler(buffer)

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    log_path = cfg.out_dir / "run.log"
    handler = logging.FileHandler(log_path, mode="w")
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    handler.setLevel(logging.DEBUG)
    logger.addHandler(handler)
    for record in buffer.records:
        handler.handle(record)
    try:
        logger.info("analysis=%s model=%s", cfg.analysis, cfg.model_name)
        try:
            written = _run_analysis(cfg, model, net, mism)
        except ConfigError as err:
            print(f"config error: {err}", file=sys.stderr)
            return 2
        except (DegenerateGapError, ArithmeticError) as err:
            logger.error("numerical abort: %s", err)
            print(f"numerical abort: {err}", file=sys.stderr)
            return 3
        meta = {"config": cfg.raw, "outputs": [str(p) for p in written]}
        if cfg.seed is not None:
            meta["seed"] = int(cfg.seed)
        with open(cfg.out_dir / "run_meta.json", "w") as fh:
            json.dump(meta, fh, indent=2, default=str)
        for p in written:
            logger.info("wrote %s", p)
        return 0
    finally:
        logger.removeHandler(handler)
        handler.close()
        logger.setLevel(previous_level)


def compare(contour_csv, errormap_csv, *, band_cells: int = 2,
            out_path=None) -> dict:
    """Agreement report between a stability contour and an error map.

    Cells within ``band_cells`` sigma-steps of a direct boundary are
    excluded; the rest are scored sync-vs-predicted.  Rows whose direct
    interval is empty are reported as such and score cells as predicted
    asynchronous.
    """
    contour = np.genfromtxt(contour_csv, delimiter=",", names=True)
    emap = np.genfromtxt(errormap_csv, delimiter=",", names=True)
    for col in ("epsilon", "sigma_min_direct", "sigma_max_direct"):
        if col not in (contour.dtype.names or ()):
            raise ValueError(f"contour file lacks column {col!r}")
    for col in ("sigma", "epsilon", "E", "sync"):
        if col not in (emap.dtype.names or ()):
            raise ValueError(f"errormap file lacks column {col!r}")

    sigmas = np.unique(emap["sigma"])
    epsilons = np.unique(emap["epsilon"])
    d_sigma = np.min(np.diff(sigmas)) if sigmas.size > 1 else 1.0
    contour_eps = np.atleast_1d(contour["epsilon"])
    smin_col = np.atleast_1d(contour["sigma_min_direct"])
    smax_col = np.atleast_1d(contour["sigma_max_direct"])

    total = compared = agreed = excluded = 0
    per_eps = []
    for eps in epsilons:
        match = np.where(np.abs(contour_eps - eps) < 1e-9)[0]
        if match.size == 0:
            raise ValueError(f"epsilon {eps} missing from contour grid")
        smin = smin_col[match[0]]
        smax = smax_col[match[0]]
        row = emap[np.abs(emap["epsilon"] - eps) < 1e-12]
        row = row[np.argsort(row["sigma"])]
        empty = np.isnan(smin)
        sim_sync = row["sync"].astype(bool)

        flips = np.where(np.diff(sim_sync.astype(int)) != 0)[0]
        sim_boundary = (
            0.5 * (row["sigma"][flips[0]] + row["sigma"][flips[0] + 1])
            if flips.size
            else float("nan")
        )
        entry = {
            "epsilon": float(eps),
            "sigma_min_direct": None if empty else float(smin),
            "sigma_max_direct": None if np.isnan(smax) else float(smax),
            "stable_interval_empty": bool(empty),
            "sim_boundary": None if np.isnan(sim_boundary) else float(sim_boundary),
        }
        if not empty and not np.isnan(sim_boundary):
            entry["boundary_discrepancy"] = float(abs(sim_boundary - smin))
        per_eps.append(entry)

        for cell in row:
            total += 1
            sig = cell["sigma"]
            if not empty:
                near_lower = abs(sig - smin) <= band_cells * d_sigma
                near_upper = (
                    np.isfinite(smax) and abs(sig - smax) <= band_cells * d_sigma
                )
                if near_lower or near_upper:
                    excluded += 1
                    continue
                predicted = (sig >= smin) and (not np.isfinite(smax) or sig <= smax)
            else:
                predicted = False
            compared += 1
            agreed += int(predicted == bool(cell["sync"]))

    report = {
        "cells_total": total,
        "cells_excluded_boundary_band": excluded,
        "cells_compared": compared,
        "agreement_rate": (agreed / compared) if compared else None,
        "boundary_band_cells": band_cells,
        "sigma_step": float(d_sigma),
        "per_epsilon": per_eps,
    }
    if out_path is not None:
        with open(out_path, "w") as fh:
            json.dump(report, fh, indent=2)
    return report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hetsync",
        description="Synchronization stability of heterogeneous oscillator networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="path to a JSON experiment config")
    p_run.add_argument("--out", help="output directory (overrides config)")
    p_run.add_argument("--seed", type=int, help="simulation seed (overrides config)")
    p_run.add_argument("--workers", type=int, default=os.cpu_count(),
                       help="parallel workers for grid evaluation")

    p_cmp = sub.add_parser("compare", help="contour vs error-map agreement")
    p_cmp.add_argument("contour_csv")
    p_cmp.add_argument("errormap_csv")
    p_cmp.add_argument("--band-cells", type=int, default=2,
                       help="boundary exclusion half-width in sigma cells")
    p_cmp.add_argument("--out", help="write the JSON report here")

    args = parser.parse_args(argv)

    level = os.environ.get("HETSYNC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "run":
        return run(args.config, out_dir=args.out, seed=args.seed,
                   workers=args.workers)
    if args.command == "compare":
        try:
            report = compare(args.contour_csv, args.errormap_csv,
                             band_cells=args.band_cells, out_path=args.out)
        except (ValueError, OSError) as err:
            print(f"compare error: {err}", file=sys.stderr)
            return 2
        json.dump(report, sys.stdout, indent=2)
        print()
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
