"""Experiment orchestration: dispatch, CSV emission, run manifests.

Every run writes a manifest, including runs that end in a failure verdict.
CSV numbers use shortest round-trip formatting and Unix newlines, so a rerun
with the same config and seed reproduces every CSV byte for byte.
"""

import json
import logging
import math
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, curvature, flow, geometry
from .config import ExperimentConfig, config_hash
from .errors import DegenerateMetricError, NotPositiveDefiniteError, SingularityError
from .grids import MetricGrid, SymTensorGrid, dump_grid_csv
from .inverse_net import INVERSE_COLUMNS, sample_metric_batch, train_inverse_approximator
from .rng import stream
from .training import TRAIN_COLUMNS, radius_stabilization, train

__all__ = ["RunManifest", "run_experiment", "write_csv", "EXIT_OK", "EXIT_CONFIG",
           "EXIT_DEGENERATE", "EXIT_SINGULARITY"]

log = logging.getLogger("nearflat")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_SINGULARITY = 4

IDENTITY_DIVERGENCE_TOL = 1e-14


@dataclass
class RunManifest:
    config_hash: str
    version: str
    started_at: str
    finished_at: str
    verdicts: dict
    outputs: list


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_manifest(path: Path, manifest: RunManifest, resolved: dict) -> None:
    payload = {
        "config_hash": manifest.config_hash,
        "version": manifest.version,
        "started_at": manifest.started_at,
        "finished_at": manifest.finished_at,
        "verdicts": manifest.verdicts,
        "outputs": manifest.outputs,
        "resolved_config": resolved,
    }
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _timestamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


# ---------------------------------------------------------------------------
# experiment bodies; each returns (verdicts, outputs, exit_code)


def _ricci_sim(cfg: ExperimentConfig, out: Path, dump_every):
    params = cfg.params
    rng = None
    if params.profile.kind == "random_smooth":
        rng = stream(cfg.seed, "flow-profile")
    state = flow.init_perturbation(params, rng)

    outputs = []

    def snapshot(st):
        if dump_every and st.steps_taken % dump_every == 0:
            name = f"snapshot_{st.steps_taken:06d}.csv"
            with open(out / name, "w", encoding="utf-8", newline="") as fh:
                dump_grid_csv(st.perturbation, fh)
            outputs.append(name)

    result = flow.run(state, params, on_record=snapshot if dump_every else None)

    history_path = out / "history.csv"
    write_csv(history_path, flow.HISTORY_COLUMNS, result.history)
    with open(history_path, "a", encoding="utf-8", newline="") as fh:
        fh.write(f"# verdict={result.verdict.value}\n")
    outputs.append("history.csv")

    last = result.history[-1]
    verdicts = {
        "flow": result.verdict.value,
        "t_final": last[1],
        "l2_final": last[2],
        "steps": result.state.steps_taken,
    }
    code = EXIT_SINGULARITY if result.verdict is flow.Verdict.SINGULARITY_DETECTED else EXIT_OK
    return verdicts, outputs, code


def _train(cfg: ExperimentConfig, out: Path, dump_every):
    result = train(cfg.params)
    write_csv(out / "train.csv", TRAIN_COLUMNS, result.rows)
    verdicts = {
        "final_test_acc": result.final_test_acc,
        "final_train_loss": result.rows[-1][1],
        "radius_fallbacks": len(result.radius_primary.fallback_steps),
    }
    if len(result.radius_primary.entries) >= 50:
        verdicts["radius_settle_ratio"] = radius_stabilization(result.radius_primary)
    return verdicts, ["train.csv"], EXIT_OK


def _inverse_approx(cfg: ExperimentConfig, out: Path, dump_every):
    params = cfg.params
    train_batch = sample_metric_batch(
        params.train_samples, params.dim, params.tau,
        stream(cfg.seed, "inverse-train"), params.max_u_sq,
    )
    heldout_batch = sample_metric_batch(
        params.heldout_samples, params.dim, params.tau,
        stream(cfg.seed, "inverse-heldout"), params.max_u_sq,
    )
    _, report = train_inverse_approximator(train_batch, heldout_batch, params)
    write_csv(out / "inverse.csv", INVERSE_COLUMNS, report.history)
    verdicts = {
        "heldout_mean_loss": report.heldout_mean_loss,
        "max_deviation": report.max_deviation,
        "aborted": report.aborted,
    }
    return verdicts, ["inverse.csv"], EXIT_DEGENERATE if report.aborted else EXIT_OK


def _divergence_check(cfg: ExperimentConfig, out: Path, dump_every):
    params = cfg.params
    rng = stream(cfg.seed, "divergence-check")
    rows = []
    total_violations = 0
    for n in params.dims:
        for tau in params.taus:
            nonneg_violations = 0
            identity_violations = 0
            min_d = math.inf
            for _ in range(params.pairs_per_combo):
                xi = rng.uniform(-params.xi_range, params.xi_range, size=n)
                xi_prime = rng.uniform(-params.xi_range, params.xi_range, size=n)
                p = geometry.CoordPoint(xi, tau)
                d = geometry.divergence(geometry.CoordPoint(xi_prime, tau), p)
                min_d = min(min_d, d)
                if d < 0.0:
                    nonneg_violations += 1
                if abs(geometry.divergence(p, p)) >= IDENTITY_DIVERGENCE_TOL:
                    identity_violations += 1
            total_violations += nonneg_violations + identity_violations
            rows.append(
                (n, tau, params.pairs_per_combo, min_d, nonneg_violations, identity_violations)
            )
    write_csv(
        out / "divergence_check.csv",
        ("n", "tau", "pairs", "min_divergence", "nonneg_violations", "identity_violations"),
        rows,
    )
    return {"total_violations": total_violations}, ["divergence_check.csv"], EXIT_OK


def _conformal_scalar_error(n_grid: int, amplitude: float) -> float:
    """Max-norm error of the discrete scalar curvature of exp(2f) * delta,
    f = amplitude * sin(x) sin(y), against the closed form -2 exp(-2f) lap f."""
    spacing = (2.0 * math.pi / n_grid,) * 2
    x = np.arange(n_grid) * spacing[0]
    f = amplitude * np.outer(np.sin(x), np.sin(x))
    conf = np.exp(2.0 * f)
    dense = np.zeros((n_grid, n_grid, 2, 2))
    dense[..., 0, 0] = conf - 1.0
    dense[..., 1, 1] = conf - 1.0
    g = MetricGrid(SymTensorGrid.from_dense(dense, spacing))
    computed = curvature.scalar_curvature(g)
    exact = -2.0 * np.exp(-2.0 * f) * (-2.0 * f)  # lap f = -2 f for this profile
    return float(np.max(np.abs(computed - exact)))


def _curvature_check(cfg: ExperimentConfig, out: Path, dump_every):
    params = cfg.params
    rows = []
    n_flat = params.flat_grid
    flat = MetricGrid.flat(2, (n_flat, n_flat), (2.0 * math.pi / n_flat,) * 2)
    flat_values = {
        "flat_max_christoffel": float(np.max(np.abs(curvature.christoffel(flat)))),
        "flat_max_riemann": float(np.max(np.abs(curvature.riemann(flat)))),
        "flat_max_ricci": float(np.max(np.abs(curvature.ricci(flat)))),
        "flat_max_scalar": float(np.max(np.abs(curvature.scalar_curvature(flat)))),
    }
    for name, value in flat_values.items():
        rows.append((name, n_flat, value))

    errors = []
    for n_grid in params.grids:
        err = _conformal_scalar_error(n_grid, params.conformal_amplitude)
        errors.append(err)
        rows.append(("conformal_scalar_max_err", n_grid, err))
    orders = [
        math.log2(errors[i] / errors[i + 1]) for i in range(len(errors) - 1)
    ]
    for (n_a, n_b), order in zip(zip(params.grids, params.grids[1:]), orders):
        rows.append(("observed_order", n_b, order))

    write_csv(out / "curvature_check.csv", ("check", "grid", "value"), rows)
    verdicts = {
        "flat_all_zero": all(v == 0.0 for v in flat_values.values()),
        "observed_orders": orders,
    }
    return verdicts, ["curvature_check.csv"], EXIT_OK


_DISPATCH = {
    "ricci-sim": _ricci_sim,
    "train": _train,
    "inverse-approx": _inverse_approx,
    "divergence-check": _divergence_check,
    "curvature-check": _curvature_check,
}


def run_experiment(
    cfg: ExperimentConfig, out_dir=None, dump_every: int | None = None
) -> tuple[RunManifest, int]:
    """Dispatch one experiment, write its CSVs, and always write a manifest.

    Returns the manifest and the process exit code (0 ok, 3 numerical
    degeneracy, 4 singularity verdict).
    """
    out = Path(out_dir if out_dir is not None else (cfg.out_dir or "."))
    out.mkdir(parents=True, exist_ok=True)
    started = _timestamp()
    log.info("running %s into %s", cfg.experiment, out)

    try:
        verdicts, outputs, code = _DISPATCH[cfg.experiment](cfg, out, dump_every)
    except (DegenerateMetricError, NotPositiveDefiniteError, SingularityError) as exc:
        verdicts = {"error": f"{type(exc).__name__}: {exc}"}
        outputs = []
        code = EXIT_SINGULARITY if isinstance(exc, SingularityError) else EXIT_DEGENERATE

    manifest = RunManifest(
        config_hash=config_hash(cfg.resolved),
        version=__version__,
        started_at=started,
        finished_at=_timestamp(),
        verdicts=verdicts,
        outputs=sorted(outputs) + ["manifest.json"],
    )
    _write_manifest(out / "manifest.json", manifest, cfg.resolved)
    log.info("verdicts: %s", verdicts)
    return manifest, code
