"""Strict JSON experiment configuration.

One JSON document per run:

    {
      "experiment": "ricci-sim" | "train" | "inverse-approx"
                    | "divergence-check" | "curvature-check",
      "seed": 123,          # required whenever the experiment draws randomness
      "out_dir": "runs/a",  # optional; the CLI --out flag overrides it
      "params": { ... }     # experiment-specific block, defaults applied
    }

Unknown keys anywhere are rejected.  The resolved config (defaults filled
in) is echoed into the run manifest, and its canonical JSON is hashed so
identical configs are recognizably identical.
"""

import hashlib
import json
from dataclasses import dataclass

from .errors import ConfigError
from .flow import FlowConfig, Profile
from .inverse_net import InverseNetConfig
from .training import TrainConfig

__all__ = ["ExperimentConfig", "EXPERIMENTS", "parse_config", "config_hash"]

EXPERIMENTS = (
    "ricci-sim",
    "train",
    "inverse-approx",
    "divergence-check",
    "curvature-check",
)


@dataclass
class DivergenceCheckConfig:
    dims: tuple = (1, 2, 8, 32)
    taus: tuple = (0.05, 0.1, 1.0)
    pairs_per_combo: int = 834
    xi_range: float = 3.0

    def __post_init__(self):
        self.dims = tuple(int(n) for n in self.dims)
        self.taus = tuple(float(t) for t in self.taus)
        if any(n < 1 for n in self.dims) or any(t <= 0 for t in self.taus):
            raise ConfigError("dims must be >= 1 and taus > 0")
        if self.pairs_per_combo < 1 or self.xi_range <= 0:
            raise ConfigError("pairs_per_combo >= 1 and xi_range > 0 required")


@dataclass
class CurvatureCheckConfig:
    grids: tuple = (64, 128)
    conformal_amplitude: float = 0.01
    flat_grid: int = 16

    def __post_init__(self):
        self.grids = tuple(int(n) for n in self.grids)
        if len(self.grids) < 2 or any(n < 8 for n in self.grids):
            raise ConfigError("need at least two grids of size >= 8")
        if not 0 < self.conformal_amplitude < 0.2:
            raise ConfigError("conformal_amplitude must lie in (0, 0.2)")


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int | None
    out_dir: str | None
    params: object
    resolved: dict


def _reject_unknown(block: dict, allowed, where: str) -> None:
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown}", key=where)


def _build(cls, block: dict, where: str, **extra):
    try:
        return cls(**block, **extra)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), key=where) from exc


def _flow_params(block: dict) -> FlowConfig:
    allowed = (
        "dim",
        "grid_shape",
        "spacing",
        "profile",
        "amplitude",
        "t_max",
        "tol",
        "blowup_threshold",
        "dt",
        "cfl_safety",
    )
    _reject_unknown(block, allowed, "params")
    block = dict(block)
    if "grid_shape" in block:
        block["grid_shape"] = tuple(block["grid_shape"])
    if "spacing" in block and block["spacing"] is not None:
        block["spacing"] = tuple(block["spacing"])
    profile_block = block.pop("profile", {})
    if not isinstance(profile_block, dict):
        raise ConfigError("profile must be an object", key="params.profile")
    _reject_unknown(
        profile_block, ("kind", "k", "direction", "sigma_frac", "kmax"), "params.profile"
    )
    profile = _build(Profile, profile_block, "params.profile")
    return _build(FlowConfig, block, "params", profile=profile)


def _train_params(block: dict, seed: int) -> TrainConfig:
    allowed = (
        "tau",
        "learning_rate",
        "steps",
        "dataset",
        "probe_mode",
        "radius_log_cadence",
        "layer_sizes",
        "method",
    )
    _reject_unknown(block, allowed, "params")
    block = dict(block)
    if "layer_sizes" in block:
        block["layer_sizes"] = tuple(block["layer_sizes"])
    return _build(TrainConfig, block, "params", seed=seed)


def _inverse_params(block: dict, seed: int) -> InverseNetConfig:
    allowed = (
        "dim",
        "tau",
        "hidden",
        "init_scale",
        "train_samples",
        "heldout_samples",
        "iterations",
        "learning_rate",
        "eval_cadence",
        "max_u_sq",
    )
    _reject_unknown(block, allowed, "params")
    return _build(InverseNetConfig, dict(block), "params", seed=seed)


def _divergence_params(block: dict) -> DivergenceCheckConfig:
    _reject_unknown(block, ("dims", "taus", "pairs_per_combo", "xi_range"), "params")
    return _build(DivergenceCheckConfig, dict(block), "params")


def _curvature_params(block: dict) -> CurvatureCheckConfig:
    _reject_unknown(block, ("grids", "conformal_amplitude", "flat_grid"), "params")
    return _build(CurvatureCheckConfig, dict(block), "params")


def _needs_seed(experiment: str, params) -> bool:
    if experiment in ("train", "inverse-approx", "divergence-check"):
        return True
    if experiment == "ricci-sim":
        return params.profile.kind == "random_smooth"
    return False


def _resolve(experiment: str, seed, params) -> dict:
    if experiment == "ricci-sim":
        p = {
            "dim": params.dim,
            "grid_shape": list(params.grid_shape),
            "spacing": list(params.resolved_spacing),
            "profile": {
                "kind": params.profile.kind,
                "k": params.profile.k,
                "direction": params.profile.direction,
                "sigma_frac": params.profile.sigma_frac,
                "kmax": params.profile.kmax,
            },
            "amplitude": params.amplitude,
            "t_max": params.t_max,
            "tol": params.tol,
            "blowup_threshold": params.blowup_threshold,
            "dt": params.resolved_dt,
            "cfl_safety": params.cfl_safety,
        }
    elif experiment == "train":
        p = {
            "tau": params.tau,
            "learning_rate": params.learning_rate,
            "steps": params.steps,
            "dataset": params.dataset,
            "probe_mode": params.probe_mode,
            "radius_log_cadence": params.radius_log_cadence,
            "layer_sizes": list(params.layer_sizes),
            "method": params.method,
        }
    elif experiment == "inverse-approx":
        p = {
            "dim": params.dim,
            "tau": params.tau,
            "hidden": params.hidden,
            "init_scale": params.init_scale,
            "train_samples": params.train_samples,
            "heldout_samples": params.heldout_samples,
            "iterations": params.iterations,
            "learning_rate": params.learning_rate,
            "eval_cadence": params.eval_cadence,
            "max_u_sq": params.max_u_sq,
        }
    elif experiment == "divergence-check":
        p = {
            "dims": list(params.dims),
            "taus": list(params.taus),
            "pairs_per_combo": params.pairs_per_combo,
            "xi_range": params.xi_range,
        }
    else:
        p = {
            "grids": list(params.grids),
            "conformal_amplitude": params.conformal_amplitude,
            "flat_grid": params.flat_grid,
        }
    return {"experiment": experiment, "seed": seed, "params": p}


def parse_config(path) -> ExperimentConfig:
    """Load, validate, and fully resolve a config file.

    Raises ConfigError with a line-anchored message for parse failures and a
    key-anchored message for unknown keys or invalid values.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc

    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    _reject_unknown(raw, ("experiment", "seed", "out_dir", "params"), "top level")

    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(
            f"must be one of {list(EXPERIMENTS)}, got {experiment!r}", key="experiment"
        )

    seed = raw.get("seed")
    if seed is not None:
        if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer", key="seed")

    block = raw.get("params", {})
    if not isinstance(block, dict):
        raise ConfigError("params must be an object", key="params")
    if "seed" in block:
        raise ConfigError("seed belongs at the top level", key="params.seed")

    if experiment == "ricci-sim":
        params = _flow_params(block)
    elif experiment == "train":
        params = _train_params(block, seed if seed is not None else 0)
    elif experiment == "inverse-approx":
        params = _inverse_params(block, seed if seed is not None else 0)
    elif experiment == "divergence-check":
        params = _divergence_params(block)
    else:
        params = _curvature_params(block)

    if seed is None and _needs_seed(experiment, params):
        raise ConfigError(f"experiment {experiment!r} is randomized", key="seed")

    out_dir = raw.get("out_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError("out_dir must be a string", key="out_dir")

    resolved = _resolve(experiment, seed, params)
    return ExperimentConfig(experiment, seed, out_dir, params, resolved)


def config_hash(resolved: dict) -> str:
    """sha256 of the canonical JSON of the resolved config (out_dir excluded)."""
    canonical = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()
