"""Metric-aware training of the toy classifier.

The whole flat parameter vector is treated as one coordinate point of the
rank-one tanh geometry; each update preconditions the loss gradient with
the inverse-free transform (I + u u^T), u = tanh(tau * theta).  Alongside
the loss, the run tracks the metric length of a unit probe direction,

    B_r = sqrt(probe^T (I - u u^T) probe),

which equals 1 on the flat metric and at most 1 for unit probes, so its
drift and settling expose how far training bends the metric.
"""

from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .datasets import make_dataset
from .errors import ContractViolationError, SingularityError
from .mlp import MlpModel, accuracy, init_mlp, mlp_backward, mlp_loss, param_count
from .rng import stream

__all__ = [
    "TrainConfig",
    "RadiusSeries",
    "TrainResult",
    "train_step_weak",
    "track_radius",
    "train",
    "radius_stabilization",
    "TRAIN_COLUMNS",
]

TRAIN_COLUMNS = ("step", "train_loss", "test_acc", "B_r")

EXACT_METHOD_PARAM_LIMIT = 1000


@dataclass
class TrainConfig:
    tau: float = 0.1
    learning_rate: float = 0.1
    steps: int = 200
    seed: int = 0
    dataset: str = "blobs"
    probe_mode: str = "update_direction"  # or "fixed_random"
    radius_log_cadence: int = 1
    layer_sizes: tuple[int, ...] = (2, 16, 16, 2)
    method: str = "weak"  # "exact" only for small models

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ContractViolationError("learning_rate must be > 0")
        if self.steps < 1:
            raise ContractViolationError("steps must be >= 1")
        if self.tau <= 0:
            raise ContractViolationError("tau must be > 0")
        if self.probe_mode not in ("update_direction", "fixed_random"):
            raise ContractViolationError(f"unknown probe mode {self.probe_mode!r}")
        if self.radius_log_cadence < 1:
            raise ContractViolationError("radius_log_cadence must be >= 1")
        if self.method not in ("weak", "exact"):
            raise ContractViolationError(f"unknown method {self.method!r}")
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if self.method == "exact" and param_count(self.layer_sizes) > EXACT_METHOD_PARAM_LIMIT:
            raise ContractViolationError(
                f"exact preconditioning is limited to {EXACT_METHOD_PARAM_LIMIT} parameters"
            )


@dataclass
class RadiusSeries:
    """Logged (step, B_r) pairs; steps strictly increasing, radii >= 0."""

    entries: list = field(default_factory=list)
    fallback_steps: list = field(default_factory=list)

    def append(self, step: int, value: float, used_fallback: bool = False) -> None:
        if self.entries and step <= self.entries[-1][0]:
            raise ContractViolationError("radius log steps must strictly increase")
        if not value >= 0.0:
            raise ContractViolationError("radius must be non-negative")
        self.entries.append((step, value))
        if used_fallback:
            self.fallback_steps.append(step)

    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.entries])


@dataclass
class TrainResult:
    model: MlpModel
    rows: list  # (step, train_loss, test_acc, B_r)
    radius_primary: RadiusSeries
    radius_fixed: RadiusSeries
    final_test_acc: float


def _precondition(theta: np.ndarray, grad: np.ndarray, cfg: TrainConfig) -> np.ndarray:
    point = geometry.CoordPoint(theta, cfg.tau)
    if cfg.method == "exact":
        return geometry.natural_grad_exact(point, grad)
    return geometry.natural_grad_weak(point, grad)


def train_step_weak(
    model: MlpModel, batch: np.ndarray, labels: np.ndarray, cfg: TrainConfig
) -> MlpModel:
    """One update theta <- theta - lr * (I + u u^T) grad, u = tanh(tau*theta)."""
    grad = mlp_backward(model, batch, labels)
    if not np.all(np.isfinite(grad)):
        raise SingularityError("non-finite loss gradient; training aborted")
    direction = _precondition(model.theta, grad, cfg)
    return MlpModel(model.layer_sizes, model.theta - cfg.learning_rate * direction)


def track_radius(model: MlpModel, cfg: TrainConfig, probe: np.ndarray) -> float:
    """Metric length of a unit probe at the current parameters."""
    probe = np.asarray(probe, dtype=float)
    norm = np.linalg.norm(probe)
    if norm == 0.0:
        raise ContractViolationError("probe must be nonzero; use the fallback probe")
    metric = geometry.metric_at(geometry.CoordPoint(model.theta, cfg.tau))
    return geometry.ball_radius(metric, probe / norm)


def _unit_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def train(cfg: TrainConfig) -> TrainResult:
    """Deterministic full-batch run; returns per-step rows and radius series.

    Rows snapshot the state before each update (step = updates applied so
    far), plus one final row.  The primary radius series follows
    cfg.probe_mode; the fixed-random series is always logged as well.  A
    zero update direction falls back to the fixed probe and is flagged.
    """
    x_train, y_train, x_test, y_test = make_dataset(
        cfg.dataset, stream(cfg.seed, f"dataset:{cfg.dataset}")
    )
    model = init_mlp(cfg.layer_sizes, stream(cfg.seed, "mlp-init"))
    fixed_probe = _unit_vector(stream(cfg.seed, "radius-probe"), param_count(cfg.layer_sizes))

    radius_primary = RadiusSeries()
    radius_fixed = RadiusSeries()
    rows = []
    last_radius = float("nan")

    def log_radius(step_index: int, direction: np.ndarray | None) -> float:
        fallback = False
        probe = fixed_probe
        if cfg.probe_mode == "update_direction":
            if direction is not None and np.linalg.norm(direction) > 0.0:
                probe = direction
            else:
                fallback = True
        primary = track_radius(model, cfg, probe)
        radius_primary.append(step_index, primary, used_fallback=fallback)
        radius_fixed.append(step_index, track_radius(model, cfg, fixed_probe))
        return primary

    direction = None
    for step_index in range(cfg.steps):
        grad = mlp_backward(model, x_train, y_train)
        if not np.all(np.isfinite(grad)):
            raise SingularityError(f"non-finite gradient at step {step_index}")
        direction = _precondition(model.theta, grad, cfg)
        if step_index % cfg.radius_log_cadence == 0:
            last_radius = log_radius(step_index, direction)
        rows.append(
            (
                step_index,
                mlp_loss(model, x_train, y_train),
                accuracy(model, x_test, y_test),
                last_radius,
            )
        )
        model = MlpModel(model.layer_sizes, model.theta - cfg.learning_rate * direction)

    last_radius = log_radius(cfg.steps, direction)
    final_acc = accuracy(model, x_test, y_test)
    rows.append((cfg.steps, mlp_loss(model, x_train, y_train), final_acc, last_radius))
    return TrainResult(model, rows, radius_primary, radius_fixed, final_acc)


def radius_stabilization(series: RadiusSeries, window: int = 50) -> float:
    """std/mean of the trailing window of logged radii (settling indicator)."""
    values = series.values()
    if len(values) < window:
        raise ContractViolationError(f"need at least {window} logged radii")
    tail = values[-window:]
    return float(np.std(tail) / np.mean(tail))
