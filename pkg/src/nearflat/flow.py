"""Explicit time integration of the DeTurck-gauged Ricci flow on a flat torus.

The evolution is d/dt g = -2 Ric(g) + (nabla_i W_j + nabla_j W_i) with the
gauge vector W^k = g^{pq} Gamma^k_pq taken against the flat background; the
gauge term makes the system parabolic, and at linear order around the flat
metric the right-hand side reduces to the componentwise heat equation, which
is the decay the monitors are checked against.

Integration is explicit Euler under a fixed CFL bound
dt <= safety * h_min^2 / (2 * dim), safety 0.5; no adaptive stepping, so a
run is a deterministic function of its initial state.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import curvature
from .errors import ContractViolationError, SingularityError
from .grids import MetricGrid, SymTensorGrid, component_indices

__all__ = [
    "Profile",
    "FlowConfig",
    "FlowState",
    "FlowResult",
    "Verdict",
    "HISTORY_COLUMNS",
    "cfl_dt_bound",
    "init_perturbation",
    "flow_rhs",
    "step",
    "run",
    "l2_norm",
    "linf_norm",
    "sup_riemann",
    "discrete_heat_rate",
    "fit_decay_rate",
]

HISTORY_COLUMNS = ("step", "t", "l2", "linf", "sup_rm")


class Verdict(str, Enum):
    CONVERGED = "Converged"
    TIMED_OUT = "TimedOut"
    SINGULARITY_DETECTED = "SingularityDetected"


@dataclass(frozen=True)
class Profile:
    """Initial perturbation family.

    kind:
      fourier_mode   sin(2 pi k x_0 / L_0) times a fixed tensor direction
      gaussian_bump  centered bump, mean-subtracted per component
      random_smooth  band-limited random field (needs an RNG), mean-free
    direction: "diagonal" for identity/sqrt(n), or digit pair like "01" for
    a single normalized symmetric component.
    """

    kind: str = "fourier_mode"
    k: int = 1
    direction: str = "diagonal"
    sigma_frac: float = 0.125
    kmax: int = 2

    def __post_init__(self):
        if self.kind not in ("fourier_mode", "gaussian_bump", "random_smooth"):
            raise ContractViolationError(f"unknown profile kind {self.kind!r}")
        if self.kind == "fourier_mode" and self.k < 1:
            raise ContractViolationError("fourier mode number k must be >= 1")


@dataclass
class FlowConfig:
    dim: int = 2
    grid_shape: tuple[int, ...] = (64, 64)
    spacing: tuple[float, ...] | None = None  # default 2*pi/N per axis
    profile: Profile = field(default_factory=Profile)
    amplitude: float = 1e-3
    t_max: float = 50.0
    tol: float = 1e-8
    blowup_threshold: float = 1e6
    dt: float | None = None
    cfl_safety: float = 0.5

    def __post_init__(self):
        self.grid_shape = tuple(int(m) for m in self.grid_shape)
        if self.dim not in (2, 3) or len(self.grid_shape) != self.dim:
            raise ContractViolationError("grid_shape must match dim in {2, 3}")
        if any(m < 4 for m in self.grid_shape):
            raise ContractViolationError("need at least 4 points per axis")
        if self.amplitude < 0:
            raise ContractViolationError("amplitude must be >= 0")
        if self.tol <= 0:
            raise ContractViolationError("tol must be > 0")
        if not 0 < self.cfl_safety <= 1:
            raise ContractViolationError("cfl_safety must lie in (0, 1]")

    @property
    def resolved_spacing(self) -> tuple[float, ...]:
        if self.spacing is None:
            return tuple(2.0 * math.pi / m for m in self.grid_shape)
        return tuple(float(h) for h in self.spacing)

    @property
    def resolved_dt(self) -> float:
        bound = cfl_dt_bound(self.resolved_spacing, self.dim, self.cfl_safety)
        return bound if self.dt is None else float(self.dt)


def cfl_dt_bound(spacing, dim: int, safety: float = 0.5) -> float:
    """Largest admissible Euler step: safety * h_min^2 / (2 * dim)."""
    return safety * min(spacing) ** 2 / (2.0 * dim)


@dataclass
class FlowState:
    """Mutable integration state owned by a single driver loop.

    history rows are (step, t, l2, linf, sup_rm); one row per evaluated
    state, appended lazily the first time a state is observed.
    """

    t: float
    metric: MetricGrid
    dt: float
    cfl_safety: float = 0.5
    history: list = field(default_factory=list)
    steps_taken: int = 0

    def __post_init__(self):
        bound = cfl_dt_bound(self.metric.spacing, self.metric.dim, self.cfl_safety)
        if not 0 < self.dt <= bound * (1.0 + 1e-12):
            raise ContractViolationError(
                f"dt = {self.dt:.3e} violates the CFL bound {bound:.3e}"
            )

    @property
    def perturbation(self) -> SymTensorGrid:
        return self.metric.perturbation


# ---------------------------------------------------------------------------
# initial data


def _tensor_direction(dim: int, direction: str) -> np.ndarray:
    if direction == "diagonal":
        return np.eye(dim) / math.sqrt(dim)
    if len(direction) == 2 and direction.isdigit():
        i, j = int(direction[0]), int(direction[1])
        if i >= dim or j >= dim:
            raise ContractViolationError(f"direction {direction!r} out of range")
        e = np.zeros((dim, dim))
        e[i, j] = e[j, i] = 1.0
        return e / np.linalg.norm(e)
    raise ContractViolationError(f"unknown tensor direction {direction!r}")


def _coordinate_axes(grid_shape, spacing):
    return [np.arange(m) * h for m, h in zip(grid_shape, spacing)]


def _scalar_profile(cfg: FlowConfig) -> np.ndarray:
    shape = cfg.grid_shape
    spacing = cfg.resolved_spacing
    axes = _coordinate_axes(shape, spacing)
    lengths = [m * h for m, h in zip(shape, spacing)]
    p = cfg.profile
    if p.kind == "fourier_mode":
        x0 = axes[0].reshape((-1,) + (1,) * (cfg.dim - 1))
        s = np.sin(2.0 * math.pi * p.k * x0 / lengths[0])
        return np.broadcast_to(s, shape).copy()
    if p.kind == "gaussian_bump":
        mesh = np.meshgrid(*axes, indexing="ij")
        r2 = sum(
            (x - 0.5 * length) ** 2 / (2.0 * (p.sigma_frac * length) ** 2)
            for x, length in zip(mesh, lengths)
        )
        s = np.exp(-r2)
        return s - s.mean()
    raise ContractViolationError(f"profile {p.kind!r} is not scalar-directional")


def _random_smooth_field(cfg: FlowConfig, rng) -> np.ndarray:
    """Band-limited random trig field per component; excludes k=0 so it is mean-free."""
    shape = cfg.grid_shape
    spacing = cfg.resolved_spacing
    axes = _coordinate_axes(shape, spacing)
    lengths = [m * h for m, h in zip(shape, spacing)]
    mesh = np.meshgrid(*axes, indexing="ij")
    ncomp = cfg.dim * (cfg.dim + 1) // 2
    waves = []
    ranges = [range(-cfg.profile.kmax, cfg.profile.kmax + 1)] * cfg.dim
    for kvec in np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, cfg.dim):
        if np.any(kvec):
            waves.append(kvec)
    out = np.zeros(shape + (ncomp,))
    for c in range(ncomp):
        acc = np.zeros(shape)
        for kvec in waves:
            phase = sum(
                2.0 * math.pi * kv * x / length
                for kv, x, length in zip(kvec, mesh, lengths)
            )
            a, b = rng.standard_normal(2)
            acc += a * np.cos(phase) + b * np.sin(phase)
        out[..., c] = acc
    return out


def init_perturbation(cfg: FlowConfig, rng: np.random.Generator | None = None) -> FlowState:
    """Build the initial state with sup-norm of the perturbation exactly `amplitude`.

    The full metric must stay positive-definite; amplitudes large enough to
    break that are rejected.  random_smooth requires an RNG.
    """
    spacing = cfg.resolved_spacing
    if cfg.profile.kind == "random_smooth":
        if rng is None:
            raise ContractViolationError("random_smooth profile needs an RNG")
        comps = _random_smooth_field(cfg, rng)
    else:
        s = _scalar_profile(cfg)
        direction = _tensor_direction(cfg.dim, cfg.profile.direction)
        dense = s[..., None, None] * direction
        comps = SymTensorGrid.from_dense(dense, spacing).values

    gamma = SymTensorGrid(cfg.dim, spacing, comps)
    if cfg.amplitude == 0.0:
        gamma = SymTensorGrid.zeros(cfg.dim, cfg.grid_shape, spacing)
    else:
        sup = float(np.sqrt(np.max(gamma.frobenius_sq())))
        if sup == 0.0:
            raise ContractViolationError("profile field is identically zero")
        gamma = SymTensorGrid(cfg.dim, spacing, gamma.values * (cfg.amplitude / sup))

    metric = MetricGrid(gamma)
    if not metric.is_positive_definite(curvature.DEGENERACY_THRESHOLD):
        raise ContractViolationError(
            f"amplitude {cfg.amplitude} breaks positive-definiteness of the metric"
        )
    return FlowState(t=0.0, metric=metric, dt=cfg.resolved_dt, cfl_safety=cfg.cfl_safety)


# ---------------------------------------------------------------------------
# right-hand side and norms


def _evaluate(g: MetricGrid):
    """One fused curvature pass: returns (rhs dense field, sup |Rm|).

    The Riemann tensor is antisymmetric in its first index pair, so only the
    pairs i < j are assembled; the Ricci trace and sup |Rm| are recovered
    from those with signs and a factor 2.
    """
    n = g.dim
    spacing = g.spacing
    lead = g.grid_shape
    dense = g.dense_full()
    ginv = curvature.inverse_metric_field(g, dense)
    gamma = curvature._christoffel_field(g, dense, ginv)

    # gamma_i[l, p] = Gamma^l_{ip}, one contiguous slab per middle index
    gamma_mid = [np.ascontiguousarray(gamma[..., :, i, :]) for i in range(n)]
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    riem_pairs = []
    for a, b in pairs:
        # R^l_{abk} = d_a Gamma^l_{bk} - d_b Gamma^l_{ak}
        #           + Gamma^l_{ap} Gamma^p_{bk} - Gamma^l_{bp} Gamma^p_{ak}
        block = curvature._central_diff(gamma_mid[b], a, spacing[a])
        block -= curvature._central_diff(gamma_mid[a], b, spacing[b])
        block += gamma_mid[a] @ gamma_mid[b]
        block -= gamma_mid[b] @ gamma_mid[a]
        riem_pairs.append(block)

    ric = np.zeros(lead + (n, n))
    for idx, (a, b) in enumerate(pairs):
        # R_{jk} = sum_p R^p_{pjk}; the (p, j) slot maps to a stored pair
        ric[..., b, :] += riem_pairs[idx][..., a, :]  # p = a < j = b
        ric[..., a, :] -= riem_pairs[idx][..., b, :]  # p = b > j = a
    ric = 0.5 * (ric + ric.swapaxes(-2, -1))

    sq = np.stack(riem_pairs, axis=-3).reshape(-1, len(pairs) * n * n)
    sup_rm = float(np.sqrt(2.0 * np.max(np.einsum("ij,ij->i", sq, sq))))

    # W^k = g^{pq} Gamma^k_pq; lower with g; all contractions as batched matmuls
    w_up = gamma.reshape(lead + (n, n * n)) @ ginv.reshape(lead + (n * n, 1))
    w_low = (dense @ w_up)[..., 0]
    dw = curvature._grid_gradient(w_low, spacing, n)  # (*grid, i, j) = d_i W_j
    nabla_sym = dw + dw.swapaxes(-2, -1)
    gw = w_low[..., None, :] @ gamma.reshape(lead + (n, n * n))
    nabla_sym -= 2.0 * gw.reshape(lead + (n, n))
    rhs = -2.0 * ric + nabla_sym
    return rhs, sup_rm


def flow_rhs(g: MetricGrid) -> SymTensorGrid:
    """-2 Ric(g) + symmetrized covariant gradient of the gauge vector."""
    rhs, _ = _evaluate(g)
    return SymTensorGrid.from_dense(rhs, g.spacing)


def l2_norm(d: SymTensorGrid) -> float:
    """sqrt( sum_points |d|_F^2 * cell volume ), fixed summation order."""
    return float(np.sqrt(np.sum(d.frobenius_sq()) * d.cell_volume))


def linf_norm(d: SymTensorGrid) -> float:
    """Max over points of the pointwise Frobenius norm."""
    return float(np.sqrt(np.max(d.frobenius_sq())))


def sup_riemann(g: MetricGrid) -> float:
    """Max over points of the Frobenius norm of R^l_ijk."""
    riem = curvature.riemann(g)
    return float(np.sqrt(np.max(np.einsum("...lijk,...lijk->...", riem, riem))))


def _record(state: FlowState, sup_rm: float) -> None:
    if len(state.history) == state.steps_taken:
        gamma = state.perturbation
        frob_sq = gamma.frobenius_sq()
        l2 = float(np.sqrt(np.sum(frob_sq) * gamma.cell_volume))
        linf = float(np.sqrt(np.max(frob_sq)))
        state.history.append((state.steps_taken, state.t, l2, linf, sup_rm))


def _advance(state: FlowState, rhs_dense: np.ndarray) -> None:
    dense_update = state.dt * rhs_dense
    gamma = state.perturbation
    idx = component_indices(state.metric.dim)
    update = np.stack([dense_update[..., i, j] for i, j in idx], axis=-1)
    new_values = gamma.values + update
    if not np.all(np.isfinite(new_values)):
        raise SingularityError(
            f"non-finite metric update at t = {state.t:.6g}"
        )
    state.metric = MetricGrid(SymTensorGrid(gamma.dim, gamma.spacing, new_values))
    state.t += state.dt
    state.steps_taken += 1


def step(state: FlowState) -> FlowState:
    """One explicit Euler step g <- g + dt * rhs(g); records the consumed state.

    Raises SingularityError on a non-finite update.  The flat metric is an
    exact fixed point: the update is bit-exact zero there.
    """
    rhs_dense, sup_rm = _evaluate(state.metric)
    _record(state, sup_rm)
    _advance(state, rhs_dense)
    return state


@dataclass(frozen=True)
class FlowResult:
    verdict: Verdict
    state: FlowState

    @property
    def history(self) -> list:
        return self.state.history


def run(state: FlowState, cfg: FlowConfig, on_record=None) -> FlowResult:
    """Iterate until convergence (L2 of the perturbation below tol), timeout,
    or a detected singularity (sup |Rm| beyond the threshold, or non-finite
    values).  Verdicts are returned, not raised.  on_record, if given, is
    called with the state after each history row is appended."""
    while True:
        try:
            rhs_dense, sup_rm = _evaluate(state.metric)
        except SingularityError:
            return FlowResult(Verdict.SINGULARITY_DETECTED, state)
        _record(state, sup_rm)
        if on_record is not None:
            on_record(state)
        current_l2 = state.history[-1][2]
        if not math.isfinite(sup_rm) or not math.isfinite(current_l2):
            return FlowResult(Verdict.SINGULARITY_DETECTED, state)
        if sup_rm > cfg.blowup_threshold:
            return FlowResult(Verdict.SINGULARITY_DETECTED, state)
        if current_l2 < cfg.tol:
            return FlowResult(Verdict.CONVERGED, state)
        if state.t > cfg.t_max:
            return FlowResult(Verdict.TIMED_OUT, state)
        try:
            _advance(state, rhs_dense)
        except SingularityError:
            return FlowResult(Verdict.SINGULARITY_DETECTED, state)


# ---------------------------------------------------------------------------
# decay-rate diagnostics


def discrete_heat_rate(k: int, h: float) -> float:
    """Decay rate (2/h^2)(1 - cos(k h)) of mode k under the 5/7-point heat stencil."""
    return 2.0 * (1.0 - math.cos(k * h)) / h**2


def fit_decay_rate(history, skip: int = 5) -> float:
    """Least-squares slope of -log(l2) against t over history[skip:]."""
    rows = [r for r in history[skip:] if r[2] > 0.0]
    if len(rows) < 2:
        raise ContractViolationError("not enough history to fit a decay rate")
    t = np.array([r[1] for r in rows])
    log_l2 = np.log([r[2] for r in rows])
    slope = np.polyfit(t, log_l2, 1)[0]
    return float(-slope)
