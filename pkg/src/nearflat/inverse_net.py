"""Learned approximate inversion of sampled rank-one metrics.

A symmetric n x n matrix is split into its strict lower triangle P
(n(n-1)/2 entries, row-major) and its diagonal A (n entries); the
approximator is a one-hidden-layer tanh net mapping the (P, A) entries of a
metric to the (P, A) entries of a candidate inverse, trained by plain
gradient descent on the residual objective

    L = mean over samples of || I - g * g_tilde ||_F^2,

which is zero exactly when g_tilde is the true inverse.  Sampled metrics
come from the rank-one family I - u u^T restricted to |u|^2 <= 0.9, where
the exact inverse is known in closed form and serves as the evaluation
reference.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError
from .rng import stream

__all__ = [
    "MetricEntries",
    "decompose",
    "combine",
    "inverse_loss",
    "InverseNetConfig",
    "InverseNet",
    "InverseReport",
    "MetricSampleBatch",
    "sample_metric_batch",
    "train_inverse_approximator",
    "INVERSE_COLUMNS",
]

INVERSE_COLUMNS = ("iteration", "loss", "heldout_loss", "max_dev")


def _strict_lower_indices(dim: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(dim) for j in range(i)]


@dataclass(frozen=True)
class MetricEntries:
    """(P, A) split of a symmetric matrix: strict lower triangle plus diagonal."""

    dim: int
    p: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        a = np.asarray(self.a, dtype=float)
        if p.shape != (self.dim * (self.dim - 1) // 2,):
            raise ContractViolationError("P must hold n(n-1)/2 entries")
        if a.shape != (self.dim,):
            raise ContractViolationError("A must hold n entries")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "a", a)

    def as_vector(self) -> np.ndarray:
        """Net i/o layout: strict-lower entries then diagonal entries."""
        return np.concatenate([self.p, self.a])

    @classmethod
    def from_vector(cls, dim: int, vec: np.ndarray) -> "MetricEntries":
        n_p = dim * (dim - 1) // 2
        return cls(dim, vec[:n_p], vec[n_p:])


def decompose(matrix: np.ndarray) -> MetricEntries:
    """Split a symmetric matrix into entries; exact round-trip with combine."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ContractViolationError("decompose needs a square matrix")
    if not np.array_equal(matrix, matrix.T):
        raise ContractViolationError("decompose needs an exactly symmetric matrix")
    n = matrix.shape[0]
    lower = _strict_lower_indices(n)
    p = np.array([matrix[i, j] for i, j in lower])
    return MetricEntries(n, p, np.diag(matrix).copy())


def combine(entries: MetricEntries) -> np.ndarray:
    """Rebuild the symmetric matrix: P fills both triangles, A the diagonal."""
    n = entries.dim
    out = np.zeros((n, n))
    for k, (i, j) in enumerate(_strict_lower_indices(n)):
        out[i, j] = entries.p[k]
        out[j, i] = entries.p[k]
    out[np.diag_indices(n)] = entries.a
    return out


def inverse_loss(g: np.ndarray, g_tilde: np.ndarray) -> float:
    """Squared Frobenius norm of I - g * g_tilde."""
    g = np.asarray(g, dtype=float)
    g_tilde = np.asarray(g_tilde, dtype=float)
    if g.shape != g_tilde.shape or g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ContractViolationError("inverse_loss needs two square matrices of equal size")
    residual = np.eye(g.shape[0]) - g @ g_tilde
    return float(np.sum(residual**2))


# ---------------------------------------------------------------------------
# batched entry packing (vector layout identical to MetricEntries.as_vector)


def _entry_index_arrays(dim: int):
    lower = _strict_lower_indices(dim)
    rows = np.array([i for i, _ in lower] + list(range(dim)), dtype=int)
    cols = np.array([j for _, j in lower] + list(range(dim)), dtype=int)
    return rows, cols


def combine_batch(entries: np.ndarray, dim: int) -> np.ndarray:
    """(m, n(n+1)/2) entry vectors -> (m, n, n) symmetric matrices."""
    rows, cols = _entry_index_arrays(dim)
    m = entries.shape[0]
    out = np.zeros((m, dim, dim))
    out[:, rows, cols] = entries
    out[:, cols, rows] = entries
    return out


def decompose_batch(dense: np.ndarray) -> np.ndarray:
    dim = dense.shape[-1]
    rows, cols = _entry_index_arrays(dim)
    return dense[:, rows, cols]


# ---------------------------------------------------------------------------
# sampling and the approximator


@dataclass(frozen=True)
class MetricSampleBatch:
    """Sampled metrics as entry vectors plus their closed-form inverses."""

    dim: int
    entries: np.ndarray  # (m, n(n+1)/2)
    inverses: np.ndarray  # (m, n, n)

    @property
    def count(self) -> int:
        return self.entries.shape[0]

    def matrices(self) -> np.ndarray:
        return combine_batch(self.entries, self.dim)


def sample_metric_batch(
    count: int,
    dim: int,
    tau: float,
    rng: np.random.Generator,
    max_u_sq: float = 0.9,
    xi_range: float = 3.0,
) -> MetricSampleBatch:
    """Draw rank-one metrics I - u u^T with u = tanh(tau*xi), xi uniform,
    rejecting draws with |u|^2 > max_u_sq so the closed-form inverse is
    well-conditioned."""
    entries = np.empty((count, dim * (dim + 1) // 2))
    inverses = np.empty((count, dim, dim))
    eye = np.eye(dim)
    got = 0
    while got < count:
        xi = rng.uniform(-xi_range, xi_range, size=dim)
        u = np.tanh(tau * xi)
        gap = 1.0 - float(u @ u)
        if gap < 1.0 - max_u_sq:
            continue
        dense = eye - np.outer(u, u)
        entries[got] = decompose_batch(dense[None])[0]
        inverses[got] = eye + np.outer(u, u) / gap
        got += 1
    return MetricSampleBatch(dim, entries, inverses)


@dataclass
class InverseNetConfig:
    dim: int = 4
    tau: float = 1.0
    hidden: int = 64
    init_scale: float = 0.1
    train_samples: int = 1024
    heldout_samples: int = 256
    iterations: int = 20000
    learning_rate: float = 0.05
    eval_cadence: int = 500
    max_u_sq: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.dim < 2 or self.dim > 8:
            raise ContractViolationError("dim must lie in [2, 8]")
        if self.learning_rate <= 0 or self.iterations < 1:
            raise ContractViolationError("need positive learning rate and iterations")
        if not 0 < self.max_u_sq < 1:
            raise ContractViolationError("max_u_sq must lie in (0, 1)")
        if self.eval_cadence < 1:
            raise ContractViolationError("eval_cadence must be >= 1")

    @property
    def entry_dim(self) -> int:
        return self.dim * (self.dim + 1) // 2


@dataclass
class InverseNet:
    """One-hidden-layer tanh net from metric entries to candidate-inverse entries."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def forward(self, x: np.ndarray) -> np.ndarray:
        return np.tanh(x @ self.w1 + self.b1) @ self.w2 + self.b2

    def predict_matrices(self, entries: np.ndarray, dim: int) -> np.ndarray:
        return combine_batch(self.forward(entries), dim)

    def copy(self) -> "InverseNet":
        return InverseNet(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())


def _init_net(cfg: InverseNetConfig) -> InverseNet:
    rng = stream(cfg.seed, "inverse-net-init")
    d, h = cfg.entry_dim, cfg.hidden
    return InverseNet(
        cfg.init_scale * rng.standard_normal((d, h)),
        np.zeros(h),
        cfg.init_scale * rng.standard_normal((h, d)),
        np.zeros(d),
    )


def _batch_loss(g: np.ndarray, g_tilde: np.ndarray) -> float:
    residual = np.eye(g.shape[-1]) - g @ g_tilde
    return float(np.mean(np.sum(residual**2, axis=(1, 2))))


def _max_deviation(net: InverseNet, batch: MetricSampleBatch) -> float:
    pred = net.predict_matrices(batch.entries, batch.dim)
    return float(np.max(np.sqrt(np.sum((pred - batch.inverses) ** 2, axis=(1, 2)))))


@dataclass
class InverseReport:
    heldout_mean_loss: float
    max_deviation: float
    history: list  # (iteration, loss, heldout_loss, max_dev)
    aborted: bool


def train_inverse_approximator(
    train_batch: MetricSampleBatch,
    heldout_batch: MetricSampleBatch,
    cfg: InverseNetConfig,
) -> tuple[InverseNet, InverseReport]:
    """Plain full-batch gradient descent on the residual objective.

    Non-finite loss aborts and returns the last evaluated checkpoint.  The
    history records train loss, held-out loss, and the maximum Frobenius
    deviation from the closed-form inverses at every eval cadence.
    """
    if train_batch.dim != cfg.dim or heldout_batch.dim != cfg.dim:
        raise ContractViolationError("sample dimension disagrees with the config")
    net = _init_net(cfg)
    x = train_batch.entries
    g = train_batch.matrices()
    m = train_batch.count

    history = []
    checkpoint = net.copy()
    aborted = False

    def evaluate(iteration, train_loss):
        heldout_pred = net.predict_matrices(heldout_batch.entries, cfg.dim)
        heldout = _batch_loss(heldout_batch.matrices(), heldout_pred)
        history.append((iteration, train_loss, heldout, _max_deviation(net, heldout_batch)))

    for iteration in range(cfg.iterations + 1):
        hidden = np.tanh(x @ net.w1 + net.b1)
        y = hidden @ net.w2 + net.b2
        g_tilde = combine_batch(y, cfg.dim)
        residual = np.eye(cfg.dim) - g @ g_tilde
        train_loss = float(np.mean(np.sum(residual**2, axis=(1, 2))))

        if not np.isfinite(train_loss):
            aborted = True
            net = checkpoint
            break
        if iteration % cfg.eval_cadence == 0 or iteration == cfg.iterations:
            evaluate(iteration, train_loss)
            checkpoint = net.copy()
        if iteration == cfg.iterations:
            break

        # dL/d g_tilde = -(2/m) g residual as a free matrix; a strict-lower
        # entry feeds both triangles (gradients add), a diagonal entry only
        # itself (so halve after the symmetrizing sum).
        d_dense = (-2.0 / m) * np.einsum("sij,sjk->sik", g, residual)
        d_dense = d_dense + d_dense.swapaxes(1, 2)
        rows, cols = _entry_index_arrays(cfg.dim)
        dy = d_dense[:, rows, cols]
        dy[:, cfg.dim * (cfg.dim - 1) // 2 :] *= 0.5

        d_hidden = (dy @ net.w2.T) * (1.0 - hidden**2)
        net.w2 -= cfg.learning_rate * (hidden.T @ dy)
        net.b2 -= cfg.learning_rate * dy.sum(axis=0)
        net.w1 -= cfg.learning_rate * (x.T @ d_hidden)
        net.b1 -= cfg.learning_rate * d_hidden.sum(axis=0)

    final = history[-1]
    return net, InverseReport(final[2], final[3], history, aborted)
