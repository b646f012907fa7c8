"""Rank-one tanh geometry on parameter space.

The coordinate space R^n carries the separable convex potential

    phi(xi) = sum_i (1/tau^2) * log cosh(tau * xi_i)

whose Bregman divergence between two points has the closed form implemented
by :func:`divergence`.  Its second-order expansion is the rank-one metric

    g(xi) = I - u u^T,   u = tanh(tau * xi),

which stays within O(|u|^2) of the flat metric.  Because the metric is a
rank-one update of the identity, the inverse needed for natural-gradient
preconditioning is available in closed form (Sherman-Morrison), and a
cheaper inverse-free surrogate I + u u^T is accurate to fourth order in |u|.

Everything in this module is a pure function of its arguments; values are
immutable after construction.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, NotPositiveDefiniteError

__all__ = [
    "CoordPoint",
    "RankOneMetric",
    "DomainGuard",
    "potential",
    "divergence",
    "metric_at",
    "metric_apply",
    "natural_grad_exact",
    "natural_grad_weak",
    "is_strictly_diag_dominant",
    "ball_radius",
    "hessian_fd",
]


@dataclass(frozen=True)
class CoordPoint:
    """A point xi in R^n together with the metric scale parameter tau > 0."""

    xi: np.ndarray
    tau: float

    def __post_init__(self):
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float)).copy()
        if xi.ndim != 1 or xi.size < 1:
            raise ContractViolationError("xi must be a vector of length >= 1")
        if not np.all(np.isfinite(xi)):
            raise ContractViolationError("xi entries must be finite")
        if not (self.tau > 0.0 and np.isfinite(self.tau)):
            raise ContractViolationError("tau must be a positive finite real")
        xi.flags.writeable = False
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def dim(self) -> int:
        return self.xi.size


@dataclass(frozen=True)
class RankOneMetric:
    """The metric I - u u^T with u = tanh(tau*xi), stored by its defining vector u.

    Eigenvalues are exactly {1 (multiplicity n-1), 1 - |u|^2}; the matrix is
    positive-definite iff |u|_2 < 1.  Each |u_i| < 1 by construction, but
    |u|_2 can exceed 1 for n >= 2.
    """

    u: np.ndarray

    def __post_init__(self):
        u = np.atleast_1d(np.asarray(self.u, dtype=float)).copy()
        if np.any(np.abs(u) >= 1.0):
            raise ContractViolationError("|u_i| < 1 required (tanh range)")
        u.flags.writeable = False
        object.__setattr__(self, "u", u)

    @property
    def dim(self) -> int:
        return self.u.size

    def dense(self) -> np.ndarray:
        """Materialize the full n x n matrix (for oracles and small-n work)."""
        return np.eye(self.dim) - np.outer(self.u, self.u)

    def eigenvalues(self) -> np.ndarray:
        """Closed-form spectrum, ascending: [1 - |u|^2, 1, ..., 1]."""
        lam = np.ones(self.dim)
        lam[0] = 1.0 - float(self.u @ self.u)
        return np.sort(lam)

    @property
    def is_positive_definite(self) -> bool:
        return float(self.u @ self.u) < 1.0


@dataclass(frozen=True)
class DomainGuard:
    """Exact inversion is only attempted while 1 - |u|^2 >= eps_guard."""

    eps_guard: float = 1e-6

    def __post_init__(self):
        if not self.eps_guard > 0.0:
            raise ContractViolationError("eps_guard must be positive")


def _log_cosh(x: np.ndarray) -> np.ndarray:
    # |x| + log1p(exp(-2|x|)) - log 2; naive cosh overflows near x ~ 710.
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - np.log(2.0)


def potential(p: CoordPoint) -> float:
    """phi(xi) = sum_i (1/tau^2) log cosh(tau xi_i), overflow-safe."""
    return float(np.sum(_log_cosh(p.tau * p.xi)) / p.tau**2)


def _check_compatible(p_prime: CoordPoint, p: CoordPoint) -> None:
    if p_prime.dim != p.dim:
        raise ContractViolationError(
            f"dimension mismatch: {p_prime.dim} vs {p.dim}"
        )
    if p_prime.tau != p.tau:
        raise ContractViolationError(f"tau mismatch: {p_prime.tau} vs {p.tau}")


def divergence(p_prime: CoordPoint, p: CoordPoint) -> float:
    """Bregman divergence of the log-cosh potential between xi' and xi.

    D[xi' : xi] = sum_i [ (1/tau^2) log(cosh(tau xi'_i)/cosh(tau xi_i))
                          - (1/tau)(xi'_i - xi_i) tanh(tau xi_i) ].

    Nonnegative, and zero exactly at xi' = xi.
    """
    _check_compatible(p_prime, p)
    tau = p.tau
    log_ratio = _log_cosh(tau * p_prime.xi) - _log_cosh(tau * p.xi)
    tangent = (p_prime.xi - p.xi) * np.tanh(tau * p.xi)
    return float(np.sum(log_ratio / tau**2 - tangent / tau))


def metric_at(p: CoordPoint) -> RankOneMetric:
    """Metric I - u u^T induced at p, with u = tanh(tau * xi)."""
    return RankOneMetric(np.tanh(p.tau * p.xi))


def metric_apply(m: RankOneMetric, v: np.ndarray) -> np.ndarray:
    """(I - u u^T) v = v - u (u.v), in O(n) without densifying."""
    v = np.asarray(v, dtype=float)
    if v.shape != (m.dim,):
        raise ContractViolationError(f"vector length {v.shape} != ({m.dim},)")
    return v - m.u * float(m.u @ v)


def natural_grad_exact(
    p: CoordPoint, grad: np.ndarray, guard: DomainGuard = DomainGuard()
) -> np.ndarray:
    """(I - u u^T)^{-1} grad via the rank-one inversion identity.

    (I - u u^T)^{-1} = I + u u^T / (1 - |u|^2), valid while the metric is
    safely positive-definite; outside the guard the point has left the
    near-flat regime and NotPositiveDefiniteError is raised.
    """
    grad = np.asarray(grad, dtype=float)
    if grad.shape != (p.dim,):
        raise ContractViolationError(f"gradient length {grad.shape} != ({p.dim},)")
    u = np.tanh(p.tau * p.xi)
    gap = 1.0 - float(u @ u)
    if gap < guard.eps_guard:
        raise NotPositiveDefiniteError(
            f"1 - |u|^2 = {gap:.3e} below guard {guard.eps_guard:.3e}"
        )
    return grad + u * (float(u @ grad) / gap)


def natural_grad_weak(p: CoordPoint, grad: np.ndarray) -> np.ndarray:
    """Inverse-free preconditioning (I + u u^T) grad; total on all valid points.

    Differs from the exact transform by |u|^4-order terms, so it stays usable
    even where I - u u^T is indefinite.
    """
    grad = np.asarray(grad, dtype=float)
    if grad.shape != (p.dim,):
        raise ContractViolationError(f"gradient length {grad.shape} != ({p.dim},)")
    u = np.tanh(p.tau * p.xi)
    return grad + u * float(u @ grad)


def is_strictly_diag_dominant(m: RankOneMetric) -> bool:
    """True iff |1 - u_i^2| > sum_{j != i} |u_i u_j| for every row i."""
    au = np.abs(m.u)
    off = au * (np.sum(au) - au)  # row i: |u_i| * sum_{j != i} |u_j|
    return bool(np.all(np.abs(1.0 - m.u**2) > off))


def ball_radius(m: RankOneMetric, dxi: np.ndarray) -> float:
    """Length sqrt(dxi^T (I - u u^T) dxi) of a displacement under the metric.

    Callers wanting a calibrated radius should normalize dxi to unit
    Euclidean length first (the flat metric then gives exactly 1).
    """
    dxi = np.asarray(dxi, dtype=float)
    if dxi.shape != (m.dim,):
        raise ContractViolationError(f"probe length {dxi.shape} != ({m.dim},)")
    if not np.any(dxi):
        raise ContractViolationError("probe direction must be nonzero")
    quad = float(dxi @ metric_apply(m, dxi))
    if quad < 0.0:
        raise NotPositiveDefiniteError(
            f"quadratic form is negative ({quad:.3e}); metric is indefinite here"
        )
    return float(np.sqrt(quad))


def hessian_fd(p: CoordPoint, step: float = 1e-4) -> np.ndarray:
    """Central finite-difference Hessian of xi' -> divergence(xi', p) at xi' = p.

    Diagnostic only: the analytic Hessian of the separable potential is
    diag(1 - tanh^2(tau xi_i)), which this reproduces to O(step^2).
    """
    if not step > 0.0:
        raise ContractViolationError("step must be positive")
    n = p.dim
    base = np.asarray(p.xi)

    def d(delta):
        return divergence(CoordPoint(base + delta, p.tau), p)

    h = np.empty((n, n))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = step
        h[i, i] = (d(ei) + d(-ei)) / step**2  # divergence(p, p) = 0 exactly
        for j in range(i):
            ej = np.zeros(n)
            ej[j] = step
            h[i, j] = (d(ei + ej) - d(ei - ej) - d(-ei + ej) + d(-ei - ej)) / (
                4.0 * step**2
            )
            h[j, i] = h[i, j]
    return h
