"""Finite-difference curvature operators on periodic metric grids.

All derivatives are second-order central differences with periodic wrap;
on a flat (constant) metric every operator returns exact zeros because the
stencils difference identical constants.

Index conventions (trailing axes, grid axes lead):

    christoffel: (k, i, j)      Gamma^k_ij, symmetric in (i, j)
    riemann:     (l, i, j, k)   R^l_ijk = d_i Gamma^l_jk - d_j Gamma^l_ik
                                 + Gamma^p_jk Gamma^l_ip - Gamma^p_ik Gamma^l_jp
    ricci:       (j, k)         R_jk = R^p_pjk, symmetrized before returning
    deturck:     (k,)           W^k = g^{pq} Gamma^k_pq (flat background)

Each operator accepts an optional grid ``point``; without it the whole
field is returned, with it the tensor at that grid index.
"""

import numpy as np

from .errors import DegenerateMetricError
from .grids import MetricGrid, SymTensorGrid, _eigvals_sym

__all__ = [
    "DEGENERACY_THRESHOLD",
    "christoffel",
    "riemann",
    "ricci",
    "scalar_curvature",
    "deturck_vector",
    "lichnerowicz_apply",
    "inverse_metric_field",
]

DEGENERACY_THRESHOLD = 1e-10


def _sl(axis: int, s: slice) -> tuple:
    return (slice(None),) * axis + (s,)


def _central_diff_into(field, axis: int, inv_2h: float, out) -> None:
    """(f[i+1] - f[i-1]) * inv_2h with periodic wrap, written into out.

    Slice-based instead of np.roll: on a constant field the subtractions of
    identical values give exact zeros, and no full-array temporaries are
    needed.
    """
    np.subtract(
        field[_sl(axis, slice(2, None))],
        field[_sl(axis, slice(None, -2))],
        out=out[_sl(axis, slice(1, -1))],
    )
    np.subtract(
        field[_sl(axis, slice(1, 2))],
        field[_sl(axis, slice(-1, None))],
        out=out[_sl(axis, slice(0, 1))],
    )
    np.subtract(
        field[_sl(axis, slice(0, 1))],
        field[_sl(axis, slice(-2, -1))],
        out=out[_sl(axis, slice(-1, None))],
    )
    out *= inv_2h


def _central_diff(field: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Second-order central difference along a periodic grid axis."""
    out = np.empty_like(field)
    _central_diff_into(field, axis, 0.5 / h, out)
    return out


def _grid_gradient(field: np.ndarray, spacing, n_grid_axes: int) -> np.ndarray:
    """Stack central differences along each grid axis as a new leading tensor axis.

    Input shape (*grid, *tensor) -> output (*grid, n, *tensor) with the
    derivative direction first among the tensor axes.
    """
    return np.stack(
        [_central_diff(field, a, spacing[a]) for a in range(n_grid_axes)],
        axis=n_grid_axes,
    )


def inverse_metric_field(g: MetricGrid, dense: np.ndarray | None = None) -> np.ndarray:
    """Pointwise inverse of g, with a degeneracy guard on the smallest eigenvalue."""
    if dense is None:
        dense = g.dense_full()
    smallest = np.min(_eigvals_sym(dense, g.dim), axis=-1)
    worst = float(np.min(smallest))
    if worst < DEGENERACY_THRESHOLD:
        raise DegenerateMetricError(
            f"metric eigenvalue {worst:.3e} below {DEGENERACY_THRESHOLD:.0e}"
        )
    if g.dim == 2:
        det = dense[..., 0, 0] * dense[..., 1, 1] - dense[..., 0, 1] ** 2
        inv = np.empty_like(dense)
        inv[..., 0, 0] = dense[..., 1, 1]
        inv[..., 1, 1] = dense[..., 0, 0]
        inv[..., 0, 1] = -dense[..., 0, 1]
        inv[..., 1, 0] = -dense[..., 1, 0]
        return inv / det[..., None, None]
    return np.linalg.inv(dense)


def _christoffel_field(g: MetricGrid, dense, ginv) -> np.ndarray:
    n = g.dim
    dg = _grid_gradient(dense, g.spacing, n)  # (*grid, a, i, j) = d_a g_ij
    # S[..., i, j, l] = d_i g_jl + d_j g_il - d_l g_ij
    s = dg + dg.swapaxes(-3, -2)
    s -= np.moveaxis(dg, -3, -1)
    # contract over l by batched matmul (ginv is symmetric), rows = (i, j)
    half = 0.5 * (s.reshape(s.shape[:-3] + (n * n, n)) @ ginv)
    gam = np.moveaxis(half.reshape(s.shape[:-3] + (n, n, n)), -1, -3)
    return np.ascontiguousarray(gam)


def _riemann_field(g: MetricGrid, gamma) -> np.ndarray:
    n = g.dim
    dgamma = _grid_gradient(gamma, g.spacing, n)  # (*grid, a, k, i, j)
    lead = gamma.shape[:-3]
    # quad[..., l, i, j, k] = Gamma^p_jk Gamma^l_ip, rows (l, i) x cols (j, k)
    quad = gamma.reshape(lead + (n * n, n)) @ gamma.reshape(lead + (n, n * n))
    # half[..., l, i, j, k] = d_i Gamma^l_jk + quad
    half = quad.reshape(lead + (n, n, n, n)) + dgamma.swapaxes(-4, -3)
    return half - half.swapaxes(-3, -2)


def _ricci_from_riemann(riem) -> np.ndarray:
    ric = np.einsum("...ppjk->...jk", riem)
    return 0.5 * (ric + ric.swapaxes(-2, -1))


def _at_point(field: np.ndarray, g: MetricGrid, point):
    if point is None:
        return field
    return field[tuple(point)]


def christoffel(g: MetricGrid, point=None) -> np.ndarray:
    """Gamma^k_ij = (1/2) g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)."""
    dense = g.dense_full()
    ginv = inverse_metric_field(g, dense)
    return _at_point(_christoffel_field(g, dense, ginv), g, point)


def riemann(g: MetricGrid, point=None) -> np.ndarray:
    """Curvature tensor R^l_ijk with central-difference outer derivatives."""
    dense = g.dense_full()
    ginv = inverse_metric_field(g, dense)
    gamma = _christoffel_field(g, dense, ginv)
    return _at_point(_riemann_field(g, gamma), g, point)


def ricci(g: MetricGrid, point=None) -> np.ndarray:
    """R_jk = R^p_pjk, explicitly symmetrized."""
    return _at_point(_ricci_from_riemann(riemann(g)), g, point)


def scalar_curvature(g: MetricGrid, point=None) -> np.ndarray:
    """R = g^{jk} R_jk."""
    dense = g.dense_full()
    ginv = inverse_metric_field(g, dense)
    gamma = _christoffel_field(g, dense, ginv)
    ric = _ricci_from_riemann(_riemann_field(g, gamma))
    scal = np.einsum("...jk,...jk->...", ginv, ric)
    return _at_point(scal, g, point)


def deturck_vector(g: MetricGrid, point=None) -> np.ndarray:
    """W^k = g^{pq} Gamma^k_pq against the flat Cartesian background.

    The background Christoffels vanish, so the full-metric contraction is
    the whole vector field.
    """
    dense = g.dense_full()
    ginv = inverse_metric_field(g, dense)
    gamma = _christoffel_field(g, dense, ginv)
    w = np.einsum("...pq,...kpq->...k", ginv, gamma)
    return _at_point(w, g, point)


def lichnerowicz_apply(d: SymTensorGrid) -> SymTensorGrid:
    """Componentwise discrete Laplacian (5/7-point stencil) on a flat background.

    On the flat background the curvature term of the stability operator
    vanishes, leaving the plain Laplacian; its quadratic form is
    non-positive on every field, the discrete face of linear stability.
    """
    vals = d.values
    out = np.zeros_like(vals)
    for a in range(d.dim):
        h2 = d.spacing[a] ** 2
        out += (np.roll(vals, -1, axis=a) - 2.0 * vals + np.roll(vals, 1, axis=a)) / h2
    return SymTensorGrid(d.dim, d.spacing, out)
