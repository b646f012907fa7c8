"""Periodic lattices of symmetric 2-tensors.

A symmetric tensor field on an n-dimensional periodic grid (n in {2, 3})
stores only the lower triangle in row-major order, so symmetry is
structural.  Component order is fixed once and for all so CSV dumps are
reproducible bit-exact:

    n = 2:  (0,0) (1,0) (1,1)
    n = 3:  (0,0) (1,0) (1,1) (2,0) (2,1) (2,2)

Pointwise Frobenius norms weight off-diagonal components twice, matching
the norm of the densified matrix.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError

__all__ = [
    "SymTensorGrid",
    "MetricGrid",
    "component_count",
    "component_indices",
    "dump_grid_csv",
]


def component_count(dim: int) -> int:
    return dim * (dim + 1) // 2


def component_indices(dim: int) -> list[tuple[int, int]]:
    """Row-major lower-triangle (i, j) pairs, i >= j."""
    return [(i, j) for i in range(dim) for j in range(i + 1)]


def _component_weights(dim: int) -> np.ndarray:
    """Frobenius weights per stored component: 1 on diagonal, 2 off."""
    return np.array([1.0 if i == j else 2.0 for i, j in component_indices(dim)])


@dataclass
class SymTensorGrid:
    """A field of symmetric 2-tensors over a periodic grid.

    values has shape grid_shape + (dim*(dim+1)//2,), last axis in the fixed
    lower-triangle order above.
    """

    dim: int
    spacing: tuple[float, ...]
    values: np.ndarray

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ContractViolationError("manifold dimension must be 2 or 3")
        self.spacing = tuple(float(h) for h in self.spacing)
        if len(self.spacing) != self.dim or any(h <= 0 for h in self.spacing):
            raise ContractViolationError("need one positive spacing per axis")
        self.values = np.asarray(self.values, dtype=float)
        expect = component_count(self.dim)
        if self.values.ndim != self.dim + 1 or self.values.shape[-1] != expect:
            raise ContractViolationError(
                f"values must have shape grid_shape + ({expect},)"
            )
        if not np.all(np.isfinite(self.values)):
            raise ContractViolationError("tensor values must be finite")

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return self.values.shape[:-1]

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @classmethod
    def zeros(cls, dim, grid_shape, spacing) -> "SymTensorGrid":
        shape = tuple(grid_shape) + (component_count(dim),)
        return cls(dim, tuple(spacing), np.zeros(shape))

    @classmethod
    def from_dense(cls, dense: np.ndarray, spacing) -> "SymTensorGrid":
        """Pack a grid of dense symmetric matrices (..., n, n) into components."""
        dim = dense.shape[-1]
        idx = component_indices(dim)
        comps = np.stack([dense[..., i, j] for i, j in idx], axis=-1)
        return cls(dim, tuple(spacing), comps)

    def to_dense(self) -> np.ndarray:
        """Densify to shape grid_shape + (dim, dim); exactly symmetric."""
        n = self.dim
        out = np.empty(self.grid_shape + (n, n))
        for k, (i, j) in enumerate(component_indices(n)):
            out[..., i, j] = self.values[..., k]
            out[..., j, i] = self.values[..., k]
        return out

    def frobenius_sq(self) -> np.ndarray:
        """Pointwise squared Frobenius norm (off-diagonals counted twice)."""
        return (self.values * self.values) @ _component_weights(self.dim)

    def copy(self) -> "SymTensorGrid":
        return SymTensorGrid(self.dim, self.spacing, self.values.copy())


@dataclass
class MetricGrid:
    """Full metric g = identity + perturbation, stored by its perturbation."""

    perturbation: SymTensorGrid

    @property
    def dim(self) -> int:
        return self.perturbation.dim

    @property
    def spacing(self) -> tuple[float, ...]:
        return self.perturbation.spacing

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return self.perturbation.grid_shape

    @classmethod
    def flat(cls, dim, grid_shape, spacing) -> "MetricGrid":
        return cls(SymTensorGrid.zeros(dim, grid_shape, spacing))

    def dense_full(self) -> np.ndarray:
        """delta + gamma at every point, shape grid_shape + (n, n)."""
        g = self.perturbation.to_dense()
        n = self.dim
        idx = np.arange(n)
        g[..., idx, idx] += 1.0
        return g

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue of g over all grid points."""
        return float(np.min(_eigvals_sym(self.dense_full(), self.dim)))

    def is_positive_definite(self, threshold: float = 0.0) -> bool:
        return self.min_eigenvalue() > threshold


def _eigvals_sym(dense: np.ndarray, dim: int) -> np.ndarray:
    """Eigenvalues of a grid of symmetric matrices; closed form for 2x2."""
    if dim == 2:
        a = dense[..., 0, 0]
        b = dense[..., 0, 1]
        c = dense[..., 1, 1]
        half_tr = 0.5 * (a + c)
        rad = np.sqrt(0.25 * (a - c) ** 2 + b**2)
        return np.stack([half_tr - rad, half_tr + rad], axis=-1)
    return np.linalg.eigvalsh(dense)


def dump_grid_csv(grid: SymTensorGrid, fh) -> None:
    """One row per grid point: flat index, coordinates, components in storage order.

    Numbers are written with shortest round-trip formatting so dumps are
    byte-reproducible.
    """
    n = grid.dim
    names = [f"c{i}{j}" for i, j in component_indices(n)]
    header = ["index"] + [f"x{a}" for a in range(n)] + names
    fh.write(",".join(header) + "\n")
    shape = grid.grid_shape
    flat_vals = grid.values.reshape(-1, grid.values.shape[-1])
    for flat_index in range(flat_vals.shape[0]):
        coords = np.unravel_index(flat_index, shape)
        xs = [repr(float(c * h)) for c, h in zip(coords, grid.spacing)]
        comps = [repr(float(v)) for v in flat_vals[flat_index]]
        fh.write(",".join([str(flat_index)] + xs + comps) + "\n")
