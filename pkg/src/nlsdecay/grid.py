"""Uniform truncated grids on [-L, L]^d, finite-difference Laplacians and field containers.

Operators act on interior nodes only (homogeneous Dirichlet data is eliminated),
while fields are sampled on every node with zero boundary samples where that
matters.  Nodes are ordered with ``indexing="ij"`` and flattened in C order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import GridMismatchError, ValidationError

__all__ = [
    "Grid",
    "RealField",
    "Vec2Field",
    "CutoffSpec",
    "make_grid",
    "laplacian",
    "bracket_x",
    "cutoff_profile",
    "cutoff_field",
    "gradient",
]


@dataclass(frozen=True, eq=False)
class Grid:
    dim: int
    half_length: float
    points: int

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_length / (self.points - 1)

    @cached_property
    def axis(self) -> np.ndarray:
        # linspace guarantees exact endpoints
        return np.linspace(-self.half_length, self.half_length, self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def size(self) -> int:
        return self.points**self.dim

    @cached_property
    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``(size, dim)``."""
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @cached_property
    def radius(self) -> np.ndarray:
        return np.sqrt(np.sum(self.nodes**2, axis=1))

    @cached_property
    def interior_mask(self) -> np.ndarray:
        inner = np.zeros(self.points, dtype=bool)
        inner[1:-1] = True
        mesh = np.meshgrid(*([inner] * self.dim), indexing="ij")
        return np.logical_and.reduce([m.ravel() for m in mesh])

    @cached_property
    def interior_index(self) -> np.ndarray:
        return np.flatnonzero(self.interior_mask)

    @property
    def n_interior(self) -> int:
        return (self.points - 2) ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    def same_as(self, other: "Grid") -> bool:
        return (
            self.dim == other.dim
            and self.points == other.points
            and self.half_length == other.half_length
        )

    def check_same(self, other: "Grid") -> None:
        if not self.same_as(other):
            raise GridMismatchError(f"grid mismatch: {self} vs {other}")

    def to_interior(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values)[self.interior_index]

    def from_interior(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        out = np.zeros(self.size, dtype=values.dtype)
        out[self.interior_index] = values
        return out


def make_grid(d: int, L: float, N: int) -> Grid:
    if d not in (1, 2):
        raise ValidationError(f"dimension must be 1 or 2, got {d}")
    if not (isinstance(L, (int, float)) and math.isfinite(L)) or L <= 0:
        raise ValidationError(f"half-length must be finite and positive, got {L}")
    if int(N) != N or N < 8:
        raise ValidationError(f"points per axis must be an integer >= 8, got {N}")
    return Grid(int(d), float(L), int(N))


@dataclass(frozen=True, eq=False)
class RealField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.size,):
            raise ValidationError(
                f"field has {values.size} samples, grid has {self.grid.size} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise ValidationError("field samples must be finite")
        object.__setattr__(self, "values", values)

    @property
    def interior(self) -> np.ndarray:
        return self.grid.to_interior(self.values)


@dataclass(frozen=True, eq=False)
class Vec2Field:
    """A pair of complex samples per node."""

    grid: Grid
    first: np.ndarray
    second: np.ndarray

    def __post_init__(self):
        for name in ("first", "second"):
            arr = np.asarray(getattr(self, name), dtype=complex)
            if arr.shape != (self.grid.size,):
                raise ValidationError(
                    f"component {name} has {arr.size} samples, grid has {self.grid.size}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValidationError("field samples must be finite")
            object.__setattr__(self, name, arr)

    def to_vector(self) -> np.ndarray:
        """Stacked interior samples ``[first, second]`` of length ``2 n``."""
        g = self.grid
        return np.concatenate([g.to_interior(self.first), g.to_interior(self.second)])

    @classmethod
    def from_vector(cls, grid: Grid, vec: np.ndarray) -> "Vec2Field":
        vec = np.asarray(vec, dtype=complex)
        n = grid.n_interior
        if vec.shape != (2 * n,):
            raise ValidationError(f"expected vector of length {2 * n}, got {vec.shape}")
        return cls(grid, grid.from_interior(vec[:n]), grid.from_interior(vec[n:]))

    @property
    def amplitude(self) -> np.ndarray:
        return np.abs(self.first) + np.abs(self.second)

    def scaled(self, c: complex) -> "Vec2Field":
        return Vec2Field(self.grid, c * self.first, c * self.second)


def _second_difference_1d(m: int, h: float, order: int) -> sp.csr_matrix:
    # Toeplitz stencil on interior nodes; boundary samples are zero (Dirichlet).
    if order == 2:
        coeffs = {0: -2.0, 1: 1.0}
        scale = h**2
    elif order == 4:
        coeffs = {0: -30.0, 1: 16.0, 2: -1.0}
        scale = 12.0 * h**2
    else:
        raise ValidationError(f"order must be 2 or 4, got {order}")
    diags, offsets = [], []
    for k, c in coeffs.items():
        if k >= m:
            continue
        diags.append(np.full(m - k, c / scale))
        offsets.append(k)
        if k:
            diags.append(np.full(m - k, c / scale))
            offsets.append(-k)
    mat = sp.diags(diags, offsets, shape=(m, m), format="lil")
    if order == 4 and m >= 2:
        # ghost beyond the boundary node is the odd reflection -u_1 (Dirichlet data)
        mat[0, 0] = mat[m - 1, m - 1] = -29.0 / scale
    return mat.tocsr()


def laplacian(g: Grid, order: int = 2) -> sp.csr_matrix:
    """Discrete Laplacian on interior nodes with homogeneous Dirichlet truncation.

    Symmetric and negative semidefinite for both orders.  In two dimensions it is
    the Kronecker sum of the one-dimensional stencils.
    """
    m = g.points - 2
    d1 = _second_difference_1d(m, g.spacing, order)
    if g.dim == 1:
        return d1
    eye = sp.identity(m, format="csr")
    return (sp.kron(d1, eye) + sp.kron(eye, d1)).tocsr()


def bracket_x(g: Grid) -> RealField:
    """Japanese bracket sqrt(1 + |x|^2) at every node."""
    return RealField(g, np.sqrt(1.0 + g.radius**2))


@dataclass(frozen=True)
class CutoffSpec:
    """Smooth cut-off j_R(r) = j(r/R): 1 on [0, R], 0 on [2R, inf).

    The profile is j(t) = s(2 - t) / (s(2 - t) + s(t - 1)) with s(u) = exp(-1/u)
    for u > 0 and 0 otherwise, which is C-infinity with exact plateaus.
    """

    radius: float

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValidationError(f"cut-off radius must be positive, got {self.radius}")


def _smooth_step_kernel(u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u, dtype=float)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def cutoff_profile(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    a = _smooth_step_kernel(2.0 - t)
    b = _smooth_step_kernel(t - 1.0)
    return a / (a + b)


def cutoff_field(g: Grid, c: CutoffSpec) -> RealField:
    if 2.0 * c.radius > g.half_length:
        warnings.warn(
            f"cut-off support 2R={2 * c.radius} exceeds the half-length {g.half_length}",
            stacklevel=2,
        )
    return RealField(g, cutoff_profile(g.radius / c.radius))


def gradient(f: RealField | np.ndarray, g: Grid | None = None) -> np.ndarray:
    """Central-difference gradient of a nodal field, shape ``(size, dim)``.

    Second order in the interior, one-sided second order at the edges.
    """
    if isinstance(f, RealField):
        g, values = f.grid, f.values
    else:
        values = np.asarray(f)
    arr = values.reshape(g.shape)
    parts = np.gradient(arr, g.spacing, edge_order=2)
    if g.dim == 1:
        parts = [parts]
    return np.stack([p.ravel() for p in parts], axis=1)
