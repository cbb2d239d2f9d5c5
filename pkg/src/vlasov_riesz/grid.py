r"""Truncated periodic phase-space grid and spectral transforms.

The kinetic density f(t, x, v) lives on the box [-Lx, Lx)^d x [-Lv, Lv)^d
with periodic boundary conditions in both x and v.  Per-axis wavenumbers are
the angular frequencies k_m = pi*m/L, so a field a(x) is expanded as

    a(x) = (1/(2L)^d) * sum_k  a_hat(k) exp(i k.x),
    a_hat(k) = sum_j a(x_j) exp(-i k.x_j) dx^d.

With this normalization Parseval reads  sum |a|^2 dx^d = sum |a_hat|^2 / (2L)^d.

Storage is a dense row-major array over (x-index, v-index): a field has shape
(nx,)*d + (nv,)*d, which flattens to the (nx^d x nv^d) matrix layout.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

DEFAULT_NEG_TOL = 1e-12


class GridShapeError(ValueError):
    """Array shape does not match the grid it is used with."""


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class PhaseGrid:
    """Discretized periodic phase-space domain.

    Parameters
    ----------
    d:
        Spatial dimension.  Evolution supports d in {1, 2}; d = 3 grids are
        allowed for static functionals only.
    Lx, Lv:
        Half-widths of the spatial and velocity boxes.
    nx, nv:
        Points per axis; powers of two, at least 8.
    """

    d: int
    Lx: float
    Lv: float
    nx: int
    nv: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"d must be 1, 2 or 3, got {self.d}")
        if not (self.Lx > 0 and self.Lv > 0):
            raise ValueError("box half-widths Lx, Lv must be positive")
        for name, n in (("nx", self.nx), ("nv", self.nv)):
            if n < 8 or not _is_power_of_two(n):
                raise ValueError(f"{name} must be a power of two >= 8, got {n}")

    # -- geometry -----------------------------------------------------------

    @property
    def dx(self) -> float:
        return 2.0 * self.Lx / self.nx

    @property
    def dv(self) -> float:
        return 2.0 * self.Lv / self.nv

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nx,) * self.d + (self.nv,) * self.d

    @property
    def spatial_shape(self) -> tuple[int, ...]:
        return (self.nx,) * self.d

    @property
    def cell_volume(self) -> float:
        """Phase-space quadrature weight dx^d * dv^d of one cell."""
        return self.dx**self.d * self.dv**self.d

    @property
    def x_cell_volume(self) -> float:
        return self.dx**self.d

    @property
    def v_cell_volume(self) -> float:
        return self.dv**self.d

    @cached_property
    def x1d(self) -> np.ndarray:
        return -self.Lx + self.dx * np.arange(self.nx)

    @cached_property
    def v1d(self) -> np.ndarray:
        return -self.Lv + self.dv * np.arange(self.nv)

    @cached_property
    def kx1d(self) -> np.ndarray:
        """Angular wavenumbers pi*m/Lx per spatial axis, FFT ordering."""
        return 2.0 * np.pi * np.fft.fftfreq(self.nx, d=self.dx)

    @cached_property
    def kv1d(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.nv, d=self.dv)

    def x_axis(self, j: int, *, spatial_only: bool = False) -> np.ndarray:
        """Coordinate x_j broadcastable over a field (or spatial) array."""
        ndim = self.d if spatial_only else 2 * self.d
        shape = [1] * ndim
        shape[j] = self.nx
        return self.x1d.reshape(shape)

    def v_axis(self, j: int) -> np.ndarray:
        """Coordinate v_j broadcastable over a field array."""
        shape = [1] * (2 * self.d)
        shape[self.d + j] = self.nv
        return self.v1d.reshape(shape)

    @cached_property
    def x_sq(self) -> np.ndarray:
        """|x|^2 broadcastable over a field array."""
        out = 0.0
        for j in range(self.d):
            out = out + self.x_axis(j) ** 2
        return out

    @cached_property
    def v_sq(self) -> np.ndarray:
        out = 0.0
        for j in range(self.d):
            out = out + self.v_axis(j) ** 2
        return out

    @cached_property
    def kx_sq(self) -> np.ndarray:
        """|k|^2 on the spatial spectral grid, shape (nx,)*d."""
        out = 0.0
        for j in range(self.d):
            shape = [1] * self.d
            shape[j] = self.nx
            out = out + self.kx1d.reshape(shape) ** 2
        return out

    @cached_property
    def kv_sq(self) -> np.ndarray:
        out = 0.0
        for j in range(self.d):
            shape = [1] * self.d
            shape[j] = self.nv
            out = out + self.kv1d.reshape(shape) ** 2
        return out

    # -- transforms ----------------------------------------------------------

    def _x_axes(self, arr: np.ndarray) -> tuple[int, ...]:
        if arr.shape[: self.d] != (self.nx,) * self.d:
            raise GridShapeError(
                f"leading axes {arr.shape[:self.d]} do not match spatial grid "
                f"{(self.nx,) * self.d}"
            )
        return tuple(range(self.d))

    def _v_axes(self, arr: np.ndarray) -> tuple[int, ...]:
        if arr.shape[arr.ndim - self.d :] != (self.nv,) * self.d:
            raise GridShapeError(
                f"trailing axes {arr.shape[arr.ndim - self.d:]} do not match "
                f"velocity grid {(self.nv,) * self.d}"
            )
        return tuple(range(arr.ndim - self.d, arr.ndim))

    def fft_x(self, arr: np.ndarray) -> np.ndarray:
        """Raw FFT over the spatial axes (no quadrature normalization)."""
        return np.fft.fftn(arr, axes=self._x_axes(arr))

    def ifft_x(self, arr: np.ndarray) -> np.ndarray:
        return np.fft.ifftn(arr, axes=self._x_axes(arr))

    def fft_v(self, arr: np.ndarray) -> np.ndarray:
        return np.fft.fftn(arr, axes=self._v_axes(arr))

    def ifft_v(self, arr: np.ndarray) -> np.ndarray:
        return np.fft.ifftn(arr, axes=self._v_axes(arr))

    def spectral_forward_x(self, arr: np.ndarray) -> np.ndarray:
        """Quadrature-normalized forward transform in x (see module docs)."""
        return self.fft_x(arr) * self.x_cell_volume

    def spectral_inverse_x(self, arr: np.ndarray) -> np.ndarray:
        return self.ifft_x(arr) / self.x_cell_volume

    def spectral_forward_v(self, arr: np.ndarray) -> np.ndarray:
        return self.fft_v(arr) * self.v_cell_volume

    def spectral_inverse_v(self, arr: np.ndarray) -> np.ndarray:
        return self.ifft_v(arr) / self.v_cell_volume


@dataclass
class DistributionField:
    """Sampled phase-space density f(x, v) on a PhaseGrid at one time."""

    grid: PhaseGrid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise GridShapeError(
                f"values shape {self.values.shape} does not match grid shape "
                f"{self.grid.shape}"
            )

    def copy(self) -> "DistributionField":
        return DistributionField(self.grid, self.values.copy(), self.time)

    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def as_matrix(self) -> np.ndarray:
        """(nx^d x nv^d) row-major view of the values."""
        g = self.grid
        return self.values.reshape(g.nx**g.d, g.nv**g.d)


def zero_field(grid: PhaseGrid, time: float = 0.0) -> DistributionField:
    return DistributionField(grid, np.zeros(grid.shape), time)


def integrate_v(f: DistributionField) -> np.ndarray:
    """Spatial density rho(x) = sum_v f(x, v) dv^d on the spatial grid."""
    g = f.grid
    v_axes = tuple(range(g.d, 2 * g.d))
    return f.values.sum(axis=v_axes) * g.v_cell_volume


def integrate_x(f: DistributionField) -> np.ndarray:
    """Velocity marginal sum_x f(x, v) dx^d on the velocity grid."""
    g = f.grid
    return f.values.sum(axis=tuple(range(g.d))) * g.x_cell_volume


def clip_negatives(f: DistributionField, neg_tol: float = DEFAULT_NEG_TOL) -> int:
    """Clip spectral-interpolation negatives smaller than neg_tol to zero.

    Values below -neg_tol are left in place; their count is returned so the
    caller can report them as a diagnostic.
    """
    vals = f.values
    small = (vals < 0.0) & (vals >= -neg_tol)
    if small.any():
        vals[small] = 0.0
    return int(np.count_nonzero(vals < -neg_tol))


def boundary_shell_mask(grid: PhaseGrid, frac: float = 0.1) -> np.ndarray:
    """Cells whose x or v coordinate lies in the outermost ``frac`` shell."""
    mask = np.zeros(grid.shape, dtype=bool)
    cut_x = (1.0 - frac) * grid.Lx
    cut_v = (1.0 - frac) * grid.Lv
    for j in range(grid.d):
        mask |= np.abs(grid.x_axis(j)) >= cut_x
        mask |= np.abs(grid.v_axis(j)) >= cut_v
    return mask


def boundary_mass_fraction(f: DistributionField, frac: float = 0.1) -> float:
    """Mass fraction in the outermost shell; flags velocity/space truncation."""
    total = f.values.sum()
    if total <= 0.0:
        return 0.0
    shell = f.values[boundary_shell_mask(f.grid, frac)].sum()
    return float(shell / total)
