"""Uniform grids, gridded fields, and the linear convolution engine.

The computational domain is the symmetric box [-L, L]^d sampled at n
(a power of two) nodes per axis with spacing h = 2L/n; node i sits at
x_i = -L + i h, so the origin is always a node (index n/2).  Convolutions
are linear (zero-padded), never circular: periodic wrap-around would
teleport mass across the box and fake front acceleration.

Two convolution paths are provided: a transform-based one used everywhere,
and an O(n^(2d)) direct summation that serves as its oracle on small grids.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .errors import DirectSumTooLargeError, GridMismatchError, InvalidGridError

_FFT_WORKERS = 2  # matches the small-host CPU budget; deterministic output

# direct convolution cost guard: at most 2^14 output nodes
_DIRECT_MAX_NODES = 2 ** 14


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [-L, L]^dim with n nodes per axis (power of two)."""

    dim: int
    n: int
    L: float

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def center_index(self) -> int:
        return self.n // 2

    def axis(self) -> np.ndarray:
        """Node coordinates along one axis."""
        return -self.L + self.h * np.arange(self.n)

    def meshgrid(self):
        """Coordinate arrays, one per axis (indexing='ij' in 2D)."""
        ax = self.axis()
        if self.dim == 1:
            return (ax,)
        return np.meshgrid(ax, ax, indexing="ij")

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim


@dataclass
class Field:
    """Values sampled at the nodes of a grid."""

    grid: Grid
    values: np.ndarray

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def l1(self) -> float:
        """Discrete integral h^d * sum(values)."""
        return float(self.grid.cell_volume * np.sum(self.values))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def make_grid(dim: int, L: float, n: int) -> Grid:
    """Validated grid constructor; n must be a power of two >= 16."""
    if dim not in (1, 2):
        raise InvalidGridError(f"dim must be 1 or 2, got {dim}")
    if not (L > 0):
        raise InvalidGridError(f"half-width must be positive, got {L}")
    if n < 16 or (n & (n - 1)) != 0:
        raise InvalidGridError(f"n must be a power of two >= 16, got {n}")
    return Grid(dim=dim, n=n, L=float(L))


def sample_field(grid: Grid, generator) -> Field:
    """Evaluate ``generator`` at the grid nodes.

    In 1D the generator receives the coordinate array; in 2D it receives the
    two meshgrid coordinate arrays.
    """
    coords = grid.meshgrid()
    vals = np.asarray(generator(*coords), dtype=float)
    if vals.shape != grid.shape:
        vals = np.broadcast_to(vals, grid.shape).astype(float)
    return Field(grid, np.array(vals, dtype=float))


def sample_orthant_field(grid: Grid, radial_fn) -> Field:
    """Field u(x) = integral over {y >= x componentwise} of q(|y|) dy, on-grid.

    Computed by cumulative trapezoid sums from the far (+L, ..., +L) corner;
    mass beyond the box is not included.
    """
    coords = grid.meshgrid()
    r = np.sqrt(sum(c ** 2 for c in coords))
    q = np.asarray(radial_fn(r), dtype=float)
    h = grid.h
    out = q
    for axis in range(grid.dim):
        flipped = np.flip(out, axis=axis)
        acc = np.cumsum(flipped, axis=axis) * h
        # trapezoid correction: half-weight the two endpoints of each prefix
        first = np.take(flipped, [0], axis=axis)
        acc = acc - 0.5 * h * (first + flipped)
        out = np.flip(acc, axis=axis)
    return Field(grid, out)


def kernel_field(kernel, grid: Grid, renormalize: bool = True) -> Field:
    """Sample a kernel density at the grid nodes.

    Cells near the origin are cell-averaged (the density can be strongly
    peaked there; a point sample would overweight the central cell and, after
    renormalization, deflate the whole tail).  Away from the peak the density
    varies on the scale of the position itself and point values suffice.
    With ``renormalize`` the samples are scaled so the discrete mass
    h^d * sum equals one exactly, which keeps the discrete evolution's
    constant states exact.
    """
    coords = grid.meshgrid()
    vals = np.asarray(kernel.density(*coords), dtype=float)
    h = grid.h
    c = grid.center_index
    if grid.dim == 1:
        reach = min(64, c - 1)
        offs = np.linspace(-0.5 * h, 0.5 * h, 33)
        for j in range(-reach, reach + 1):
            x = j * h
            vals[c + j] = float(np.mean(kernel.density(x + offs)))
    else:
        reach = min(16, c - 1)
        q = np.linspace(-0.5 * h, 0.5 * h, 17)
        QX, QY = np.meshgrid(q, q, indexing="ij")
        for j1 in range(-reach, reach + 1):
            for j2 in range(-reach, reach + 1):
                x, y = j1 * h, j2 * h
                vals[c + j1, c + j2] = float(np.mean(kernel.density(x + QX, y + QY)))
    if renormalize:
        mass = grid.cell_volume * float(np.sum(vals))
        if mass <= 0:
            raise InvalidGridError("kernel sampled to zero mass on this grid")
        vals = vals / mass
    return Field(grid, vals)


class ConvolutionEngine:
    """Zero-padded linear convolution with a fixed kernel field.

    Precomputes the padded kernel transform once; ``apply`` then costs one
    forward and one inverse transform.  Not thread-safe across simultaneous
    ``apply`` calls on the same instance (scratch transforms are per-call,
    but the cached kernel spectrum is shared read-only, which is safe).
    """

    def __init__(self, kernel_field: Field):
        grid = kernel_field.grid
        self.grid = grid
        n = grid.n
        pad = (2 * n,) * grid.dim
        kpad = np.zeros(pad)
        if grid.dim == 1:
            kpad[:n] = kernel_field.values
        else:
            kpad[:n, :n] = kernel_field.values
        self._pad = pad
        self._khat = sfft.rfftn(kpad, workers=_FFT_WORKERS)

    def apply(self, values: np.ndarray) -> np.ndarray:
        grid = self.grid
        n = grid.n
        upad = np.zeros(self._pad)
        if grid.dim == 1:
            upad[:n] = values
        else:
            upad[:n, :n] = values
        out = sfft.irfftn(
            sfft.rfftn(upad, workers=_FFT_WORKERS) * self._khat,
            s=self._pad,
            workers=_FFT_WORKERS,
        )
        c = grid.center_index
        if grid.dim == 1:
            out = out[c : c + n]
        else:
            out = out[c : c + n, c : c + n]
        return out * grid.cell_volume


def convolve(kernel_field: Field, field: Field) -> Field:
    """Linear (zero-padded, non-circular) convolution scaled by h^d."""
    if kernel_field.grid != field.grid:
        raise GridMismatchError("kernel and field live on different grids")
    engine = ConvolutionEngine(kernel_field)
    return Field(field.grid, engine.apply(field.values))


def convolve_direct(kernel_field: Field, field: Field) -> Field:
    """Direct-sum convolution oracle, O(n^(2d)); cost-guarded to n^dim <= 2^14."""
    if kernel_field.grid != field.grid:
        raise GridMismatchError("kernel and field live on different grids")
    grid = field.grid
    if grid.n ** grid.dim > _DIRECT_MAX_NODES:
        raise DirectSumTooLargeError(
            f"{grid.n}^{grid.dim} nodes exceed the direct-sum guard"
        )
    n, c = grid.n, grid.center_index
    K = kernel_field.values
    u = field.values
    out = np.zeros_like(u)
    if grid.dim == 1:
        # out[i] = sum_j K[i - j + c] u[j]; each kernel node m shifts u by m - c
        for m in range(n):
            off = m - c
            lo, hi = max(0, off), min(n, n + off)
            if lo < hi:
                out[lo:hi] += K[m] * u[lo - off : hi - off]
    else:
        for m1 in range(n):
            o1 = m1 - c
            a1, b1 = max(0, o1), min(n, n + o1)
            if a1 >= b1:
                continue
            for m2 in range(n):
                o2 = m2 - c
                a2, b2 = max(0, o2), min(n, n + o2)
                if a2 >= b2 or K[m1, m2] == 0.0:
                    continue
                out[a1:b1, a2:b2] += K[m1, m2] * u[a1 - o1 : b1 - o1, a2 - o2 : b2 - o2]
    return Field(grid, out * grid.cell_volume)


def export_field_csv(field: Field, path, stride: int = 1) -> None:
    """Write a field as CSV rows x[,y],value (UTF-8, '.' decimals)."""
    grid = field.grid
    ax = grid.axis()[::stride]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if grid.dim == 1:
            writer.writerow(["x", "value"])
            for x, v in zip(ax, field.values[::stride]):
                writer.writerow([repr(float(x)), repr(float(v))])
        else:
            writer.writerow(["x", "y", "value"])
            sub = field.values[::stride, ::stride]
            for i, x in enumerate(ax):
                for j, y in enumerate(ax):
                    writer.writerow([repr(float(x)), repr(float(y)), repr(float(sub[i, j]))])
