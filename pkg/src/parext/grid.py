"""Cell-centred scalar fields on the square ``[-L, L]^2``.

Axis 0 of every value array indexes ``x1`` (the horizontal variable
``x'``) and axis 1 indexes ``x2`` (the vertical variable ``x_d``).
Outside the box spanned by the outermost cell centres a field is zero.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .exceptions import GridMismatch, NonFiniteSample, NonPowerOfTwo

__all__ = [
    "GridSpec",
    "SampledField",
    "make_grid",
    "sample",
    "lp_norm",
    "interpolate",
    "inner_product",
    "rescale_parabolic",
    "save_pext",
    "load_pext",
    "export_csv",
]

PEXT_MAGIC = b"PEXT"
PEXT_VERSION = 1


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell-centred grid on ``[-L, L]^2`` with ``N`` cells per axis."""

    L: float
    N: int

    def __post_init__(self):
        if not np.isfinite(self.L) or self.L <= 0:
            raise ValueError(f"half width must be positive, got {self.L}")
        if int(self.N) != self.N or not _is_power_of_two(int(self.N)) or self.N < 8:
            raise NonPowerOfTwo(f"N must be a power of two >= 8, got {self.N}")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "N", int(self.N))

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    @property
    def nodes(self) -> np.ndarray:
        """1-D array of cell-centre coordinates, identical on both axes."""
        return -self.L + (np.arange(self.N) + 0.5) * self.h

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.nodes
        return np.meshgrid(x, x, indexing="ij")

    def index_of(self, x1: float, x2: float) -> tuple[int, int]:
        """Index of the cell containing ``(x1, x2)``."""
        i = int(np.floor((x1 + self.L) / self.h))
        j = int(np.floor((x2 + self.L) / self.h))
        return i, j


def make_grid(L: float, N: int) -> GridSpec:
    return GridSpec(L, N)


@dataclass(frozen=True, eq=False)
class SampledField:
    """Immutable real field sampled at the cell centres of ``grid``."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        n = self.grid.N
        if v.shape != (n, n):
            raise ValueError(f"expected values of shape {(n, n)}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            i, j = np.argwhere(~np.isfinite(v))[0]
            x = self.grid.nodes
            raise NonFiniteSample(
                f"non-finite value at ({x[i]:g}, {x[j]:g})", (float(x[i]), float(x[j]))
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    # small arithmetic surface; every result is a new field on the same grid
    def _other(self, other):
        if isinstance(other, SampledField):
            check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return SampledField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return SampledField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return SampledField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return SampledField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return SampledField(self.grid, self.values / self._other(other))

    def __neg__(self):
        return SampledField(self.grid, -self.values)

    def __abs__(self):
        return SampledField(self.grid, np.abs(self.values))

    def with_values(self, values) -> "SampledField":
        return SampledField(self.grid, values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


def check_same_grid(*fields: SampledField) -> GridSpec:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatch(f"grid {f.grid} does not match {grid}")
    return grid


def zeros(grid: GridSpec) -> SampledField:
    return SampledField(grid, np.zeros((grid.N, grid.N)))


def sample(f: Callable[[np.ndarray, np.ndarray], np.ndarray], grid: GridSpec) -> SampledField:
    """Evaluate a vectorised function ``f(x1, x2)`` at every cell centre."""
    x1, x2 = grid.mesh()
    with np.errstate(all="ignore"):
        values = np.broadcast_to(np.asarray(f(x1, x2), dtype=np.float64), x1.shape)
    return SampledField(grid, values)


def lp_norm(f: SampledField, p: float) -> float:
    """Riemann-sum ``L^p`` norm over the cell centres.

    ``np.sum`` reduces contiguous float arrays pairwise, so the result does
    not depend on how the work might be split.
    """
    if p == np.inf:
        return f.max_abs()
    if not p >= 1:
        raise ValueError(f"exponent must be >= 1, got {p}")
    a = np.abs(f.values)
    scale = float(a.max())
    if scale == 0.0:
        return 0.0
    # normalise by the max to keep |f|^p in range for large p
    s = np.sum((a / scale) ** p) * f.grid.cell_area
    return scale * float(s) ** (1.0 / p)


def _axis_weights(u: np.ndarray, n: int):
    """Bilinear stencil along one axis for fractional index ``u``.

    Returns ``(lo, w_lo, w_hi, inside)``; ``inside`` is False where ``u``
    falls outside ``[0, n-1]``.
    """
    inside = (u >= 0.0) & (u <= n - 1)
    lo = np.clip(np.floor(u), 0, n - 2).astype(np.int64)
    frac = np.clip(u - lo, 0.0, 1.0)
    return lo, 1.0 - frac, frac, inside


def interpolate(f: SampledField, x1, x2):
    """Bilinear interpolation at the points ``(x1, x2)``; zero outside the box.

    Accepts scalars or broadcastable arrays and returns the same shape.
    """
    g = f.grid
    x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=np.float64), np.asarray(x2, dtype=np.float64))
    u = (x1 + g.L) / g.h - 0.5
    v = (x2 + g.L) / g.h - 0.5
    i0, a0, a1, in1 = _axis_weights(u, g.N)
    j0, b0, b1, in2 = _axis_weights(v, g.N)
    F = f.values
    out = (
        a0 * b0 * F[i0, j0]
        + a0 * b1 * F[i0, j0 + 1]
        + a1 * b0 * F[i0 + 1, j0]
        + a1 * b1 * F[i0 + 1, j0 + 1]
    )
    out = np.where(in1 & in2, out, 0.0)
    return float(out) if out.ndim == 0 else out


def inner_product(f: SampledField, g: SampledField) -> float:
    check_same_grid(f, g)
    return float(np.sum(f.values * g.values) * f.grid.cell_area)


def rescale_parabolic(f: SampledField, r: float) -> SampledField:
    """Return ``x -> f(r x1, r^2 x2)`` resampled on the same grid."""
    if not r > 0:
        raise ValueError(f"dilation factor must be positive, got {r}")
    if r == 1.0:
        return f
    x1, x2 = f.grid.mesh()
    return SampledField(f.grid, interpolate(f, r * x1, r * r * x2))


def shift_cells(f: SampledField, di: int, dj: int) -> SampledField:
    """Translate by whole cells, ``out[i, j] = f[i - di, j - dj]``, zero-filled."""
    n = f.grid.N
    out = np.zeros((n, n))
    src = f.values
    si = slice(max(0, -di), min(n, n - di))
    sj = slice(max(0, -dj), min(n, n - dj))
    ti = slice(max(0, di), min(n, n + di))
    tj = slice(max(0, dj), min(n, n + dj))
    out[ti, tj] = src[si, sj]
    return SampledField(f.grid, out)


# -- serialisation -----------------------------------------------------------

_HEADER = struct.Struct("<4sIdI")


def save_pext(f: SampledField, path) -> None:
    """Write the binary container: header then N^2 little-endian doubles."""
    g = f.grid
    payload = _HEADER.pack(PEXT_MAGIC, PEXT_VERSION, g.L, g.N)
    payload += np.ascontiguousarray(f.values, dtype="<f8").tobytes(order="C")
    _atomic_write_bytes(Path(path), payload)


def load_pext(path) -> SampledField:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("file too short for a PEXT header")
    magic, version, L, N = _HEADER.unpack_from(data)
    if magic != PEXT_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != PEXT_VERSION:
        raise ValueError(f"unsupported PEXT version {version}")
    body = data[_HEADER.size:]
    if len(body) != 8 * N * N:
        raise ValueError(f"expected {N * N} values, found {len(body) // 8}")
    values = np.frombuffer(body, dtype="<f8").reshape(N, N)
    return SampledField(GridSpec(L, N), values)


def export_csv(f: SampledField, path) -> None:
    """One ``x1,x2,value`` line per cell, ``i`` outer."""
    x = f.grid.nodes
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "x2", "value"])
        for i in range(f.grid.N):
            for j in range(f.grid.N):
                w.writerow([repr(float(x[i])), repr(float(x[j])), repr(float(f.values[i, j]))])
    tmp.replace(path)


def _atomic_write_bytes(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    tmp.replace(path)
