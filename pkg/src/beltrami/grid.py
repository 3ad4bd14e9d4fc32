"""Uniform square grids over the unit disk, complex fields and quadrature.

The grid covers ``[-L, L]^2`` with ``n_side`` samples per axis and spacing
``h = 2L / n_side``. Node ``(i, j)`` sits at ``z = (-L + j h) + i (-L + i h)``,
so rows index the imaginary part and the origin is node ``(n/2, n/2)``.
"""

from __future__ import annotations

import csv
import math
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

BFLD_MAGIC = b"BFLD"
BFLD_VERSION = 1
_HEADER = struct.Struct("<4sIId")


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid over ``[-half_width, half_width]^2``.

    Parameters
    ----------
    n_side : int
        Samples per axis, a power of two (at least 4).
    half_width : float
        Half the side length ``L``; must exceed 1 so the closed unit disk is
        interior.
    """

    n_side: int = 512
    half_width: float = 1.25

    def __post_init__(self):
        n = self.n_side
        if not isinstance(n, (int, np.integer)) or n < 4 or n & (n - 1):
            raise ValueError(f"n_side must be a power of two >= 4, got {n!r}")
        if not (math.isfinite(self.half_width) and self.half_width > 1.0):
            raise ValueError(f"half_width must be > 1, got {self.half_width!r}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n_side

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_side, self.n_side)

    @property
    def origin_index(self) -> tuple[int, int]:
        return (self.n_side // 2, self.n_side // 2)

    def axis(self) -> np.ndarray:
        return -self.half_width + np.arange(self.n_side) * self.spacing

    def nodes(self) -> np.ndarray:
        """Complex node coordinates as an ``(n, n)`` array."""
        a = self.axis()
        return a[None, :] + 1j * a[:, None]

    def disk_mask(self, radius: float = 1.0, center: complex = 0.0) -> np.ndarray:
        """Nodes strictly inside the disk ``|z - center| < radius``."""
        return np.abs(self.nodes() - center) < radius

    def interior_mask(self) -> np.ndarray:
        """Nodes with both neighbours on each axis."""
        m = np.zeros(self.shape, dtype=bool)
        m[1:-1, 1:-1] = True
        return m

    def fractional_index(self, z) -> tuple[np.ndarray, np.ndarray]:
        """Continuous (row, column) coordinates of points ``z``."""
        z = np.asarray(z)
        h = self.spacing
        return (z.imag + self.half_width) / h, (z.real + self.half_width) / h


@dataclass
class ComplexField:
    """Complex samples on a grid, stored as an ``(n, n)`` row-major array.

    Parameters
    ----------
    grid : GridSpec
    samples : array_like
        ``n_side**2`` values, flat or already shaped ``(n, n)``.
    allow_nonfinite : bool
        Permit inf/NaN samples (dilatation fields may be infinite).
    """

    grid: GridSpec
    samples: np.ndarray
    allow_nonfinite: bool = False
    n_clamped: int = field(default=0, compare=False)

    def __post_init__(self):
        a = np.asarray(self.samples, dtype=complex)
        n = self.grid.n_side
        if a.size != n * n:
            raise ValueError(f"expected {n * n} samples, got {a.size}")
        a = a.reshape(n, n)
        if not self.allow_nonfinite and not np.all(np.isfinite(a)):
            raise ValueError("field contains non-finite samples")
        self.samples = a

    @property
    def values(self) -> np.ndarray:
        return self.samples

    def at(self, z) -> np.ndarray:
        """Bicubic interpolation of the field at arbitrary points."""
        from scipy.ndimage import map_coordinates

        z = np.asarray(z, dtype=complex)
        r, c = self.grid.fractional_index(z.ravel())
        coords = np.vstack([r, c])
        re = map_coordinates(self.samples.real, coords, order=3, mode="nearest")
        im = map_coordinates(self.samples.imag, coords, order=3, mode="nearest")
        return (re + 1j * im).reshape(z.shape)

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(BFLD_MAGIC, BFLD_VERSION, self.grid.n_side,
                            float(self.grid.half_width))
        body = np.ascontiguousarray(self.samples, dtype="<c16").tobytes()
        return head + body

    @classmethod
    def from_bytes(cls, data: bytes, allow_nonfinite: bool = True) -> "ComplexField":
        if len(data) < _HEADER.size:
            raise ValueError("truncated BFLD header")
        magic, version, n, L = _HEADER.unpack_from(data)
        if magic != BFLD_MAGIC:
            raise ValueError(f"bad magic {magic!r}")
        if version != BFLD_VERSION:
            raise ValueError(f"unsupported BFLD version {version}")
        body = data[_HEADER.size:]
        if len(body) != 16 * n * n:
            raise ValueError("BFLD payload size does not match header")
        samples = np.frombuffer(body, dtype="<c16").astype(complex)
        return cls(GridSpec(n, L), samples, allow_nonfinite=allow_nonfinite)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path, allow_nonfinite: bool = True) -> "ComplexField":
        return cls.from_bytes(Path(path).read_bytes(), allow_nonfinite)

    def to_csv(self, path) -> None:
        """Write ``x, y, re, im`` rows in row-major node order."""
        z = self.grid.nodes().ravel()
        s = self.samples.ravel()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "re", "im"])
            for zi, si in zip(z, s):
                w.writerow([repr(float(v)) for v in (zi.real, zi.imag, si.real, si.imag)])


@dataclass(frozen=True)
class PolarPoint:
    """A point ``r e^{i theta}`` with ``r >= 0`` and ``theta`` in ``[0, 2 pi)``."""

    r: float
    theta: float

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("r must be non-negative")
        if not 0.0 <= self.theta < 2 * math.pi:
            raise ValueError("theta must lie in [0, 2 pi)")

    @classmethod
    def from_complex(cls, z: complex) -> "PolarPoint":
        th = math.atan2(z.imag, z.real) % (2 * math.pi)
        if th >= 2 * math.pi:
            th = 0.0
        return cls(abs(z), th)

    def to_complex(self) -> complex:
        return complex(self.r * math.cos(self.theta), self.r * math.sin(self.theta))


def sample_function(fn: Callable, grid: GridSpec) -> ComplexField:
    """Sample ``fn`` at every node.

    ``fn`` is called once on the full node array; scalar-only callables are
    vectorized as a fallback. Non-finite values inside the unit disk raise;
    outside they are replaced by 0 and counted in ``n_clamped``.
    """
    z = grid.nodes()
    with np.errstate(all="ignore"):
        try:
            v = np.asarray(fn(z), dtype=complex)
            if v.shape != z.shape:
                v = np.broadcast_to(v, z.shape).astype(complex)
        except (TypeError, ValueError):
            v = np.vectorize(lambda t: complex(fn(t)), otypes=[complex])(z)
    bad = ~np.isfinite(v)
    inside = np.abs(z) < 1.0
    if np.any(bad & inside):
        k = int(np.count_nonzero(bad & inside))
        raise ValueError(f"function is non-finite at {k} nodes inside the unit disk")
    n_bad = int(np.count_nonzero(bad))
    if n_bad:
        warnings.warn(f"{n_bad} non-finite samples outside the disk set to 0")
        v = np.where(bad, 0.0, v)
    return ComplexField(grid, v, n_clamped=n_bad)


def central_wirtinger(f: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Wirtinger derivatives of an ``(n, n)`` array.

    Central differences at interior nodes, one-sided second-order differences
    on the boundary frame.
    """
    f = np.asarray(f, dtype=complex)
    fx = np.empty_like(f)
    fy = np.empty_like(f)
    fx[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / (2 * h)
    fx[:, 0] = (-3 * f[:, 0] + 4 * f[:, 1] - f[:, 2]) / (2 * h)
    fx[:, -1] = (3 * f[:, -1] - 4 * f[:, -2] + f[:, -3]) / (2 * h)
    fy[1:-1, :] = (f[2:, :] - f[:-2, :]) / (2 * h)
    fy[0, :] = (-3 * f[0, :] + 4 * f[1, :] - f[2, :]) / (2 * h)
    fy[-1, :] = (3 * f[-1, :] - 4 * f[-2, :] + f[-3, :]) / (2 * h)
    return 0.5 * (fx - 1j * fy), 0.5 * (fx + 1j * fy)


def wirtinger_derivatives(f: ComplexField) -> tuple[ComplexField, ComplexField]:
    """Return ``(f_z, f_zbar)`` by finite differences."""
    if f.grid.n_side < 4:
        raise ValueError("grid too small for finite differences")
    fz, fzb = central_wirtinger(f.samples, f.grid.spacing)
    flag = f.allow_nonfinite
    return ComplexField(f.grid, fz, flag), ComplexField(f.grid, fzb, flag)


def integrate_disk(field: ComplexField, radius: float = 1.0) -> complex:
    """Midpoint-rule integral over nodes with ``|z| < radius``."""
    g = field.grid
    if radius > g.half_width:
        raise ValueError("radius exceeds the grid half width")
    mask = g.disk_mask(radius)
    return complex(np.sum(field.samples[mask]) * g.spacing ** 2)


def circle_mean(Q: Callable, z0: complex, r: float, n_samples: int = 64) -> float:
    """Trapezoid-rule mean of ``Q`` over the circle ``|z - z0| = r``.

    Isolated non-finite samples are dropped and the weights renormalized;
    more than 1% non-finite samples is an error.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if n_samples < 16:
        raise ValueError("n_samples must be at least 16")
    th = 2 * np.pi * np.arange(n_samples) / n_samples
    with np.errstate(all="ignore"):
        v = np.asarray(Q(z0 + r * np.exp(1j * th)), dtype=float)
    v = np.broadcast_to(v, th.shape)
    ok = np.isfinite(v)
    if np.count_nonzero(~ok) > 0.01 * n_samples:
        raise ValueError("Q is non-finite on more than 1% of the circle")
    return float(np.mean(v[ok]))
