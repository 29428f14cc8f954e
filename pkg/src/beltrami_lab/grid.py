"""Uniform square grids carrying complex-valued fields.

Node ``(i, j)`` of a grid with ``n`` samples per axis sits at
``center + ((i - n/2) + 1j*(j - n/2)) * spacing``, so the first array axis
runs along the real direction and the second along the imaginary one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp

MAX_SOBOLEV_ORDER = 4
FD_ORDER = 8


@dataclass(frozen=True)
class GridSpec:
    """Square ``[-half_width, half_width]^2`` (shifted by ``center``) sampled at ``n x n`` nodes."""

    center: complex = 0j
    half_width: float = 4.0
    n: int = 256

    def __post_init__(self):
        n = int(self.n)
        if n < 16 or n & (n - 1):
            raise ValueError(f"n must be a power of two >= 16, got {self.n}")
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise ValueError(f"half_width must be positive, got {self.half_width}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n

    def axis(self) -> np.ndarray:
        """Offsets of the nodes along either axis, relative to the center."""
        return (np.arange(self.n) - self.n // 2) * self.spacing

    def nodes(self) -> np.ndarray:
        t = self.axis()
        return self.center + t[:, None] + 1j * t[None, :]

    def index_nearest(self, z: complex) -> tuple[int, int]:
        w = (complex(z) - self.center) / self.spacing
        i = int(round(w.real)) + self.n // 2
        j = int(round(w.imag)) + self.n // 2
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise ValueError(f"point {z} lies outside the grid")
        return i, j

    def contains(self, z: complex, margin: float = 0.0) -> bool:
        w = complex(z) - self.center
        lo = -self.half_width + margin
        hi = self.half_width - self.spacing - margin
        return lo <= w.real <= hi and lo <= w.imag <= hi

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.center, self.half_width, self.n * factor)


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Samples of a complex function on the nodes of ``spec``. Treated as immutable."""

    spec: GridSpec
    samples: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.complex128)
        if arr.shape != (self.spec.n, self.spec.n):
            raise ValueError(
                f"samples have shape {arr.shape}, expected {(self.spec.n, self.spec.n)}"
            )
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            z = self.spec.nodes()[bad[0], bad[1]]
            raise ValueError(f"non-finite sample at node {tuple(int(b) for b in bad)} (z = {z})")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    # arithmetic returns fresh fields on the same grid
    def _other(self, other):
        if isinstance(other, ComplexField):
            if other.spec != self.spec:
                raise ValueError("fields live on different grids")
            return other.samples
        return other

    def __add__(self, other):
        return ComplexField(self.spec, self.samples + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ComplexField(self.spec, self.samples - self._other(other))

    def __rsub__(self, other):
        return ComplexField(self.spec, self._other(other) - self.samples)

    def __mul__(self, other):
        return ComplexField(self.spec, self.samples * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ComplexField(self.spec, self.samples / self._other(other))

    def __neg__(self):
        return ComplexField(self.spec, -self.samples)

    def conj(self) -> "ComplexField":
        return ComplexField(self.spec, self.samples.conj())

    def abs_max(self) -> float:
        return float(np.abs(self.samples).max())

    def value_at(self, z: complex) -> complex:
        """Bilinear interpolation from the four nodes surrounding ``z``."""
        return bilinear(self.spec, self.samples, z)

    def value_nearest(self, z: complex) -> complex:
        return complex(self.samples[self.spec.index_nearest(z)])

    @classmethod
    def zeros(cls, spec: GridSpec) -> "ComplexField":
        return cls(spec, np.zeros((spec.n, spec.n), complex))


def bilinear(spec: GridSpec, arr: np.ndarray, z: complex) -> complex:
    w = (complex(z) - spec.center) / spec.spacing
    x, y = w.real + spec.n // 2, w.imag + spec.n // 2
    i0, j0 = int(math.floor(x)), int(math.floor(y))
    if not (0 <= i0 < spec.n - 1 and 0 <= j0 < spec.n - 1):
        raise ValueError(f"point {z} is outside the interpolation range of the grid")
    tx, ty = x - i0, y - j0
    return complex(
        (1 - tx) * (1 - ty) * arr[i0, j0]
        + tx * (1 - ty) * arr[i0 + 1, j0]
        + (1 - tx) * ty * arr[i0, j0 + 1]
        + tx * ty * arr[i0 + 1, j0 + 1]
    )


@dataclass(frozen=True)
class DiskRegion:
    center: complex = 0j
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", complex(self.center))

    def mask(self, spec: GridSpec) -> np.ndarray:
        return np.abs(spec.nodes() - self.center) < self.radius


@dataclass(frozen=True)
class SobolevSpec:
    k: int
    p: float
    region: DiskRegion

    def __post_init__(self):
        if not (0 <= int(self.k) <= MAX_SOBOLEV_ORDER) or int(self.k) != self.k:
            raise ValueError(f"derivative order k must be an integer in [0, {MAX_SOBOLEV_ORDER}]")
        if not (self.p >= 1 + 1e-6 and math.isfinite(self.p)):
            raise ValueError(f"p must be finite and > 1, got {self.p}")


def sample_function(spec: GridSpec, f: Callable[[np.ndarray], np.ndarray]) -> ComplexField:
    """Evaluate ``f`` (vectorised over a complex array) at every node."""
    with np.errstate(all="ignore"):
        values = np.broadcast_to(np.asarray(f(spec.nodes()), dtype=complex), (spec.n, spec.n))
    return ComplexField(spec, values)


# ---------------------------------------------------------------------------
# derivatives


def fornberg_weights(x0: float, x: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights for the ``m``-th derivative at ``x0`` from nodes ``x``."""
    n = len(x)
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


@lru_cache(maxsize=32)
def _diff_matrix(n: int, spacing: float, order: int) -> sp.csr_matrix:
    """First-derivative matrix; centered stencils inside, one-sided ones near the ends."""
    width = order + 1
    half = order // 2
    rows, cols, vals = [], [], []
    for i in range(n):
        start = min(max(i - half, 0), n - width)
        idx = np.arange(start, start + width)
        w = fornberg_weights(float(i), idx.astype(float), 1) / spacing
        rows.extend([i] * width)
        cols.extend(idx.tolist())
        vals.extend(w.tolist())
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def partial_x(arr: np.ndarray, spacing: float, order: int = FD_ORDER) -> np.ndarray:
    return _diff_matrix(arr.shape[0], spacing, order) @ arr


def partial_y(arr: np.ndarray, spacing: float, order: int = FD_ORDER) -> np.ndarray:
    return (_diff_matrix(arr.shape[1], spacing, order) @ arr.T).T


def wirtinger_arrays(arr: np.ndarray, spacing: float, order: int = FD_ORDER):
    """Return ``(d/dz, d/dzbar)`` of a sampled array (any rectangular shape)."""
    dx = partial_x(arr, spacing, order)
    dy = partial_y(arr, spacing, order)
    return 0.5 * (dx - 1j * dy), 0.5 * (dx + 1j * dy)


def frequencies(n: int, spacing: float) -> np.ndarray:
    """Complex frequency ``xi = xi_1 + i xi_2`` on an ``n x n`` grid, FFT ordering."""
    f = np.fft.fftfreq(n, d=spacing)
    return f[:, None] + 1j * f[None, :]


def _spectral(arr: np.ndarray, spacing: float, conj_xi: bool) -> np.ndarray:
    xi = frequencies(arr.shape[0], spacing)
    symbol = np.pi * 1j * (np.conj(xi) if conj_xi else xi)
    # Nyquist modes have no antisymmetric partner; drop them like the zero mode of T.
    n = arr.shape[0]
    symbol[n // 2, :] = 0
    symbol[:, n // 2] = 0
    return np.fft.ifft2(symbol * np.fft.fft2(arr))


def wirtinger_dz(field: ComplexField, method: str = "fd") -> ComplexField:
    """``d/dz = (d/dx - i d/dy)/2``.

    ``method="fd"`` uses high-order finite differences and works for any smooth
    field. ``method="spectral"`` applies the Fourier symbol ``pi*i*conj(xi)`` and is
    only meaningful for fields that vanish near the grid boundary.
    """
    if method == "spectral":
        return ComplexField(field.spec, _spectral(field.samples, field.spec.spacing, True))
    if method != "fd":
        raise ValueError(f"unknown derivative method {method!r}")
    return ComplexField(field.spec, wirtinger_arrays(field.samples, field.spec.spacing)[0])


def wirtinger_dzbar(field: ComplexField, method: str = "fd") -> ComplexField:
    """``d/dzbar = (d/dx + i d/dy)/2``; see :func:`wirtinger_dz` for ``method``."""
    if method == "spectral":
        return ComplexField(field.spec, _spectral(field.samples, field.spec.spacing, False))
    if method != "fd":
        raise ValueError(f"unknown derivative method {method!r}")
    return ComplexField(field.spec, wirtinger_arrays(field.samples, field.spec.spacing)[1])


def derivative_table(arr: np.ndarray, spacing: float, k: int) -> dict[tuple[int, int], np.ndarray]:
    """All mixed Wirtinger derivatives ``dz^a dzbar^b`` with ``a + b <= k``."""
    table = {(0, 0): arr}
    for m in range(1, k + 1):
        for a in range(m + 1):
            b = m - a
            if a > 0:
                table[(a, b)] = wirtinger_arrays(table[(a - 1, b)], spacing)[0]
            else:
                table[(a, b)] = wirtinger_arrays(table[(a, b - 1)], spacing)[1]
    return table


def lp_norm(values: np.ndarray, spacing: float, p: float) -> float:
    return float((np.sum(np.abs(values) ** p) * spacing**2) ** (1.0 / p))


def sobolev_norm(field: ComplexField, spec: SobolevSpec) -> float:
    """Discrete ``W^{k,p}`` norm over a disk: sum of ``L^p`` norms of all derivatives of order <= k."""
    grid = field.spec
    region = spec.region
    margin = max(spec.k, 1) * grid.spacing
    c = region.center - grid.center
    lo = -grid.half_width + margin
    hi = grid.half_width - grid.spacing - margin
    if (c.real - region.radius < lo or c.real + region.radius > hi
            or c.imag - region.radius < lo or c.imag + region.radius > hi):
        raise ValueError(
            f"disk of radius {region.radius} at {region.center} is too close to the grid boundary"
        )
    mask = region.mask(grid)
    table = derivative_table(field.samples, grid.spacing, spec.k)
    return sum(lp_norm(d[mask], grid.spacing, spec.p) for d in table.values())


def relative_l2(a: ComplexField | np.ndarray, b: ComplexField | np.ndarray) -> float:
    """``||a - b||_2 / ||b||_2`` over the whole grid."""
    a = a.samples if isinstance(a, ComplexField) else a
    b = b.samples if isinstance(b, ComplexField) else b
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


# ---------------------------------------------------------------------------
# FLD1 text format


def write_field(field: ComplexField, path: str | Path) -> Path:
    path = Path(path)
    s = field.spec
    lines = [f"FLD1 n={s.n} center={s.center.real!r},{s.center.imag!r} half_width={s.half_width!r}"]
    arr = field.samples
    for i in range(s.n):
        row = arr[i]
        lines.extend(f"{i},{j},{row[j].real:.17g},{row[j].imag:.17g}" for j in range(s.n))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_field(path: str | Path) -> ComplexField:
    text = Path(path).read_text().splitlines()
    head = text[0].split()
    if not head or head[0] != "FLD1":
        raise ValueError(f"{path}: not an FLD1 file")
    meta = dict(tok.split("=", 1) for tok in head[1:])
    n = int(meta["n"])
    cre, cim = (float(t) for t in meta["center"].split(","))
    spec = GridSpec(complex(cre, cim), float(meta["half_width"]), n)
    if len(text) - 1 != n * n:
        raise ValueError(f"{path}: expected {n * n} samples, found {len(text) - 1}")
    data = np.loadtxt(text[1:], delimiter=",", ndmin=2)
    arr = np.empty((n, n), complex)
    arr[data[:, 0].astype(int), data[:, 1].astype(int)] = data[:, 2] + 1j * data[:, 3]
    return ComplexField(spec, arr)
