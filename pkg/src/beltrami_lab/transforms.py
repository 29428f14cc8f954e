"""Beurling transform ``T`` and Cauchy transform ``P`` on a grid.

Fourier convention: ``u_hat(xi) = int u(z) exp(-2 pi i (x xi_1 + y xi_2)) dA`` with
``xi = xi_1 + i xi_2``.  Then ``d/dz <-> pi i conj(xi)``, ``d/dzbar <-> pi i xi``,
``P <-> 1/(pi i xi)`` and ``T = d/dz P <-> conj(xi)/xi``.

The fast operators zero-embed the field into a larger periodic grid.  With
``kernel="free"`` (default) the Cauchy kernel ``1/(pi z)`` is truncated to a disk
of radius ``L`` larger than every source-target distance, which turns its symbol
into ``(1 - J0(2 pi L |xi|)) / (pi i xi)``.  The periodic convolution with that
symbol reproduces the free-space integral on the grid, rather than its
periodisation.  ``kernel="periodic"`` uses the bare symbols with the zero mode
dropped.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy import fft as sfft
from scipy.special import j0

from .grid import ComplexField, GridSpec, frequencies, lp_norm, wirtinger_dz, wirtinger_dzbar

SUPPORT_THRESHOLD = 1e-13


class SupportWarning(UserWarning):
    """Input is not numerically supported in the central half of the grid."""


@dataclass(frozen=True, eq=False)
class TransformPlan:
    spec: GridSpec
    padding_factor: int = 2
    kernel: str = "free"

    def __post_init__(self):
        if self.padding_factor not in (1, 2, 4):
            raise ValueError(f"padding_factor must be 1, 2 or 4, got {self.padding_factor}")
        if self.kernel not in ("free", "periodic"):
            raise ValueError(f"kernel must be 'free' or 'periodic', got {self.kernel!r}")
        if self.kernel == "free" and self.padding_factor == 1:
            raise ValueError("the free-space kernel needs padding_factor >= 2")

    @property
    def size(self) -> int:
        return self.padding_factor * self.spec.n

    @property
    def truncation_radius(self) -> float:
        # pad 2: sources in the central half, targets anywhere (max distance 1.5*sqrt2*hw,
        # nearest periodic image at 2.5*hw).  pad 4: sources anywhere.
        hw = self.spec.half_width
        return 2.2 * hw if self.padding_factor == 2 else 2.9 * hw

    @cached_property
    def _symbols(self) -> tuple[np.ndarray, np.ndarray]:
        xi = frequencies(self.size, self.spec.spacing)
        with np.errstate(divide="ignore", invalid="ignore"):
            p_sym = 1.0 / (np.pi * 1j * xi)
            t_sym = np.conj(xi) / xi
        if self.kernel == "free":
            damp = 1.0 - j0(2 * np.pi * self.truncation_radius * np.abs(xi))
            p_sym = p_sym * damp
            t_sym = t_sym * damp
        p_sym[0, 0] = 0
        t_sym[0, 0] = 0
        p_sym.setflags(write=False)
        t_sym.setflags(write=False)
        return p_sym, t_sym

    def _offset(self) -> int:
        return (self.size - self.spec.n) // 2

    def embed(self, arr: np.ndarray) -> np.ndarray:
        out = np.zeros((self.size, self.size), complex)
        o = self._offset()
        out[o:o + self.spec.n, o:o + self.spec.n] = arr
        return out

    def crop(self, arr: np.ndarray) -> np.ndarray:
        o = self._offset()
        return arr[o:o + self.spec.n, o:o + self.spec.n]

    def apply_symbol(self, arr: np.ndarray, symbol: np.ndarray) -> np.ndarray:
        big = sfft.fft2(self.embed(arr))
        big *= symbol
        return self.crop(sfft.ifft2(big, overwrite_x=True))

    def beurling_array(self, arr: np.ndarray) -> np.ndarray:
        return self.apply_symbol(arr, self._symbols[1])

    def cauchy_array(self, arr: np.ndarray) -> np.ndarray:
        out = self.apply_symbol(arr, self._symbols[0])
        return out - out[self.spec.index_nearest(0)]

    def cauchy_and_beurling(self, arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``(P u, T u)`` sharing one forward FFT."""
        p_sym, t_sym = self._symbols
        big = sfft.fft2(self.embed(arr))
        pu = self.crop(sfft.ifft2(big * p_sym))
        tu = self.crop(sfft.ifft2(big * t_sym))
        return pu - pu[self.spec.index_nearest(0)], tu


@lru_cache(maxsize=8)
def default_plan(spec: GridSpec) -> TransformPlan:
    """Shared plan (padding 2, free-space kernel) so symbols are built once per grid."""
    return TransformPlan(spec)


def support_radius(field: ComplexField, threshold: float = SUPPORT_THRESHOLD) -> float:
    """Smallest ``r`` such that ``|u| < threshold`` outside the disk of radius ``r`` about the grid center."""
    mask = np.abs(field.samples) >= threshold
    if not mask.any():
        return 0.0
    return float(np.abs(field.spec.nodes()[mask] - field.spec.center).max())


def _check_support(plan: TransformPlan, u: ComplexField) -> None:
    if u.spec != plan.spec:
        raise ValueError("field and plan live on different grids")
    if plan.padding_factor == 4:
        return
    offs = np.abs(u.spec.axis())
    outside = (offs[:, None] > u.spec.half_width / 2) | (offs[None, :] > u.spec.half_width / 2)
    if np.any(np.abs(u.samples[outside]) > SUPPORT_THRESHOLD):
        warnings.warn(
            "input is not supported in the central half of the grid; periodisation error grows",
            SupportWarning,
            stacklevel=3,
        )


def beurling(plan: TransformPlan, u: ComplexField) -> ComplexField:
    """Beurling transform ``T u`` (principal value of ``-1/pi int u(w)/(w - z)^2 dA``)."""
    _check_support(plan, u)
    return ComplexField(plan.spec, plan.beurling_array(u.samples))


def cauchy(plan: TransformPlan, u: ComplexField) -> ComplexField:
    """Cauchy transform ``P u``, normalised to vanish at the node nearest 0."""
    _check_support(plan, u)
    return ComplexField(plan.spec, plan.cauchy_array(u.samples))


def _eval_points(points) -> np.ndarray:
    return np.atleast_1d(np.asarray(points, dtype=complex))


def beurling_quadrature(u: ComplexField, eval_points) -> np.ndarray:
    """Direct principal-value sum for ``T u``; skips the cell containing each point."""
    spec = u.spec
    z = spec.nodes().ravel()
    w = u.samples.ravel()
    keep = np.abs(w) > 0
    z, w = z[keep], w[keep]
    h2 = spec.spacing**2
    out = []
    for p in _eval_points(eval_points):
        d = z - p
        near = np.abs(d.real) < spec.spacing / 2
        near &= np.abs(d.imag) < spec.spacing / 2
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = w / d**2
        terms[near] = 0
        out.append(-np.sum(terms) * h2 / np.pi)
    return np.array(out)


def cauchy_quadrature(u: ComplexField, eval_points) -> np.ndarray:
    """Direct sum for ``P u`` with kernel ``1/(w - z) - 1/w``; singular cells skipped."""
    spec = u.spec
    z = spec.nodes().ravel()
    w = u.samples.ravel()
    keep = np.abs(w) > 0
    z, w = z[keep], w[keep]
    h2 = spec.spacing**2
    origin = np.abs(z) < spec.spacing / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        inv0 = np.where(origin, 0, 1 / z)
    out = []
    for p in _eval_points(eval_points):
        d = z - p
        near = (np.abs(d.real) < spec.spacing / 2) & (np.abs(d.imag) < spec.spacing / 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            k = np.where(near, 0, 1 / d)
        out.append(-np.sum(w * (k - inv0)) * h2 / np.pi)
    return np.array(out)


def random_test_field(spec: GridSpec, rng: np.random.Generator, n_bumps: int = 3) -> ComplexField:
    """Random smooth bump of the form ``d/dzbar`` of a sum of Gaussians.

    These have zero mean and their Beurling transform ``d/dz phi`` is again
    concentrated in the central half, so no mass leaves the grid.
    """
    hw = spec.half_width
    z = spec.nodes()
    phi = np.zeros_like(z)
    for _ in range(n_bumps):
        width = hw * rng.uniform(0.03, 0.06)
        c = complex(*rng.uniform(-0.15 * hw, 0.15 * hw, 2))
        amp = complex(*rng.normal(size=2))
        phi += amp * np.exp(-np.abs(z - c) ** 2 / width**2)
    return wirtinger_dzbar(ComplexField(spec, phi), method="spectral")


def beurling_operator_norm_probe(plan: TransformPlan, p: float, trials: int = 10, seed: int = 0) -> float:
    """Largest observed ``||T u||_p / ||u||_p`` over random smooth test fields (a lower bound for ``N_p``)."""
    if trials < 10:
        raise ValueError("the probe needs at least 10 trials")
    rng = np.random.default_rng(seed)
    h = plan.spec.spacing
    best = 0.0
    for _ in range(trials):
        u = random_test_field(plan.spec, rng)
        tu = plan.beurling_array(u.samples)
        best = max(best, lp_norm(tu, h, p) / lp_norm(u.samples, h, p))
    return best


def prop22_defects(plan: TransformPlan, u: ComplexField, method: str = "spectral") -> tuple[float, float]:
    """Relative L2 defects of ``dzbar P u = u`` and ``dz P u = T u``.

    Spectral derivatives on the unpadded grid suit inputs ``u = dzbar phi`` with
    ``phi`` compactly supported, whose ``P u = phi - phi(0)`` is periodic-smooth;
    ``method="fd"`` works for any input at eighth-order accuracy.
    """
    pu = cauchy(plan, u)
    tu = beurling(plan, u)
    nu = np.linalg.norm(u.samples)
    d1 = np.linalg.norm((wirtinger_dzbar(pu, method) - u).samples) / nu
    d2 = np.linalg.norm((wirtinger_dz(pu, method) - tu).samples) / nu
    return float(d1), float(d2)
