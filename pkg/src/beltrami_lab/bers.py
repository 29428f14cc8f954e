"""Simultaneous uniformization on a planar grid and the pulled-back Bers metric.

Two coefficients, one supported in the upper half-plane and one in the lower,
are glued into a single coefficient.  One canonical solve ``F`` then gives
``f1 = F`` on the upper half-plane and ``f2bar(z) = F(conj z)``, both stored on
the same upper sub-grid.  The Bers metric is the pullback of
``-4/(z1 - z2)^2 dz1.dz2`` by ``(f1, f2bar)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .beltrami import BeltramiCoefficient, SolveReport, canonical_solution
from .exceptions import InvariantError
from .grid import ComplexField, GridSpec, wirtinger_arrays, write_field
from .transforms import SUPPORT_THRESHOLD

CONVENTION = "h = g_zz dz^2 + 2 g_zzbar dz.dzbar + g_zbzb dzbar^2"
# wide enough that the bumps below (support radius 3.6) fit in the central half
BERS_HALF_WIDTH = 8.0


class SingularityError(InvariantError):
    """``f1`` and ``f2bar`` (nearly) coincide at a node, so the metric blows up."""


@dataclass(frozen=True)
class UpperSubgrid:
    """Rows of a square grid lying strictly above the real axis (``Im z >= spacing``)."""

    spec: GridSpec

    def __post_init__(self):
        if abs(self.spec.center.imag) > 0 or self.spec.center.real != 0:
            raise ValueError("the half-plane split needs a grid centered at 0")

    @property
    def rows(self) -> np.ndarray:
        n = self.spec.n
        return np.arange(n // 2 + 1, n)

    @property
    def mirror_rows(self) -> np.ndarray:
        return self.spec.n - self.rows

    @property
    def spacing(self) -> float:
        return self.spec.spacing

    def nodes(self) -> np.ndarray:
        return self.spec.nodes()[:, self.rows]

    def restrict(self, arr: np.ndarray) -> np.ndarray:
        return arr[:, self.rows]

    def mirror(self, arr: np.ndarray) -> np.ndarray:
        """Values at ``conj(z)`` for every ``z`` of the sub-grid."""
        return arr[:, self.mirror_rows]


@dataclass(frozen=True, eq=False)
class GluedCoefficient:
    mu1: BeltramiCoefficient
    mu2: BeltramiCoefficient
    glued: BeltramiCoefficient


@dataclass(frozen=True, eq=False)
class MetricComponents:
    """Coefficients of ``g_zz dz^2 + 2 g_zzbar dz.dzbar + g_zbzb dzbar^2`` on an upper sub-grid."""

    grid: UpperSubgrid
    g_zz: np.ndarray
    g_zzbar: np.ndarray
    g_zbzb: np.ndarray
    convention: str = CONVENTION

    def __post_init__(self):
        for name in ("g_zz", "g_zzbar", "g_zbzb"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise InvariantError(f"{name} has non-finite entries")

    def as_fields(self) -> dict[str, ComplexField]:
        """Embed the components into full-grid fields (zero below the sub-grid), e.g. for FLD1 output."""
        out = {}
        for name in ("g_zz", "g_zzbar", "g_zbzb"):
            arr = np.zeros((self.grid.spec.n, self.grid.spec.n), complex)
            arr[:, self.grid.rows] = getattr(self, name)
            out[name] = ComplexField(self.grid.spec, arr)
        return out


@dataclass(eq=False)
class Uniformization:
    """``f1`` and ``f2bar`` on the upper sub-grid with their Wirtinger derivatives.

    Both derivative tuples are ``(f1_z, f1_zbar, f2bar_z, f2bar_zbar)``.
    ``derivatives`` comes from finite differences of the full-grid solution (so
    rows next to the real axis use centred stencils); ``transform_derivatives``
    from the solver's transform calculus.
    """

    grid: UpperSubgrid
    f1: np.ndarray
    f2bar: np.ndarray
    derivatives: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    transform_derivatives: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    report: SolveReport


def reflect(field: ComplexField) -> ComplexField:
    """``z -> conj(field(conj z))``; the top row has no mirror node and is set to 0."""
    n = field.spec.n
    out = np.zeros((n, n), complex)
    out[:, 1:] = np.conj(field.samples[:, n - np.arange(1, n)])
    return ComplexField(field.spec, out)


def glue(mu1: BeltramiCoefficient, mu2: BeltramiCoefficient) -> GluedCoefficient:
    """Take ``mu1`` on the upper half-plane and ``mu2`` on the lower; the real axis gets 0."""
    spec = mu1.spec
    if mu2.spec != spec:
        raise ValueError("mu1 and mu2 live on different grids")
    y = spec.nodes().imag
    h = spec.spacing
    big1 = np.abs(mu1.samples) >= SUPPORT_THRESHOLD
    big2 = np.abs(mu2.samples) >= SUPPORT_THRESHOLD
    if np.any(big1 & (y < 2 * h - 1e-12 * h)):
        raise InvariantError("mu1 must be supported in Im z >= 2*spacing")
    if np.any(big2 & (y > -2 * h + 1e-12 * h)):
        raise InvariantError("mu2 must be supported in Im z <= -2*spacing")
    arr = np.where(y >= h / 2, mu1.samples, np.where(y <= -h / 2, mu2.samples, 0))
    return GluedCoefficient(mu1, mu2, BeltramiCoefficient(ComplexField(spec, arr)))


def simultaneous_uniformize(glued: GluedCoefficient | BeltramiCoefficient,
                            tol: float = 1e-12) -> Uniformization:
    """One canonical solve for the glued coefficient, split into ``(f1, f2bar)``."""
    mu = glued.glued if isinstance(glued, GluedCoefficient) else glued
    grid = UpperSubgrid(mu.spec)
    rep = canonical_solution(mu, tol)
    F = rep.solution.samples

    def split(dz, dzb):
        # d/dz [F(conj z)] = (dF/dzbar)(conj z) and vice versa
        return grid.restrict(dz), grid.restrict(dzb), grid.mirror(dzb), grid.mirror(dz)

    fd = split(*wirtinger_arrays(F, mu.spec.spacing))
    tc = split(rep.dz.samples, rep.dzbar.samples)
    return Uniformization(grid, grid.restrict(F), grid.mirror(F), fd, tc, rep)


def bers_metric(f1: np.ndarray, f2bar: np.ndarray, grid: UpperSubgrid,
                derivatives=None, guard: float = 1e-8) -> MetricComponents:
    """Pull back ``-4/(z1 - z2)^2 dz1.dz2`` along ``(f1, f2bar)``.

    ``derivatives`` is an optional ``(f1_z, f1_zbar, f2bar_z, f2bar_zbar)`` tuple;
    without it, finite differences on the sub-grid are used.
    """
    gap = np.abs(f1 - f2bar)
    if np.any(gap < guard):
        i, j = np.unravel_index(np.argmin(gap), gap.shape)
        z = grid.nodes()[i, j]
        raise SingularityError(
            f"|f1 - f2bar| = {gap[i, j]:.3g} < {guard:g} at sub-grid node ({i}, {j}), z = {z:.6g}"
        )
    if derivatives is None:
        d1z, d1zb = wirtinger_arrays(f1, grid.spacing)
        d2z, d2zb = wirtinger_arrays(f2bar, grid.spacing)
    else:
        d1z, d1zb, d2z, d2zb = derivatives
    lam = -4.0 / (f1 - f2bar) ** 2
    return MetricComponents(
        grid=grid,
        g_zz=lam * d1z * d2z,
        g_zzbar=lam * 0.5 * (d1z * d2zb + d1zb * d2z),
        g_zbzb=lam * d1zb * d2zb,
    )


def metric_from(uni: Uniformization, use_transform_derivatives: bool = False) -> MetricComponents:
    derivs = uni.transform_derivatives if use_transform_derivatives else uni.derivatives
    return bers_metric(uni.f1, uni.f2bar, uni.grid, derivs)


def hyperbolic_defect(components: MetricComponents, y_min: float = 0.5,
                      y_max: float | None = None, x_max: float | None = None) -> float:
    """L2 norm over ``{y_min <= Im z <= y_max, |Re z| <= x_max}`` of the deviation from ``|dz|^2 / y^2``."""
    grid = components.grid
    if y_min < 0.5:
        raise ValueError("the defect region must lie in Im z >= 0.5")
    z = grid.nodes()
    mask = z.imag >= y_min - 1e-12
    if y_max is not None:
        mask &= z.imag <= y_max + 1e-12
    if x_max is not None:
        mask &= np.abs(z.real) <= x_max + 1e-12
    y = z.imag[mask]
    dev = (
        np.abs(components.g_zz[mask]) ** 2
        + np.abs(components.g_zbzb[mask]) ** 2
        + np.abs(components.g_zzbar[mask] - 0.5 / y**2) ** 2
    )
    return float(np.sqrt(dev.sum()) * grid.spacing)


def min_separation(uni: Uniformization, y_min: float = 0.0) -> float:
    """``min |f1 - f2bar|`` over sub-grid nodes with ``Im z >= y_min``."""
    mask = uni.grid.nodes().imag >= y_min - 1e-12
    return float(np.abs(uni.f1 - uni.f2bar)[mask].min())


def half_plane_residuals(uni: Uniformization, glued: GluedCoefficient) -> tuple[float, float]:
    """Relative L2 residuals of ``f1_zbar = mu1 f1_z`` and of the mirrored relation for ``f2bar``.

    ``f2bar(z) = F(conj z)`` has coefficient ``conj(mu2(conj z))`` in the conjugate
    chart, i.e. ``(f2bar)_z = mu2(conj z) (f2bar)_zbar``.
    """
    g = uni.grid
    mu1 = g.restrict(glued.mu1.samples)
    mu2m = g.mirror(glued.mu2.samples)
    d1z, d1zb, d2z, d2zb = uni.derivatives
    r1 = np.linalg.norm(d1zb - mu1 * d1z) / np.linalg.norm(d1zb if np.any(mu1) else d1z)
    r2 = np.linalg.norm(d2z - mu2m * d2zb) / np.linalg.norm(d2z if np.any(mu2m) else d2zb)
    return float(r1), float(r2)


def standard_pair(n: int = 512, half_width: float = BERS_HALF_WIDTH):
    """Compact bumps ``0.5`` at ``2i`` and ``0.5i`` at ``0.3 - 2i`` (radius 1.6), glued."""
    from .presets import compact_bump

    spec = GridSpec(0j, half_width, n)
    mu1 = BeltramiCoefficient(compact_bump(spec, 2j, 0.5, 1.6))
    mu2 = BeltramiCoefficient(compact_bump(spec, 0.3 - 2j, 0.5j, 1.6))
    return glue(mu1, mu2)


@dataclass
class BersResult:
    uniformization: Uniformization
    metric: MetricComponents
    defect: float
    separation: float
    residuals: tuple[float, float]

    def summary(self) -> dict:
        rep = self.uniformization.report
        return {
            "hyperbolic_defect": self.defect,
            "min_separation_im_ge_0.5": self.separation,
            "residual_f1": self.residuals[0],
            "residual_f2bar": self.residuals[1],
            "iterations": rep.iterations,
            "converged": bool(rep.converged),
            "convention": self.metric.convention,
        }


def run_pipeline(glued: GluedCoefficient, tol: float = 1e-12, y_min: float = 0.5) -> BersResult:
    """Glue, uniformize, assemble the metric and measure it against the hyperbolic one."""
    uni = simultaneous_uniformize(glued, tol)
    metric = metric_from(uni)
    return BersResult(
        uniformization=uni,
        metric=metric,
        defect=hyperbolic_defect(metric, y_min),
        separation=min_separation(uni, y_min),
        residuals=half_plane_residuals(uni, glued),
    )


def write_metric(components: MetricComponents, out_dir: str | Path, extra: dict | None = None) -> Path:
    """Three FLD1 files (zero below the sub-grid) plus ``metric.json``; returns the JSON path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, fld in components.as_fields().items():
        files[name] = write_field(fld, out / f"{name}.fld").name
    spec = components.grid.spec
    manifest = {
        "convention": components.convention,
        "files": files,
        "subgrid_rows": [int(components.grid.rows[0]), int(components.grid.rows[-1])],
        "grid": {"n": spec.n, "half_width": spec.half_width,
                 "center": [spec.center.real, spec.center.imag]},
    }
    if extra:
        manifest.update(extra)
    path = out / "metric.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
