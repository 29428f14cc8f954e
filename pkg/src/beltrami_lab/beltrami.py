"""Neumann-series solver for the Beltrami equation and the elliptic-estimate harness.

The inhomogeneous equation ``(d/dzbar - mu d/dz) u = v`` is rewritten with
``h = d/dzbar u`` as the integral equation ``h - mu T h = v`` and solved by the
fixed-point iteration ``h <- v + mu T h``, which contracts with factor
``||mu||_inf`` in L2 because ``T`` is an L2 isometry.  The solution is
``u = P h`` and, in the same discrete calculus, ``d/dzbar u = h`` and
``d/dz u = T h``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field

import numpy as np

from .exceptions import DegenerateNormalizationError, InvariantError
from .grid import (
    ComplexField,
    DiskRegion,
    GridSpec,
    SobolevSpec,
    derivative_table,
    sobolev_norm,
    wirtinger_arrays,
)
from .transforms import TransformPlan, default_plan, support_radius

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 500


@dataclass(frozen=True, eq=False)
class BeltramiCoefficient:
    """A field with ``sup |mu| < 1`` supported in the central half of its grid.

    Direction fields (the ``a`` of a variation) reuse this type with
    ``allow_large=True``, which lifts the sup-norm bound.
    """

    field: ComplexField
    allow_large: bool = False
    sup_norm: float = dc_field(init=False)
    support_radius: float = dc_field(init=False)

    def __post_init__(self):
        sup = self.field.abs_max()
        rad = support_radius(self.field)
        if not self.allow_large and not sup < 1:
            raise InvariantError(f"Beltrami coefficient must have sup norm < 1, got {sup:.6g}")
        if rad > self.field.spec.half_width / 2:
            raise InvariantError(
                f"coefficient support radius {rad:.4g} exceeds half of the grid half-width "
                f"({self.field.spec.half_width / 2:.4g})"
            )
        object.__setattr__(self, "sup_norm", sup)
        object.__setattr__(self, "support_radius", rad)

    @property
    def spec(self) -> GridSpec:
        return self.field.spec

    @property
    def samples(self) -> np.ndarray:
        return self.field.samples

    @classmethod
    def zeros(cls, spec: GridSpec) -> "BeltramiCoefficient":
        return cls(ComplexField.zeros(spec))

    @classmethod
    def direction(cls, field: ComplexField) -> "BeltramiCoefficient":
        return cls(field, allow_large=True)

    def __add__(self, other: "BeltramiCoefficient") -> "BeltramiCoefficient":
        return BeltramiCoefficient(self.field + other.field)

    def perturbed(self, direction: "BeltramiCoefficient | ComplexField", s: complex) -> "BeltramiCoefficient":
        """``mu + s * a``; raises :class:`InvariantError` if the result leaves the unit ball."""
        a = direction.field if isinstance(direction, BeltramiCoefficient) else direction
        return BeltramiCoefficient(self.field + s * a)

    def sobolev_sup_norm(self, k: int, region: DiskRegion | None = None) -> float:
        """``W^{k,inf}`` norm: sum over derivatives of order <= k of the max modulus (over ``region``)."""
        mask = region.mask(self.spec) if region is not None else slice(None)
        table = derivative_table(self.samples, self.spec.spacing, k)
        return float(sum(np.abs(d[mask]).max() for d in table.values()))


@dataclass(eq=False)
class SolveReport:
    """Solution of one Neumann solve plus its iteration diagnostics.

    ``dz`` and ``dzbar`` hold the Wirtinger derivatives of ``solution`` in the
    transform calculus (``T h`` and ``h`` up to normalisation), which is the
    calculus the residual is certified in.
    """

    solution: ComplexField
    iterations: int
    residual_history: list[float]
    contraction_estimate: float
    converged: bool = True
    residual: float = 0.0
    dz: ComplexField | None = None
    dzbar: ComplexField | None = None
    density: ComplexField | None = None

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual_history": [float(r) for r in self.residual_history],
            "contraction_estimate": float(self.contraction_estimate),
            "converged": bool(self.converged),
            "residual": float(self.residual),
        }


def _as_coefficient(mu) -> BeltramiCoefficient:
    if isinstance(mu, BeltramiCoefficient):
        return mu
    if isinstance(mu, ComplexField):
        return BeltramiCoefficient(mu)
    raise TypeError(f"expected a BeltramiCoefficient, got {type(mu).__name__}")


def _contraction(history: list[float]) -> float:
    tail = [history[m] / history[m - 1] for m in range(2, len(history)) if history[m - 1] > 0]
    if not tail:
        return 0.0
    return float(np.exp(np.mean(np.log(np.maximum(tail, 1e-300)))))


def neumann(plan: TransformPlan, mu: np.ndarray, v: np.ndarray, tol: float, max_iter: int):
    """Iterate ``h <- v + mu T h`` from ``h = v``.

    Returns ``(h, T h, history, iterations, converged)`` where ``history[m]`` is
    ``||h_{m+1} - h_m|| / ||v||``.
    """
    vnorm = np.linalg.norm(v)
    h = v
    th = plan.beurling_array(h)
    history: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        new = v + mu * th
        step = np.linalg.norm(new - h)
        hnorm = np.linalg.norm(new)
        history.append(float(step / vnorm) if vnorm > 0 else 0.0)
        h = new
        th = plan.beurling_array(h)
        if step <= tol * hnorm or hnorm == 0:
            converged = True
            break
    return h, th, history, iterations, converged


def solve_inhomogeneous(mu, v: ComplexField, tol: float = DEFAULT_TOL,
                        max_iter: int = DEFAULT_MAX_ITER,
                        plan: TransformPlan | None = None) -> SolveReport:
    """Solve ``(d/dzbar - mu d/dz) u = v`` with ``u = P h`` (so ``u`` vanishes at 0).

    A run that exhausts ``max_iter`` is returned with ``converged=False``.
    """
    mu = _as_coefficient(mu)
    if not tol > 0:
        raise ValueError("tol must be positive")
    if v.spec != mu.spec:
        raise ValueError("coefficient and right-hand side live on different grids")
    plan = plan or default_plan(mu.spec)
    h, th, history, iterations, converged = neumann(plan, mu.samples, v.samples, tol, max_iter)
    if not converged:
        log.warning("Neumann iteration did not reach tol=%g in %d iterations", tol, max_iter)
    u = plan.cauchy_array(h)
    vnorm = np.linalg.norm(v.samples)
    res = np.linalg.norm(h - mu.samples * th - v.samples)
    return SolveReport(
        solution=ComplexField(mu.spec, u),
        iterations=iterations,
        residual_history=history,
        contraction_estimate=_contraction(history),
        converged=converged,
        residual=float(res / vnorm) if vnorm > 0 else float(res),
        dz=ComplexField(mu.spec, th),
        dzbar=ComplexField(mu.spec, h),
        density=ComplexField(mu.spec, h),
    )


def canonical_solution(mu, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                       plan: TransformPlan | None = None) -> SolveReport:
    """Normalised solution ``f`` of ``f_zbar = mu f_z`` with ``f(0) = 0`` and ``f(1) = 1``.

    ``f_raw = z + P h`` where ``h - mu T h = mu``; the value at 1 is read by bilinear
    interpolation and ``f = f_raw / f_raw(1)``.
    """
    mu = _as_coefficient(mu)
    spec = mu.spec
    if not spec.contains(1.0, margin=spec.spacing):
        raise ValueError("the point 1 must lie inside the grid, away from its boundary")
    plan = plan or default_plan(spec)
    h, th, history, iterations, converged = neumann(plan, mu.samples, mu.samples, tol, max_iter)
    if not converged:
        log.warning("Neumann iteration did not reach tol=%g in %d iterations", tol, max_iter)
    f_raw = spec.nodes() + plan.cauchy_array(h)
    scale = ComplexField(spec, f_raw).value_at(1.0)
    if abs(scale) < 1e-8:
        raise DegenerateNormalizationError(f"|f_raw(1)| = {abs(scale):.3g} is too small to normalise")
    munorm = np.linalg.norm(mu.samples)
    res = np.linalg.norm(h - mu.samples * th - mu.samples)
    return SolveReport(
        solution=ComplexField(spec, f_raw / scale),
        iterations=iterations,
        residual_history=history,
        contraction_estimate=_contraction(history),
        converged=converged,
        residual=float(res / munorm) if munorm > 0 else float(res),
        dz=ComplexField(spec, (1 + th) / scale),
        dzbar=ComplexField(spec, h / scale),
        density=ComplexField(spec, h),
    )


def beltrami_residual(mu, u: ComplexField, v: ComplexField | None = None,
                      region: DiskRegion | None = None) -> float:
    """L2 norm of ``u_zbar - mu u_z - v`` with finite-difference derivatives."""
    mu_arr = mu.samples
    dz, dzb = wirtinger_arrays(u.samples, u.spec.spacing)
    r = dzb - mu_arr * dz
    if v is not None:
        r = r - v.samples
    if region is not None:
        r = r[region.mask(u.spec)]
    return float(np.sqrt(np.sum(np.abs(r) ** 2)) * u.spec.spacing)


def elliptic_ratio(mu, u: ComplexField, v: ComplexField, r: float, R: float, k: int, p: float,
                   check_residual: bool = True, residual_tol: float = 1e-6) -> float:
    """``||u||_{W^{k+1,p}(D_r)} / (||u||_{W^{k,p}(D_R)} + ||v||_{W^{k,p}(D_R)})``.

    With ``check_residual`` the triple must satisfy the equation on ``D_R`` to
    ``residual_tol`` in L2, relative to ``||v||`` there (absolute if ``v`` vanishes).
    """
    if not 0 < r < R:
        raise ValueError(f"need 0 < r < R, got r={r}, R={R}")
    outer = DiskRegion(0j, R)
    if check_residual:
        res = beltrami_residual(mu, u, v, outer)
        scale = float(np.linalg.norm(v.samples[outer.mask(v.spec)])) * v.spec.spacing
        if res > residual_tol * (scale if scale > 0 else 1.0):
            raise InvariantError(f"(mu, u, v) do not satisfy the equation: residual {res:.3g}")
    num = sobolev_norm(u, SobolevSpec(k + 1, p, DiskRegion(0j, r)))
    den = sobolev_norm(u, SobolevSpec(k, p, outer)) + sobolev_norm(v, SobolevSpec(k, p, outer))
    if den == 0:
        raise ValueError("zero denominator: u and v vanish on the outer disk")
    return num / den


def remark_fixture_slope(q: float, radii=None, n_angles: int = 256) -> float:
    """Log-log slope of ``max_{|z|=rho} |grad mu_f|`` against ``rho`` for ``f = z + |z|^(2-2/q)``."""
    from .presets import remark_fixture

    if not q > 2:
        raise ValueError("q must exceed 2")
    radii = np.asarray(radii if radii is not None else np.geomspace(1e-2, 1e-4, 9), float)
    if np.any(radii <= 0) or np.any(radii >= 1) or np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be a decreasing list inside (0, 1)")
    _, mu = remark_fixture(q)
    angles = np.exp(2j * np.pi * (np.arange(n_angles) + 0.5) / n_angles)
    peaks = []
    for rho in radii:
        z = rho * angles
        d = 1e-4 * rho
        mx = (mu(z + d) - mu(z - d)) / (2 * d)
        my = (mu(z + 1j * d) - mu(z - 1j * d)) / (2 * d)
        peaks.append(np.sqrt(np.abs(mx) ** 2 + np.abs(my) ** 2).max())
    slope, _ = np.polyfit(np.log(radii), np.log(peaks), 1)
    return float(slope)


# coefficient supports reach radius ~2.7, which must sit in the central half
ESTIMATE_HALF_WIDTH = 6.0


@dataclass(frozen=True)
class ManufacturedCase:
    """``u = A exp(-|z - c|^2 / w^2)``, ``mu = B exp(-|z - d|^2 / s^2)`` and ``v`` in closed form."""

    case_id: int
    amp_u: complex
    center_u: complex
    width_u: float
    amp_mu: complex
    center_mu: complex
    width_mu: float
    r: float
    R: float

    def sample(self, spec: GridSpec) -> tuple[BeltramiCoefficient, ComplexField, ComplexField]:
        z = spec.nodes()
        u = self.amp_u * np.exp(-np.abs(z - self.center_u) ** 2 / self.width_u**2)
        mu = self.amp_mu * np.exp(-np.abs(z - self.center_mu) ** 2 / self.width_mu**2)
        u_z = -np.conj(z - self.center_u) / self.width_u**2 * u
        u_zb = -(z - self.center_u) / self.width_u**2 * u
        v = u_zb - mu * u_z
        return BeltramiCoefficient(ComplexField(spec, mu)), ComplexField(spec, u), ComplexField(spec, v)


def manufactured_family(n_cases: int = 20, seed: int = 0, k_bound: int = 2,
                        bound: float = 2.0) -> list[ManufacturedCase]:
    """Seeded cases whose coefficient has ``W^{k_bound,inf}(D_R)`` norm at most ``bound``.

    The norm is evaluated on a fine reference grid and the amplitude scaled down when
    needed, so the bound does not depend on the grid a sweep later runs on.
    """
    rng = np.random.default_rng(seed)
    ref = GridSpec(0j, ESTIMATE_HALF_WIDTH, 512)
    cases = []
    for cid in range(n_cases):
        r = float(rng.uniform(0.5, 1.0))
        R = float(r + rng.uniform(0.5, 1.0))
        case = ManufacturedCase(
            case_id=cid,
            amp_u=complex(*rng.normal(size=2)),
            center_u=complex(*rng.uniform(-0.8, 0.8, size=2)),
            width_u=float(rng.uniform(0.4, 0.8)),
            amp_mu=0.8 * np.exp(2j * np.pi * rng.uniform()) * float(rng.uniform(0.2, 1.0)),
            center_mu=complex(*rng.uniform(-0.4, 0.4, size=2)),
            width_mu=float(rng.uniform(0.25, 0.4)),
            r=r,
            R=R,
        )
        mu, _, _ = case.sample(ref)
        norm = mu.sobolev_sup_norm(k_bound, DiskRegion(0j, R))
        if norm > bound:
            case = ManufacturedCase(**{**case.__dict__, "amp_mu": case.amp_mu * bound / norm * 0.999})
        cases.append(case)
    return cases


def elliptic_sweep(spec: GridSpec, cases, k: int, p: float) -> list[dict]:
    """One ``elliptic_ratio`` row per case, in the column order of the ``estimate`` CSV."""
    rows = []
    for case in cases:
        mu, u, v = case.sample(spec)
        rows.append({"case_id": case.case_id, "k": k, "p": p, "r": case.r, "R": case.R,
                     "ratio": elliptic_ratio(mu, u, v, case.r, case.R, k, p)})
    return rows
