"""First variation of the canonical solution with respect to its coefficient.

``theta(mu, a)`` is the derivative of ``mu -> f^mu`` in the direction ``a``.  It
solves ``(d/dzbar - mu d/dz) theta = a * d/dz f^mu`` and vanishes at 0 and 1.
The remaining functions compare it with difference quotients of actual
canonical solves, which is how holomorphic dependence shows up numerically.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from .beltrami import (
    BeltramiCoefficient,
    SolveReport,
    canonical_solution,
    solve_inhomogeneous,
)
from .grid import ComplexField, DiskRegion, SobolevSpec, sobolev_norm
from .transforms import TransformPlan, default_plan

VARIATION_TOL = 1e-12
REPORT_DISK = DiskRegion(0j, 2.0)


def _coef(x) -> BeltramiCoefficient:
    if isinstance(x, BeltramiCoefficient):
        return x
    return BeltramiCoefficient(x)


def _direction(x) -> ComplexField:
    return x.field if isinstance(x, BeltramiCoefficient) else x


def report_norm(field: ComplexField, k: int, region: DiskRegion = REPORT_DISK) -> float:
    return sobolev_norm(field, SobolevSpec(k + 1, 2, region))


def _solve_all(coefs: Sequence[BeltramiCoefficient], tol: float, jobs: int = 1) -> list[SolveReport]:
    if jobs > 1 and len(coefs) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda m: canonical_solution(m, tol), coefs))
    return [canonical_solution(m, tol) for m in coefs]


@dataclass
class ThetaResult:
    """``theta`` together with its transform-calculus derivatives and the base solve."""

    theta: ComplexField
    dz: ComplexField
    dzbar: ComplexField
    base: SolveReport
    rhs: ComplexField
    iterations: int


def theta_full(mu, a, tol: float = VARIATION_TOL, base: SolveReport | None = None,
               plan: TransformPlan | None = None) -> ThetaResult:
    mu = _coef(mu)
    a = _direction(a)
    plan = plan or default_plan(mu.spec)
    base = base or canonical_solution(mu, tol, plan=plan)
    rhs = a * base.dz
    rep = solve_inhomogeneous(mu, rhs, tol, plan=plan)
    c = rep.solution.value_at(1.0)
    f = base.solution
    return ThetaResult(
        theta=rep.solution - c * f,
        dz=rep.dz - c * base.dz,
        dzbar=rep.dzbar - c * base.dzbar,
        base=base,
        rhs=rhs,
        iterations=rep.iterations,
    )


def theta(mu, a, tol: float = VARIATION_TOL) -> ComplexField:
    """Derivative of the canonical solution in direction ``a``, normalised by ``theta(0) = theta(1) = 0``."""
    return theta_full(mu, a, tol).theta


def finite_difference_derivative(mu, a, s: complex, tol: float = VARIATION_TOL,
                                 alpha: Callable[[complex], ComplexField] | None = None,
                                 base: SolveReport | None = None) -> ComplexField:
    """One-sided quotient ``(f^{mu + s a + s alpha(s)} - f^mu) / s``."""
    mu = _coef(mu)
    step = s * _direction(a)
    if alpha is not None:
        step = step + s * alpha(s)
    moved = BeltramiCoefficient(mu.field + step)
    base = base or canonical_solution(mu, tol)
    return (canonical_solution(moved, tol).solution - base.solution) / s


def central_difference(mu, a, s: float, tol: float = VARIATION_TOL,
                       alpha: Callable[[complex], ComplexField] | None = None,
                       jobs: int = 1) -> ComplexField:
    """``(f^{mu + s a + s alpha(s)} - f^{mu - s a - s alpha(-s)}) / (2 s)``."""
    mu = _coef(mu)
    a = _direction(a)

    def shifted(t):
        step = t * a
        if alpha is not None:
            step = step + t * alpha(t)
        return BeltramiCoefficient(mu.field + step)

    plus, minus = _solve_all([shifted(s), shifted(-s)], tol, jobs)
    return (plus.solution - minus.solution) / (2 * s)


def cauchy_riemann_defect(mu, a, s: float, k: int = 0, tol: float = VARIATION_TOL,
                          antiholomorphic: bool = False, jobs: int = 1,
                          region: DiskRegion = REPORT_DISK) -> float:
    """``W^{k+1,2}`` norm of the discrete ``d/d(tbar)`` of ``t -> f^{mu + t a}`` at ``t = 0``.

    ``antiholomorphic=True`` switches to the family ``mu + conj(t) a`` as a control.
    """
    mu = _coef(mu)
    a = _direction(a)
    im = -1j if antiholomorphic else 1j
    coefs = [BeltramiCoefficient(mu.field + t * a) for t in (s, -s, im * s, -im * s)]
    fp, fm, gp, gm = (r.solution for r in _solve_all(coefs, tol, jobs))
    d_re = (fp - fm) / (2 * s)
    d_im = (gp - gm) / (2 * s)
    return report_norm(0.5 * (d_re + 1j * d_im), k, region)


def development_residual(mu, a, s_list: Sequence[float], k: int = 0,
                         tol: float = VARIATION_TOL,
                         region: DiskRegion = REPORT_DISK) -> list[tuple[float, float]]:
    """``||f^{mu + s a} - f^mu - s theta|| / |s|`` in ``W^{k+1,2}`` for each ``s``."""
    mu = _coef(mu)
    a = _direction(a)
    th = theta_full(mu, a, tol)
    f0 = th.base.solution
    out = []
    for s in s_list:
        fs = canonical_solution(BeltramiCoefficient(mu.field + s * a), tol).solution
        out.append((s, report_norm(fs - f0 - s * th.theta, k, region) / abs(s)))
    return out


def stability_check(mu_seq, a_seq, mu, a, k: int = 0, tol: float = VARIATION_TOL,
                    region: DiskRegion = REPORT_DISK) -> list[float]:
    """``||theta^{mu_n, a_n} - theta^{mu, a}||_{W^{k+1,2}}`` along the given sequences."""
    ref = theta(mu, a, tol)
    return [report_norm(theta(mu_n, a_n, tol) - ref, k, region) for mu_n, a_n in zip(mu_seq, a_seq)]


@dataclass
class VariationReport:
    theta: ComplexField
    fd_derivative: ComplexField
    agreement_error: float
    cr_defect: float
    development_decays: list[tuple[float, float]] = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "agreement_error": self.agreement_error,
            "cr_defect": self.cr_defect,
            "development_decays": [[float(s), float(r)] for s, r in self.development_decays],
        }


def variation_report(mu, a, s: float = 1e-3, s_list: Sequence[float] = (1e-1, 3e-2, 1e-2, 3e-3),
                     k: int = 0, tol: float = VARIATION_TOL, jobs: int = 1) -> VariationReport:
    """Bundle theta, its central-difference check, the CR defect and the development table."""
    th = theta(mu, a, tol)
    fd = central_difference(mu, a, s, tol, jobs=jobs)
    return VariationReport(
        theta=th,
        fd_derivative=fd,
        agreement_error=report_norm(fd - th, k),
        cr_defect=cauchy_riemann_defect(mu, a, 1e-2, k, tol, jobs=jobs),
        development_decays=development_residual(mu, a, s_list, k, tol),
    )


def richardson_limit(mu, a, s: float, tol: float = VARIATION_TOL,
                     alpha: Callable[[complex], ComplexField] | None = None) -> ComplexField:
    """Estimate ``lim_{s->0}`` of the one-sided quotient by Richardson extrapolation from ``s`` and ``s/2``."""
    mu = _coef(mu)
    base = canonical_solution(mu, tol)
    q1 = finite_difference_derivative(mu, a, s, tol, alpha, base)
    q2 = finite_difference_derivative(mu, a, s / 2, tol, alpha, base)
    return 2 * q2 - q1


def standard_family(n: int = 256, half_width: float = 4.0):
    """``mu = 0.4`` Gaussian at -0.5, ``a`` = unit Gaussian at 0.5i (width 0.25)."""
    from .grid import GridSpec
    from .presets import gaussian_bump

    spec = GridSpec(0j, half_width, n)
    mu = BeltramiCoefficient(gaussian_bump(spec, -0.5, 0.4, 0.25))
    a = BeltramiCoefficient.direction(gaussian_bump(spec, 0.5j, 1.0, 0.25))
    return mu, a


def theta_residual(result: ThetaResult, mu) -> float:
    """Relative L2 residual of the theta equation in the transform calculus."""
    mu = _coef(mu)
    r = result.dzbar.samples - mu.samples * result.dz.samples - result.rhs.samples
    return float(np.linalg.norm(r) / np.linalg.norm(result.rhs.samples))
