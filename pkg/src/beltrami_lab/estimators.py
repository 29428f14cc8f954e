"""scikit-learn style wrappers around the solver and the two transforms.

Inputs are complex ``(n, n)`` sample arrays (or :class:`ComplexField`) on a grid
centred at 0 with the estimator's ``half_width``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_field, check_points
from .beltrami import BeltramiCoefficient, canonical_solution, solve_inhomogeneous
from .grid import bilinear
from .transforms import TransformPlan


class BeltramiSolver(BaseEstimator, TransformerMixin):
    """``fit(mu)`` computes the canonical solution; ``transform(v)`` solves the inhomogeneous equation.

    ``predict(points)`` evaluates the fitted canonical solution by bilinear interpolation.
    """

    def __init__(self, half_width: float = 4.0, tol: float = 1e-10, max_iter: int = 500):
        self.half_width = half_width
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        field = as_field(X, half_width=self.half_width, name="mu")
        self.coefficient_ = BeltramiCoefficient(field)
        self.spec_ = field.spec
        rep = canonical_solution(self.coefficient_, self.tol, self.max_iter)
        self.report_ = rep
        self.solution_ = rep.solution.samples
        self.n_iter_ = rep.iterations
        self.converged_ = rep.converged
        return self

    def transform(self, X):
        check_is_fitted(self, "coefficient_")
        v = as_field(X, self.spec_, name="v")
        return solve_inhomogeneous(self.coefficient_, v, self.tol, self.max_iter).solution.samples

    def predict(self, X):
        check_is_fitted(self, "solution_")
        pts = check_points(X)
        if not all(self.spec_.contains(z) for z in pts):
            raise ValueError("evaluation points must lie inside the grid")
        return np.array([bilinear(self.spec_, self.solution_, z) for z in pts])


class _PlanTransformer(BaseEstimator, TransformerMixin):
    def __init__(self, half_width: float = 4.0, padding_factor: int = 2, kernel: str = "free"):
        self.half_width = half_width
        self.padding_factor = padding_factor
        self.kernel = kernel

    def fit(self, X, y=None):
        field = as_field(X, half_width=self.half_width)
        self.plan_ = TransformPlan(field.spec, self.padding_factor, self.kernel)
        return self

    def _field(self, X):
        check_is_fitted(self, "plan_")
        return as_field(X, self.plan_.spec)


class BeurlingTransformer(_PlanTransformer):
    """``X -> T X`` with the plan built at ``fit``."""

    def transform(self, X):
        return self.plan_.beurling_array(self._field(X).samples)


class CauchyTransformer(_PlanTransformer):
    """``X -> P X`` (normalised to vanish at 0)."""

    def transform(self, X):
        return self.plan_.cauchy_array(self._field(X).samples)
