"""Vector fields with Jacobian access for identity-residual testing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import EvaluationError

_SINGULARITY_EPS = 1e-12


@dataclass(frozen=True)
class TestFn:
    name: str
    f: Callable[[np.ndarray], np.ndarray]  # (m, d) -> (m, d)
    jac: Callable[[np.ndarray], np.ndarray]  # (m, d) -> (m, d, d)
    partial: Callable[[np.ndarray, int, int], np.ndarray]  # d_j f_i, (m,)
    needs_origin_guard: bool = False

    def guard(self, X: np.ndarray) -> None:
        if self.needs_origin_guard:
            sq = np.einsum("ij,ij->i", X, X)
            if np.any(sq < _SINGULARITY_EPS):
                raise EvaluationError(f"{self.name} evaluated within 1e-12 of the origin")


def linear_map(A: np.ndarray) -> TestFn:
    A = np.asarray(A, dtype=float)

    def f(X):
        return X @ A.T

    def jac(X):
        return np.broadcast_to(A, (X.shape[0],) + A.shape).copy()

    def partial(X, i, j):
        return np.full(X.shape[0], A[i, j])

    return TestFn(name="linear", f=f, jac=jac, partial=partial)


def coordinate_quadratic(i: int) -> TestFn:
    """f(x) = x_i^2 e_i; the only nonzero partial is d_i f_i = 2 x_i."""

    def f(X):
        out = np.zeros_like(X)
        out[:, i] = X[:, i] ** 2
        return out

    def jac(X):
        m, d = X.shape
        out = np.zeros((m, d, d))
        out[:, i, i] = 2.0 * X[:, i]
        return out

    def partial(X, a, b):
        if a == i and b == i:
            return 2.0 * X[:, i]
        return np.zeros(X.shape[0])

    return TestFn(name=f"coordinate_quadratic_{i}", f=f, jac=jac, partial=partial)


def shrink_direction() -> TestFn:
    """g0(x) = x / ||x||^2, the field behind the shrinkage estimator."""

    def f(X):
        sq = np.einsum("ij,ij->i", X, X)
        return X / sq[:, None]

    def jac(X):
        m, d = X.shape
        sq = np.einsum("ij,ij->i", X, X)
        out = np.zeros((m, d, d))
        idx = np.arange(d)
        out[:, idx, idx] = (1.0 / sq)[:, None]
        out -= 2.0 * np.einsum("mi,mj->mij", X, X) / (sq**2)[:, None, None]
        return out

    def partial(X, i, j):
        sq = np.einsum("ij,ij->i", X, X)
        val = -2.0 * X[:, i] * X[:, j] / sq**2
        if i == j:
            val = val + 1.0 / sq
        return val

    return TestFn(name="g0", f=f, jac=jac, partial=partial, needs_origin_guard=True)


def default_family(d: int, include_g0: bool = True) -> list[TestFn]:
    rng = np.random.default_rng(20240517)
    A = rng.normal(0.0, 1.0, (d, d))
    fams = [linear_map(A), coordinate_quadratic(0)]
    if include_g0 and d >= 1:
        fams.append(shrink_direction())
    return fams
