"""Stein kernels: matrix fields T with E<X-theta, f(X)> = E<T, grad f(X)>.

Kernels come in structured representations (constant, scalar profile times a
fixed matrix, diagonal, dense) so Monte Carlo contractions stay cheap.
`discrepancy_stats` measures how far a kernel sits from its covariance, the
quantity that drives the non-Gaussian risk and SURE-bias bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._mc import Accumulator, RiskReport, chunk_plan, report_from, substream
from .errors import EvaluationError, ParameterError
from .noise_models import NoiseModel
from .quadrature import RadialProfile
from .testfns import TestFn


class SteinKernel:
    """Base kernel; subclasses fill in one of the structured evaluations."""

    construction = "abstract"

    def __init__(self, sigma: np.ndarray):
        sigma = np.asarray(sigma, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ParameterError("kernel mean matrix must be square")
        if not np.allclose(sigma, sigma.T):
            raise ParameterError("kernel mean matrix must be symmetric")
        self.sigma = sigma
        self.d = sigma.shape[0]

    # mean_T: the matrix the kernel is unbiased for (the covariance)
    @property
    def mean_T(self) -> np.ndarray:
        return self.sigma

    # -- single-point API ---------------------------------------------------
    def evaluate(self, y: np.ndarray) -> np.ndarray:
        """T(y) as a d x d symmetric matrix for one centered point."""
        return self.matrices(np.asarray(y, dtype=float)[None, :])[0]

    # -- batched API --------------------------------------------------------
    def matrices(self, Y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def trace_values(self, Y: np.ndarray) -> np.ndarray:
        return np.trace(self.matrices(Y), axis1=1, axis2=2)

    def frob_dev_values(self, Y: np.ndarray) -> np.ndarray:
        dev = self.matrices(Y) - self.sigma
        return np.einsum("mij,mij->m", dev, dev)

    def contract(self, Y: np.ndarray, J: np.ndarray) -> np.ndarray:
        """<T(y), J> rowwise for per-row matrices J of shape (m, d, d)."""
        return np.einsum("mij,mij->m", self.matrices(Y), J)


class ConstantKernel(SteinKernel):
    construction = "constant"

    def matrices(self, Y):
        return np.broadcast_to(self.sigma, (Y.shape[0],) + self.sigma.shape).copy()

    def trace_values(self, Y):
        return np.full(Y.shape[0], np.trace(self.sigma))

    def frob_dev_values(self, Y):
        return np.zeros(Y.shape[0])

    def contract(self, Y, J):
        return np.einsum("ij,mij->m", self.sigma, J)


class ScalarProfileKernel(SteinKernel):
    """T(y) = s(y) * M for a fixed symmetric matrix M and scalar profile s."""

    def __init__(self, sigma, matrix, scale_fn, construction="scalar_profile"):
        super().__init__(sigma)
        self.matrix = np.asarray(matrix, dtype=float)
        self.scale_fn = scale_fn
        self.construction = construction
        # mean scale: sigma = mean_scale * matrix must be consistent
        self._trace_m = float(np.trace(self.matrix))

    def scales(self, Y: np.ndarray) -> np.ndarray:
        return self.scale_fn(Y)

    def matrices(self, Y):
        return self.scales(Y)[:, None, None] * self.matrix

    def trace_values(self, Y):
        return self.scales(Y) * self._trace_m

    def frob_dev_values(self, Y):
        # ||s M - Sigma||^2; exact when Sigma = s0 M for the mean scale s0
        dev_scale = self.scales(Y)[:, None, None] * self.matrix - self.sigma
        return np.einsum("mij,mij->m", dev_scale, dev_scale)

    def contract(self, Y, J):
        return self.scales(Y) * np.einsum("ij,mij->m", self.matrix, J)


class DiagonalKernel(SteinKernel):
    """T(y) = diag(T_1(y_1), ..., T_d(y_d)) for independent coordinates."""

    construction = "product_diagonal"

    def __init__(self, sigma_diag, coordinate_kernels):
        sigma_diag = np.asarray(sigma_diag, dtype=float)
        super().__init__(np.diag(sigma_diag))
        self.sigma_diag = sigma_diag
        self.coordinate_kernels = coordinate_kernels  # list of vectorized T_i

    def diagonals(self, Y: np.ndarray) -> np.ndarray:
        cols = [k(Y[:, i]) for i, k in enumerate(self.coordinate_kernels)]
        return np.stack(cols, axis=1)

    def matrices(self, Y):
        m, d = Y.shape
        out = np.zeros((m, d, d))
        idx = np.arange(d)
        out[:, idx, idx] = self.diagonals(Y)
        return out

    def trace_values(self, Y):
        return self.diagonals(Y).sum(axis=1)

    def frob_dev_values(self, Y):
        dev = self.diagonals(Y) - self.sigma_diag
        return np.einsum("mi,mi->m", dev, dev)

    def contract(self, Y, J):
        idx = np.arange(self.d)
        return np.einsum("mi,mi->m", self.diagonals(Y), J[:, idx, idx])


class TransformedKernel(SteinKernel):
    """Kernel of A Y from a kernel of Y: y -> A T(A^-1 y) A'."""

    construction = "transformed"

    def __init__(self, base: SteinKernel, A):
        A = np.asarray(A, dtype=float)
        if A.shape != (base.d, base.d):
            raise ParameterError("A must match the kernel dimension")
        det = np.linalg.det(A)
        if abs(det) < 1e-300:
            raise ParameterError("transform matrix must be invertible")
        super().__init__(A @ base.sigma @ A.T)
        self.base = base
        self.A = A
        self._Ainv = np.linalg.inv(A)

    def matrices(self, Y):
        inner = self.base.matrices(Y @ self._Ainv.T)
        return np.einsum("ij,mjk,lk->mil", self.A, inner, self.A)


class DenseKernel(SteinKernel):
    construction = "dense"

    def __init__(self, sigma, matrix_fn):
        super().__init__(sigma)
        self._fn = matrix_fn

    def matrices(self, Y):
        return self._fn(Y)


# ---------------------------------------------------------------------------
# constructors


def gaussian_kernel(sigma: np.ndarray) -> ConstantKernel:
    return ConstantKernel(np.asarray(sigma, dtype=float))


def student_kernel(k: int, d: int) -> ScalarProfileKernel:
    """Closed-form kernel of the Gamma-mixture Student law.

    T(y) = ((||y||^2 + k s^2) / (d + k - 2)) Id with s^2 = k/(k-2); its mean
    is the model covariance s^4 Id.
    """
    if k < 5 or d < 1:
        raise ParameterError("student kernel needs k >= 5 and d >= 1")
    s2 = k / (k - 2.0)

    def scale(Y):
        return (np.einsum("ij,ij->i", Y, Y) + k * s2) / (d + k - 2.0)

    return ScalarProfileKernel(
        sigma=s2**2 * np.eye(d), matrix=np.eye(d), scale_fn=scale, construction="student_closed_form"
    )


def elliptical_kernel(generator, dispersion, theta=None, *, exact: bool = False,
                      q_table_max: float = 1e4) -> ScalarProfileKernel:
    """Kernel of an elliptical law from its density generator.

    T(x) = [ tail(q/2) / phi(q/2) ] * dispersion, q the quadratic form of the
    dispersion matrix.  Tail integrals run through adaptive quadrature; with
    exact=False a dense tabulation of the radial profile is used so that
    Monte Carlo sweeps stay cheap (tabulation error is far below MC noise).
    """
    disp = np.asarray(dispersion, dtype=float)
    d = disp.shape[0]
    eig = np.linalg.eigvalsh(disp)
    if eig[0] <= 0:
        raise ParameterError("dispersion must be positive definite")
    disp_inv = np.linalg.inv(disp)
    profile = RadialProfile(generator)
    ratio = profile.exact if exact else profile.table(q_table_max)

    from .quadrature import elliptical_second_moment

    mean_scale = elliptical_second_moment(generator, d) / d

    def scale(Y):
        q = np.einsum("mi,ij,mj->m", Y, disp_inv, Y)
        vals = ratio(q)
        if np.any(~np.isfinite(vals)):
            raise EvaluationError("elliptical kernel evaluated outside the effective support")
        return vals

    return ScalarProfileKernel(
        sigma=mean_scale * disp, matrix=disp, scale_fn=scale, construction="elliptical_radial"
    )


def product_kernel(laws_or_fns, variances=None) -> DiagonalKernel:
    """Diagonal kernel from per-coordinate 1-D kernels.

    Accepts laws1d.Law1D instances (using their closed forms) or raw
    callables paired with `variances`.
    """
    kernels, sig = [], []
    for i, item in enumerate(laws_or_fns):
        if hasattr(item, "kernel") and hasattr(item, "variance"):
            kernels.append(item.kernel)
            sig.append(item.variance)
        else:
            if variances is None:
                raise ParameterError("raw kernel callables need explicit variances")
            kernels.append(item)
            sig.append(variances[i])
    return DiagonalKernel(np.asarray(sig, dtype=float), kernels)


def transform_kernel(kernel: SteinKernel, A) -> TransformedKernel:
    return TransformedKernel(kernel, A)


class AverageKernel(SteinKernel):
    """Kernel (1/n) sum T_i at the joint draw, paired with the
    variance-preserving standardized mean theta + n^(-1/2) sum (X_i - theta).

    That rescaling is what keeps the kernel mean equal to the shared
    component covariance; the plain average would need an extra 1/n.  Only
    usable through joint-sample Monte Carlo: the kernel is a function of all
    copies, not of the averaged point alone, so there is no pointwise
    `matrices`.
    """

    construction = "average"

    def __init__(self, kernels):
        if not kernels:
            raise ParameterError("need at least one component kernel")
        sigma = kernels[0].sigma
        for k in kernels[1:]:
            if not np.allclose(k.sigma, sigma):
                raise ParameterError("averaged kernels must share the covariance")
        super().__init__(sigma)
        self.kernels = list(kernels)

    def matrices(self, Y):
        raise ParameterError("average kernel is defined on joint samples only")

    def paired_chunks(self, model: NoiseModel, n: int, seed: int):
        ncopies = len(self.kernels)
        for idx, rows in chunk_plan(n, model.d * ncopies):
            rng = substream(seed, idx)
            draws = [model._draw(rng, rows) for _ in range(ncopies)]
            scaled_mean = sum(draws) / math.sqrt(ncopies)
            mats = sum(k.matrices(y) for k, y in zip(self.kernels, draws)) / ncopies
            yield model.theta + scaled_mean, _DenseChunk(mats, self.sigma)


class MixtureKernel(SteinKernel):
    """Paired sampler (Y_s, T_s(Y_s)) over mixture components."""

    construction = "mixture"

    def __init__(self, pairs, weights):
        if not pairs:
            raise ParameterError("mixture kernel needs components")
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ParameterError("weights must be nonnegative and sum to 1")
        for model, _ in pairs:
            if np.any(model.theta != 0.0):
                raise ParameterError("mixture kernel components must be centered")
        sigma = sum(wi * k.sigma for wi, (_, k) in zip(w, pairs))
        super().__init__(sigma)
        self.pairs = list(pairs)
        self.weights = w

    def matrices(self, Y):
        raise ParameterError("mixture kernel is defined on joint samples only")

    def paired_chunks(self, model: NoiseModel, n: int, seed: int):
        d = self.pairs[0][0].d
        for idx, rows in chunk_plan(n, d):
            rng = substream(seed, idx)
            pick = rng.choice(len(self.pairs), size=rows, p=self.weights)
            Y = np.empty((rows, d))
            mats = np.empty((rows, d, d))
            for s, (comp, kern) in enumerate(self.pairs):
                sel = np.flatnonzero(pick == s)
                if sel.size:
                    ys = comp._draw(rng, sel.size)
                    Y[sel] = ys
                    mats[sel] = kern.matrices(ys)
            yield model.theta + Y, _DenseChunk(mats, self.sigma)


class _DenseChunk:
    """Per-chunk dense kernel values with the SteinKernel contraction API."""

    def __init__(self, mats, sigma):
        self.mats = mats
        self.sigma = sigma

    def trace_values(self):
        return np.trace(self.mats, axis1=1, axis2=2)

    def frob_dev_values(self):
        dev = self.mats - self.sigma
        return np.einsum("mij,mij->m", dev, dev)

    def contract(self, J):
        return np.einsum("mij,mij->m", self.mats, J)


def average_kernel(kernels) -> AverageKernel:
    return AverageKernel(kernels)


def mixture_kernel(pairs, weights) -> MixtureKernel:
    return MixtureKernel(pairs, weights)


# ---------------------------------------------------------------------------
# Monte Carlo statistics


@dataclass(frozen=True)
class DiscrepancyStats:
    e_trace_T: float
    e_trace_T_stderr: float
    var_trace_T: float
    var_trace_T_stderr: float
    e_frob_dev_sq: float
    e_frob_dev_sq_stderr: float
    n: int
    seed: int

    def __post_init__(self):
        if self.var_trace_T < 0 or self.e_frob_dev_sq < -1e-12:
            raise ParameterError("variance-type discrepancy fields must be nonnegative")

    def b_lambda_factor(self) -> float:
        """sqrt(Var Tr T) + 2 sqrt(E ||T - Sigma||^2), the bound ingredient."""
        return math.sqrt(max(self.var_trace_T, 0.0)) + 2.0 * math.sqrt(max(self.e_frob_dev_sq, 0.0))


def _paired_chunks(model: NoiseModel, kernel: SteinKernel, n: int, seed: int):
    if hasattr(kernel, "paired_chunks"):
        yield from kernel.paired_chunks(model, n, seed)
        return
    for X in model.iter_chunks(n, seed):
        yield X, _BoundChunk(kernel, X - model.theta)


class _BoundChunk:
    def __init__(self, kernel, Y):
        self.kernel = kernel
        self.Y = Y

    def trace_values(self):
        return self.kernel.trace_values(self.Y)

    def frob_dev_values(self):
        return self.kernel.frob_dev_values(self.Y)

    def contract(self, J):
        return self.kernel.contract(self.Y, J)


def discrepancy_stats(model: NoiseModel, kernel: SteinKernel, n: int, seed: int) -> DiscrepancyStats:
    if n < 2:
        raise ParameterError("discrepancy statistics need n >= 2")
    tr = Accumulator()
    fb = Accumulator()
    for _, K in _paired_chunks(model, kernel, n, seed):
        tr.add(K.trace_values())
        fb.add(K.frob_dev_values())
    return DiscrepancyStats(
        e_trace_T=tr.mean,
        e_trace_T_stderr=tr.stderr,
        var_trace_T=tr.variance,
        var_trace_T_stderr=tr.variance_stderr(),
        e_frob_dev_sq=fb.mean,
        e_frob_dev_sq_stderr=fb.stderr,
        n=n,
        seed=seed,
    )


def stein_identity_residual(
    model: NoiseModel, kernel: SteinKernel, test_fn: TestFn, n: int, seed: int
) -> RiskReport:
    """MC estimate of E<X-theta, f(X)> - E<T, grad f(X)>; 0 for a true kernel."""
    acc = Accumulator()
    for X, K in _paired_chunks(model, kernel, n, seed):
        test_fn.guard(X)
        lhs = np.einsum("mi,mi->m", X - model.theta, test_fn.f(X))
        rhs = K.contract(test_fn.jac(X))
        acc.add(lhs - rhs)
    return report_from(acc, seed, label=f"stein-residual:{test_fn.name}")
