"""Observation laws X = theta + Y with exact moments and seeded sampling.

Every model is immutable after construction and samples through
(seed, chunk index) substreams, so concurrent and serial runs agree
bit-for-bit.  Centered draws come from `_draw`; `sample`/`iter_chunks`
add the location.

A note on the Student family: it is realized by the Gamma variance
mixture X = theta + s * N / sqrt(g) with g ~ Gamma(k/2, rate k/2) and
s^2 = k/(k-2).  Since E[1/g] = k/(k-2), the coordinate variance of this
law is s^4 = (k/(k-2))^2, and that is the covariance the model reports;
the closed-form kernel and the Gamma coupling in the sibling modules are
exact for this same law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from ._mc import chunk_plan, substream
from .errors import MomentUnavailableError, ParameterError
from .laws1d import Gaussian1D, Laplace1D, Law1D, SmoothedRademacher1D, Uniform1D
from .quadrature import elliptical_normalizer, elliptical_second_moment
from .theta import parse_theta

_DOUBLE_FACT = {0: 1.0, 2: 1.0, 4: 3.0, 6: 15.0, 8: 105.0}


@dataclass(frozen=True)
class MomentSummary:
    mean: np.ndarray
    cov: np.ndarray
    trace_cov: float
    kappa: float
    c4: float | None = None
    c8: float | None = None

    def __post_init__(self):
        if self.kappa > self.trace_cov + 1e-9 * max(1.0, abs(self.trace_cov)):
            raise ParameterError("kappa cannot exceed the trace of a PSD covariance")
        if self.c4 is not None and self.c8 is not None and self.c8 < self.c4**2 - 1e-9:
            raise ParameterError("moment caps violate the Lyapunov inequality")


@dataclass(frozen=True)
class ValidityReport:
    ok: bool
    reasons: tuple = ()
    warnings: tuple = ()


class NoiseModel:
    """Base class: location family X = theta + Y for a centered law Y."""

    family = "abstract"

    def __init__(self, d: int, theta):
        if d < 1:
            raise ParameterError("dimension must be >= 1")
        self.d = int(d)
        th = parse_theta(theta, self.d) if not isinstance(theta, np.ndarray) else np.asarray(theta, dtype=float)
        if th.shape != (self.d,):
            raise ParameterError(f"theta has shape {th.shape}, expected ({self.d},)")
        th = th.copy()
        th.setflags(write=False)
        self.theta = th

    # -- sampling ---------------------------------------------------------
    def _draw(self, rng: np.random.Generator, m: int) -> np.ndarray:
        raise NotImplementedError

    def iter_chunks(self, n: int, seed: int):
        for idx, rows in chunk_plan(n, self.d):
            rng = substream(seed, idx)
            yield self.theta + self._draw(rng, rows)

    def sample(self, n: int, seed: int) -> np.ndarray:
        return np.concatenate(list(self.iter_chunks(n, seed)), axis=0)

    # -- moments ----------------------------------------------------------
    def coordinate_moment(self, p: int) -> float | None:
        """sup over coordinates of E(X_i - theta_i)^p for even p <= 8."""
        raise NotImplementedError

    def moment_cap(self, p: int) -> float:
        value = self.coordinate_moment(p)
        if value is None:
            raise MomentUnavailableError(f"{self.family}: moment of order {p} unavailable")
        return value

    def cov(self) -> np.ndarray:
        raise NotImplementedError

    def moments(self) -> MomentSummary:
        cov = self.cov()
        eig = np.linalg.eigvalsh(cov)
        return MomentSummary(
            mean=self.theta,
            cov=cov,
            trace_cov=float(np.trace(cov)),
            kappa=float(eig[-1]),
            c4=self.coordinate_moment(4),
            c8=self.coordinate_moment(8),
        )

    # -- density ----------------------------------------------------------
    def log_density(self, x) -> float | None:
        """Log density at a point, or None when unavailable for the family."""
        return None

    def _centered_log_density(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- validity ---------------------------------------------------------
    def has_density(self) -> bool:
        return False

    def density_bounded(self) -> bool:
        return self.has_density()

    def satisfies_conditional_mean_zero(self) -> bool:
        """Whether E[Y_i | Y_j, j != i] = 0 holds for the centered law."""
        return False

    def support_min_norm(self) -> float | None:
        """Lower bound on ||x|| over the support of X and its zero-bias laws."""
        return None

    def support_two_large_coords(self) -> bool | None:
        """Whether every support point has two coordinates bounded away from 0."""
        return None

    def validity(self, need: str) -> ValidityReport:
        if need == "kernel":
            return self._validity_kernel()
        if need == "zerobias":
            return self._validity_zerobias()
        raise ParameterError(f"unknown validity target {need!r}")

    def _validity_kernel(self) -> ValidityReport:
        reasons, warnings = [], []
        if not self.has_density():
            reasons.append("no Lebesgue density")
        elif not self.density_bounded():
            reasons.append("density not bounded near the origin")
        if self.d < 5:
            reasons.append("d < 5")
            if self.family == "gaussian_iso" and self.d >= 3:
                warnings.append("constant Gaussian kernel identities remain exact for d >= 3")
        return ValidityReport(ok=not reasons, reasons=tuple(reasons), warnings=tuple(warnings))

    def _validity_zerobias(self) -> ValidityReport:
        reasons, warnings = [], []
        if not self.satisfies_conditional_mean_zero():
            reasons.append("conditional-mean-zero condition not declared for this family")
            return ValidityReport(ok=False, reasons=tuple(reasons))
        if self.has_density() and self.d >= 5:
            return ValidityReport(ok=True)
        min_norm = self.support_min_norm()
        if min_norm is not None and min_norm > 0:
            warnings.append(f"support bounded away from 0 (||x|| >= {min_norm:.6g})")
            return ValidityReport(ok=True, warnings=tuple(warnings))
        two_coords = self.support_two_large_coords()
        if two_coords:
            warnings.append("every support point has two coordinates bounded away from 0")
            return ValidityReport(ok=True, warnings=tuple(warnings))
        if not self.has_density():
            reasons.append("no density and support not separated from the origin")
        if self.d < 5:
            reasons.append("d < 5")
        return ValidityReport(ok=False, reasons=tuple(reasons))


# ---------------------------------------------------------------------------


class GaussianIso(NoiseModel):
    family = "gaussian_iso"

    def __init__(self, d: int, sigma2: float = 1.0, theta=None, scaling: str | None = None):
        super().__init__(d, theta)
        if sigma2 < 0:
            raise ParameterError("sigma2 must be nonnegative")
        if scaling == "pinsker":
            sigma2 = sigma2 / d
        elif scaling is not None:
            raise ParameterError(f"unknown scaling {scaling!r}")
        self.sigma2 = float(sigma2)
        self.scaling = scaling

    def _draw(self, rng, m):
        if self.sigma2 == 0.0:
            return np.zeros((m, self.d))
        return rng.normal(0.0, math.sqrt(self.sigma2), (m, self.d))

    def cov(self):
        return self.sigma2 * np.eye(self.d)

    def coordinate_moment(self, p):
        return _DOUBLE_FACT[p] * self.sigma2 ** (p // 2)

    def has_density(self):
        return self.sigma2 > 0.0

    def satisfies_conditional_mean_zero(self):
        return True

    def log_density(self, x):
        if self.sigma2 == 0.0:
            return None
        y = np.asarray(x, dtype=float) - self.theta
        return float(-0.5 * np.dot(y, y) / self.sigma2 - 0.5 * self.d * math.log(2 * math.pi * self.sigma2))


class StudentT(NoiseModel):
    """Gamma variance-mixture Student law; see the module docstring."""

    family = "student_t"

    def __init__(self, d: int, k: int, theta=None):
        super().__init__(d, theta)
        if k < 5:
            raise ParameterError("StudentT requires k >= 5")
        self.k = int(k)
        self.scale2 = self.k / (self.k - 2.0)  # Gamma-mixture scale squared
        self.sigma2 = self.scale2**2  # coordinate variance

    def _draw(self, rng, m):
        g = rng.gamma(self.k / 2.0, 2.0 / self.k, m)
        n = rng.standard_normal((m, self.d))
        return math.sqrt(self.scale2) * n / np.sqrt(g)[:, None]

    def cov(self):
        return self.sigma2 * np.eye(self.d)

    def coordinate_moment(self, p):
        if p == 0:
            return 1.0
        if self.k <= p:
            return None
        half = p // 2
        inv_gamma = 1.0
        for j in range(1, half + 1):
            inv_gamma *= self.k / (self.k - 2.0 * j)
        return _DOUBLE_FACT[p] * self.scale2**half * inv_gamma

    def has_density(self):
        return True

    def satisfies_conditional_mean_zero(self):
        return True

    def log_density(self, x):
        y = (np.asarray(x, dtype=float) - self.theta) / math.sqrt(self.scale2)
        q = float(np.dot(y, y))
        k, d = self.k, self.d
        logc = gammaln((k + d) / 2.0) - gammaln(k / 2.0) - 0.5 * d * math.log(k * math.pi)
        return float(logc - 0.5 * d * math.log(self.scale2) - 0.5 * (k + d) * math.log1p(q / k))


class SphereUniform(NoiseModel):
    """Y = sigma * sqrt(d) * U with U uniform on the unit sphere."""

    family = "sphere_uniform"

    def __init__(self, d: int, sigma: float = 1.0, theta=None):
        super().__init__(d, theta)
        if d < 2:
            raise ParameterError("sphere model needs d >= 2")
        if sigma <= 0:
            raise ParameterError("sigma must be positive")
        self.sigma = float(sigma)
        self.sigma2 = sigma**2
        self.radius = self.sigma * math.sqrt(self.d)

    def _draw(self, rng, m):
        g = rng.standard_normal((m, self.d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return self.radius * g

    def cov(self):
        return self.sigma2 * np.eye(self.d)

    def coordinate_moment(self, p):
        if p == 0:
            return 1.0
        d = self.d
        denom = 1.0
        for j in range(p // 2):
            denom *= d + 2 * j
        return self.radius**p * _DOUBLE_FACT[p] / denom

    def satisfies_conditional_mean_zero(self):
        return True

    def support_min_norm(self):
        # the zero-bias support is the full ball of the same radius
        slack = float(np.linalg.norm(self.theta)) - self.radius
        return slack if slack > 0 else None

    def support_two_large_coords(self):
        return False


class BallUniform(NoiseModel):
    """Y = sigma * sqrt(d) * V with V uniform in the unit ball."""

    family = "ball_uniform"

    def __init__(self, d: int, sigma: float = 1.0, theta=None):
        super().__init__(d, theta)
        if sigma <= 0:
            raise ParameterError("sigma must be positive")
        self.sigma = float(sigma)
        self.radius = self.sigma * math.sqrt(self.d)
        self.sigma2 = self.sigma**2 * self.d / (self.d + 2.0)

    def _draw(self, rng, m):
        g = rng.standard_normal((m, self.d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = rng.uniform(0.0, 1.0, m) ** (1.0 / self.d)
        return self.radius * r[:, None] * g

    def cov(self):
        return self.sigma2 * np.eye(self.d)

    def coordinate_moment(self, p):
        if p == 0:
            return 1.0
        d = self.d
        denom = 1.0
        for j in range(p // 2):
            denom *= d + 2 * j
        sphere_moment = _DOUBLE_FACT[p] / denom
        return self.radius**p * sphere_moment * d / (d + p)

    def has_density(self):
        return True

    def satisfies_conditional_mean_zero(self):
        return True

    def log_volume(self):
        return 0.5 * self.d * math.log(math.pi) + self.d * math.log(self.radius) - gammaln(self.d / 2.0 + 1.0)

    def log_density(self, x):
        y = np.asarray(x, dtype=float) - self.theta
        if np.linalg.norm(y) > self.radius:
            return -math.inf
        return -self.log_volume()

    def support_min_norm(self):
        slack = float(np.linalg.norm(self.theta)) - self.radius
        return slack if slack > 0 else None


class ProductIID(NoiseModel):
    """Independent coordinates, one shared symmetric 1-D law."""

    family = "product_iid"

    def __init__(self, d: int, law: Law1D, theta=None, scaling: str | None = None):
        super().__init__(d, theta)
        if scaling == "pinsker":
            law = scale_law(law, 1.0 / math.sqrt(d))
        elif scaling is not None:
            raise ParameterError(f"unknown scaling {scaling!r}")
        self.law = law
        self.sigma2 = law.variance
        self.scaling = scaling

    def _draw(self, rng, m):
        return self.law.sample(rng, (m, self.d))

    def cov(self):
        return self.sigma2 * np.eye(self.d)

    def coordinate_moment(self, p):
        if p == 0:
            return 1.0
        if p == 2:
            return self.sigma2
        if p == 4:
            return self.law.c4
        if p == 8:
            return self.law.c8
        if p == 6:
            return _law_sixth_moment(self.law)
        raise ParameterError(f"unsupported moment order {p}")

    def has_density(self):
        return True

    def satisfies_conditional_mean_zero(self):
        return True

    def log_density(self, x):
        y = np.asarray(x, dtype=float) - self.theta
        return float(np.sum(self.law.log_pdf(y)))

    def support_two_large_coords(self):
        r = self.law.support_radius
        if r is None:
            return None
        clear = np.abs(self.theta) - r
        return bool(np.sum(clear > 0) >= 2)


def _law_sixth_moment(law: Law1D) -> float:
    if isinstance(law, Gaussian1D):
        return 15.0 * law.sigma**6
    if isinstance(law, Laplace1D):
        return math.factorial(6) * law.b**6
    if isinstance(law, Uniform1D):
        return law.a**6 / 7.0
    if isinstance(law, SmoothedRademacher1D):
        c2, h2 = law.c**2, law.h**2
        return c2**3 + 15 * c2**2 * h2 + 45 * c2 * h2**2 + 15 * h2**3
    raise MomentUnavailableError("sixth moment unavailable for this law")


def scale_law(law: Law1D, factor: float) -> Law1D:
    if isinstance(law, Gaussian1D):
        return Gaussian1D(law.sigma * factor)
    if isinstance(law, Laplace1D):
        return Laplace1D(law.b * factor)
    if isinstance(law, Uniform1D):
        return Uniform1D(law.a * factor)
    if isinstance(law, SmoothedRademacher1D):
        return SmoothedRademacher1D(law.c * factor, law.h * factor)
    raise ParameterError("cannot rescale this 1-D law")


class Elliptical(NoiseModel):
    """Density kappa |Ups|^(-1/2) phi((x-theta)' Ups^-1 (x-theta) / 2).

    `dispersion` is the matrix in the quadratic form; the covariance is
    (E[q]/d) * dispersion with E[q] computed by radial quadrature unless a
    closed form is supplied.
    """

    family = "elliptical"

    def __init__(self, d, generator, dispersion, theta=None, *, name="elliptical",
                 log_normalizer=None, second_moment=None):
        super().__init__(d, theta)
        disp = np.asarray(dispersion, dtype=float)
        if disp.shape != (d, d):
            raise ParameterError("dispersion must be d x d")
        if not np.allclose(disp, disp.T):
            raise ParameterError("dispersion must be symmetric")
        eig = np.linalg.eigvalsh(disp)
        if eig[0] <= 0:
            raise ParameterError("dispersion must be positive definite")
        self.generator = generator
        self.dispersion = disp
        self.name = name
        self._chol = np.linalg.cholesky(disp)
        self._log_norm = (
            math.log(elliptical_normalizer(generator, d)) if log_normalizer is None else log_normalizer
        )
        self._eq = elliptical_second_moment(generator, d) if second_moment is None else second_moment
        self._radial_cdf = None

    @classmethod
    def gaussian(cls, d: int, sigma2: float = 1.0, theta=None) -> "Elliptical":
        """Gaussian generator with its closed-form normalizer (no quadrature)."""
        log_norm = -0.5 * d * math.log(2.0 * math.pi)
        return cls(
            d,
            lambda t: math.exp(-t),
            sigma2 * np.eye(d),
            theta,
            name="elliptical-gaussian",
            log_normalizer=log_norm,
            second_moment=float(d),
        )

    @classmethod
    def student(cls, d: int, k: int, theta=None) -> "Elliptical":
        """Student generator with closed-form constants, matching StudentT."""
        if k < 5:
            raise ParameterError("need k >= 5")
        s2 = k / (k - 2.0)
        log_norm = float(gammaln((k + d) / 2.0) - gammaln(k / 2.0) - 0.5 * d * math.log(k * math.pi))
        return cls(
            d,
            lambda t: (1.0 + 2.0 * t / k) ** (-(k + d) / 2.0),
            s2 * np.eye(d),
            theta,
            name="elliptical-student",
            log_normalizer=log_norm,
            second_moment=float(d) * s2,
        )

    def cov(self):
        return (self._eq / self.d) * self.dispersion

    def coordinate_moment(self, p):
        if p == 2:
            return float(np.max(np.diag(self.cov())))
        return None

    def has_density(self):
        return True

    def satisfies_conditional_mean_zero(self):
        return bool(np.allclose(self.dispersion, np.diag(np.diag(self.dispersion))))

    def log_density(self, x):
        y = np.asarray(x, dtype=float) - self.theta
        z = np.linalg.solve(self._chol, y)
        q = float(np.dot(z, z))
        val = self.generator(q / 2.0)
        if val <= 0:
            return -math.inf
        return float(self._log_norm - np.log(np.diag(self._chol)).sum() + math.log(val))

    def _radial_inverse_cdf(self):
        if self._radial_cdf is None:
            # tabulate F(r) for r = ||z||, density prop to r^(d-1) phi(r^2/2);
            # extend the range until the local tail mass estimate is negligible
            def f(r):
                return r ** (self.d - 1) * self.generator(r * r / 2.0)

            hi, peak = 1.0, 0.0
            while hi < 1e30:
                peak = max(peak, f(hi))
                if f(hi) * hi < 1e-14 * max(peak, 1e-300):
                    break
                hi *= 2.0
            grid = np.linspace(0.0, hi, 1 << 15)
            pdf = grid ** (self.d - 1) * np.asarray([self.generator(t) for t in grid * grid / 2.0])
            cdf = np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * np.diff(grid))
            cdf = np.concatenate([[0.0], cdf])
            cdf /= cdf[-1]
            self._radial_cdf = (grid, cdf)
        return self._radial_cdf

    def _draw(self, rng, m):
        grid, cdf = self._radial_inverse_cdf()
        r = np.interp(rng.uniform(0.0, 1.0, m), cdf, grid)
        g = rng.standard_normal((m, self.d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return (r[:, None] * g) @ self._chol.T


class Mixture(NoiseModel):
    family = "mixture"

    def __init__(self, components, weights, theta=None, *, _family=None):
        if not components:
            raise ParameterError("mixture needs at least one component")
        d = components[0].d
        super().__init__(d, theta)
        w = np.asarray(weights, dtype=float)
        if w.shape != (len(components),) or np.any(w < 0):
            raise ParameterError("weights must be nonnegative, one per component")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ParameterError("mixture weights must sum to 1 within 1e-12")
        for c in components:
            if c.d != d:
                raise ParameterError("mixture components must share the dimension")
            if np.any(c.theta != 0.0):
                raise ParameterError("mixture components must be centered")
        self.components = tuple(components)
        self.weights = w
        if _family:
            self.family = _family

    def _draw(self, rng, m):
        idx = rng.choice(len(self.components), size=m, p=self.weights)
        out = np.empty((m, self.d))
        for s, comp in enumerate(self.components):
            rows = np.flatnonzero(idx == s)
            if rows.size:
                out[rows] = comp._draw(rng, rows.size)
        return out

    def cov(self):
        # components are centered, so the law of total variance is a plain mix
        return sum(w * c.cov() for w, c in zip(self.weights, self.components))

    def coordinate_moment(self, p):
        if p == 0:
            return 1.0
        vals = [c.coordinate_moment(p) for c in self.components]
        if any(v is None for v in vals):
            return None
        return float(np.dot(self.weights, vals))

    def has_density(self):
        return all(c.has_density() for c in self.components)

    def satisfies_conditional_mean_zero(self):
        return all(c.satisfies_conditional_mean_zero() for c in self.components)

    def log_density(self, x):
        logs = []
        for w, c in zip(self.weights, self.components):
            if w == 0.0:
                continue
            ld = c.log_density(np.asarray(x, dtype=float) - self.theta)
            if ld is None:
                return None
            logs.append(math.log(w) + ld)
        return float(logsumexp(logs))

    def support_min_norm(self):
        return None  # component supports are not tracked through the shift


class AdditiveCorruption(NoiseModel):
    """Y = sqrt(1-eps) * Y0 + sqrt(eps) * Y1 with Gaussian Y0 and outlier Y1."""

    family = "corrupted_gaussian_additive"

    def __init__(self, eps: float, outlier: NoiseModel, theta=None):
        if not 0.0 <= eps <= 1.0:
            raise ParameterError("eps must lie in [0, 1]")
        super().__init__(outlier.d, theta)
        if np.any(outlier.theta != 0.0):
            raise ParameterError("outlier must be centered")
        cov = outlier.cov()
        s2 = cov[0, 0]
        if not np.allclose(cov, s2 * np.eye(outlier.d)):
            raise ParameterError("outlier must have isotropic covariance")
        self.eps = float(eps)
        self.outlier = outlier
        self.sigma2 = float(s2)

    def _draw(self, rng, m):
        y0 = rng.normal(0.0, math.sqrt(self.sigma2), (m, self.d))
        y1 = self.outlier._draw(rng, m)
        return math.sqrt(1.0 - self.eps) * y0 + math.sqrt(self.eps) * y1

    def cov(self):
        return self.sigma2 * np.eye(self.d)

    def coordinate_moment(self, p):
        if p == 0:
            return 1.0
        a2, b2 = 1.0 - self.eps, self.eps
        try:
            mom_out = {q: self.outlier.moment_cap(q) for q in range(2, p + 1, 2)}
        except (MomentUnavailableError, ParameterError):
            return None
        mom_gauss = {q: _DOUBLE_FACT[q] * self.sigma2 ** (q // 2) for q in range(2, p + 1, 2)}
        mom_gauss[0] = 1.0
        mom_out[0] = 1.0
        total = 0.0
        for j in range(0, p + 1, 2):
            total += math.comb(p, j) * a2 ** ((p - j) / 2) * b2 ** (j / 2) * mom_gauss[p - j] * mom_out[j]
        return total

    def has_density(self):
        return self.eps < 1.0  # Gaussian convolution smooths the law

    def satisfies_conditional_mean_zero(self):
        return self.outlier.satisfies_conditional_mean_zero()

    def log_density(self, x):
        if self.eps == 0.0:
            return GaussianIso(self.d, self.sigma2, self.theta).log_density(x)
        return None


class MixingCorruption(Mixture):
    """With probability 1-eps a Gaussian draw, with probability eps the outlier."""

    def __init__(self, eps: float, outlier: NoiseModel, theta=None):
        if not 0.0 <= eps <= 1.0:
            raise ParameterError("eps must lie in [0, 1]")
        cov = outlier.cov()
        s2 = cov[0, 0]
        if not np.allclose(cov, s2 * np.eye(outlier.d)):
            raise ParameterError("outlier must have isotropic covariance")
        gauss = GaussianIso(outlier.d, float(s2))
        super().__init__(
            [gauss, outlier], [1.0 - eps, eps], theta, _family="corrupted_gaussian_mixing"
        )
        self.eps = float(eps)
        self.outlier = outlier
        self.sigma2 = float(s2)


class LinearTransform(NoiseModel):
    """X = theta + A Y for a centered base law Y."""

    family = "linear_transform"

    def __init__(self, A, base: NoiseModel, theta=None):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ParameterError("A must be square")
        if abs(np.linalg.det(A)) < 1e-300:
            raise ParameterError("A must be invertible")
        if np.any(base.theta != 0.0):
            raise ParameterError("base law must be centered")
        super().__init__(A.shape[0], theta)
        if base.d != self.d:
            raise ParameterError("A and the base law disagree on dimension")
        self.A = A
        self.base = base

    def _draw(self, rng, m):
        return self.base._draw(rng, m) @ self.A.T

    def cov(self):
        return self.A @ self.base.cov() @ self.A.T

    def coordinate_moment(self, p):
        if p == 2:
            return float(np.max(np.diag(self.cov())))
        if np.allclose(self.A, np.diag(np.diag(self.A))):
            base_m = self.base.coordinate_moment(p)
            if base_m is None:
                return None
            return float(np.max(np.abs(np.diag(self.A)) ** p)) * base_m
        return None

    def has_density(self):
        return self.base.has_density()

    def satisfies_conditional_mean_zero(self):
        return self.base.satisfies_conditional_mean_zero() and bool(
            np.allclose(self.A, np.diag(np.diag(self.A)))
        )

    def log_density(self, x):
        y = np.linalg.solve(self.A, np.asarray(x, dtype=float) - self.theta)
        ld = self.base.log_density(y)
        if ld is None:
            return None
        return float(ld - math.log(abs(np.linalg.det(self.A))))

    def support_min_norm(self):
        return None  # transformed supports are not tracked analytically


class FourPointDegenerate(NoiseModel):
    """Uniform law on {(+-1, 0), (0, +-1)}: the zero-bias identity for the
    shrinkage field fails here, which validity checks must flag."""

    family = "four_point_degenerate"

    _POINTS = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])

    def __init__(self, theta=None):
        super().__init__(2, theta)
        self.sigma2 = 0.5

    def _draw(self, rng, m):
        return self._POINTS[rng.integers(0, 4, m)]

    def cov(self):
        return 0.5 * np.eye(2)

    def coordinate_moment(self, p):
        return 0.5

    def satisfies_conditional_mean_zero(self):
        return True

    def support_two_large_coords(self):
        return False

    def support_min_norm(self):
        # the zero-bias supports are segments through the origin
        return None
