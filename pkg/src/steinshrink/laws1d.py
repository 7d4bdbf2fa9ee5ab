"""Symmetric one-dimensional noise laws used as product-model coordinates.

Each law exposes exact moments, a density, its one-dimensional Stein kernel
T(y) = (1/p(y)) * integral_y^inf u p(u) du, and its zero-bias transform
(density and sampler).  The zero-bias density is p*(y) = tail(y) / var where
tail(y) is the same upper integral, so the two share one closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import EvaluationError


class Law1D:
    """Mean-zero symmetric 1-D law with closed-form Stein/zero-bias data."""

    name: str = ""

    @property
    def variance(self) -> float:
        raise NotImplementedError

    @property
    def c4(self) -> float:
        raise NotImplementedError

    @property
    def c8(self) -> float:
        raise NotImplementedError

    # support half-width; None for unbounded laws
    support_radius: float | None = None

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError

    def pdf(self, y) -> np.ndarray:
        return np.exp(self.log_pdf(y))

    def log_pdf(self, y) -> np.ndarray:
        raise NotImplementedError

    def tail_first_moment(self, y) -> np.ndarray:
        """integral_y^inf u p(u) du, vectorized."""
        raise NotImplementedError

    def kernel(self, y) -> np.ndarray:
        """1-D Stein kernel T(y) = tail_first_moment(y) / pdf(y)."""
        y = np.asarray(y, dtype=float)
        p = self.pdf(y)
        if np.any(p <= 0.0):
            raise EvaluationError(f"{self.name}: kernel evaluated where the density vanishes")
        return self.tail_first_moment(y) / p

    def zb_pdf(self, y) -> np.ndarray:
        return np.maximum(self.tail_first_moment(y), 0.0) / self.variance

    def zb_sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """Draw from the zero-bias law via U * (square-biased draw)."""
        return rng.uniform(0.0, 1.0, size) * self.square_bias_sample(rng, size)

    def square_bias_sample(self, rng: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Gaussian1D(Law1D):
    sigma: float = 1.0
    name = "gaussian"

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def variance(self):
        return self.sigma**2

    @property
    def c4(self):
        return 3.0 * self.sigma**4

    @property
    def c8(self):
        return 105.0 * self.sigma**8

    def sample(self, rng, size):
        return rng.normal(0.0, self.sigma, size)

    def log_pdf(self, y):
        y = np.asarray(y, dtype=float)
        return -0.5 * (y / self.sigma) ** 2 - math.log(self.sigma) - 0.5 * math.log(2 * math.pi)

    def tail_first_moment(self, y):
        y = np.asarray(y, dtype=float)
        return self.sigma**2 * np.exp(self.log_pdf(y))

    def kernel(self, y):
        return np.full_like(np.asarray(y, dtype=float), self.sigma**2)

    def zb_pdf(self, y):
        return self.pdf(y)  # Gaussian is the fixed point

    def zb_sample(self, rng, size):
        return rng.normal(0.0, self.sigma, size)

    def square_bias_sample(self, rng, size):
        # |Y|^2-biased normal: chi distribution with 3 dof, random sign
        mag = self.sigma * np.sqrt(rng.chisquare(3.0, size))
        return mag * rng.choice([-1.0, 1.0], size)


@dataclass(frozen=True)
class Laplace1D(Law1D):
    b: float = 1.0
    name = "laplace"

    def __post_init__(self):
        if self.b <= 0:
            raise ValueError("scale b must be positive")

    @property
    def variance(self):
        return 2.0 * self.b**2

    @property
    def c4(self):
        return 24.0 * self.b**4

    @property
    def c8(self):
        return math.factorial(8) * self.b**8

    def sample(self, rng, size):
        return rng.laplace(0.0, self.b, size)

    def log_pdf(self, y):
        y = np.asarray(y, dtype=float)
        return -np.abs(y) / self.b - math.log(2.0 * self.b)

    def tail_first_moment(self, y):
        y = np.asarray(y, dtype=float)
        a = np.abs(y)
        upper = (a + self.b) * np.exp(-a / self.b) / 2.0
        # for y < 0 the integral over (y, inf) of an odd-symmetric integrand
        # equals the one over (|y|, inf)
        return upper

    def kernel(self, y):
        y = np.asarray(y, dtype=float)
        return self.b * (np.abs(y) + self.b)

    def square_bias_sample(self, rng, size):
        mag = rng.gamma(3.0, self.b, size)
        return mag * rng.choice([-1.0, 1.0], size)


@dataclass(frozen=True)
class Uniform1D(Law1D):
    a: float = 1.0
    name = "uniform"

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("half-width a must be positive")

    @property
    def variance(self):
        return self.a**2 / 3.0

    @property
    def c4(self):
        return self.a**4 / 5.0

    @property
    def c8(self):
        return self.a**8 / 9.0

    @property
    def support_radius(self):
        return self.a

    def sample(self, rng, size):
        return rng.uniform(-self.a, self.a, size)

    def log_pdf(self, y):
        y = np.asarray(y, dtype=float)
        out = np.where(np.abs(y) <= self.a, -math.log(2.0 * self.a), -np.inf)
        return out

    def tail_first_moment(self, y):
        y = np.asarray(y, dtype=float)
        yc = np.clip(y, -self.a, self.a)
        return (self.a**2 - yc**2) / (4.0 * self.a)

    def kernel(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(np.abs(y) > self.a):
            raise EvaluationError("uniform kernel evaluated outside the support")
        return (self.a**2 - y**2) / 2.0

    def square_bias_sample(self, rng, size):
        mag = self.a * rng.uniform(0.0, 1.0, size) ** (1.0 / 3.0)
        return mag * rng.choice([-1.0, 1.0], size)


@dataclass(frozen=True)
class SmoothedRademacher1D(Law1D):
    """A +-c coin smoothed by a small N(0, h^2), keeping a density."""

    c: float = 1.0
    h: float = 0.1
    name = "smoothed_rademacher"

    def __post_init__(self):
        if self.c <= 0 or self.h <= 0:
            raise ValueError("c and h must be positive")

    @property
    def variance(self):
        return self.c**2 + self.h**2

    @property
    def c4(self):
        c2, h2 = self.c**2, self.h**2
        return c2**2 + 6.0 * c2 * h2 + 3.0 * h2**2

    @property
    def c8(self):
        c2, h2 = self.c**2, self.h**2
        return c2**4 + 28 * c2**3 * h2 + 210 * c2**2 * h2**2 + 420 * c2 * h2**3 + 105 * h2**4

    def sample(self, rng, size):
        signs = rng.choice([-1.0, 1.0], size)
        return self.c * signs + rng.normal(0.0, self.h, size)

    def log_pdf(self, y):
        y = np.asarray(y, dtype=float)
        lp = norm.logpdf(y, loc=self.c, scale=self.h)
        lm = norm.logpdf(y, loc=-self.c, scale=self.h)
        return np.logaddexp(lp, lm) - math.log(2.0)

    def tail_first_moment(self, y):
        y = np.asarray(y, dtype=float)
        h2 = self.h**2
        up = self.c * norm.sf(y, loc=self.c, scale=self.h) + h2 * norm.pdf(y, loc=self.c, scale=self.h)
        dn = -self.c * norm.sf(y, loc=-self.c, scale=self.h) + h2 * norm.pdf(y, loc=-self.c, scale=self.h)
        return 0.5 * (up + dn)

    def square_bias_sample(self, rng, size):
        # fall back to sampling-importance-resampling on the own law
        pool = 64
        size = int(np.prod(size)) if not np.isscalar(size) else int(size)
        cand = self.sample(rng, size * pool)
        w = cand**2
        w = w / w.sum()
        idx = rng.choice(cand.size, size=size, p=w)
        return cand[idx]

    def zb_sample(self, rng, size):
        # zero-bias of a sum: resample the coin summand with probability
        # c^2/var (its zero-bias is uniform on [-c, c]), else keep the law
        signs = rng.choice([-1.0, 1.0], size)
        z = rng.normal(0.0, self.h, size)
        u = rng.uniform(-self.c, self.c, size)
        pick = rng.uniform(0.0, 1.0, size) < self.c**2 / self.variance
        return np.where(pick, u + z, self.c * signs + z)
