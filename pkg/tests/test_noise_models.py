import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import ks_2samp

import steinshrink as ss
from steinshrink.errors import MomentUnavailableError, ParameterError
from steinshrink.quadrature import unit_sphere_area


def _family_zoo(d):
    zoo = {
        "gaussian": ss.GaussianIso(d, 1.3, "scaled:1"),
        "laplace": ss.ProductIID(d, ss.Laplace1D(0.8), "scaled:1"),
        "uniform": ss.ProductIID(d, ss.Uniform1D(1.1), "scaled:1"),
        "smoothed": ss.ProductIID(d, ss.SmoothedRademacher1D(1.0, 0.2), "scaled:1"),
        "student": ss.StudentT(d, 7, "scaled:1"),
        "ball": ss.BallUniform(d, 1.0, "scaled:1"),
        "corrupt-add": ss.AdditiveCorruption(0.25, ss.StudentT(d, 7), "scaled:1"),
        "corrupt-mix": ss.MixingCorruption(0.25, ss.StudentT(d, 7), "scaled:1"),
    }
    if d >= 2:
        zoo["sphere"] = ss.SphereUniform(d, 1.0, "scaled:1")
        zoo["mixture"] = ss.Mixture(
            [ss.GaussianIso(d, 1.0), ss.ProductIID(d, ss.Laplace1D(1 / math.sqrt(2)))],
            [0.5, 0.5],
            "scaled:1",
        )
    return zoo


@pytest.mark.parametrize("d", [3, 5, 10])
def test_sample_mean_and_covariance_converge(d):
    n = 1_000_000
    for name, model in _family_zoo(d).items():
        mom = model.moments()
        X = model.sample(n, 99)
        err = np.linalg.norm(X.mean(axis=0) - model.theta)
        assert err < 4.0 * math.sqrt(mom.trace_cov / n), (name, d, err)
        if mom.c4 is not None:
            emp = np.cov(X.T) if d > 1 else np.atleast_2d(np.var(X, ddof=1))
            frob = np.linalg.norm(emp - mom.cov)
            assert frob < 5.0 * d * math.sqrt(mom.c4 / n), (name, d, frob)


def test_degenerate_gaussian_returns_theta():
    model = ss.GaussianIso(4, 0.0, "scaled:3")
    X = model.sample(3, 0)
    assert np.array_equal(X, np.tile(model.theta, (3, 1)))


def test_sphere_draws_live_on_the_radius():
    model = ss.SphereUniform(4, 1.0)
    X = model.sample(50, 1)
    norms = np.linalg.norm(X, axis=1)
    assert np.allclose(norms, 2.0, atol=1e-12)


def test_student_sample_covariance_matches_reported():
    model = ss.StudentT(6, 6)
    X = model.sample(1_000_000, 3)
    emp = np.einsum("ni,nj->ij", X, X) / X.shape[0]
    # coordinate variance of the Gamma-mixture law is (k/(k-2))^2 = 2.25
    assert abs(emp[0, 0] - model.sigma2) < 0.05
    assert model.sigma2 == pytest.approx((6 / 4) ** 2)


def test_mixing_corruption_at_zero_eps_is_gaussian():
    mix = ss.MixingCorruption(0.0, ss.StudentT(5, 6), "scaled:1")
    gauss = ss.GaussianIso(5, ss.StudentT(5, 6).sigma2, "scaled:1")
    a = mix.sample(100_000, 4)
    b = gauss.sample(100_000, 5)
    for i in range(5):
        assert ks_2samp(a[:, i], b[:, i]).pvalue > 0.001


def test_pinsker_scaling_divides_variance_by_d():
    d = 50
    model = ss.GaussianIso(d, 1.0, scaling="pinsker")
    assert model.sigma2 == pytest.approx(1.0 / d)
    X = model.sample(200_000, 6)
    assert np.allclose(X.var(axis=0).mean(), 1.0 / d, rtol=0.05)
    prod = ss.ProductIID(d, ss.Laplace1D(1 / math.sqrt(2)), scaling="pinsker")
    assert prod.sigma2 == pytest.approx(1.0 / d)


# -- moments ----------------------------------------------------------------


def test_student_moments_match_family_values():
    mom = ss.StudentT(6, 6).moments()
    s2 = 6 / 4
    assert mom.cov[0, 0] == pytest.approx(s2**2)
    assert mom.trace_cov == pytest.approx(6 * s2**2)
    # fourth moment of the mixture law: 3 s^4 k^2 / ((k-2)(k-4))
    assert mom.c4 == pytest.approx(3 * s2**2 * 36 / (4 * 2))
    assert mom.c8 is None  # needs k > 8
    assert ss.StudentT(6, 10).moments().c8 is not None
    with pytest.raises(MomentUnavailableError):
        ss.StudentT(6, 6).moment_cap(8)


def test_sphere_cov_is_sigma2_identity():
    mom = ss.SphereUniform(7, 1.7).moments()
    assert np.allclose(mom.cov, 1.7**2 * np.eye(7))


def test_mixture_of_identical_gaussians_keeps_cov():
    mix = ss.Mixture([ss.GaussianIso(4, 1.0), ss.GaussianIso(4, 1.0)], [0.5, 0.5])
    assert np.allclose(mix.moments().cov, np.eye(4))


def test_linear_transform_cov():
    A = np.array([[1.0, 0.5], [0.0, 2.0]])
    base = ss.ProductIID(2, ss.Laplace1D(0.5))
    model = ss.LinearTransform(A, base)
    assert np.allclose(model.moments().cov, A @ base.cov() @ A.T)


def test_additive_corruption_keeps_isotropic_cov():
    out = ss.StudentT(5, 6)
    model = ss.AdditiveCorruption(0.3, out)
    assert np.allclose(model.moments().cov, out.sigma2 * np.eye(5))
    emp = model.sample(400_000, 8)
    assert abs(np.var(emp[:, 0]) - out.sigma2) < 0.05


def test_moment_caps_respect_lyapunov():
    for model in _family_zoo(5).values():
        mom = model.moments()
        if mom.c4 is not None and mom.c8 is not None:
            assert mom.c8 >= mom.c4**2 - 1e-9


# -- densities ---------------------------------------------------------------


def test_gaussian_log_density_at_mode():
    model = ss.GaussianIso(2, 1.0, "scaled:0.7")
    assert model.log_density(model.theta) == pytest.approx(-math.log(2 * math.pi))


def test_ball_log_density_is_uniform():
    model = ss.BallUniform(3, 1.0)
    log_vol = 1.5 * math.log(math.pi) + 3 * math.log(math.sqrt(3)) - math.lgamma(2.5)
    assert model.log_density(np.zeros(3)) == pytest.approx(-log_vol)
    assert model.log_density(np.array([10.0, 0, 0])) == -math.inf


def test_student_density_integrates_to_one():
    # radial quadrature of exp(log density) over R^2
    model = ss.StudentT(2, 6)

    def radial(r):
        return r * math.exp(model.log_density(np.array([r, 0.0])))

    total, _ = quad(radial, 0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=300)
    total *= unit_sphere_area(2)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_product_density_matches_sum_of_marginals():
    model = ss.ProductIID(3, ss.Uniform1D(1.0), "scaled:0.5")
    x = model.theta + np.array([0.2, -0.4, 0.9])
    assert model.log_density(x) == pytest.approx(3 * math.log(0.5))


def test_density_unavailable_cases():
    assert ss.SphereUniform(4, 1.0).log_density(np.zeros(4)) is None
    assert ss.AdditiveCorruption(0.5, ss.StudentT(4, 6)).log_density(np.zeros(4)) is None
    assert ss.FourPointDegenerate().log_density(np.zeros(2)) is None


def test_elliptical_matches_gaussian_when_generator_is_exponential():
    d = 3
    model = ss.Elliptical(d, lambda t: math.exp(-t), np.eye(d))
    gauss = ss.GaussianIso(d, 1.0)
    x = np.array([0.3, -0.2, 0.5])
    assert model.log_density(x) == pytest.approx(gauss.log_density(x), abs=1e-9)
    assert np.allclose(model.cov(), np.eye(d), atol=1e-9)
    X = model.sample(200_000, 9)
    assert abs(X.var(axis=0).mean() - 1.0) < 0.02


def test_elliptical_generic_sampler_handles_heavy_tails():
    model = ss.Elliptical.student(4, 6)
    ref = ss.StudentT(4, 6)
    X = model.sample(200_000, 5)
    assert abs(X.var(axis=0).mean() - model.cov()[0, 0]) < 0.05
    assert ks_2samp(X[:, 0], ref.sample(200_000, 6)[:, 0]).pvalue > 0.001


def test_elliptical_closed_form_shortcuts_agree_with_quadrature():
    d = 3
    quad_path = ss.Elliptical(d, lambda t: math.exp(-t), 2.0 * np.eye(d))
    closed = ss.Elliptical.gaussian(d, 2.0)
    x = np.array([0.4, 0.1, -0.8])
    assert closed.log_density(x) == pytest.approx(quad_path.log_density(x), abs=1e-9)
    assert np.allclose(closed.cov(), quad_path.cov(), atol=1e-9)

    k = 6
    stud_closed = ss.Elliptical.student(d, k)
    stud_model = ss.StudentT(d, k)
    assert stud_closed.log_density(x) == pytest.approx(stud_model.log_density(x), abs=1e-10)
    assert np.allclose(stud_closed.cov(), stud_model.cov(), atol=1e-9)


# -- validity ----------------------------------------------------------------


def test_validity_kernel_threshold():
    assert ss.GaussianIso(5, 1.0).validity("kernel").ok
    report = ss.GaussianIso(4, 1.0).validity("kernel")
    assert not report.ok and "d < 5" in report.reasons


def test_validity_zerobias_sphere_shift():
    d = 6
    ok = ss.SphereUniform(d, 1.0, f"scaled:{2 * math.sqrt(d)}").validity("zerobias")
    assert ok.ok
    assert not ss.SphereUniform(d, 1.0).validity("zerobias").ok


def test_validity_four_point_flagged():
    report = ss.FourPointDegenerate().validity("zerobias")
    assert not report.ok


def test_validity_bounded_product_translation():
    # uniform coordinates shifted beyond the support width in two coordinates
    theta = np.array([3.0, -3.0, 0.0])
    model = ss.ProductIID(3, ss.Uniform1D(1.0), theta)
    assert model.validity("zerobias").ok


# -- parameter errors ---------------------------------------------------------


def test_parameter_errors():
    with pytest.raises(ParameterError):
        ss.StudentT(6, 4)
    with pytest.raises(ParameterError):
        ss.AdditiveCorruption(1.5, ss.StudentT(4, 6))
    with pytest.raises(ParameterError):
        ss.Mixture([ss.GaussianIso(3, 1.0)], [0.5])
    with pytest.raises(ParameterError):
        ss.LinearTransform(np.zeros((2, 2)), ss.GaussianIso(2, 1.0))
    with pytest.raises(ParameterError):
        ss.Elliptical(2, lambda t: math.exp(-t), -np.eye(2))


# -- theta parsing ------------------------------------------------------------


def test_parse_theta_forms(tmp_path):
    assert np.array_equal(ss.parse_theta("zero", 3), np.zeros(3))
    scaled = ss.parse_theta("scaled:2", 4)
    assert np.dot(scaled, scaled) == pytest.approx(4.0)
    path = tmp_path / "theta.txt"
    path.write_text("1.5\n-2.0\n0.25\n")
    assert np.array_equal(ss.parse_theta(str(path), 3), np.array([1.5, -2.0, 0.25]))
    with pytest.raises(ParameterError):
        ss.parse_theta(str(path), 4)
    with pytest.raises(ParameterError):
        ss.parse_theta("scaled:x", 3)
