"""Command-line experiment front end.

Subcommands: risk, identity-check, sure, adaptivity, sphere-demo,
student-demo.  Every run writes CSV with a '#'-prefixed metadata header
carrying the artifact version, the fully resolved configuration, and the
seed, so a rerun with the same seed is byte-identical.

Exit codes: 0 success, 2 usage error, 3 numerical-guard abort.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import __version__
from .errors import GuardAbort, ParameterError
from .estimation import JamesStein, SoftThreshold, make_estimator, select_lambda
from .laws1d import Laplace1D, SmoothedRademacher1D, Uniform1D
from .noise_models import (
    AdditiveCorruption,
    BallUniform,
    FourPointDegenerate,
    GaussianIso,
    MixingCorruption,
    NoiseModel,
    ProductIID,
    SphereUniform,
    StudentT,
)
from .risk_lab import (
    BoundInputs,
    adaptivity_bound_kernel,
    bound_b_star,
    bound_thm31,
    bound_thm33,
    mc_e_d2_inv4,
    mc_e_inv2,
    mc_excess_risk,
    mc_risk,
    pinsker_limit,
    student_constants,
    sure_bias,
)
from .stein_kernels import (
    discrepancy_stats,
    gaussian_kernel,
    product_kernel,
    stein_identity_residual,
    student_kernel,
)
from .testfns import coordinate_quadratic, linear_map, shrink_direction
from .theta import parse_theta
from .zero_bias import FourPointCoupling, coupling_for, zb_identity_residual

_SEED_E_INV2 = 1000003
_SEED_E_INV4 = 2000003
_SEED_DISC = 3000003
_SEED_BSTAR = 4000003


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class CsvWriter:
    def __init__(self, path, config: dict, seed: int):
        echo = {k: v for k, v in config.items() if k != "out"}  # not part of the experiment
        self.lines = [
            f"# steinshrink v{__version__}",
            "# config: " + " ".join(f"{k}={_fmt(v)}" for k, v in sorted(echo.items())),
            f"# seed={seed}",
        ]
        self.path = path

    def header(self, columns):
        self.lines.append(",".join(columns))

    def row(self, values):
        self.lines.append(",".join(_fmt(v) for v in values))

    def comment(self, text):
        self.lines.append(f"# {text}")

    def finish(self):
        text = "\n".join(self.lines) + "\n"
        if self.path in (None, "-"):
            sys.stdout.write(text)
        else:
            with open(self.path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)


# ---------------------------------------------------------------------------
# configuration handling


def _read_config_file(path) -> dict:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParameterError(f"config line without '=': {line!r}")
            key, val = line.split("=", 1)
            values[key.strip().replace("-", "_")] = val.strip()
    return values


_DEFAULTS = {
    "model": "gaussian",
    "d": 5,
    "k": 6,
    "sigma": 1.0,
    "eps": 0.1,
    "theta": "zero",
    "lam": None,
    "lambda_grid": "2:512",
    "reps": 100000,
    "seed": 1,
    "out": "-",
    "estimator": "james-stein",
    "bounds": False,
    "excess": False,
    "pinsker": False,
    "select_lambda": False,
    "outlier": "student",
    "c": 1.0,
    "c_low": 4.0,
    "c_high": 9.0,
    "d_list": None,
}

_CASTS = {
    "d": int,
    "k": int,
    "reps": int,
    "seed": int,
    "sigma": float,
    "eps": float,
    "lam": float,
    "c": float,
    "c_low": float,
    "c_high": float,
    "bounds": lambda s: str(s).lower() in ("1", "true", "yes", "on"),
    "excess": lambda s: str(s).lower() in ("1", "true", "yes", "on"),
    "pinsker": lambda s: str(s).lower() in ("1", "true", "yes", "on"),
    "select_lambda": lambda s: str(s).lower() in ("1", "true", "yes", "on"),
}


_COMMAND_DEFAULTS = {
    "identity-check": {"model": "all", "reps": 200000},
    "adaptivity": {"reps": 100000},
}


def resolve_config(args: argparse.Namespace) -> dict:
    """Flags override config-file keys override defaults."""
    cfg = dict(_DEFAULTS)
    cfg.update(_COMMAND_DEFAULTS.get(args.command, {}))
    if getattr(args, "config", None):
        for key, raw in _read_config_file(args.config).items():
            if key not in cfg:
                raise ParameterError(f"unknown config key {key!r}")
            cfg[key] = _CASTS.get(key, str)(raw)
    for key in cfg:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    cfg["command"] = args.command
    return cfg


def build_model(cfg: dict) -> NoiseModel:
    d = cfg["d"]
    sigma = cfg["sigma"]
    theta = parse_theta(cfg["theta"], d)
    scaling = "pinsker" if cfg["pinsker"] else None
    name = cfg["model"]
    if name == "gaussian":
        return GaussianIso(d, sigma**2, theta, scaling=scaling)
    if name == "student":
        return StudentT(d, cfg["k"], theta)
    if name == "sphere":
        return SphereUniform(d, sigma, theta)
    if name == "ball":
        return BallUniform(d, sigma, theta)
    if name == "laplace":
        return ProductIID(d, Laplace1D(sigma / math.sqrt(2.0)), theta, scaling=scaling)
    if name == "uniform":
        return ProductIID(d, Uniform1D(sigma * math.sqrt(3.0)), theta, scaling=scaling)
    if name == "smoothed-rademacher":
        c = sigma * math.sqrt(0.99)
        return ProductIID(d, SmoothedRademacher1D(c, 0.1 * sigma), theta, scaling=scaling)
    if name == "corrupt-add":
        return AdditiveCorruption(cfg["eps"], _outlier(cfg), theta)
    if name == "corrupt-mix":
        return MixingCorruption(cfg["eps"], _outlier(cfg), theta)
    if name == "four-point":
        return FourPointDegenerate(theta if len(theta) == 2 else None)
    raise ParameterError(f"unknown model {name!r}")


def _outlier(cfg: dict) -> NoiseModel:
    kind = cfg["outlier"]
    d = cfg["d"]
    if kind == "student":
        return StudentT(d, cfg["k"])
    if kind == "laplace":
        return ProductIID(d, Laplace1D(cfg["sigma"] / math.sqrt(2.0)))
    if kind == "gaussian":
        return GaussianIso(d, cfg["sigma"] ** 2)
    raise ParameterError(f"unknown outlier {kind!r}")


def model_kernel(model: NoiseModel):
    """The canonical Stein kernel for a model, or None."""
    if isinstance(model, GaussianIso):
        return gaussian_kernel(model.cov()) if model.sigma2 > 0 else None
    if isinstance(model, StudentT):
        return student_kernel(model.k, model.d)
    if isinstance(model, ProductIID):
        return product_kernel([model.law] * model.d)
    return None


def _parse_grid(spec: str):
    try:
        c_str, size_str = str(spec).split(":", 1)
        return float(c_str), int(size_str)
    except ValueError as exc:
        raise ParameterError(f"bad --lambda-grid spec {spec!r}, expected C:size") from exc


# ---------------------------------------------------------------------------
# subcommands


def cmd_risk(cfg: dict) -> CsvWriter:
    model = build_model(cfg)
    lam = cfg["lam"] if cfg["lam"] is not None else 0.0
    est = make_estimator(cfg["estimator"], lam)
    n, seed = cfg["reps"], cfg["seed"]
    w = CsvWriter(cfg["out"], cfg, seed)
    w.header(
        ["label", "lambda", "mean", "stderr", "n", "seed", "bound_thm31", "bound_thm33", "bound_zb"]
    )
    if cfg["excess"]:
        rep = mc_excess_risk(model, lam, n, seed)
    else:
        rep = mc_risk(model, est, n, seed)
    b31 = b33 = bzb = None
    if cfg["bounds"] and est.kind == "james_stein":
        mom = model.moments()
        e_inv2 = mc_e_inv2(model, n, seed + _SEED_E_INV2).mean
        inputs = BoundInputs(
            lam=lam, d=model.d, trace_sigma=mom.trace_cov, kappa=mom.kappa, e_inv2=e_inv2
        )
        if isinstance(model, GaussianIso):
            inputs.alpha_minus = inputs.alpha_plus = model.sigma2
            b31 = bound_thm31(inputs)
        kernel = model_kernel(model)
        if kernel is not None:
            disc_n = min(n, 200000)
            inputs.discrepancy = discrepancy_stats(model, kernel, disc_n, seed + _SEED_DISC)
            if isinstance(model, StudentT) and model.d % 2 == 0 and model.d >= 6:
                inputs.e_d2_inv4 = student_constants(model.d, model.k, lam)["e_d2_inv4_bound"]
            else:
                inputs.e_d2_inv4 = mc_e_d2_inv4(model, disc_n, seed + _SEED_E_INV4).mean
            b33 = bound_thm33(inputs)
        try:
            coupling = coupling_for(model)
        except ParameterError:
            coupling = None
        if coupling is not None:
            bstar = bound_b_star(coupling, lam, min(n, 200000), seed + _SEED_BSTAR)
            middle = lam * e_inv2 * (lam - 2.0 * (mom.trace_cov - 2.0 * mom.kappa))
            bzb = mom.trace_cov + middle + 2.0 * bstar.mean
        if cfg["excess"]:
            b31 = None if b31 is None else b31 - mom.trace_cov
            b33 = None if b33 is None else b33 - mom.trace_cov
            bzb = None if bzb is None else bzb - mom.trace_cov
    label = rep.label
    w.row([label, lam, rep.mean, rep.stderr, rep.n, seed, b31, b33, bzb])
    return w


def _identity_suite(cfg: dict):
    """(model label, model, kind, construction, object) rows to test."""
    d, k, sigma = 6, 6, 1.0
    laplace = ProductIID(d, Laplace1D(sigma / math.sqrt(2.0)))
    shifted_sphere = SphereUniform(d, sigma, parse_theta(f"scaled:{2*math.sqrt(d):.17g}", d))
    student = StudentT(d, k)
    gauss = GaussianIso(d, sigma**2)
    mix = MixingCorruption(0.2, ProductIID(d, Laplace1D(sigma / math.sqrt(2.0))))
    rows = [
        ("gaussian", gauss, "kernel", "constant", gaussian_kernel(gauss.cov())),
        ("student", student, "kernel", "student_closed_form", student_kernel(k, d)),
        ("product-laplace", laplace, "kernel", "product_diagonal", product_kernel([laplace.law] * d)),
        ("student", student, "zerobias", "student_gamma", coupling_for(student)),
        ("sphere-shifted", shifted_sphere, "zerobias", "sphere_ball", coupling_for(shifted_sphere)),
        ("product-laplace", laplace, "zerobias", "independent_replace", coupling_for(laplace)),
        ("corrupt-mix", mix, "zerobias", "mixture", coupling_for(mix)),
        ("four-point", FourPointDegenerate(), "zerobias", "four_point", None),
    ]
    return rows


def cmd_identity_check(cfg: dict) -> CsvWriter:
    n, seed = cfg["reps"], cfg["seed"]
    w = CsvWriter(cfg["out"], cfg, seed)
    w.header(["model", "construction", "test_fn", "mean", "stderr", "n", "seed", "pass"])
    for label, model, kind, construction, obj in _identity_suite(cfg):
        if cfg["model"] != "all" and not label.startswith(cfg["model"]):
            continue
        rng = np.random.default_rng(20240517)
        fams = [linear_map(rng.normal(size=(model.d, model.d))), coordinate_quadratic(0)]
        fams.append(shrink_direction())
        for fn in fams:
            if fn.needs_origin_guard:
                report = model.validity(kind)
                if not report.ok:
                    w.row([label, construction, fn.name, None, None, n, seed, "invalid-by-validity-check"])
                    continue
            if kind == "kernel":
                rep = stein_identity_residual(model, obj, fn, n, seed)
            else:
                coupling = obj if obj is not None else FourPointCoupling(model)
                rep = zb_identity_residual(model, coupling, fn, n, seed)
            ok = abs(rep.mean) < 3.0 * rep.stderr
            w.row([label, construction, fn.name, rep.mean, rep.stderr, rep.n, seed, ok])
    return w


def cmd_sure(cfg: dict) -> CsvWriter:
    model = build_model(cfg)
    n, seed = cfg["reps"], cfg["seed"]
    w = CsvWriter(cfg["out"], cfg, seed)
    w.header(["model", "estimator", "lambda", "sure_mean", "risk_mean", "bias", "bias_bound"])
    cov = model.cov()
    if cfg["select_lambda"]:
        grid = _parse_grid(cfg["lambda_grid"])
        sigma2 = float(cov[0, 0])
        lam_sum = sure_sum = risk_sum = 0.0
        count = 0
        for X in model.iter_chunks(n, seed):
            for row in X:
                lam_hat, val = select_lambda(row, sigma2, grid, "soft-threshold")
                est_row = SoftThreshold(lam_hat)
                dev = est_row.apply(row[None, :])[0] - model.theta
                lam_sum += lam_hat
                sure_sum += val
                risk_sum += float(np.dot(dev, dev))
                count += 1
        w.row(
            [
                model.family,
                "soft-threshold:lambda-hat",
                lam_sum / count,
                sure_sum / count,
                risk_sum / count,
                sure_sum / count - risk_sum / count,
                None,
            ]
        )
        return w
    lam = cfg["lam"] if cfg["lam"] is not None else 0.0
    est = make_estimator(cfg["estimator"], lam)
    bias = sure_bias(model, est, n, seed)
    risk = mc_risk(model, est, n, seed)
    bound = None
    if est.kind == "james_stein":
        try:
            coupling = coupling_for(model)
            bound = 2.0 * bound_b_star(coupling, lam, min(n, 200000), seed + _SEED_BSTAR).mean
        except ParameterError:
            bound = None
    w.row([model.family, est.kind, lam, risk.mean + bias.mean, risk.mean, bias.mean, bound])
    return w


def cmd_adaptivity(cfg: dict) -> CsvWriter:
    n, seed = cfg["reps"], cfg["seed"]
    c = cfg["c"]
    sigma2 = cfg["sigma"] ** 2
    d_list = [int(x) for x in (cfg["d_list"] or "100,400,1600").split(",")]
    w = CsvWriter(cfg["out"], cfg, seed)
    w.header(["d", "risk_mean", "stderr", "pinsker_limit", "thm45_bound"])
    limit = pinsker_limit(sigma2, c**2)
    for d in d_list:
        theta = parse_theta(f"scaled:{c:.17g}", d)
        if cfg["model"] == "gaussian":
            model = GaussianIso(d, sigma2, theta, scaling="pinsker")
        elif cfg["model"] == "laplace":
            model = ProductIID(
                d, Laplace1D(math.sqrt(sigma2 / 2.0)), theta, scaling="pinsker"
            )
        else:
            raise ParameterError("adaptivity sweep supports gaussian and laplace models")
        lam = (d - 2) * sigma2 / d
        rep = mc_risk(model, JamesStein(lam), n, seed)
        bound = adaptivity_bound_kernel(theta, sigma2, d, b_lam=0.0)
        w.row([d, rep.mean, rep.stderr, limit, bound])
    return w


def cmd_sphere_demo(cfg: dict) -> CsvWriter:
    n, seed = cfg["reps"], cfg["seed"]
    c_low, c_high, sigma2 = cfg["c_low"], cfg["c_high"], cfg["sigma"] ** 2
    if c_low <= 1:
        raise ParameterError("the lower norm ratio must exceed 1")
    d_list = [int(x) for x in (cfg["d_list"] or "16,65,100,200").split(",")]
    w = CsvWriter(cfg["out"], cfg, seed)
    crossing = 4.0 * (math.sqrt(c_high) + 1.0) ** 2 / (math.sqrt(c_low) - 1.0) ** 3
    w.comment(f"certified improvement for d > {crossing:.17g}")
    w.header(["d", "gain_term", "two_b_star_closed", "improves"])
    for d in d_list:
        gain = -sigma2 * (d - 2.0) ** 2 / ((math.sqrt(c_high) + 1.0) ** 2 * d)
        two_bstar = 4.0 * sigma2 * (d - 2.0) ** 2 / ((math.sqrt(c_low) - 1.0) ** 3 * d**2)
        w.row([d, gain, two_bstar, gain + two_bstar < 0.0])
    return w


def cmd_student_demo(cfg: dict) -> CsvWriter:
    n, seed = cfg["reps"], cfg["seed"]
    d, k = cfg["d"], cfg["k"]
    model = StudentT(d, k)
    lam = cfg["lam"] if cfg["lam"] is not None else float(d - 2)
    consts = student_constants(d, k, lam)
    kern = student_kernel(k, d)
    disc = discrepancy_stats(model, kern, n, seed + _SEED_DISC)
    bstar = bound_b_star(coupling_for(model), lam, n, seed + _SEED_BSTAR)
    w = CsvWriter(cfg["out"], cfg, seed)
    w.header(
        [
            "d",
            "k",
            "lambda",
            "var_trace_closed",
            "var_trace_mc",
            "frob_dev_closed",
            "frob_dev_mc",
            "e_d2_inv4_bound",
            "kernel_excess_bound",
            "zb_excess_bound",
            "b_star_mc",
            "b_star_stderr",
        ]
    )
    w.row(
        [
            d,
            k,
            lam,
            consts["var_trace_T"],
            disc.var_trace_T,
            consts["e_frob_dev_sq"],
            disc.e_frob_dev_sq,
            consts["e_d2_inv4_bound"],
            consts["kernel_excess_bound"],
            consts["zero_bias_excess_bound"],
            bstar.mean,
            bstar.stderr,
        ]
    )
    return w


_COMMANDS = {
    "risk": cmd_risk,
    "identity-check": cmd_identity_check,
    "sure": cmd_sure,
    "adaptivity": cmd_adaptivity,
    "sphere-demo": cmd_sphere_demo,
    "student-demo": cmd_student_demo,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steinshrink", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="key=value configuration file")
        p.add_argument("--model", default=None)
        p.add_argument("--d", type=int, default=None)
        p.add_argument("--k", type=int, default=None)
        p.add_argument("--sigma", type=float, default=None)
        p.add_argument("--eps", type=float, default=None)
        p.add_argument("--theta", default=None, help="file path, 'zero', or 'scaled:c'")
        p.add_argument("--lambda", dest="lam", type=float, default=None)
        p.add_argument("--lambda-grid", dest="lambda_grid", default=None, help="C:size")
        p.add_argument("--reps", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--estimator", default=None)
        p.add_argument("--bounds", action="store_const", const=True, default=None)
        p.add_argument("--excess", action="store_const", const=True, default=None)
        p.add_argument("--pinsker", action="store_const", const=True, default=None)
        p.add_argument("--select-lambda", dest="select_lambda", action="store_const", const=True, default=None)
        p.add_argument("--outlier", default=None)
        p.add_argument("--c", type=float, default=None)
        p.add_argument("--c-low", dest="c_low", type=float, default=None)
        p.add_argument("--c-high", dest="c_high", type=float, default=None)
        p.add_argument("--d-list", dest="d_list", default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        cfg = resolve_config(args)
        writer = _COMMANDS[args.command](cfg)
        writer.finish()
    except (ParameterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GuardAbort as exc:
        print(f"numerical guard: {exc} {exc.diagnostics}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
