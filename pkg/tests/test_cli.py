import numpy as np
import pytest

from steinshrink.cli import main


def _run(tmp_path, name, *args):
    out = tmp_path / f"{name}.csv"
    code = main(list(args) + ["--out", str(out)])
    return code, out


def _data_rows(path):
    lines = path.read_text().splitlines()
    meta = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    return meta, body[0].split(","), body[1:]


def test_risk_schema_and_value(tmp_path):
    code, out = _run(
        tmp_path, "risk",
        "risk", "--model", "gaussian", "--d", "5", "--theta", "zero",
        "--lambda", "3", "--reps", "100000", "--seed", "3", "--bounds",
    )
    assert code == 0
    meta, header, rows = _data_rows(out)
    assert header == [
        "label", "lambda", "mean", "stderr", "n", "seed",
        "bound_thm31", "bound_thm33", "bound_zb",
    ]
    assert any(line.startswith("# seed=3") for line in meta)
    mean = float(rows[0].split(",")[2])
    assert abs(mean - 2.0) < 0.05


def test_risk_identity_estimator(tmp_path):
    code, out = _run(
        tmp_path, "rid",
        "risk", "--model", "laplace", "--d", "6", "--estimator", "identity",
        "--reps", "50000", "--seed", "4",
    )
    assert code == 0
    _, _, rows = _data_rows(out)
    assert abs(float(rows[0].split(",")[2]) - 6.0) < 0.1


def test_risk_student_excess_negative(tmp_path):
    code, out = _run(
        tmp_path, "rex",
        "risk", "--model", "student", "--d", "20", "--k", "10", "--theta", "zero",
        "--lambda", "28.125", "--reps", "100000", "--seed", "5", "--excess",
    )
    assert code == 0
    _, _, rows = _data_rows(out)
    assert float(rows[0].split(",")[2]) < 0.0


def test_identity_check_rows(tmp_path):
    code, out = _run(
        tmp_path, "idc", "identity-check", "--reps", "20000", "--seed", "6",
    )
    assert code == 0
    _, header, rows = _data_rows(out)
    assert header == ["model", "construction", "test_fn", "mean", "stderr", "n", "seed", "pass"]
    cells = [r.split(",") for r in rows]
    flags = {(c[0], c[2]): c[-1] for c in cells}
    assert flags[("four-point", "g0")] == "invalid-by-validity-check"
    regular = [c[-1] for c in cells if c[-1] != "invalid-by-validity-check"]
    assert regular and all(f == "true" for f in regular)


def test_sure_gaussian_bias_near_zero(tmp_path):
    code, out = _run(
        tmp_path, "sure",
        "sure", "--model", "gaussian", "--d", "5", "--theta", "scaled:1",
        "--lambda", "3", "--reps", "100000", "--seed", "7",
    )
    assert code == 0
    _, header, rows = _data_rows(out)
    assert header == ["model", "estimator", "lambda", "sure_mean", "risk_mean", "bias", "bias_bound"]
    assert abs(float(rows[0].split(",")[5])) < 0.05


def test_sure_student_bias_within_bound_column(tmp_path):
    code, out = _run(
        tmp_path, "sure_st",
        "sure", "--model", "student", "--d", "6", "--k", "6", "--theta", "zero",
        "--lambda", "4", "--reps", "200000", "--seed", "8",
    )
    assert code == 0
    _, _, rows = _data_rows(out)
    cells = rows[0].split(",")
    bias, bound = float(cells[5]), float(cells[6])
    assert abs(bias) <= bound + 0.05


def test_sure_select_lambda(tmp_path):
    code, out = _run(
        tmp_path, "sure_sel",
        "sure", "--model", "gaussian", "--d", "64", "--theta", "scaled:6",
        "--select-lambda", "--reps", "400", "--seed", "9",
    )
    assert code == 0
    _, _, rows = _data_rows(out)
    cells = rows[0].split(",")
    assert cells[1] == "soft-threshold:lambda-hat"
    assert 0.0 < float(cells[2]) < np.sqrt(2 * np.log(64))


def test_adaptivity_sweep(tmp_path):
    code, out = _run(
        tmp_path, "adapt",
        "adaptivity", "--model", "gaussian", "--c", "1", "--d-list", "50,200",
        "--reps", "30000", "--seed", "10",
    )
    assert code == 0
    _, header, rows = _data_rows(out)
    assert header == ["d", "risk_mean", "stderr", "pinsker_limit", "thm45_bound"]
    assert len(rows) == 2
    r50, r200 = (float(r.split(",")[1]) for r in rows)
    assert r50 > r200 > 0.5 - 0.02
    assert float(rows[0].split(",")[3]) == pytest.approx(0.5)


def test_sphere_demo_crossing(tmp_path):
    code, out = _run(
        tmp_path, "sph",
        "sphere-demo", "--d-list", "16,65,100,200", "--seed", "11",
    )
    assert code == 0
    meta, header, rows = _data_rows(out)
    assert header == ["d", "gain_term", "two_b_star_closed", "improves"]
    assert any("certified improvement for d > 64" in m for m in meta)
    improves = [r.split(",")[3] for r in rows]
    assert improves == ["false", "true", "true", "true"]


def test_student_demo_columns(tmp_path):
    code, out = _run(
        tmp_path, "stud",
        "student-demo", "--d", "6", "--k", "6", "--lambda", "4", "--reps", "50000",
        "--seed", "12",
    )
    assert code == 0
    _, header, rows = _data_rows(out)
    cells = dict(zip(header, rows[0].split(",")))
    assert float(cells["var_trace_closed"]) == pytest.approx(109.35)
    assert float(cells["frob_dev_closed"]) == pytest.approx(18.225)
    assert abs(float(cells["var_trace_mc"]) - 109.35) < 25.0


def test_rerun_is_byte_identical(tmp_path):
    args = [
        "risk", "--model", "student", "--d", "6", "--k", "6", "--theta", "scaled:1",
        "--lambda", "4", "--reps", "20000", "--seed", "13", "--bounds",
    ]
    _, first = _run(tmp_path, "det1", *args)
    _, second = _run(tmp_path, "det2", *args)
    assert first.read_bytes() == second.read_bytes()


def test_usage_errors_exit_two(tmp_path):
    assert main(["risk", "--model", "nonexistent", "--out", str(tmp_path / "x.csv")]) == 2
    assert main(["risk", "--frobnicate"]) == 2
    assert main(["sphere-demo", "--c-low", "0.5", "--out", str(tmp_path / "y.csv")]) == 2


def test_guard_abort_exits_three(tmp_path):
    code = main(
        [
            "risk", "--model", "gaussian", "--sigma", "0", "--theta", "zero",
            "--lambda", "1", "--reps", "1000", "--seed", "1",
            "--out", str(tmp_path / "g.csv"),
        ]
    )
    assert code == 3


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("model=gaussian\nd=6\nlam=3\nreps=5000\nseed=21\n")
    out1 = tmp_path / "c1.csv"
    assert main(["risk", "--config", str(cfg), "--out", str(out1)]) == 0
    meta, _, _ = _data_rows(out1)
    config_line = next(m for m in meta if m.startswith("# config:"))
    assert "d=6" in config_line
    # a flag overrides the file
    out2 = tmp_path / "c2.csv"
    assert main(["risk", "--config", str(cfg), "--d", "7", "--out", str(out2)]) == 0
    meta2, _, _ = _data_rows(out2)
    assert "d=7" in next(m for m in meta2 if m.startswith("# config:"))


def test_theta_file_via_cli(tmp_path):
    theta = tmp_path / "theta.txt"
    theta.write_text("\n".join(["0.5"] * 5) + "\n")
    out = tmp_path / "t.csv"
    code = main(
        [
            "risk", "--model", "gaussian", "--d", "5", "--theta", str(theta),
            "--estimator", "identity", "--reps", "20000", "--seed", "22",
            "--out", str(out),
        ]
    )
    assert code == 0


def test_unknown_config_key_rejected(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("modle=gaussian\n")
    assert main(["risk", "--config", str(cfg), "--out", str(tmp_path / "z.csv")]) == 2
