import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from oracles import face_singular_values
from textrap import (
    Stack4,
    Tensor3,
    frobenius_norm,
    identity_tensor,
    load_factors,
    read_tns3,
    tinverse,
    tprod,
    tsvd,
    ttranspose,
    write_tns3,
    write_tns4,
)
from textrap.cli import main

RNG = np.random.default_rng(20240807)


def run_cli(argv, capsys):
    """Invoke the CLI in-process and parse the JSON report from stdout."""
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    report = json.loads(captured.out) if captured.out.strip() else None
    return code, report, captured.err


def gen_problem(tmp_path, capsys, dims="8,3,4", **extra):
    argv = ["gen", "--dims", dims, "--output", tmp_path, "--seed", 5]
    for flag, value in extra.items():
        argv += [f"--{flag}", value]
    code, report, _ = run_cli(argv, capsys)
    assert code == 0
    return report


def linear_sequence_files(tmp_path, n=5, n3=3, width=2, count=8):
    """Write a finitely-terminating fixed-point iteration as a TNS4 file."""
    q = tsvd(Tensor3(RNG.standard_normal((n, n, n3)))).u
    eig = RNG.uniform(0.1, 0.8, size=width)
    diag = np.concatenate([eig, eig[RNG.integers(0, width, size=n - width)]])
    d = np.zeros((n, n, n3))
    d[np.arange(n), np.arange(n), 0] = diag
    m = tprod(tprod(q, Tensor3(d)), ttranspose(q))
    c = Tensor3(RNG.standard_normal((n, 1, n3)))
    fixed = tprod(tinverse(identity_tensor(n, n3) - m), c)
    terms = [Tensor3(RNG.standard_normal((n, 1, n3)))]
    for _ in range(count - 1):
        terms.append(tprod(m, terms[-1]) + c)
    path = tmp_path / "seq.tns4"
    write_tns4(Stack4(terms), path)
    return path, fixed


# ---------------------------------------------------------------------------
# gen


def test_gen_report_and_files(tmp_path, capsys):
    report = gen_problem(tmp_path, capsys)
    assert report["command"] == "gen"
    assert report["dims"] == [8, 3, 4]
    assert report["profile"] == "geometric"
    assert report["rate"] == 1.0
    assert report["noise"] == 0.0
    assert report["rhs_width"] == 1
    assert report["seed"] == 5
    assert report["norms"]["a"] > 0 and report["norms"]["b"] > 0
    for name in ("a", "b", "x_true"):
        t = read_tns3(report["paths"][name])
        assert t.n3 == 4


def test_gen_same_seed_is_bit_reproducible(tmp_path, capsys):
    r1 = gen_problem(tmp_path / "one", capsys)
    r2 = gen_problem(tmp_path / "two", capsys)
    one = (tmp_path / "one" / "A.tns3").read_bytes()
    two = (tmp_path / "two" / "A.tns3").read_bytes()
    assert one == two
    assert r1["norms"] == r2["norms"]
    code, r3, _ = run_cli(
        ["gen", "--dims", "8,3,4", "--output", tmp_path / "three", "--seed", 6], capsys
    )
    assert code == 0
    assert (tmp_path / "three" / "A.tns3").read_bytes() != one


def test_gen_noiseless_rhs_is_exact_image(tmp_path, capsys):
    report = gen_problem(tmp_path, capsys)
    a = read_tns3(report["paths"]["a"])
    b = read_tns3(report["paths"]["b"])
    x = read_tns3(report["paths"]["x_true"])
    assert_allclose(tprod(a, x).data, b.data, atol=1e-12)


def test_gen_noise_level_is_relative(tmp_path, capsys):
    report = gen_problem(tmp_path, capsys, noise="0.01")
    a = read_tns3(report["paths"]["a"])
    b = read_tns3(report["paths"]["b"])
    x = read_tns3(report["paths"]["x_true"])
    exact = tprod(a, x)
    rel = frobenius_norm(b - exact) / frobenius_norm(exact)
    assert rel == pytest.approx(0.01, rel=1e-12)


@pytest.mark.parametrize(
    "profile,rate,expected",
    [
        ("geometric", 0.5, 10.0 ** (-0.5 * np.arange(6))),
        ("algebraic", 2.0, (np.arange(6) + 1.0) ** -2.0),
    ],
)
def test_gen_profile_fixes_face_singular_values(tmp_path, capsys, profile, rate, expected):
    report = gen_problem(tmp_path, capsys, dims="6,6,3", profile=profile, rate=str(rate))
    a = read_tns3(report["paths"]["a"])
    for face_sv in face_singular_values(a.data):
        assert_allclose(face_sv, expected, rtol=1e-10)


def test_gen_width_sets_rhs_columns(tmp_path, capsys):
    report = gen_problem(tmp_path, capsys, width="2")
    assert report["rhs_width"] == 2
    x = read_tns3(report["paths"]["x_true"])
    assert x.dims == (3, 2, 4)


def test_gen_missing_dims_is_usage_error(tmp_path, capsys):
    code, report, err = run_cli(["gen", "--output", tmp_path], capsys)
    assert code == 2
    assert report is None
    assert "usage error" in err


def test_gen_rejects_negative_noise_and_bad_dims(tmp_path, capsys):
    code, _, err = run_cli(
        ["gen", "--dims", "4,2,3", "--noise", "-0.1", "--output", tmp_path], capsys
    )
    assert code == 2 and "noise" in err
    code, _, err = run_cli(["gen", "--dims", "4,2", "--output", tmp_path], capsys)
    assert code == 2 and "dims" in err
    code, _, err = run_cli(["gen", "--dims", "4,0,3", "--output", tmp_path], capsys)
    assert code == 2 and "positive" in err


# ---------------------------------------------------------------------------
# tsvd


def test_tsvd_full_decomposition_report(tmp_path, capsys):
    gen = gen_problem(tmp_path, capsys, dims="6,4,3")
    prefix = tmp_path / "fac"
    code, report, _ = run_cli(
        ["tsvd", "--input", gen["paths"]["a"], "--output", prefix, "--seed", 5], capsys
    )
    assert code == 0
    assert report["command"] == "tsvd"
    assert report["dims"] == [6, 4, 3]
    assert report["k"] == 4
    assert report["reconstruction_error"] < 1e-10
    assert report["orthogonality_residual"] < 1e-8
    assert report["f_diagonality_residual"] < 1e-12
    assert "pinv" not in report["paths"]
    factors = load_factors(prefix)
    assert factors.u.dims == (6, 4, 3)
    assert factors.r == 4


def test_tsvd_truncation_writes_pinv(tmp_path, capsys):
    gen = gen_problem(tmp_path, capsys, dims="6,4,3")
    prefix = tmp_path / "fac"
    code, report, _ = run_cli(
        ["tsvd", "-i", gen["paths"]["a"], "--k", "2", "-o", prefix, "--seed", 5], capsys
    )
    assert code == 0
    assert report["k"] == 2
    assert report["reconstruction_error"] > 1e-6
    pinv = read_tns3(report["paths"]["pinv"])
    assert pinv.dims == (4, 6, 3)
    factors = load_factors(prefix)
    a_k = tprod(tprod(factors.u, factors.s), ttranspose(factors.v))
    assert_allclose(tprod(tprod(a_k, pinv), a_k).data, a_k.data, atol=1e-8)


def test_tsvd_default_prefix_is_input_stem(tmp_path, capsys):
    gen = gen_problem(tmp_path, capsys, dims="4,3,2")
    code, report, _ = run_cli(["tsvd", "-i", gen["paths"]["a"], "--seed", 5], capsys)
    assert code == 0
    assert report["paths"]["u"].endswith("A_u.tns3")
    load_factors(report["paths"]["u"][: -len("_u.tns3")])


def test_tsvd_usage_and_io_errors(tmp_path, capsys):
    code, _, err = run_cli(["tsvd", "--seed", "1"], capsys)
    assert code == 2 and "usage error" in err
    gen = gen_problem(tmp_path, capsys, dims="4,3,2")
    for bad_k in ("0", "99"):
        code, _, err = run_cli(["tsvd", "-i", gen["paths"]["a"], "--k", bad_k], capsys)
        assert code == 2 and "k" in err
    code, _, err = run_cli(["tsvd", "-i", tmp_path / "missing.tns3"], capsys)
    assert code == 1 and "error" in err


# ---------------------------------------------------------------------------
# solve


def test_solve_end_to_end_with_error_tracking(tmp_path, capsys):
    gen = gen_problem(tmp_path, capsys, dims="8,8,3", rate="0.8")
    out = tmp_path / "tk.tns3"
    code, report, _ = run_cli(
        [
            "solve",
            "-i", gen["paths"]["a"],
            "--b", gen["paths"]["b"],
            "--xtrue", gen["paths"]["x_true"],
            "--tol", "1e-6",
            "--output", out,
            "--seed", 5,
        ],
        capsys,
    )
    assert code == 0
    assert report["command"] == "solve"
    assert report["stop_reason"] in ("tolerance", "k_max")
    assert report["ks"][0] == 1
    assert len(report["residual_norms"]) == len(report["ks"])
    assert report["residual_norms"][0] is None
    assert "relative_errors" in report
    t_k = read_tns3(out)
    assert t_k.dims == (8, 1, 3)
    assert report["output"] == str(out)


def test_solve_without_xtrue_omits_errors(tmp_path, capsys):
    gen = gen_problem(tmp_path, capsys, dims="6,6,2", rate="0.8")
    code, report, _ = run_cli(
        ["solve", "-i", gen["paths"]["a"], "--b", gen["paths"]["b"],
         "--output", tmp_path / "tk.tns3", "--seed", 5],
        capsys,
    )
    assert code == 0
    assert "relative_errors" not in report


def test_solve_shift_zero_disables_regularization(tmp_path, capsys):
    gen = gen_problem(tmp_path, capsys, dims="6,6,2", rate="0.5")
    code, report, _ = run_cli(
        ["solve", "-i", gen["paths"]["a"], "--b", gen["paths"]["b"], "--shift", "0",
         "--output", tmp_path / "tk.tns3", "--seed", 5],
        capsys,
    )
    assert code == 0
    assert report["stop_reason"] in ("tolerance", "k_max")


def test_solve_usage_and_io_errors(tmp_path, capsys):
    gen = gen_problem(tmp_path, capsys, dims="4,4,2")
    code, _, err = run_cli(["solve", "-i", gen["paths"]["a"]], capsys)
    assert code == 2 and "usage error" in err
    code, _, err = run_cli(
        ["solve", "-i", tmp_path / "no.tns3", "--b", gen["paths"]["b"]], capsys
    )
    assert code == 1


# ---------------------------------------------------------------------------
# extrapolate


def test_extrapolate_tmpe_reaches_fixed_point(tmp_path, capsys):
    seq_path, fixed = linear_sequence_files(tmp_path, n=5, n3=3, width=2)
    out = tmp_path / "ext.tns3"
    code, report, _ = run_cli(
        ["extrapolate", "-i", seq_path, "--method", "tmpe", "--k", "2",
         "--output", out, "--seed", 5],
        capsys,
    )
    assert code == 0
    assert report["method"] == "tmpe"
    assert report["terms"] == 8
    assert len(report["gamma"]) == 3
    assert len(report["alpha"]) == 2
    assert len(report["beta"]) == 2
    assert report["residual_norm"] < 1e-8
    assert_allclose(read_tns3(out).data, fixed.data, atol=1e-6)


def test_extrapolate_tmmpe_test_stack_options(tmp_path, capsys):
    seq_path, fixed = linear_sequence_files(tmp_path, n=5, n3=3, width=2)
    code, _, err = run_cli(
        ["extrapolate", "-i", seq_path, "--method", "tmmpe", "--k", "2",
         "--output", tmp_path / "e.tns3"],
        capsys,
    )
    assert code == 2 and "tmmpe" in err
    code, report, _ = run_cli(
        ["extrapolate", "-i", seq_path, "--method", "tmmpe", "--k", "2",
         "--default-y", "--output", tmp_path / "e.tns3", "--seed", 5],
        capsys,
    )
    assert code == 0
    assert_allclose(read_tns3(tmp_path / "e.tns3").data, fixed.data, atol=1e-6)
    y_path = tmp_path / "y.tns4"
    blocks = [Tensor3(RNG.standard_normal((5, 1, 3))) for _ in range(2)]
    write_tns4(Stack4(blocks), y_path)
    code, report, _ = run_cli(
        ["extrapolate", "-i", seq_path, "--method", "tmmpe", "--k", "2",
         "--y", y_path, "--output", tmp_path / "e2.tns3", "--seed", 5],
        capsys,
    )
    assert code == 0
    assert_allclose(read_tns3(tmp_path / "e2.tns3").data, fixed.data, atol=1e-6)


def test_extrapolate_ttea_reports_beta_only(tmp_path, capsys):
    seq_path, fixed = linear_sequence_files(tmp_path, n=5, n3=3, width=2)
    y_path = tmp_path / "y.tns3"
    write_tns3(Tensor3(RNG.standard_normal((5, 1, 3))), y_path)
    out = tmp_path / "e.tns3"
    code, report, _ = run_cli(
        ["extrapolate", "-i", seq_path, "--method", "ttea", "--k", "2",
         "--y", y_path, "--output", out, "--seed", 5],
        capsys,
    )
    assert code == 0
    assert "beta" in report and "gamma" not in report
    assert_allclose(read_tns3(out).data, fixed.data, atol=1e-5)
    code, _, err = run_cli(
        ["extrapolate", "-i", seq_path, "--method", "ttea", "--k", "2",
         "--output", tmp_path / "e3.tns3"],
        capsys,
    )
    assert code == 2 and "ttea" in err


def test_extrapolate_usage_errors(tmp_path, capsys):
    seq_path, _ = linear_sequence_files(tmp_path)
    code, _, err = run_cli(
        ["extrapolate", "-i", seq_path, "--method", "nope"], capsys
    )
    assert code == 2 and "method" in err
    code, _, err = run_cli(["extrapolate", "--method", "tmpe"], capsys)
    assert code == 2 and "input" in err


# ---------------------------------------------------------------------------
# verify


def test_verify_default_runs_all_suites(capsys):
    code, report, _ = run_cli(["verify", "--seed", 11], capsys)
    assert code == 0
    assert report["passed"] is True
    assert set(report["suites"]) == {
        "tprod", "tsvd", "penrose", "leastsq", "products",
        "extrapolation", "trre_tsvd",
    }
    for result in report["suites"].values():
        assert result["passed"] is True


def test_verify_single_suite_filter(capsys):
    code, report, _ = run_cli(["verify", "--suite", "tprod", "--seed", 11], capsys)
    assert code == 0
    assert list(report["suites"]) == ["tprod"]
    code, _, err = run_cli(["verify", "--suite", "nope"], capsys)
    assert code == 2 and "suite" in err


def test_verify_detects_injected_fault(capsys):
    code, report, _ = run_cli(
        ["verify", "--suite", "tprod", "--mutate", "bcirc-sign", "--seed", 11], capsys
    )
    assert code == 1
    assert report["passed"] is False
    assert report["suites"]["tprod"]["passed"] is False


# ---------------------------------------------------------------------------
# config and report plumbing


def test_config_file_supplies_defaults(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dims": "5,2,3", "seed": 9, "rate": 0.5}))
    code, report, _ = run_cli(
        ["gen", "--config", cfg, "--output", tmp_path / "out"], capsys
    )
    assert code == 0
    assert report["dims"] == [5, 2, 3]
    assert report["rate"] == 0.5
    assert report["seed"] == 9


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dims": "5,2,3", "seed": 9}))
    code, report, _ = run_cli(
        ["gen", "--config", cfg, "--dims", "4,2,2", "--seed", 4,
         "--output", tmp_path / "out"],
        capsys,
    )
    assert code == 0
    assert report["dims"] == [4, 2, 2]
    assert report["seed"] == 4


def test_config_must_hold_an_object(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("[1, 2]")
    code, _, err = run_cli(["gen", "--config", cfg, "--dims", "4,2,2"], capsys)
    assert code == 2 and "config" in err
    code, _, err = run_cli(
        ["gen", "--config", tmp_path / "absent.json", "--dims", "4,2,2"], capsys
    )
    assert code == 2


def test_report_flag_redirects_output(tmp_path, capsys):
    rpt = tmp_path / "report.json"
    code, report, _ = run_cli(
        ["gen", "--dims", "4,2,2", "--output", tmp_path / "out",
         "--report", rpt, "--seed", 5],
        capsys,
    )
    assert code == 0
    assert report is None
    on_disk = json.loads(rpt.read_text())
    assert on_disk["command"] == "gen"
    assert on_disk["seed"] == 5


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    capsys.readouterr()
