import numpy as np
import pytest

from lqconsensus import (
    ConfigError,
    commuting_example,
    lq_cost_exact,
    p_epsilon,
    save_matrix_csv,
    validate_consensus,
)
from lqconsensus.experiments_cli import CSV_COLUMNS, build_config, main


def read_results(path):
    """(master_seed, header, rows as dicts of strings) from a results.csv."""
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# master_seed=")
    master_seed = lines[0].partition("=")[2]
    header = lines[1].split(",")
    rows = [dict(zip(header, line.split(","))) for line in lines[2:]]
    return master_seed, header, rows


def strip_wall_time(text):
    return "\n".join(line for line in text.splitlines()
                     if not line.startswith("total_wall_time_s="))


class TestBuildConfig:
    def test_defaults(self):
        config = build_config("epsilon-sweep")
        assert config.parameters["points"] == 100
        assert config.parameters["eps_min"] == pytest.approx(1e-3)
        assert config.parameters["eps_max"] == pytest.approx(0.5)
        assert config.parameters["seed"] == 0

    def test_overrides_and_types(self):
        config = build_config("geometric", overrides=[
            "n_list=25,50", "p_d=0.2", "literal_pi_check=true",
            "instances=3"])
        assert config.parameters["n_list"] == (25, 50)
        assert config.parameters["p_d"] == pytest.approx(0.2)
        assert config.parameters["literal_pi_check"] is True
        assert config.parameters["instances"] == 3

    def test_unknown_key_lists_known_ones(self):
        with pytest.raises(ConfigError, match="known keys"):
            build_config("epsilon-sweep", overrides=["epsilon=0.2"])

    def test_bad_value_reports_key(self):
        with pytest.raises(ConfigError, match="points"):
            build_config("epsilon-sweep", overrides=["points=many"])
        with pytest.raises(ConfigError, match="inject_fault"):
            build_config("validate", overrides=["inject_fault=maybe"])

    def test_negative_seed_rejected(self):
        with pytest.raises(ConfigError, match="seed"):
            build_config("epsilon-sweep", seed=-1)

    def test_config_file_merging(self, tmp_path):
        cfg = tmp_path / "sweep.cfg"
        cfg.write_text("# comment line\n\npoints = 7\neps_max = 0.25\n")
        config = build_config("epsilon-sweep", config_file=cfg,
                              overrides=["points=9"], seed=4)
        assert config.parameters["points"] == 9
        assert config.parameters["eps_max"] == pytest.approx(0.25)
        assert config.parameters["seed"] == 4

    def test_config_file_syntax_error_names_line(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("points=5\nnot a pair\n")
        with pytest.raises(ConfigError, match=":2"):
            build_config("epsilon-sweep", config_file=cfg)

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            build_config("epsilon-sweep", config_file=tmp_path / "absent.cfg")

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError):
            build_config("frequency-sweep")


class TestEpsilonSweep:
    def run(self, out, extra=()):
        return main(["epsilon-sweep", "--out", str(out),
                     "-p", "points=12", *extra])

    def test_outputs(self, tmp_path, capsys):
        out = tmp_path / "run"
        assert self.run(out) == 0
        assert "results.csv" in capsys.readouterr().out
        master_seed, header, rows = read_results(out / "results.csv")
        assert master_seed == "0"
        assert header == list(CSV_COLUMNS)
        assert len(rows) == 12
        assert "wall_time_s" not in header
        for name in ["epsilon_j.dat", "epsilon_res_upper.dat",
                     "epsilon_res_lower.dat", "epsilon_topo_upper.dat",
                     "epsilon_topo_lower.dat"]:
            data = np.loadtxt(out / name)
            assert data.shape == (12, 2)
        audit = (out / "audit.txt").read_text()
        assert "hypothetical_lower_above_j_count=" in audit
        assert "certified_lower_valid=true" in audit
        assert audit.rstrip().splitlines()[-1].startswith("total_wall_time_s=")

    def test_row_values_match_library(self, tmp_path):
        out = tmp_path / "run"
        assert self.run(out) == 0
        _, _, rows = read_results(out / "results.csv")
        last = rows[-1]
        eps = float(last["epsilon"])
        assert eps == pytest.approx(0.5)
        expected = lq_cost_exact(p_epsilon(0.5))
        assert float(last["j"]) == pytest.approx(expected.j, rel=1e-12)
        assert float(last["j_weighted"]) == pytest.approx(expected.j_weighted,
                                                          rel=1e-12)
        assert last["lower_applicable"] == "true"
        assert float(last["res_j_lower"]) <= float(last["j"]) + 1e-12
        assert last["j_normalized"] == ""
        assert last["case"] == ""

    def test_rerun_is_byte_identical(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert self.run(out_a) == 0
        assert self.run(out_b) == 0
        for name in ["results.csv", "epsilon_j.dat", "epsilon_res_upper.dat",
                     "epsilon_res_lower.dat", "epsilon_topo_upper.dat",
                     "epsilon_topo_lower.dat"]:
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
        assert strip_wall_time((out_a / "audit.txt").read_text()) == \
            strip_wall_time((out_b / "audit.txt").read_text())

    def test_grid_outside_domain_fails(self, tmp_path, capsys):
        code = main(["epsilon-sweep", "--out", str(tmp_path / "x"),
                     "-p", "eps_max=0.7"])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_svg_emitted(self, tmp_path):
        out = tmp_path / "run"
        assert self.run(out, extra=("--svg",)) == 0
        assert (out / "epsilon_sweep.svg").exists()


class TestCayleySweep:
    def test_case2_ring_value(self, tmp_path):
        out = tmp_path / "run"
        code = main(["cayley", "--out", str(out), "-p", "case=2", "-p", "d=1",
                     "-p", "n_list=3"])
        assert code == 0
        _, _, rows = read_results(out / "results.csv")
        assert len(rows) == 1
        row = rows[0]
        assert row["case"] == "2" and row["d"] == "1" and row["n"] == "3"
        assert float(row["j"]) == pytest.approx(8.0 / 9, abs=1e-10)
        assert float(row["j_normalized"]) == pytest.approx(8.0 / 27, abs=1e-10)
        # the corollary upper is exactly J here (tight bound), so allow the
        # same relative slack the row constructor enforces
        assert float(row["norm_j_lower"]) <= float(row["j"])
        assert float(row["j"]) <= float(row["norm_j_upper"]) * (1 + 1e-9)
        assert float(row["norm_j_upper"]) == pytest.approx(8.0 / 9, abs=1e-10)

    def test_case1_rows_and_files(self, tmp_path):
        out = tmp_path / "run"
        code = main(["cayley", "--out", str(out), "-p", "case=1", "-p", "d=2",
                     "-p", "n_list=3,4", "-p", "instances=2"])
        assert code == 0
        _, header, rows = read_results(out / "results.csv")
        assert header == list(CSV_COLUMNS)
        assert len(rows) == 4
        for row in rows:
            assert row["lower_applicable"] == "true"
            j = float(row["j"])
            for lower in ["res_j_lower", "topo_j_lower", "norm_j_lower"]:
                assert float(row[lower]) <= j * (1 + 1e-9)
            for upper in ["res_j_upper", "topo_j_upper", "norm_j_upper"]:
                assert j <= float(row[upper]) * (1 + 1e-9)
        curve = np.loadtxt(out / "cayley_case1_d2_j.dat")
        assert curve.shape == (2, 3)
        np.testing.assert_array_equal(curve[:, 0], [9.0, 16.0])
        assert np.loadtxt(out / "cayley_case1_d2_upper.dat").shape == (2, 2)
        assert np.loadtxt(out / "cayley_case1_d2_lower.dat").shape == (2, 2)
        audit = (out / "audit.txt").read_text()
        assert "normalized_j_max_over_min=" in audit

    def test_rerun_is_byte_identical(self, tmp_path):
        args = ["cayley", "-p", "case=1", "-p", "d=2", "-p", "n_list=3",
                "-p", "instances=3", "--seed", "5"]
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main([*args, "--out", str(out_a)]) == 0
        assert main([*args, "--out", str(out_b)]) == 0
        assert (out_a / "results.csv").read_bytes() == \
            (out_b / "results.csv").read_bytes()

    def test_bad_case_fails(self, tmp_path, capsys):
        assert main(["cayley", "--out", str(tmp_path / "x"),
                     "-p", "case=3"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_case1_needs_d_2_or_3(self, tmp_path, capsys):
        assert main(["cayley", "--out", str(tmp_path / "x"), "-p", "case=1",
                     "-p", "d=1"]) == 1
        capsys.readouterr()


class TestGeometricSweep:
    def test_rows_and_cross_check(self, tmp_path):
        out = tmp_path / "run"
        code = main(["geometric", "--out", str(out), "-p", "d=2",
                     "-p", "n_list=20,25", "-p", "instances=2"])
        assert code == 0
        _, header, rows = read_results(out / "results.csv")
        assert header == list(CSV_COLUMNS)
        assert len(rows) == 4
        for row in rows:
            # the stopping rule caps each of the final terms at 1e-5, not the
            # tail sum, so slow-mixing instances legitimately land near 1e-4
            assert float(row["j_exact_rel_err"]) <= 1e-3
            j = float(row["j"])
            assert j <= float(row["res_j_upper"]) * (1 + 1e-9)
            assert j <= float(row["topo_j_upper"]) * (1 + 1e-9)
            assert float(row["j_normalized"]) == pytest.approx(
                j / np.log(float(row["n"])), rel=1e-12)
        assert np.loadtxt(out / "geometric_d2_j.dat").shape == (2, 3)
        audit = (out / "audit.txt").read_text()
        assert "skipped=0" in audit
        assert "n=20 instance=0 attempts=" in audit
        assert "rho_n=" in audit

    def test_rerun_is_byte_identical(self, tmp_path):
        args = ["geometric", "-p", "d=2", "-p", "n_list=20", "-p",
                "instances=2", "--seed", "3"]
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main([*args, "--out", str(out_a)]) == 0
        assert main([*args, "--out", str(out_b)]) == 0
        assert (out_a / "results.csv").read_bytes() == \
            (out_b / "results.csv").read_bytes()
        assert (out_a / "geometric_d2_j.dat").read_bytes() == \
            (out_b / "geometric_d2_j.dat").read_bytes()
        assert strip_wall_time((out_a / "audit.txt").read_text()) == \
            strip_wall_time((out_b / "audit.txt").read_text())

    def test_unsatisfiable_screen_is_audited_skip(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(["geometric", "--out", str(out), "-p", "d=2",
                     "-p", "n_list=15", "-p", "instances=1",
                     "-p", "rho=10.0", "-p", "max_attempts=2"])
        assert code == 0
        assert "1 skipped" in capsys.readouterr().out
        _, _, rows = read_results(out / "results.csv")
        assert rows == []
        audit = (out / "audit.txt").read_text()
        assert "skipped=1" in audit
        assert "skipped=RejectionExhausted" in audit

    def test_dimension_gate(self, tmp_path, capsys):
        assert main(["geometric", "--out", str(tmp_path / "x"),
                     "-p", "d=1"]) == 1
        capsys.readouterr()


class TestAnalyze:
    def kv(self, capsys):
        out = capsys.readouterr().out
        pairs = {}
        for line in out.splitlines():
            key, _, value = line.partition("=")
            pairs[key] = value
        return pairs

    def test_uniform_report(self, tmp_path, capsys):
        path = tmp_path / "uniform.csv"
        save_matrix_csv(validate_consensus(np.full((3, 3), 1.0 / 3)), path)
        assert main(["analyze", str(path)]) == 0
        kv = self.kv(capsys)
        assert kv["n"] == "3"
        assert kv["reversible"] == "true"
        assert kv["normal"] == "true"
        assert kv["lower_applicable"] == "true"
        assert kv["method"] == "exact"
        assert float(kv["j"]) == pytest.approx(2.0 / 3, abs=1e-12)
        assert float(kv["green_trace"]) == pytest.approx(2.0, abs=1e-12)
        assert float(kv["res_j_upper"]) == pytest.approx(2.0 / 3, abs=1e-10)
        assert float(kv["res_j_lower"]) == pytest.approx(2.0 / 3, abs=1e-10)
        assert float(kv["topo_j_upper"]) == pytest.approx(2.0, abs=1e-10)
        assert float(kv["norm_j_upper"]) == pytest.approx(2.0, abs=1e-10)
        assert kv["sandwich_variant"] == "in"
        assert kv["fuzz_edges"] == "3"
        assert kv["fuzz_new_edges"] == "0"

    def test_commuting_example_report(self, tmp_path, capsys):
        path = tmp_path / "matrix.csv"
        save_matrix_csv(commuting_example(), path)
        assert main(["analyze", str(path)]) == 0
        kv = self.kv(capsys)
        assert kv["commuting"] == "true"
        assert kv["reversible"] == "false"
        assert kv["normal"] == "false"
        assert kv["lower_applicable"] == "true"
        assert "norm_j_upper" not in kv

    def test_truncated_block(self, tmp_path, capsys):
        path = tmp_path / "matrix.csv"
        save_matrix_csv(p_epsilon(0.25), path)
        assert main(["analyze", str(path), "--truncated"]) == 0
        kv = self.kv(capsys)
        assert kv["lower_applicable"] == "false"
        assert kv["sandwich_variant"] == "out"
        assert float(kv["truncated_rel_err"]) <= 1e-5
        assert int(kv["truncated_steps"]) >= 11

    def test_tolerance_is_plumbed(self, tmp_path, capsys):
        path = tmp_path / "matrix.csv"
        save_matrix_csv(p_epsilon(0.25), path)
        assert main(["analyze", str(path), "--tol", "10"]) == 0
        kv = self.kv(capsys)
        assert kv["reversible"] == "true"
        assert kv["classification_tol"] == "10"

    def test_non_stochastic_file_fails_with_row(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("0.5,0.5\n0.5,0.6\n")
        assert main(["analyze", str(path)]) == 1
        assert "row 1" in capsys.readouterr().err

    def test_unparseable_file_fails(self, tmp_path, capsys):
        path = tmp_path / "garbage.csv"
        path.write_text("this,is,not\na,matrix,file\n")
        assert main(["analyze", str(path)]) == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_file_fails(self, tmp_path, capsys):
        assert main(["analyze", str(tmp_path / "absent.csv")]) == 1
        assert "error:" in capsys.readouterr().err


class TestValidate:
    def test_all_suites_pass(self, capsys):
        assert main(["validate"]) == 0
        out = capsys.readouterr().out
        assert "suites_passed=10/10" in out
        assert "result=pass" in out
        assert out.count("status=pass") == 10

    def test_inject_fault_is_detected(self, capsys):
        assert main(["validate", "--inject-fault"]) == 2
        out = capsys.readouterr().out
        assert "result=fail" in out
        assert "status=fail" in out

    def test_deterministic_output(self, capsys):
        assert main(["validate", "--seed", "6"]) == 0
        first = capsys.readouterr().out
        assert main(["validate", "--seed", "6"]) == 0
        second = capsys.readouterr().out
        assert first == second


class TestArgumentHandling:
    def test_no_subcommand_is_usage_error(self, capsys):
        assert main([]) == 1
        assert "error:" in capsys.readouterr().err

    def test_unknown_flag_is_usage_error(self, capsys):
        assert main(["epsilon-sweep", "--frobnicate"]) == 1
        capsys.readouterr()

    def test_unknown_param_key(self, tmp_path, capsys):
        assert main(["epsilon-sweep", "--out", str(tmp_path / "x"),
                     "-p", "nope=1"]) == 1
        assert "known keys" in capsys.readouterr().err
