"""Config handling, experiment dispatch, artifacts, CLI."""

import json
import hashlib
import math

import numpy as np
import pytest

from fraclat.cli import build_config, main
from fraclat.harness import ExperimentConfig, fmt, run, self_test


class TestConfig:
    def test_roundtrip_byte_identical(self):
        cfg = ExperimentConfig(experiment="kernel-dump",
                               params={"s": 0.5, "h": 0.1, "radius": 12},
                               output_dir="/tmp/x", seed=7)
        text = cfg.serialize()
        again = ExperimentConfig.parse(text).serialize()
        assert text == again

    def test_float_roundtrip_formatting(self):
        assert fmt(0.1) == "0.1"
        assert float(fmt(4.0 / (3.0 * math.pi))) == 4.0 / (3.0 * math.pi)

    def test_validation_names_offending_fields(self):
        cfg = ExperimentConfig(experiment="kernel-dump", params={"s": 1.5, "h": -1.0})
        with pytest.raises(ValueError) as exc:
            run(cfg)
        assert "s:" in str(exc.value) and "h:" in str(exc.value)

    def test_unknown_experiment(self):
        with pytest.raises(ValueError):
            run(ExperimentConfig(experiment="nonsense"))


class TestKernelDump:
    def test_csv_and_manifest(self, tmp_path):
        cfg = ExperimentConfig(experiment="kernel-dump",
                               params={"s": 0.5, "h": 1.0, "d": 1, "radius": 10},
                               output_dir=str(tmp_path))
        report = run(cfg)
        assert report.all_passed
        csv = (tmp_path / "kernel.csv").read_text()
        lines = csv.strip().split("\n")
        assert lines[0] == "m_1,value,abs_err_est"
        assert len(lines) == 22  # header + 21 offsets
        row1 = dict(zip(("m", "v", "e"), lines[11 + 1].split(",")))
        assert float(row1["v"]) == pytest.approx(4.0 / (3.0 * math.pi), rel=1e-13)
        manifest = (tmp_path / "manifest.txt").read_text()
        digest = hashlib.sha256(csv.encode()).hexdigest()
        assert f"{digest}  kernel.csv" in manifest

    def test_json_report_stable_keys(self, tmp_path):
        cfg = ExperimentConfig(experiment="kernel-dump",
                               params={"s": 0.5, "radius": 3},
                               output_dir=str(tmp_path))
        report = run(cfg)
        obj = json.loads(report.to_json())
        assert list(obj) == sorted(obj)

    def test_two_dimensional_dump(self, tmp_path):
        cfg = ExperimentConfig(experiment="kernel-dump",
                               params={"s": 0.5, "h": 1.0, "d": 2, "radius": 3},
                               output_dir=str(tmp_path))
        report = run(cfg)
        assert report.all_passed
        lines = (tmp_path / "kernel.csv").read_text().strip().split("\n")
        assert lines[0] == "m_1,m_2,value,abs_err_est"
        assert len(lines) == 1 + 49

    def test_artifacts_deterministic(self, tmp_path):
        digests = []
        for sub in ("a", "b"):
            cfg = ExperimentConfig(experiment="inverse-sweep",
                                   params={"N": 16, "trials": 2,
                                           "eps": "1e-1;1e-3"},
                                   output_dir=str(tmp_path / sub), seed=5)
            report = run(cfg)
            digests.append([a["sha256"] for a in report.artifacts])
        assert digests[0] == digests[1]


class TestExperiments:
    def test_ucp_lattice(self, tmp_path):
        cfg = ExperimentConfig(experiment="ucp-lattice",
                               params={"s": 0.5, "h": 1.0, "X": "0"},
                               output_dir=str(tmp_path))
        report = run(cfg)
        assert report.all_passed
        cert = json.loads((tmp_path / "certificate.json").read_text())
        assert cert["passed"] is True
        assert cert["paper_claim"] == "global-ucp-failure-lattice"

    def test_ucp_lattice_2d_points(self, tmp_path):
        cfg = ExperimentConfig(experiment="ucp-lattice",
                               params={"s": 0.4, "h": 1.0, "d": 2,
                                       "X": "0,0;1,-2"},
                               output_dir=str(tmp_path))
        report = run(cfg)
        assert report.all_passed
        assert len(report.checks) == 2

    def test_apply_torus(self, tmp_path):
        from fraclat.lattice import TorusFunction

        rng = np.random.default_rng(0)
        v = TorusFunction(6, 1, rng.standard_normal(13))
        src = tmp_path / "v.json"
        src.write_text(v.to_json())
        cfg = ExperimentConfig(experiment="apply",
                               params={"s": 0.5, "file": str(src)},
                               output_dir=str(tmp_path))
        report = run(cfg)
        assert report.all_passed
        out = TorusFunction.from_json((tmp_path / "applied.json").read_text())
        assert out.N == 6

    def test_apply_lattice(self, tmp_path):
        from fraclat.kernel import FracParams, kernel_1d
        from fraclat.lattice import LatticeFunction

        u = LatticeFunction(FracParams(0.5, 1.0, 1), {(0,): 1.0})
        src = tmp_path / "u.json"
        src.write_text(u.to_json())
        cfg = ExperimentConfig(experiment="apply",
                               params={"s": 0.5, "file": str(src), "radius": 5},
                               output_dir=str(tmp_path))
        report = run(cfg)
        assert report.all_passed
        lines = (tmp_path / "applied.csv").read_text().strip().split("\n")
        assert lines[0] == "j_1,value"
        row = dict(line.split(",") for line in lines[1:])
        assert float(row["3"]) == pytest.approx(
            -kernel_1d(FracParams(0.5), 3), rel=1e-12)

    def test_carleman_probe_experiment(self, tmp_path):
        cfg = ExperimentConfig(experiment="carleman-probe",
                               params={"h": 0.05, "tau": 8.0},
                               output_dir=str(tmp_path))
        report = run(cfg)
        assert report.all_passed
        csv = (tmp_path / "carleman_probe.csv").read_text().strip().split("\n")
        assert csv[0] == "h,tau,c0,lhs,rhs,empirical_C"
        h, tau, c0, lhs, rhs, cval = (float(x) for x in csv[1].split(","))
        assert cval == pytest.approx(lhs / rhs, rel=1e-12)

    def test_inverse_sweep_experiment(self, tmp_path):
        cfg = ExperimentConfig(experiment="inverse-sweep",
                               params={"N": 16, "trials": 3},
                               output_dir=str(tmp_path), seed=2024)
        report = run(cfg)
        names = {c.name: c.passed for c in report.checks}
        assert names["noiseless_error"] and names["fitted_nu_positive"]
        csv = (tmp_path / "stability.csv").read_text().strip().split("\n")
        assert csv[0] == "eps,error_mean,error_std,data_ratio,lambda_chosen"
        assert len(csv) == 7
        summary = json.loads((tmp_path / "stability_summary.json").read_text())
        assert {"fitted_nu", "fitted_C", "N", "W", "Omega", "seed"} <= set(summary)

    def test_boundary_bulk_experiment(self, tmp_path):
        cfg = ExperimentConfig(experiment="boundary-bulk",
                               params={"N": 31, "r0": 0.5},
                               output_dir=str(tmp_path), seed=1)
        report = run(cfg)
        assert report.all_passed
        csv = (tmp_path / "boundary_bulk.csv").read_text()
        assert csv.startswith("h,r0,bulk_small,bulk_big,trace_data,fitted_alpha,holds")

    def test_transference_experiment(self, tmp_path):
        cfg = ExperimentConfig(experiment="transference",
                               params={"N": 4, "d": 1, "pairs": 2},
                               output_dir=str(tmp_path), seed=3)
        assert run(cfg).all_passed

    def test_carleman_commutator_experiment(self, tmp_path):
        cfg = ExperimentConfig(experiment="carleman-commutator",
                               params={"h": 0.1, "tau": 3.0, "d": 2},
                               output_dir=str(tmp_path))
        report = run(cfg)
        assert report.all_passed
        csv = (tmp_path / "commutator.csv").read_text()
        assert csv.startswith("h,tau,c0,lhs,rhs,defect")


class TestSelfTest:
    def test_all_pass_and_fast(self):
        report = self_test()
        assert report.all_passed
        assert report.wall_time < 30.0

    def test_fault_injection(self):
        report = self_test(corrupt_kernel_constant=True)
        assert not report.all_passed
        failed = [c.name for c in report.checks if not c.passed]
        assert failed == ["kernel_closed_form_vs_quadrature"]

    def test_deterministic_checks(self):
        a = self_test()
        b = self_test()
        assert [(c.name, c.passed, c.measured) for c in a.checks] == \
            [(c.name, c.passed, c.measured) for c in b.checks]


class TestCLI:
    def test_build_config_key_values(self):
        cfg = build_config(["kernel-dump", "s=0.5", "radius=4", "--out", "/tmp/o",
                            "--seed", "9"])
        assert cfg.experiment == "kernel-dump"
        assert cfg.params == {"s": 0.5, "radius": 4}
        assert cfg.seed == 9

    def test_main_exit_codes(self, tmp_path, capsys):
        rc = main(["kernel-dump", "s=0.5", "radius=3", "--out", str(tmp_path)])
        out = capsys.readouterr().out
        assert rc == 0
        assert "PASS" in out and "ARTIFACT" in out

    def test_main_validation_error(self, tmp_path, capsys):
        rc = main(["kernel-dump", "s=1.5", "--out", str(tmp_path)])
        err = capsys.readouterr().err
        assert rc == 2
        assert "s" in err

    def test_config_file(self, tmp_path):
        doc = ExperimentConfig(experiment="kernel-dump",
                               params={"s": 0.25, "radius": 3},
                               output_dir=str(tmp_path), seed=1).serialize()
        path = tmp_path / "cfg.json"
        path.write_text(doc)
        cfg = build_config(["kernel-dump", "--config", str(path)])
        assert cfg.params["s"] == 0.25
        assert cfg.seed == 1
