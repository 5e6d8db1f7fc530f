"""
Test script for configuration, experiments and sweeps
=====================================================

Config validation with JSON pointers, reproducibility hashes, persisted outputs,
parameter sweeps and the CLI exit codes.
"""

import json
import math
import sys
import tempfile
from pathlib import Path

import pytest

# Add the app directory to the path
sys.path.append(str(Path(__file__).parent / "app"))

from cavity_model import CavityParams, calibrate_field_integral
from config_loader import ExperimentConfig, load_config
from constants import ghz_to_rad_per_s
from errors import ConfigError, MissingInputError, SweepPathError, UnknownExperimentError
from experiments import run_experiment, solve_spectrum, squid_params, sweep
from main import main as cli_main


def test_config_errors_carry_pointers():
    print("🧪 Testing config validation...")

    cases = [
        ({"cavity": {"n_max": 0}}, "/cavity/n_max"),
        ({"cavity": {"bogus": 1}}, "/cavity/bogus"),
        ({"grid": {"num_points": 100.5}}, "/grid/num_points"),
        ({"squids": [{"C_fF": -1.0}]}, "/squids/0/C_fF"),
        ({"squids": []}, "/squids"),
        ({"protocols": {"alpha": [1.0, 0.0], "beta": [1.0, 0.0]}}, "/protocols/beta"),
        ({"protocols": {"stark_theta_min": 1.0, "stark_theta_max": 0.0}}, "/protocols/stark_theta_max"),
        ({"squids": [{"Phix_Phi0": 1.2}]}, "/squids/0/Phix_Phi0"),
        ({"squid": {"Phix_Phi0": -0.1}}, "/squids/0/Phix_Phi0"),
        ({"grid": {"num_points": 384}}, "/grid/num_points"),
        ({"grid": {"points": 96}}, "/grid/num_points"),
        ({"drive": [{"omega_uw_GHz": 25.0, "Delta_uw_per_s": 1e9}]}, "/drive/0/Delta_uw_per_s"),
        ({"model": {"variant": "EFF_SINGLE"}}, "/model/variant"),
        ({"squid": {}, "squids": [{}]}, "/squid"),
        ({"cavity": {"g_per_s": 1e8}, "coupling": {"Bc_integral_Tm2": 1e-9}}, "/coupling/Bc_integral_Tm2"),
    ]
    for overrides, pointer in cases:
        with pytest.raises(ConfigError) as info:
            ExperimentConfig(overrides)
        assert info.value.pointer == pointer
        assert str(info.value).startswith(f"{pointer}: ")
        assert info.value.exit_code == 2
        print(f"   ✅ {info.value}")

    with pytest.raises(UnknownExperimentError):
        ExperimentConfig({"experiment": "teleport"})
    print("✅ Config validation test passed!")


def test_config_hash_is_stable():
    base = ExperimentConfig({"experiment": "cnot"})
    assert base.config_hash() == ExperimentConfig({"experiment": "cnot"}).config_hash()
    # output location is not part of the physics
    assert base.config_hash() == ExperimentConfig(
        {"experiment": "cnot", "output": {"dir": "/tmp/elsewhere"}}).config_hash()
    assert base.config_hash() != ExperimentConfig({"experiment": "cnot", "seed": 1}).config_hash()

    varied = base.with_value("working_point.dispersive_ratio", 20.0)
    assert varied.get("working_point.dispersive_ratio") == 20.0
    assert base.get("working_point.dispersive_ratio") is None
    assert varied.config_hash() != base.config_hash()


def test_load_config_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"experiment": "swap", "seed": 3}), encoding="utf-8")
    config = load_config(path, model="effective", seed=None)
    assert config.experiment == "swap" and config.seed == 3

    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    (tmp_path / "broken.json").write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "broken.json")


def test_effective_bell_record(tmp_path):
    print("\n🧪 Testing effective Bell experiment...")

    record = run_experiment(ExperimentConfig({"protocols": {"samples": 101}}), tmp_path)
    print(f"   Fidelity: {record.summary['fidelity']:.12f}")
    assert record.ok
    assert record.summary["fidelity"] > 1 - 1e-10
    assert record.summary["worst_case_fidelity"] > 1 - 1e-10
    assert Path(record.outputs["result"]).exists()
    assert Path(record.outputs["bell_trajectory.csv"]).exists()

    stored = json.loads(Path(record.outputs["result"]).read_text(encoding="utf-8"))
    assert stored["config_hash"] == record.config_hash
    assert stored["experiment"] == "bell"
    print("✅ Effective Bell experiment test passed!")


def test_stark_sweep_is_reproducible(tmp_path):
    print("\n🧪 Testing Stark sweep experiment...")

    config = ExperimentConfig({"experiment": "stark-sweep", "seed": 5})
    first = run_experiment(config, tmp_path / "a")
    second = run_experiment(config, tmp_path / "b")

    assert first.payload["steps"] == 256
    assert first.summary["max_abs_diff"] < 1e-12
    csv_a = Path(first.outputs["stark_sweep.csv"]).read_bytes()
    csv_b = Path(second.outputs["stark_sweep.csv"]).read_bytes()
    assert csv_a == csv_b
    assert len(csv_a.decode("utf-8").strip().splitlines()) == 257
    print("✅ Stark sweep experiment test passed!")


def test_cnot_and_swap_experiments():
    cnot = run_experiment(ExperimentConfig({"experiment": "cnot"}))
    assert cnot.summary["distance"] < 1e-10
    assert cnot.payload["extras"]["reading_source"] == "enumerated"
    swap = run_experiment(ExperimentConfig({"experiment": "swap"}))
    assert swap.summary["fidelity"] > 1 - 1e-10


def test_feasibility_experiment():
    record = run_experiment(ExperimentConfig({"experiment": "feasibility"}))
    assert record.payload["T1_source"] == "resistance"
    assert record.summary["T1"] == pytest.approx(1e9 / 6e7 * 1e-6, rel=1e-12)
    assert record.payload["table"]


def test_lindblad_bell_experiment():
    """Bell generation survives T1 = 15 us on |a> and cavity decay at Q_c = 2e4."""
    print("\n🧪 Testing Lindblad Bell experiment...")

    config = ExperimentConfig({
        "experiment": "lindblad-bell",
        "cavity": {"n_max": 5},
        "decoherence": {"t1_s": 15e-6, "samples": 51},
    })
    record = run_experiment(config)
    print(f"   Fidelity: {record.summary['fidelity']:.6f}, concurrence: {record.summary['concurrence']:.6f}")
    assert record.summary["fidelity"] >= 0.90
    assert record.payload["channels"] == ["level_a_decay", "level_a_decay", "cavity_decay"]
    assert record.payload["kappa_per_s"] == pytest.approx(2 * math.pi * 29.7e9 / 2e4, rel=1e-9)
    assert record.payload["diagnostics"]["min_eigenvalue"] > -1e-6
    assert record.payload["diagnostics"]["method"] == "superoperator-expm"

    with pytest.raises(MissingInputError):
        run_experiment(config.with_overrides(decoherence={"t1_s": None, "resistance_ohm": None}))
    print("✅ Lindblad Bell experiment test passed!")


def test_spectrum_experiment(tmp_path):
    print("\n🧪 Testing spectrum experiment outputs...")

    config = ExperimentConfig({"experiment": "spectrum", "grid": {"check_convergence": False}})
    record = run_experiment(config, tmp_path)
    squid = record.payload["squids"][0]
    assert squid["beta_L"] == pytest.approx(1.1394, abs=1e-3)
    assert squid["level_map"] == {"0": 0, "1": 1, "a": 3}
    assert 25.5 <= squid["omega_a0_over_2pi_GHz"] <= 34.5
    assert record.payload["constants"]["Phi_0_Wb"] == pytest.approx(2.067833848e-15, rel=1e-9)
    assert len(squid["potential_minima_Phi0"]) == 2
    for name in ("spectrum_0.csv", "flux_elements_0.csv", "potential_0.csv", "result"):
        assert Path(record.outputs[name]).exists()

    levels = Path(record.outputs["spectrum_0.csv"]).read_text(encoding="utf-8").strip().splitlines()
    assert levels[0] == "level,index,E_over_h_GHz"
    assert levels[1].startswith("0,0,")
    assert levels[3].startswith(",2,")
    assert levels[4].startswith("a,3,")
    assert len(levels) == 7

    elements = Path(record.outputs["flux_elements_0.csv"]).read_text(encoding="utf-8").strip().splitlines()
    assert elements[0] == "i,j,flux_me_Wb"
    assert len(elements) == 6 * 6 + 1
    rows = {(int(i), int(j)): float(v) for i, j, v in (line.split(",") for line in elements[1:])}
    assert rows[(0, 3)] == pytest.approx(rows[(3, 0)], rel=1e-9)
    assert abs(rows[(0, 3)]) > 0
    print(f"   <0|Phi|a> = {rows[(0, 3)]:.4e} Wb")
    print("✅ Spectrum experiment test passed!")


def test_sweep_paths():
    config = ExperimentConfig({"experiment": "cnot"})
    assert sweep(config, "working_point.dispersive_ratio", []) == []
    for path in ("cavity.bogus", "experiment", "protocols.bell_initial"):
        with pytest.raises(SweepPathError):
            sweep(config, path, [1.0])


def test_sweep_failing_point_is_recorded(tmp_path):
    print("\n🧪 Testing sweep with a failing point...")

    config = ExperimentConfig({"experiment": "cnot"})
    records = sweep(config, "cavity.g", [1.8e8, -1.0], output_dir=tmp_path)
    assert [r.swept["value"] for r in records] == [1.8e8, -1.0]
    assert records[0].ok
    assert not records[1].ok and records[1].error.startswith("ConfigError")

    lines = (tmp_path / "sweep.csv").read_text(encoding="utf-8").strip().splitlines()
    assert lines[0].startswith("cavity.g,") and lines[0].endswith(",error")
    assert len(lines) == 3
    stored = json.loads((tmp_path / "sweep.json").read_text(encoding="utf-8"))
    assert len(stored["records"]) == 2
    print("✅ Sweep failure test passed!")


def test_dispersive_trend_full_model():
    """Deeper in the dispersive regime the full model tracks the effective one better."""
    print("\n🧪 Testing dispersive-ratio trend on the full model...")

    config = ExperimentConfig({"model": "full", "protocols": {"samples": 201}})
    records = sweep(config, "working_point.dispersive_ratio", [20.0, 10.0, 5.0])
    assert all(r.ok for r in records)
    final = [r.summary["fidelity"] for r in records]
    print(f"   End-point fidelity at ratios 20/10/5: {final}")
    assert final[0] >= final[1] >= final[2]
    assert final[0] > final[2]
    print("✅ Dispersive trend test passed!")


def test_alias_keys_match_canonical_keys():
    """squid, grid.points, cavity.g_per_s, cavity.Q, model.variant and drive land on the canonical keys."""
    print("\n🧪 Testing alternative config spellings...")

    squid = {"C_fF": 90.0, "L_pH": 100.0, "Ic_uA": 3.75, "Phix_Phi0": 0.4995}
    drive = [{"Delta_uw_per_s": 1.4e9}]
    alias = ExperimentConfig({
        "experiment": "bell",
        "squid": squid,
        "grid": {"points": 1024},
        "cavity": {"g_per_s": 1.7e8, "Q": 3e4},
        "model": {"variant": "FULL_ROTATING"},
        "drive": drive,
        "coupling": {"Bc_integral_Tm2": None},
    })
    canonical = ExperimentConfig({
        "experiment": "bell",
        "squids": [squid],
        "grid": {"num_points": 1024},
        "cavity": {"g": 1.7e8, "quality_factor": 3e4},
        "model": "full",
        "drive": drive,
    })
    assert alias.config_hash() == canonical.config_hash()
    assert alias.model == "full"
    assert alias.get("cavity.Q") == 3e4
    assert alias.get("squid.Phix_Phi0") == 0.4995
    assert alias.with_value("cavity.g_per_s", 1.6e8).get("cavity.g") == 1.6e8

    photon = ExperimentConfig({"model": {"variant": "EFF_TWO_PHOTON"}, "cavity": {"n_max": 3}})
    record = run_experiment(photon.with_overrides(protocols={"samples": 11}))
    assert record.payload["variant"] == "EFF_TWO_PHOTON"
    assert record.summary["fidelity"] > 1 - 1e-9
    print("✅ Alternative spelling test passed!")


def test_cavity_field_integral_sets_g():
    """A calibrated cavity field integral reproduces g, and the cavity stays at omega_c."""
    print("\n🧪 Testing g from the cavity field integral...")

    base = ExperimentConfig({"experiment": "cnot", "grid": {"check_convergence": False}})
    params = squid_params(base)[0]
    spectrum = solve_spectrum(base, params)
    omega_c = ghz_to_rad_per_s(29.7)
    field = calibrate_field_integral(1.8e8, "cavity", spectrum, params,
                                     CavityParams(omega_c=omega_c, g=0.0))
    print(f"   Cavity field integral: {field:.4e} T m^2")

    record = run_experiment(base.with_overrides(coupling={"Bc_integral_Tm2": field}))
    eff = record.payload["effective_params"]
    assert eff["g"] == pytest.approx(1.8e8, rel=1e-9)
    assert eff["Delta_c"] == pytest.approx(spectrum.omega_a0 - omega_c, rel=1e-9)
    assert eff["Delta_c"] > 0
    assert record.summary["distance"] < 1e-10
    print("✅ Cavity field integral test passed!")


def test_non_identical_squids_share_delta():
    print("\n🧪 Testing two different SQUIDs...")

    config = ExperimentConfig({
        "experiment": "bell",
        "model": "full",
        "squids": [{}, {"C_fF": 89.0}],
        "grid": {"check_convergence": False},
        "working_point": {"use_spectrum": True},
        "cavity": {"n_max": 3},
        "protocols": {"samples": 11},
    })
    record = run_experiment(config)
    first, second = record.payload["squid_effective_params"]
    print(f"   Delta_c: {first['Delta_c']:.6g} / {second['Delta_c']:.6g}, "
          f"delta: {first['delta']:.6g} / {second['delta']:.6g}")
    assert second["delta"] == pytest.approx(first["delta"], rel=1e-9)
    assert second["Delta_c"] != pytest.approx(first["Delta_c"], rel=1e-6)
    assert 0.0 <= record.summary["fidelity"] <= 1.0 + 1e-12
    print("✅ Non-identical SQUID test passed!")


def test_drive_entries_reach_effective_params():
    record = run_experiment(ExperimentConfig({
        "experiment": "cnot",
        "drive": [{"Omega_per_s": 1.4e8, "Delta_uw_per_s": 1.6e9}],
    }))
    eff = record.payload["effective_params"]
    assert eff["Omega"] == 1.4e8
    assert eff["Delta_uw"] == pytest.approx(1.6e9, rel=1e-9)

    record = run_experiment(ExperimentConfig({"experiment": "cnot", "drive": [{"omega_uw_GHz": 24.75}]}))
    omega_a1 = ghz_to_rad_per_s(29.7) + 1.8e9 - ghz_to_rad_per_s(5.0)
    expected = omega_a1 - ghz_to_rad_per_s(24.75)
    assert record.payload["effective_params"]["Delta_uw"] == pytest.approx(expected, rel=1e-9)


def test_cli_exit_codes(tmp_path):
    print("\n🧪 Testing CLI exit codes...")

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"cavity": {"n_max": 0}}), encoding="utf-8")
    assert cli_main(["run", "--config", str(bad)]) == 2
    assert cli_main(["run", "--experiment", "cnot", "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "cnot.json").exists()
    assert cli_main(["sweep", "--experiment", "cnot"]) == 2
    print("✅ CLI exit code test passed!")


def test_cli_accepts_alternative_keys(tmp_path):
    print("\n🧪 Testing CLI with alternative config keys...")

    cfg = tmp_path / "aliases.json"
    cfg.write_text(json.dumps({
        "squid": {"C_fF": 90.0, "L_pH": 100.0, "Ic_uA": 3.75, "Phix_Phi0": 0.4995},
        "grid": {"points": 512},
        "cavity": {"g_per_s": 1.8e8, "Q": 2e4},
        "model": {"variant": "FULL_ROTATING"},
        "drive": [{"Delta_uw_per_s": 1.5e9}],
        "protocols": {"samples": 11},
    }), encoding="utf-8")
    assert cli_main(["run", "--experiment", "bell", "--config", str(cfg)]) == 0

    grid = {"points": 512, "check_convergence": False}
    base = ExperimentConfig({"grid": grid})
    params = squid_params(base)[0]
    field = calibrate_field_integral(1.8e8, "cavity", solve_spectrum(base, params), params,
                                     CavityParams(omega_c=ghz_to_rad_per_s(29.7), g=0.0))
    calibrated = tmp_path / "field.json"
    calibrated.write_text(json.dumps({
        "grid": grid,
        "cavity": {"Q": 2e4},
        "coupling": {"Bc_integral_Tm2": field},
    }), encoding="utf-8")
    assert cli_main(["run", "--experiment", "cnot", "--config", str(calibrated)]) == 0

    outside = tmp_path / "phix.json"
    outside.write_text(json.dumps({"squid": {"Phix_Phi0": 1.2}}), encoding="utf-8")
    assert cli_main(["run", "--experiment", "cnot", "--config", str(outside)]) == 2
    print("✅ CLI alternative key test passed!")


def test_cli_stark_sweep_vanishes_at_multiples_of_2pi(tmp_path):
    """257 steps over [0, 4 pi] put grid points on 0, 2 pi and 4 pi."""
    print("\n🧪 Testing CLI Stark sweep...")

    cfg = tmp_path / "stark.json"
    cfg.write_text(json.dumps({"protocols": {"stark_steps": 257}}), encoding="utf-8")
    out = tmp_path / "stark"
    assert cli_main(["run", "--experiment", "stark-sweep", "--config", str(cfg), "--out", str(out)]) == 0

    lines = (out / "stark_sweep.csv").read_text(encoding="utf-8").strip().splitlines()
    assert lines[0] == "theta,Pe_closed_form,Pe_oracle,abs_diff"
    rows = [[float(v) for v in line.split(",")] for line in lines[1:]]
    assert len(rows) == 257
    for index, n in ((0, 0), (128, 1), (256, 2)):
        theta, closed, oracle, _ = rows[index]
        assert theta == pytest.approx(2 * n * math.pi, abs=1e-12)
        assert abs(closed) < 1e-12
        assert abs(oracle) < 1e-10
    assert max(r[1] for r in rows) > 1e-3
    print("✅ CLI Stark sweep test passed!")


def main():
    """Run all tests."""
    print("🚀 Starting Experiment Tests")
    print("=" * 50)

    try:
        scratch = lambda: Path(tempfile.mkdtemp(prefix="squidcav-tests-"))
        test_config_errors_carry_pointers()
        test_config_hash_is_stable()
        test_load_config_file(scratch())
        test_effective_bell_record(scratch())
        test_stark_sweep_is_reproducible(scratch())
        test_cnot_and_swap_experiments()
        test_feasibility_experiment()
        test_lindblad_bell_experiment()
        test_spectrum_experiment(scratch())
        test_sweep_paths()
        test_sweep_failing_point_is_recorded(scratch())
        test_dispersive_trend_full_model()
        test_alias_keys_match_canonical_keys()
        test_cavity_field_integral_sets_g()
        test_non_identical_squids_share_delta()
        test_drive_entries_reach_effective_params()
        test_cli_exit_codes(scratch())
        test_cli_accepts_alternative_keys(scratch())
        test_cli_stark_sweep_vanishes_at_multiples_of_2pi(scratch())

        print("\n" + "=" * 50)
        print("🎉 All tests completed!")

    except Exception as e:
        print(f"\n❌ Test failed: {e}")
        import traceback
        traceback.print_exc()
        return False

    return True


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
