"""
Test script for the cavity model
================================

Checks the derived dispersive parameters, the Hamiltonian variants and the
coupling calibration helpers.
"""

import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

# Add the app directory to the path
sys.path.append(str(Path(__file__).parent / "app"))

from cavity_model import (
    CavityParams,
    CouplingInputs,
    DriveInput,
    DriveParams,
    EffectiveParams,
    SystemModel,
    Variant,
    build_effective,
    build_full_rotating,
    calibrate_field_integral,
    coupling_g,
    effective_params,
    match_drive_frequency,
    rabi_omega,
    working_point,
)
from errors import DegenerateDetuningError, VariantMismatchError
from squid_spectrum import LambdaLevels, SquidParams, solve_squid_spectrum

WORKING_EFF = EffectiveParams(g=1.8e8, rabi=1.5e8, delta_c=1.8e9, delta_uw=1.5e9)


def _commutator_norm(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a @ b - b @ a)))


def test_working_point_parameters():
    """g = 1.8e8, Omega = 1.5e8, Delta_c = 10 g, Delta_uw = 10 Omega."""
    print("🧪 Testing working-point parameters...")

    eff = WORKING_EFF
    print(f"   delta={eff.delta:.6g}  g_eff={eff.g_eff:.6g}  gamma={eff.gamma:.6g}  "
          f"gamma'={eff.gamma_prime:.6g}  chi={eff.chi:.6g}")
    assert eff.delta == 3e8
    assert abs(eff.g_eff - 1.65e7) / 1.65e7 < 1e-10
    assert abs(eff.gamma - 9.075e5) / 9.075e5 < 1e-10
    assert abs(eff.gamma_prime - (9.075e5 - 1.5e7)) / 1.5e7 < 1e-10
    assert abs(eff.chi - eff.gamma_prime / eff.gamma) < 1e-12
    assert not any(eff.flags.values())
    assert eff.ratios["Delta_c_over_g"] == pytest.approx(10.0)

    point = working_point()
    assert point.eff.delta == pytest.approx(3e8, rel=1e-9)
    assert point.eff.g_eff == pytest.approx(1.65e7, rel=1e-9)
    assert point.drive.rabi == pytest.approx(1.5e8, rel=1e-12)
    print("✅ Working-point test passed!")


def test_degenerate_detuning():
    with pytest.raises(DegenerateDetuningError) as info:
        EffectiveParams(g=1e8, rabi=1e8, delta_c=1e9, delta_uw=1e9)
    assert info.value.exit_code == 2
    assert isinstance(info.value, ValueError)


def test_dispersive_flags():
    eff = EffectiveParams(g=1.8e8, rabi=1.5e8, delta_c=3.6e8, delta_uw=1.5e9)
    assert eff.flags["Delta_c_below_5g"]
    assert not eff.flags["Delta_uw_below_5Omega"]
    assert eff.to_dict()["flags"]["Delta_c_below_5g"]


@settings(max_examples=50, deadline=None)
@given(
    g=st.floats(1e7, 1e9),
    g_over_omega=st.floats(0.5, 2.0),
    dc_ratio=st.floats(5.0, 30.0),
    duw_ratio=st.floats(5.0, 30.0),
    n_max=st.integers(1, 4),
)
def test_hermitian_and_excitation_conserving(g, g_over_omega, dc_ratio, duw_ratio, n_max):
    """Every variant is Hermitian and commutes with the excitation number."""
    rabi = g / g_over_omega
    delta_c, delta_uw = dc_ratio * g, duw_ratio * rabi
    assume(abs(delta_c - delta_uw) > 1e-3 * delta_c)
    eff = EffectiveParams(g=g, rabi=rabi, delta_c=delta_c, delta_uw=delta_uw)

    models = [
        build_effective(Variant.EFF_SINGLE, eff, n_max=n_max),
        build_effective(Variant.EFF_TWO_PHOTON, eff, n_max=n_max),
        build_effective(Variant.EFF_TWO_VACUUM, eff),
    ]
    omega_c = 2 * np.pi * 29.7e9
    levels = LambdaLevels.from_frequencies(omega_c + delta_c, omega_c + delta_c - 2 * np.pi * 5e9)
    cavity = CavityParams(omega_c=omega_c, g=g, n_max=n_max)
    drive_freq = levels.omega_a1 - delta_uw
    models.append(build_full_rotating(levels, cavity, DriveParams(rabi, drive_freq), n_squids=2))

    for model in models:
        H = model.hamiltonian
        scale = np.max(np.abs(H))
        assert np.max(np.abs(H - H.conj().T)) <= 1e-12 * scale
        assert _commutator_norm(H, model.excitation_number()) <= 1e-12 * scale


def test_two_photon_vacuum_block_matches_vacuum_model():
    """The photon-resolved model restricted to the cavity vacuum is the qubit-only model."""
    print("\n🧪 Testing vacuum block of the two-SQUID photon model...")

    photon = build_effective(Variant.EFF_TWO_PHOTON, WORKING_EFF, n_max=3)
    vacuum = build_effective(Variant.EFF_TWO_VACUUM, WORKING_EFF)
    idx = photon.qubit_subspace()
    block = photon.hamiltonian[np.ix_(idx, idx)]
    np.testing.assert_allclose(block, vacuum.hamiltonian, atol=1e-6)
    print(f"   Vacuum Hamiltonian diagonal: {np.real(np.diag(vacuum.hamiltonian))}")
    print("✅ Vacuum block test passed!")


def test_vacuum_model_structure():
    model = build_effective(Variant.EFF_TWO_VACUUM, WORKING_EFF)
    H = model.hamiltonian
    assert model.dims == (2, 2)
    assert not model.has_cavity
    assert H[3, 3] == pytest.approx(2 * WORKING_EFF.gamma_prime)
    assert H[1, 2] == pytest.approx(WORKING_EFF.gamma)
    assert H[0, 0] == 0
    assert model.basis_labels() == ["00", "01", "10", "11"]
    assert not H.flags.writeable


def test_idle_third_squid():
    """With three SQUIDs only the active pair is coupled."""
    model = build_effective(Variant.EFF_TWO_VACUUM, WORKING_EFF, n_squids=3, active=(0, 2))
    H = model.hamiltonian
    idle = model.qubit_index((0, 1, 0))
    assert np.allclose(H[:, idle], 0)

    left, right = model.qubit_index((1, 0, 0)), model.qubit_index((0, 0, 1))
    assert H[left, right] == pytest.approx(WORKING_EFF.gamma)
    assert _commutator_norm(H, model.sigma(1, 1, 1)) == 0

    point = working_point(n_max=1)
    full = build_full_rotating(point.levels, point.cavity, point.drive, n_squids=3)
    assert full.dims == (3, 3, 3, 2)


def test_variant_mismatch():
    """Operators or sizes that do not belong to a variant are rejected."""
    print("\n🧪 Testing variant mismatch errors...")

    cases = [
        lambda: build_effective(Variant.EFF_SINGLE, WORKING_EFF),
        lambda: build_effective(Variant.EFF_SINGLE, WORKING_EFF, n_max=3, n_squids=2),
        lambda: build_effective(Variant.EFF_TWO_PHOTON, WORKING_EFF),
        lambda: build_effective(Variant.EFF_TWO_VACUUM, WORKING_EFF, n_max=3),
        lambda: build_effective(Variant.EFF_TWO_VACUUM, WORKING_EFF, n_squids=4),
        lambda: build_effective(Variant.EFF_TWO_VACUUM, WORKING_EFF, n_squids=3, active=(0, 0)),
        lambda: build_effective(Variant.FULL_ROTATING, WORKING_EFF),
        lambda: build_effective(Variant.EFF_TWO_VACUUM, WORKING_EFF).annihilation(),
        lambda: SystemModel(Variant.EFF_TWO_VACUUM, 1, 2, None,
                            np.array([[0, 1], [0, 0]], dtype=complex), np.zeros(2)),
    ]
    for case in cases:
        with pytest.raises(VariantMismatchError) as info:
            case()
        print(f"   ✅ {info.value}")
    print("✅ Variant mismatch test passed!")


def test_full_rotating_structure():
    point = working_point(n_max=3)
    model = build_full_rotating(point.levels, point.cavity, point.drive, n_squids=2)
    assert model.dims == (3, 3, 4)
    H = model.hamiltonian

    # |a, 0, n=0> couples to |0, 0, n=1> with g and to |1, 0, n=0> with Omega
    a00 = int(np.ravel_multi_index((2, 0, 0), model.dims))
    zero1 = int(np.ravel_multi_index((0, 0, 1), model.dims))
    one0 = int(np.ravel_multi_index((1, 0, 0), model.dims))
    assert H[zero1, a00] == pytest.approx(point.cavity.g)
    assert H[a00, one0] == pytest.approx(point.drive.rabi)
    assert H[a00, a00].real == pytest.approx(point.eff.delta_c, rel=1e-9)
    assert H[one0, one0].real == pytest.approx(point.eff.delta, rel=1e-9)
    np.testing.assert_allclose(model.interaction_offsets, np.real(np.diag(H)), atol=1e-3)
    assert model.lab_phases is not None


def test_match_drive_frequency():
    """A retuned drive on SQUID II reproduces delta of SQUID I."""
    omega_c = 2 * np.pi * 29.7e9
    lv_1 = LambdaLevels.from_frequencies(omega_c + 1.8e9, omega_c + 1.8e9 - 2 * np.pi * 5.0e9)
    lv_2 = LambdaLevels.from_frequencies(omega_c + 2.1e9, omega_c + 2.1e9 - 2 * np.pi * 5.2e9)
    omega_uw_1 = lv_1.omega_a1 - 1.5e9
    omega_uw_2 = match_drive_frequency(lv_1, lv_2, omega_c, omega_uw_1)

    cavity = CavityParams(omega_c=omega_c, g=1.8e8)
    eff_1 = effective_params(lv_1, cavity, DriveParams(1.5e8, omega_uw_1))
    eff_2 = effective_params(lv_2, cavity, DriveParams(1.5e8, omega_uw_2))
    assert abs(eff_1.delta - eff_2.delta) < 1e-3


def test_working_point_per_squid():
    """Two different SQUIDs share delta; an explicit drive entry overrides the ratios."""
    print("\n🧪 Testing per-SQUID working point...")

    base = 2 * np.pi * 31.0e9
    lv_1 = LambdaLevels.from_frequencies(base, base - 2 * np.pi * 5.0e9)
    lv_2 = LambdaLevels.from_frequencies(base + 3e8, base + 3e8 - 2 * np.pi * 5.2e9)

    point = working_point(levels=[lv_1, lv_2], n_max=2)
    assert point.n_configured == 2
    assert point.cavity.omega_c == pytest.approx(base - 1.8e9, rel=1e-12)
    eff_1, eff_2 = point.per_squid_effective()
    print(f"   delta_I={eff_1.delta:.6g}  delta_II={eff_2.delta:.6g}")
    assert eff_2.delta == pytest.approx(eff_1.delta, rel=1e-9)
    assert eff_2.delta_c == pytest.approx(2.1e9, rel=1e-6)

    model = point.full_model(n_squids=2)
    assert model.dims == (3, 3, 3)
    with pytest.raises(VariantMismatchError):
        point.full_model(n_squids=3)

    explicit = working_point(levels=[lv_1, lv_2], n_max=2,
                             drives=[DriveInput(), DriveInput(rabi=1.2e8, delta_uw=1.7e9)])
    second = explicit.per_squid_effective()[1]
    assert second.rabi == 1.2e8
    assert second.delta_uw == pytest.approx(1.7e9, rel=1e-6)
    assert explicit.drives[1].omega_uw == pytest.approx(lv_2.omega_a1 - 1.7e9, rel=1e-12)

    single = working_point()
    assert single.n_configured == 1
    assert single.full_model(n_squids=2).dims == (3, 3, 6)
    print("✅ Per-SQUID working point test passed!")


def test_coupling_calibration():
    """Field integrals calibrated for target g and Omega reproduce them."""
    print("\n🧪 Testing coupling calibration...")

    squid = SquidParams.from_device_units(90.0, 100.0, 3.75, 0.4995)
    spectrum = solve_squid_spectrum(squid, check_convergence=False)
    cavity = CavityParams(omega_c=spectrum.omega_a0 - 1.8e9, g=1.8e8)

    cavity_integral = calibrate_field_integral(1.8e8, "cavity", spectrum, squid, cavity)
    microwave_integral = calibrate_field_integral(1.5e8, "microwave", spectrum, squid)
    inputs = CouplingInputs(cavity_integral, microwave_integral)
    print(f"   Field integrals: cavity={cavity_integral:.4e}, microwave={microwave_integral:.4e} T m^2")

    assert coupling_g(spectrum, inputs, cavity, squid) == pytest.approx(1.8e8, rel=1e-12)
    assert rabi_omega(spectrum, inputs, squid) == pytest.approx(1.5e8, rel=1e-12)

    with pytest.raises(ValueError):
        calibrate_field_integral(1.8e8, "cavity", spectrum, squid)
    with pytest.raises(ValueError):
        calibrate_field_integral(1.8e8, "optical", spectrum, squid, cavity)
    print("✅ Calibration test passed!")


def test_cavity_params():
    cavity = CavityParams(omega_c=2e11, g=1e8, quality_factor=2e4)
    assert cavity.kappa == pytest.approx(1e7)
    assert CavityParams(omega_c=2e11, g=1e8).kappa == 0.0
    for kwargs in ({"omega_c": 0.0, "g": 1e8}, {"omega_c": 2e11, "g": -1.0},
                   {"omega_c": 2e11, "g": 1e8, "n_max": 0}):
        with pytest.raises(ValueError):
            CavityParams(**kwargs)
    with pytest.raises(ValueError):
        CouplingInputs(cavity_field_integral=float("nan"))


def main():
    """Run all tests."""
    print("🚀 Starting Cavity Model Tests")
    print("=" * 50)

    try:
        test_working_point_parameters()
        test_degenerate_detuning()
        test_dispersive_flags()
        test_hermitian_and_excitation_conserving()
        test_two_photon_vacuum_block_matches_vacuum_model()
        test_vacuum_model_structure()
        test_idle_third_squid()
        test_variant_mismatch()
        test_full_rotating_structure()
        test_match_drive_frequency()
        test_working_point_per_squid()
        test_coupling_calibration()
        test_cavity_params()

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
