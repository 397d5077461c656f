import math

import numpy as np
import pytest

from qatm_battery.linalg import dag, embed
from qatm_battery.model import (
    KET_EXCITED,
    KET_GROUND,
    PLUS_STATE,
    ModelParams,
    WeakCouplingWarning,
    bose_occupation,
    build_drive,
    build_free_hamiltonians,
    build_interactions,
    build_jump_operators,
    build_operators,
    composite_initial_state,
    machine_regime,
    thermal_qubit_state,
    verify_conservation_commutators,
    virtual_temperature,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)


def random_valid_params(rng):
    w1 = rng.uniform(0.5, 5.0)
    w2 = w1 + rng.uniform(0.5, 10.0)
    gap = w2 - w1
    t1 = rng.uniform(0.5, 10.0)
    return ModelParams(
        omega_m1=w1, omega_m2=w2, omega_c=gap, omega_b=gap,
        g=rng.uniform(0, 0.1 * w2), k=rng.uniform(0, 0.1 * w2),
        f=rng.uniform(0, 0.1 * gap),
        gamma1=rng.uniform(0, 0.1 * w2), gamma2=rng.uniform(0, 0.1 * w2),
        t1=t1, t2=t1 + rng.uniform(0, 30.0),
    )


class TestModelParams:
    def test_defaults_valid(self):
        p = ModelParams()
        assert p.omega_m12 == 8.0
        assert p.beta1 == pytest.approx(1 / 3)

    def test_resonance_enforced(self):
        with pytest.raises(ValueError, match="resonance"):
            ModelParams(omega_c=7.0, omega_b=7.0)
        with pytest.raises(ValueError, match="resonance"):
            ModelParams(omega_b=7.9)

    def test_ordering_enforced(self):
        with pytest.raises(ValueError, match="omega_m1"):
            ModelParams(omega_m1=12.0)
        with pytest.raises(ValueError, match="t1"):
            ModelParams(t1=40.0)

    def test_sign_constraints(self):
        with pytest.raises(ValueError, match="g must be"):
            ModelParams(g=-0.1)
        with pytest.raises(ValueError, match="tau"):
            ModelParams(tau=0.0)

    def test_weak_coupling_warns_but_accepts(self):
        with pytest.warns(WeakCouplingWarning):
            p = ModelParams(g=1.5)
        assert p.g == 1.5

    def test_boundary_coupling_silent(self):
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("error")
            ModelParams(g=1.0, k=1.0)


class TestFreeHamiltonians:
    def test_charger_spectrum(self):
        _, h_c, _ = build_free_hamiltonians(ModelParams())
        vals = np.unique(np.round(np.linalg.eigvalsh(h_c), 12))
        assert np.allclose(vals, [0.0, 8.0])

    def test_small_frequency_limit(self):
        eps = 1e-9
        p = ModelParams(omega_m1=10.0 - eps, omega_c=eps, omega_b=eps)
        _, h_c, h_b = build_free_hamiltonians(p)
        assert np.max(np.abs(h_c)) <= eps + 1e-15
        assert np.max(np.abs(h_b)) <= eps + 1e-15

    def test_machine_trace(self):
        h_m12, _, _ = build_free_hamiltonians(ModelParams())
        # each local excited projector has trace 8 in the 16-dim embedding
        assert abs(np.trace(h_m12).real - 8 * (2.0 + 10.0)) <= 1e-12

    def test_hermitian(self):
        for h in build_free_hamiltonians(ModelParams()):
            assert np.max(np.abs(h - dag(h))) <= 1e-12


class TestInteractions:
    def test_zero_couplings(self):
        h_cb, h_m12c = build_interactions(ModelParams(g=0.0, k=0.0))
        assert np.max(np.abs(h_cb)) == 0.0
        assert np.max(np.abs(h_m12c)) == 0.0

    def test_machine_charger_transition(self):
        p = ModelParams(g=0.3)
        _, h_m12c = build_interactions(p)
        # |1_M1 0_M2 1_C 0_B> is index 10, |0_M1 1_M2 0_C 0_B> is index 4
        ket = np.zeros(16)
        ket[10] = 1.0
        out = h_m12c @ ket
        want = np.zeros(16)
        want[4] = p.g
        assert np.allclose(out, want)

    def test_exchange_square_on_single_excitation_block(self):
        p = ModelParams()
        h_cb, _ = build_interactions(p)
        sq = h_cb @ h_cb
        # within each machine sector, {|1_C 0_B>, |0_C 1_B>} are indices m+2, m+1
        for m in (0, 4, 8, 12):
            block = sq[np.ix_((m + 2, m + 1), (m + 2, m + 1))]
            assert np.allclose(block, p.k**2 * np.eye(2))

    def test_hermitian_traceless(self):
        h_cb, h_m12c = build_interactions(ModelParams())
        for h in (h_cb, h_m12c):
            assert np.max(np.abs(h - dag(h))) <= 1e-12
            assert abs(np.trace(h)) <= 1e-12


class TestDrive:
    def test_zero_amplitude(self):
        assert np.max(np.abs(build_drive(ModelParams(f=0.0), 1.3))) == 0.0

    def test_time_zero_is_sigma_x(self):
        p = ModelParams(f=0.8)
        assert np.allclose(build_drive(p, 0.0), 0.8 * embed(SX, "C"))

    def test_half_period_flip(self):
        p = ModelParams(f=0.8)
        t_half = math.pi / p.omega_c
        assert np.max(np.abs(build_drive(p, t_half) + build_drive(p, 0.0))) <= 1e-12

    def test_frobenius_norm_constant(self):
        p = ModelParams(f=0.8)
        for t in (0.0, 0.17, 2.9):
            d = build_drive(p, t)
            assert np.linalg.norm(d) == pytest.approx(p.f * math.sqrt(2) * math.sqrt(8))
            assert np.max(np.abs(d - dag(d))) <= 1e-12


class TestThermalState:
    def test_zero_temperature_limit(self):
        rho = thermal_qubit_state(beta=1e6, omega=2.0)
        assert np.max(np.abs(rho - KET_GROUND)) <= 1e-9

    def test_infinite_temperature_limit(self):
        rho = thermal_qubit_state(beta=1e-12, omega=1.0)
        assert np.allclose(np.diag(rho).real, [0.5, 0.5], atol=1e-9)

    def test_default_cold_bath_population(self):
        rho = thermal_qubit_state(beta=1 / 3, omega=2.0)
        w = math.exp(-2.0 / 3.0)
        assert rho[1, 1].real == pytest.approx(w / (1 + w), abs=1e-15)
        # partition-function cross-check: populations are Boltzmann weights / Z
        z = 1 + w
        assert rho[0, 0].real * z == pytest.approx(1.0, abs=1e-14)
        assert np.trace(rho).real == pytest.approx(1.0, abs=0)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            thermal_qubit_state(beta=-1.0, omega=2.0)


class TestBoseOccupation:
    def test_deep_quantum_limit(self):
        assert bose_occupation(temp=1.0, omega=50.0) <= 1e-20

    def test_default_baths(self):
        assert bose_occupation(3.0, 2.0) == pytest.approx(1 / math.expm1(2 / 3), abs=1e-15)
        assert bose_occupation(30.0, 10.0) == pytest.approx(1 / math.expm1(1 / 3), abs=1e-15)


class TestJumpOperators:
    def test_channel_structure(self):
        p = ModelParams()
        jumps = build_jump_operators(p)
        assert len(jumps) == 4
        nbar1 = 1 / math.expm1(2 / 3)
        assert jumps[0][1] == pytest.approx(0.2 * (1 + nbar1), abs=1e-15)
        assert jumps[1][1] == pytest.approx(0.2 * nbar1, abs=1e-15)

    def test_zero_damping(self):
        for _, rate in build_jump_operators(ModelParams(gamma1=0.0, gamma2=0.0)):
            assert rate == 0.0

    def test_detailed_balance(self):
        p = ModelParams()
        jumps = build_jump_operators(p)
        for (down, up), omega, temp in (((jumps[0], jumps[1]), 2.0, 3.0),
                                        ((jumps[2], jumps[3]), 10.0, 30.0)):
            ratio = up[1] / down[1]
            assert abs(ratio - math.exp(-omega / temp)) <= 1e-12

    def test_operators_are_embedded_ladders(self):
        from qatm_battery.model import SIGMA_MINUS, SIGMA_PLUS

        jumps = build_jump_operators(ModelParams())
        assert np.array_equal(jumps[0][0], embed(SIGMA_MINUS, "M1"))
        assert np.array_equal(jumps[3][0], embed(SIGMA_PLUS, "M2"))


class TestVirtualTemperature:
    def test_equilibrium_case(self):
        p = ModelParams(t1=5.0, t2=5.0)
        assert virtual_temperature(p) == pytest.approx(5.0, abs=1e-12)

    def test_default_heat_pump(self):
        p = ModelParams()
        assert virtual_temperature(p) == pytest.approx(-24.0, abs=1e-12)
        assert machine_regime(p) == "heat pump"

    def test_positive_regime(self):
        # omega_m2 / t2 > omega_m1 / t1 flips the sign
        p = ModelParams(t1=3.0, t2=10.0)
        assert virtual_temperature(p) == pytest.approx(8.0 / (1.0 - 2.0 / 3.0))
        assert machine_regime(p) == "non-inverted"

    def test_degenerate_balance_raises(self):
        with pytest.raises(ValueError, match="undefined"):
            virtual_temperature(ModelParams(t1=3.0, t2=15.0))


class TestConservation:
    def test_default_commutators_vanish(self):
        rep = verify_conservation_commutators(ModelParams(f=0.8), t=0.7)
        assert rep.comm_machine_charger <= 1e-12
        assert rep.comm_charger_battery <= 1e-12
        assert rep.drive_residual <= 1e-12

    def test_driveless_residual_exactly_zero(self):
        rep = verify_conservation_commutators(ModelParams(f=0.0), t=0.7)
        assert rep.drive_residual == 0.0

    def test_random_parameter_sets(self, rng):
        for _ in range(50):
            p = random_valid_params(rng)
            rep = verify_conservation_commutators(p, t=rng.uniform(0, 10))
            assert rep.comm_machine_charger <= 1e-12
            assert rep.comm_charger_battery <= 1e-12
            assert rep.drive_residual <= 1e-11 * max(1.0, p.f * p.omega_c)


class TestSystemOperators:
    def test_all_static_parts_hermitian(self):
        ops = build_operators(ModelParams(f=0.8))
        for h in (ops.h_m12, ops.h_c, ops.h_b, ops.h_free, ops.h_cb, ops.h_m12c):
            assert np.max(np.abs(h - dag(h))) <= 1e-12
        assert np.max(np.abs(ops.drive(0.31) - dag(ops.drive(0.31)))) <= 1e-12

    def test_drive_matches_builder(self):
        p = ModelParams(f=0.8)
        ops = build_operators(p)
        assert np.allclose(ops.drive(1.234), build_drive(p, 1.234))

    def test_rates_nonnegative(self):
        for _, rate in build_operators(ModelParams()).jumps:
            assert rate >= 0


class TestInitialStates:
    def test_composite_is_valid_product(self):
        p = ModelParams()
        rho = composite_initial_state(p, KET_EXCITED, KET_GROUND)
        assert rho.shape == (16, 16)
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
        assert np.min(np.linalg.eigvalsh(rho)) >= -1e-14

    def test_plus_charger_energy(self):
        p = ModelParams()
        rho = composite_initial_state(p, PLUS_STATE, KET_GROUND)
        ops = build_operators(p)
        e_c = np.trace(ops.h_c @ rho).real
        assert e_c / p.omega_c == pytest.approx(0.5, abs=1e-12)
        e_b = np.trace(ops.h_b @ rho).real
        assert e_b == pytest.approx(0.0, abs=1e-12)
