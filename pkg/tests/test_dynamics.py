import math

import numpy as np
import pytest

from qatm_battery.dynamics import (
    DensityMatrix,
    InvalidStateError,
    integrate,
    lindblad_rhs,
    phi,
)
from qatm_battery.linalg import dag, kron
from qatm_battery.model import (
    KET_EXCITED,
    KET_GROUND,
    ModelParams,
    build_operators,
    composite_initial_state,
    thermal_qubit_state,
)

from conftest import rand_density, rand_hermitian


class TestPhi:
    def test_window_start(self):
        assert phi(0.0, 5.0) == 1.0

    def test_closed_interval(self):
        assert phi(5.0, 5.0) == 1.0
        assert phi(5.0 + 1e-9, 5.0) == 0.0

    def test_infinite_window(self):
        for t in (0.0, 1.0, 1e6):
            assert phi(t, math.inf) == 1.0

    def test_before_start(self):
        assert phi(-0.1, 5.0) == 0.0


class TestLindbladRhs:
    def test_maximally_mixed_free_fixed_point(self):
        p = ModelParams(g=0.0, k=0.0, f=0.0, gamma1=0.0, gamma2=0.0)
        ops = build_operators(p)
        out = lindblad_rhs(p, ops, 0.0, np.eye(16, dtype=complex) / 16)
        assert np.max(np.abs(out)) <= 1e-15

    def test_gibbs_machine_fixed_point(self, rng):
        p = ModelParams(g=0.0, k=0.0, f=0.0)
        ops = build_operators(p)
        machine = kron(thermal_qubit_state(p.beta1, p.omega_m1),
                       thermal_qubit_state(p.beta2, p.omega_m2))
        rho = kron(machine, rand_density(rng, 4))
        out = lindblad_rhs(p, ops, 0.0, rho)
        from qatm_battery.linalg import partial_trace

        # the machine block sits at its dissipative fixed point
        assert np.max(np.abs(partial_trace(out, ("M1", "M2")))) <= 1e-13
        # and with a CB state diagonal in the energy basis the rhs vanishes
        rho_diag = kron(machine, np.diag(rng.uniform(0.1, 1.0, size=4)).astype(complex))
        rho_diag /= np.trace(rho_diag)
        assert np.max(np.abs(lindblad_rhs(p, ops, 0.0, rho_diag))) <= 1e-13

    def test_traceless_and_hermitian(self, rng):
        p = ModelParams(f=0.8)
        ops = build_operators(p)
        for _ in range(100):
            rho = rand_hermitian(rng, 16)
            rho /= np.trace(rho).real
            out = lindblad_rhs(p, ops, rng.uniform(0, 10), rho)
            assert abs(np.trace(out)) <= 1e-11
            assert np.max(np.abs(out - dag(out))) <= 1e-12

    def test_window_gates_everything(self, rng):
        p = ModelParams(f=0.8, tau=1.0)
        ops = build_operators(p)
        rho = rand_density(rng, 16)
        late = lindblad_rhs(p, ops, 2.0, rho)
        free_only = -1j * (ops.h_free @ rho - rho @ ops.h_free)
        assert np.allclose(late, free_only)


def _reference_rk4(p, rho0, dt, n_steps):
    """Plain RK4 on the reference rhs, with the same per-step hygiene."""
    ops = build_operators(p)
    rho = rho0.copy()
    out = [rho.copy()]
    for step in range(n_steps):
        t = step * dt
        k1 = lindblad_rhs(p, ops, t, rho)
        k2 = lindblad_rhs(p, ops, t + dt / 2, rho + dt / 2 * k1)
        k3 = lindblad_rhs(p, ops, t + dt / 2, rho + dt / 2 * k2)
        k4 = lindblad_rhs(p, ops, t + dt, rho + dt * k3)
        rho = rho + dt / 6 * (k1 + 2 * (k2 + k3) + k4)
        rho = 0.5 * (rho + dag(rho))
        rho = rho / np.trace(rho).real
        out.append(rho.copy())
    return np.array(out)


class TestIntegrate:
    def test_backends_match_reference(self):
        p = ModelParams(f=0.8, tau=0.03)  # exercise the window switch too
        rho0 = composite_initial_state(p, KET_EXCITED, KET_GROUND)
        ref = _reference_rk4(p, rho0, 1e-3, 50)
        for backend in ("numba", "numpy"):
            traj = integrate(p, rho0, dt=1e-3, t_max=0.05, stride=1, backend=backend)
            assert np.max(np.abs(traj.states - ref)) <= 1e-12

    def test_backends_agree_bitwise_per_backend(self):
        p = ModelParams(f=0.8)
        rho0 = composite_initial_state(p, KET_EXCITED, KET_GROUND)
        a = integrate(p, rho0, dt=1e-3, t_max=1.0)
        b = integrate(p, rho0, dt=1e-3, t_max=1.0)
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.marg_b, b.marg_b)

    def test_cross_backend_agreement(self):
        p = ModelParams(f=0.8)
        rho0 = composite_initial_state(p, KET_EXCITED, KET_GROUND)
        a = integrate(p, rho0, dt=1e-3, t_max=1.0, backend="numba")
        b = integrate(p, rho0, dt=1e-3, t_max=1.0, backend="numpy")
        assert np.max(np.abs(a.states - b.states)) <= 1e-10

    @pytest.mark.parametrize("k", [0.1, 0.9])
    def test_exchange_oracle(self, k):
        p = ModelParams(g=0.0, f=0.0, k=k)
        rho0 = composite_initial_state(p, KET_EXCITED, KET_GROUND)
        traj = integrate(p, rho0, dt=1e-3, t_max=10.0)
        target = np.sin(k * traj.t) ** 2
        assert np.max(np.abs(traj.marg_b[:, 1, 1].real - target)) <= 1e-6

    def test_isolated_battery_frozen(self):
        p = ModelParams(k=0.0, f=0.8)
        rho0 = composite_initial_state(p, KET_EXCITED, KET_GROUND)
        traj = integrate(p, rho0, dt=1e-3, t_max=5.0)
        assert np.max(np.abs(traj.marg_b - traj.marg_b[0])) <= 1e-9

    def test_fourth_order_convergence(self):
        p = ModelParams(f=0.8)
        rho0 = composite_initial_state(p, KET_EXCITED, KET_GROUND)
        end = {}
        for dt in (1e-3, 5e-4, 2.5e-4):
            end[dt] = integrate(p, rho0, dt=dt, t_max=2.0).states[-1]
        err_coarse = np.max(np.abs(end[1e-3] - end[2.5e-4]))
        err_fine = np.max(np.abs(end[5e-4] - end[2.5e-4]))
        assert err_coarse / err_fine >= 12.0

    def test_closed_system_energy_conserved(self):
        p = ModelParams(gamma1=0.0, gamma2=0.0, f=0.0)
        rho0 = composite_initial_state(p, KET_EXCITED, KET_GROUND)
        traj = integrate(p, rho0, dt=1e-3, t_max=10.0)
        h_free = build_operators(p).h_free
        energy = np.einsum("ij,tji->t", h_free, traj.states).real
        assert np.max(np.abs(energy - energy[0])) <= 1e-7

    def test_drive_work_injection(self):
        # d/dt <H0> equals the commutator expectation of the drive alone
        p = ModelParams(gamma1=0.0, gamma2=0.0, f=0.8)
        rho0 = composite_initial_state(p, KET_EXCITED, KET_GROUND)
        traj = integrate(p, rho0, dt=1e-3, t_max=2.0)
        ops = build_operators(p)
        pe_c = traj.marg_c[:, 1, 1].real
        pe_b = traj.marg_b[:, 1, 1].real
        d = np.einsum("tii->ti", traj.marg_m12).real
        energy = (p.omega_c * pe_c + p.omega_b * pe_b
                  + p.omega_m1 * (d[:, 2] + d[:, 3]) + p.omega_m2 * (d[:, 1] + d[:, 3]))
        fd = (energy[2:] - energy[:-2]) / (2 * traj.dt)
        stored_idx = np.arange(0, traj.n_steps + 1, traj.stride)
        for si, step in enumerate(stored_idx):
            if step == 0 or step == traj.n_steps:
                continue
            t = traj.t[step]
            comm = ops.h_free @ ops.drive(t) - ops.drive(t) @ ops.h_free
            analytic = np.trace(-1j * comm @ traj.states[si]).real
            assert abs(fd[step - 1] - analytic) <= 2e-3

    def test_window_freezes_dissipation(self):
        p = ModelParams(tau=1.0, f=0.0)
        rho0 = composite_initial_state(p, KET_EXCITED, KET_GROUND)
        traj = integrate(p, rho0, dt=1e-3, t_max=3.0)
        # after tau the machine populations stop moving (only free rotation left)
        after = traj.t >= 1.0 + traj.dt
        diag = np.einsum("tii->ti", traj.marg_m12).real[after]
        assert np.max(np.abs(diag - diag[0])) <= 1e-9

    def test_dt_guard(self):
        p = ModelParams()
        rho0 = composite_initial_state(p, KET_EXCITED, KET_GROUND)
        with pytest.raises(ValueError, match="stability"):
            integrate(p, rho0, dt=0.01, t_max=1.0)

    def test_invalid_initial_state(self):
        p = ModelParams()
        bad = np.eye(16, dtype=complex)  # trace 16
        with pytest.raises(InvalidStateError):
            integrate(p, bad, dt=1e-3, t_max=1.0)

    def test_trajectory_accessors(self):
        p = ModelParams()
        rho0 = composite_initial_state(p, KET_EXCITED, KET_GROUND)
        traj = integrate(p, rho0, dt=1e-3, t_max=0.5, stride=10)
        assert traj.n_steps == 500
        assert len(traj.t_stored) == 51
        assert traj.states.shape == (51, 16, 16)
        assert traj.marginal("B").shape == (501, 2, 2)
        with pytest.raises(ValueError, match="unknown subsystem"):
            traj.marginal("Q")
        dm = traj.state(50)
        dm.validate()
        assert np.allclose(dm.reduced("B").matrix, traj.marg_b[-1], atol=1e-12)

    def test_invariant_summary_clean(self):
        p = ModelParams(f=0.8)
        rho0 = composite_initial_state(p, KET_EXCITED, KET_GROUND)
        summary = integrate(p, rho0, dt=1e-3, t_max=2.0).invariant_summary()
        assert summary["trace_deviation"] <= 1e-8
        assert summary["hermiticity_defect"] <= 1e-10
        assert summary["min_eigenvalue"] >= -1e-8


class TestDensityMatrix:
    def test_validate_passes_good_state(self, rng):
        DensityMatrix(rand_density(rng, 16)).validate()

    def test_trace_violation(self):
        with pytest.raises(InvalidStateError, match="Tr"):
            DensityMatrix(np.eye(16, dtype=complex) / 8).validate()

    def test_hermiticity_violation(self, rng):
        m = rand_density(rng, 16)
        m[0, 1] += 1e-6
        with pytest.raises(InvalidStateError, match="Hermiticity"):
            DensityMatrix(m).validate()

    def test_negativity_violation(self):
        m = np.diag([1.1, -0.1] + [0.0] * 14).astype(complex)
        with pytest.raises(InvalidStateError, match="eigenvalue"):
            DensityMatrix(m).validate()

    def test_non_finite_rejected(self):
        m = np.eye(16, dtype=complex) / 16
        m[3, 3] = np.nan
        with pytest.raises(InvalidStateError, match="finite"):
            DensityMatrix(m).validate()
