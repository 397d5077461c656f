"""Diagnostics computed from trajectories.

Information flow (trace-distance derivative), correlations (mutual
information), energy transfer and charging power, basis coherence, and
extractable work (ergotropy).  Entropic quantities default to log base 2,
so a maximally coherent qubit scores 1 and a two-qubit Bell state carries
mutual information 2; pass ``base=np.e`` for nats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory
from .linalg import dag, hermitian_eig, partial_trace, trace_norm_stack

#: eigenvalues below this are treated as exact zeros inside entropies
EIGENVALUE_CLIP = 1e-14


@dataclass
class TimeSeries:
    name: str
    t: np.ndarray
    values: np.ndarray
    units: str = "dimensionless"

    def __post_init__(self):
        if len(self.t) != len(self.values):
            raise ValueError(f"{self.name}: t and values lengths differ")


def _entropy_from_probs(w: np.ndarray, base: float) -> np.ndarray:
    """Shannon entropy along the last axis, clipping tiny eigenvalues."""
    w = np.where(w > EIGENVALUE_CLIP, w, 1.0)  # log(1) = 0 kills clipped terms
    return -np.sum(w * np.log(w), axis=-1) / np.log(base)


def _entropy_stack(states: np.ndarray, base: float) -> np.ndarray:
    return _entropy_from_probs(np.linalg.eigvalsh(states), base)


def von_neumann_entropy(rho: np.ndarray, base: float = 2.0) -> float:
    """-Tr(rho log rho) over the eigenvalues, with 0 log 0 := 0."""
    w = hermitian_eig(rho).eigenvalues
    return float(_entropy_from_probs(w, base))


def _check_matching_grids(a: Trajectory, b: Trajectory):
    if a.n_steps != b.n_steps or a.dt != b.dt:
        raise ValueError(
            f"trajectory grids differ: {a.n_steps} steps at dt={a.dt} vs "
            f"{b.n_steps} steps at dt={b.dt}"
        )


def trace_distance_series(
    traj_alpha: Trajectory, traj_beta: Trajectory, subsystem: str
) -> TimeSeries:
    """D(t) = 1/2 || rho^alpha_n(t) - rho^beta_n(t) ||_1 on the dense grid."""
    _check_matching_grids(traj_alpha, traj_beta)
    diff = traj_alpha.marginal(subsystem) - traj_beta.marginal(subsystem)
    return TimeSeries(
        name=f"trace_distance_{subsystem}",
        t=traj_alpha.t,
        values=0.5 * trace_norm_stack(diff),
    )


def trace_distance_derivative(
    traj_alpha: Trajectory, traj_beta: Trajectory, subsystem: str
) -> TimeSeries:
    """Time derivative of the subsystem trace distance between two branches.

    Central differences on the interior, one-sided at the endpoints.
    Positive values mean the subsystem is losing distinguishability
    (information flowing out); negative values mark backflow.
    """
    d = trace_distance_series(traj_alpha, traj_beta, subsystem)
    if len(d.t) < 2:
        raise ValueError("need at least two grid points to differentiate")
    dt = traj_alpha.dt
    sigma = np.empty_like(d.values)
    sigma[1:-1] = (d.values[2:] - d.values[:-2]) / (2.0 * dt)
    sigma[0] = (d.values[1] - d.values[0]) / dt
    sigma[-1] = (d.values[-1] - d.values[-2]) / dt
    return TimeSeries(name=f"sigma_{subsystem}", t=d.t, values=sigma, units="1/time")


def information_backflow(sigma: TimeSeries) -> float:
    """Accumulated backflow: integral of max(-sigma, 0) dt (trapezoidal)."""
    return float(np.trapezoid(np.maximum(-sigma.values, 0.0), sigma.t))


def mutual_information_cb(state: np.ndarray, base: float = 2.0) -> float:
    """S(C) + S(B) - S(CB) of a full 16-dim state; zero for product states."""
    s_c = _entropy_stack(partial_trace(state, "C"), base)
    s_b = _entropy_stack(partial_trace(state, "B"), base)
    s_cb = _entropy_stack(partial_trace(state, ("C", "B")), base)
    return float(s_c + s_b - s_cb)


def mutual_information_m12cb(state: np.ndarray, base: float = 2.0) -> float:
    """Mutual information between the machine pair and the charger-battery
    block: S(M12) + S(CB) - S(full).  The machine marginal keeps M1 and M2
    jointly (a 4-dim block), not as separate qubits."""
    s_m = _entropy_stack(partial_trace(state, ("M1", "M2")), base)
    s_cb = _entropy_stack(partial_trace(state, ("C", "B")), base)
    s_all = _entropy_stack(state, base)
    return float(s_m + s_cb - s_all)


def total_correlation(state: np.ndarray, base: float = 2.0) -> float:
    """Total correlation of the machine | charger | battery split:
    S(M12) + S(C) + S(B) - S(full).

    Decomposes exactly as mutual_information_m12cb + mutual_information_cb,
    so it upper-bounds both.
    """
    s_m = _entropy_stack(partial_trace(state, ("M1", "M2")), base)
    s_c = _entropy_stack(partial_trace(state, "C"), base)
    s_b = _entropy_stack(partial_trace(state, "B"), base)
    s_all = _entropy_stack(state, base)
    return float(s_m + s_c + s_b - s_all)


def mutual_information_cb_series(traj: Trajectory, base: float = 2.0) -> TimeSeries:
    """I_CB on the stored (strided) grid."""
    states = traj.states
    vals = (
        _entropy_stack(partial_trace(states, "C"), base)
        + _entropy_stack(partial_trace(states, "B"), base)
        - _entropy_stack(partial_trace(states, ("C", "B")), base)
    )
    return TimeSeries("mi_CB", traj.t_stored, vals, _entropy_units(base))


def mutual_information_m12cb_series(traj: Trajectory, base: float = 2.0) -> TimeSeries:
    states = traj.states
    vals = (
        _entropy_stack(partial_trace(states, ("M1", "M2")), base)
        + _entropy_stack(partial_trace(states, ("C", "B")), base)
        - _entropy_stack(states, base)
    )
    return TimeSeries("mi_M12CB", traj.t_stored, vals, _entropy_units(base))


def _entropy_units(base: float) -> str:
    return "bits" if base == 2.0 else "nats"


def internal_energy(traj: Trajectory, subsystem: str) -> TimeSeries:
    """Normalized energy change (E_n(t) - E_n(0)) / omega_n for C or B."""
    if subsystem not in ("C", "B"):
        raise ValueError(f"internal_energy covers C and B, not {subsystem!r}")
    pe = traj.marginal(subsystem)[:, 1, 1].real
    return TimeSeries(f"delta_e_{subsystem}", traj.t, pe - pe[0])


def machine_energy(traj: Trajectory) -> TimeSeries:
    """Per-qubit-normalized machine energy change, summed over M1 and M2."""
    d = np.einsum("tii->ti", traj.marg_m12).real
    pe1 = d[:, 2] + d[:, 3]  # M12 basis index 2 m1 + m2
    pe2 = d[:, 1] + d[:, 3]
    vals = (pe1 - pe1[0]) + (pe2 - pe2[0])
    return TimeSeries("delta_e_M12", traj.t, vals)


def charging_power(delta_e_b: TimeSeries) -> TimeSeries:
    """Average charging power (energy change over elapsed time), defined 0
    at t = 0 where the limit exists."""
    if delta_e_b.t[0] != 0.0:
        raise ValueError("power series must start at t = 0")
    vals = np.zeros_like(delta_e_b.values)
    vals[1:] = delta_e_b.values[1:] / delta_e_b.t[1:]
    return TimeSeries("power_B", delta_e_b.t, vals, units="1/time")


def dephased(rho: np.ndarray) -> np.ndarray:
    """The fully dephased companion of a state: off-diagonals zeroed."""
    return np.diag(np.diag(rho)).astype(np.complex128)


def relative_entropy_of_coherence(rho: np.ndarray, base: float = 2.0) -> float:
    """S(dephased(rho)) - S(rho); in [0, 1] for a qubit at base 2."""
    s_deph = _entropy_from_probs(np.diag(rho).real, base)
    return float(s_deph - von_neumann_entropy(rho, base))


def coherence_values(stack: np.ndarray, base: float = 2.0) -> np.ndarray:
    """Relative entropy of coherence for a stack (..., d, d) of states."""
    diag = np.einsum("...ii->...i", stack).real
    return _entropy_from_probs(diag, base) - _entropy_stack(stack, base)


def coherence_series(traj: Trajectory, subsystem: str, base: float = 2.0) -> TimeSeries:
    vals = coherence_values(traj.marginal(subsystem), base)
    return TimeSeries(f"coherence_{subsystem}", traj.t, vals, _entropy_units(base))


def passive_state(rho_b: np.ndarray, h_b: np.ndarray) -> np.ndarray:
    """Unitarily work-free state: populations of ``rho_b`` sorted descending
    and attached to the eigenstates of ``h_b`` sorted ascending."""
    pops = hermitian_eig(rho_b).eigenvalues[::-1]
    _, vecs = hermitian_eig(h_b)
    return (vecs * pops) @ dag(vecs)


def ergotropy(rho_b: np.ndarray, h_b: np.ndarray) -> float:
    """Maximal unitarily extractable work: E(rho_b) - E(passive state)."""
    e_now = float(np.trace(h_b @ rho_b).real)
    e_passive = float(np.trace(h_b @ passive_state(rho_b, h_b)).real)
    return max(0.0, e_now - e_passive)


def ergotropy_fraction_values(stack: np.ndarray) -> np.ndarray:
    """Ergotropy over level spacing for a stack of qubit states whose
    Hamiltonian is diag(0, omega): the passive energy is omega times the
    smaller population eigenvalue."""
    w = np.linalg.eigvalsh(stack)
    return np.maximum(stack[..., 1, 1].real - w[..., 0], 0.0)


def ergotropy_series(traj: Trajectory) -> TimeSeries:
    """Battery ergotropy normalized by omega_b, on the dense grid."""
    return TimeSeries("ergotropy_B", traj.t, ergotropy_fraction_values(traj.marg_b))
