"""Physical parameters and operator construction.

The composite system is four qubits: two machine qubits M1/M2 (each damped
by its own thermal reservoir), a driven charger C, and a battery B, in the
tensor order of :data:`~qatm_battery.linalg.STANDARD_LAYOUT`.  Units use
hbar = k_B = 1, so frequencies, rates and temperatures all carry energy
dimension and time is inverse energy.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .linalg import STANDARD_LAYOUT, dag, embed, kron_all

SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=np.complex128)  # |0><1|
SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=np.complex128)  # |1><0|
PROJ_GROUND = np.diag([1.0, 0.0]).astype(np.complex128)
PROJ_EXCITED = np.diag([0.0, 1.0]).astype(np.complex128)

KET_GROUND = PROJ_GROUND  # |0><0| as a state
KET_EXCITED = PROJ_EXCITED  # |1><1|
PLUS_STATE = 0.5 * np.ones((2, 2), dtype=np.complex128)  # (|0>+|1>)(<0|+<1|)/2

#: couplings and rates are considered weak below this fraction of omega_m2
WEAK_COUPLING_FRACTION = 0.1

_RES_ATOL = 1e-9


class WeakCouplingWarning(UserWarning):
    """A coupling or rate leaves the weak-coupling regime the local
    master equation is derived in."""


@dataclass(frozen=True)
class ModelParams:
    """Every adjustable physical parameter of the machine-charger-battery
    system, with the default working point used by the scenario catalog.

    Constraints enforced at construction:

    * resonance ``omega_m2 - omega_m1 == omega_c == omega_b`` (the machine's
      mediating transition must match charger and battery),
    * ``omega_m1 < omega_m2`` and ``t1 <= t2`` (cold bath on the small gap),
    * positivity of frequencies and temperatures, nonnegativity of couplings.

    Couplings or rates above ``0.1 * omega_m2`` only warn
    (:class:`WeakCouplingWarning`); the equations stay integrable there even
    though the local dissipator derivation loses its justification.
    """

    omega_m1: float = 2.0
    omega_m2: float = 10.0
    omega_c: float = 8.0
    omega_b: float = 8.0
    g: float = 0.3
    k: float = 0.3
    f: float = 0.0
    gamma1: float = 0.2
    gamma2: float = 0.2
    t1: float = 3.0
    t2: float = 30.0
    tau: float = math.inf

    def __post_init__(self):
        for name in ("omega_m1", "omega_m2", "omega_c", "omega_b", "t1", "t2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("g", "k", "f", "gamma1", "gamma2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0 (or inf), got {self.tau}")
        if not self.omega_m1 < self.omega_m2:
            raise ValueError("omega_m1 must be smaller than omega_m2")
        if self.t1 > self.t2:
            raise ValueError("t1 must not exceed t2 (cold bath on qubit M1)")
        scale = _RES_ATOL * max(1.0, self.omega_m2)
        gap = self.omega_m2 - self.omega_m1
        if abs(gap - self.omega_c) > scale or abs(self.omega_c - self.omega_b) > scale:
            raise ValueError(
                "resonance violated: need omega_m2 - omega_m1 == omega_c == omega_b, "
                f"got gap={gap}, omega_c={self.omega_c}, omega_b={self.omega_b}"
            )
        strong = {
            name: val
            for name in ("g", "k", "gamma1", "gamma2")
            if (val := getattr(self, name)) > WEAK_COUPLING_FRACTION * self.omega_m2 + scale
        }
        if strong:
            warnings.warn(
                f"{strong} exceed {WEAK_COUPLING_FRACTION} * omega_m2; the local "
                "dissipators assume weak coupling",
                WeakCouplingWarning,
                stacklevel=3,
            )

    @property
    def beta1(self) -> float:
        return 1.0 / self.t1

    @property
    def beta2(self) -> float:
        return 1.0 / self.t2

    @property
    def omega_m12(self) -> float:
        """Gap of the machine's mediating transition."""
        return self.omega_m2 - self.omega_m1

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)


def thermal_qubit_state(beta: float, omega: float) -> np.ndarray:
    """Gibbs state of a qubit with level spacing ``omega`` at inverse
    temperature ``beta``: diag(1, e^{-beta omega}) / Z."""
    if omega <= 0 or beta <= 0:
        raise ValueError("thermal_qubit_state needs beta > 0 and omega > 0")
    w = math.exp(-beta * omega)
    z = 1.0 + w
    return np.diag([1.0 / z, w / z]).astype(np.complex128)


def bose_occupation(temp: float, omega: float) -> float:
    """Mean thermal photon number 1 / (e^{omega/temp} - 1)."""
    if temp <= 0 or omega <= 0:
        raise ValueError("bose_occupation needs temp > 0 and omega > 0")
    return 1.0 / math.expm1(omega / temp)


def virtual_temperature(p: ModelParams) -> float:
    """Effective temperature of the machine's mediating transition.

    Signed; a negative value marks population inversion of the virtual
    qubit (heat-pump operation).  Raises when the two baths balance the
    transition exactly (zero denominator).
    """
    denom = p.omega_m2 * p.beta2 - p.omega_m1 * p.beta1
    if abs(denom) < 1e-15 * max(1.0, p.omega_m2 * p.beta2, p.omega_m1 * p.beta1):
        raise ValueError(
            "virtual temperature undefined: omega_m2/t2 == omega_m1/t1 "
            "(baths balance the mediating transition)"
        )
    return p.omega_m12 / denom


def machine_regime(p: ModelParams) -> str:
    """Classify machine operation from the sign of the virtual temperature."""
    return "heat pump" if virtual_temperature(p) < 0 else "non-inverted"


def build_free_hamiltonians(p: ModelParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Free Hamiltonians (h_m12, h_c, h_b), embedded in the full space.

    Each qubit contributes omega * |1><1|; h_m12 sums both machine qubits.
    """
    h_m1 = p.omega_m1 * embed(PROJ_EXCITED, "M1")
    h_m2 = p.omega_m2 * embed(PROJ_EXCITED, "M2")
    h_c = p.omega_c * embed(PROJ_EXCITED, "C")
    h_b = p.omega_b * embed(PROJ_EXCITED, "B")
    return h_m1 + h_m2, h_c, h_b


def build_interactions(p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Charger-battery exchange and the machine-charger swap (h_cb, h_m12c).

    h_cb = k (sigma+_C sigma-_B + h.c.).  h_m12c exchanges one excitation
    between the machine's mediating transition and the charger:
    g (|0_M1 1_M2 0_C><1_M1 0_M2 1_C| + h.c.), identity on B.
    """
    sp_c = embed(SIGMA_PLUS, "C")
    sm_c = embed(SIGMA_MINUS, "C")
    sp_b = embed(SIGMA_PLUS, "B")
    sm_b = embed(SIGMA_MINUS, "B")
    h_cb = p.k * (sp_c @ sm_b + sm_c @ sp_b)

    # |0 1 0> on (M1, M2, C) paired with <1 0 1|, tensored with I on B
    ket = kron_all([PROJ_GROUND[:, :1], PROJ_EXCITED[:, 1:], PROJ_GROUND[:, :1]])
    bra = kron_all([PROJ_EXCITED[:, 1:], PROJ_GROUND[:, :1], PROJ_EXCITED[:, 1:]])
    hop = ket @ bra.conj().T  # 8x8 on M1,M2,C
    h_m12c = p.g * np.kron(hop + dag(hop), np.eye(2, dtype=np.complex128))
    return h_cb, h_m12c


def build_drive(p: ModelParams, t: float) -> np.ndarray:
    """Resonant field on the charger at time ``t``:
    f (e^{-i omega_c t} sigma+_C + e^{+i omega_c t} sigma-_C)."""
    z = p.f * np.exp(-1j * p.omega_c * t)
    return z * embed(SIGMA_PLUS, "C") + np.conj(z) * embed(SIGMA_MINUS, "C")


def build_jump_operators(p: ModelParams) -> list[tuple[np.ndarray, float]]:
    """Thermal jump channels of the two machine qubits.

    Exactly four (operator, rate) pairs, embedded in the full space:
    decay and excitation of M1 and of M2, with rates gamma (nbar + 1) and
    gamma nbar for the respective bath occupation.
    """
    channels = []
    for label, gamma, temp, omega in (
        ("M1", p.gamma1, p.t1, p.omega_m1),
        ("M2", p.gamma2, p.t2, p.omega_m2),
    ):
        nbar = bose_occupation(temp, omega)
        channels.append((embed(SIGMA_MINUS, label), gamma * (nbar + 1.0)))
        channels.append((embed(SIGMA_PLUS, label), gamma * nbar))
    return channels


@dataclass(frozen=True)
class SystemOperators:
    """All static operators of one parameter set, built once and shared."""

    params: ModelParams
    h_m12: np.ndarray
    h_c: np.ndarray
    h_b: np.ndarray
    h_free: np.ndarray  # h_m12 + h_c + h_b, the always-on part
    h_cb: np.ndarray
    h_m12c: np.ndarray
    sp_c: np.ndarray  # raising operator on C, full space
    sm_c: np.ndarray
    jumps: tuple[tuple[np.ndarray, float], ...]
    h_c_local: np.ndarray  # 2x2, for marginal energies
    h_b_local: np.ndarray

    def drive(self, t: float) -> np.ndarray:
        """Charger drive term at time ``t`` (zero matrix when f = 0)."""
        z = self.params.f * np.exp(-1j * self.params.omega_c * t)
        return z * self.sp_c + np.conj(z) * self.sm_c

    def hamiltonian(self, t: float) -> np.ndarray:
        """Full Hamiltonian at time ``t`` with all interactions active."""
        return self.h_free + self.h_cb + self.h_m12c + self.drive(t)


def build_operators(p: ModelParams) -> SystemOperators:
    h_m12, h_c, h_b = build_free_hamiltonians(p)
    h_cb, h_m12c = build_interactions(p)
    return SystemOperators(
        params=p,
        h_m12=h_m12,
        h_c=h_c,
        h_b=h_b,
        h_free=h_m12 + h_c + h_b,
        h_cb=h_cb,
        h_m12c=h_m12c,
        sp_c=embed(SIGMA_PLUS, "C"),
        sm_c=embed(SIGMA_MINUS, "C"),
        jumps=tuple(build_jump_operators(p)),
        h_c_local=p.omega_c * PROJ_EXCITED,
        h_b_local=p.omega_b * PROJ_EXCITED,
    )


def composite_initial_state(
    p: ModelParams, charger: np.ndarray, battery: np.ndarray
) -> np.ndarray:
    """Product initial state: machine qubits in their bath Gibbs states,
    charger and battery in the given 2x2 states."""
    return kron_all(
        [
            thermal_qubit_state(p.beta1, p.omega_m1),
            thermal_qubit_state(p.beta2, p.omega_m2),
            np.asarray(charger, dtype=np.complex128),
            np.asarray(battery, dtype=np.complex128),
        ]
    )


@dataclass(frozen=True)
class ConservationReport:
    """Max-entry norms of the conserved-quantity commutators.

    ``comm_machine_charger`` and ``comm_charger_battery`` are
    || [h_free, h_m12c] || and || [h_free, h_cb] ||; both vanish on
    resonance, which is what keeps the machine autonomous.
    ``drive_residual`` compares [h_free, drive(t)] against its closed form
    f omega_c (e^{-i omega_c t} sigma+_C - e^{+i omega_c t} sigma-_C) and
    vanishes identically.
    """

    comm_machine_charger: float
    comm_charger_battery: float
    drive_residual: float

    def max_norm(self) -> float:
        return max(self.comm_machine_charger, self.comm_charger_battery, self.drive_residual)


def _comm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def verify_conservation_commutators(p: ModelParams, t: float = 0.0) -> ConservationReport:
    """Report how well the interaction terms commute with the free
    Hamiltonian (report only, never raises)."""
    ops = build_operators(p)
    z = p.f * p.omega_c * np.exp(-1j * p.omega_c * t)
    closed_form = z * ops.sp_c - np.conj(z) * ops.sm_c
    return ConservationReport(
        comm_machine_charger=float(np.max(np.abs(_comm(ops.h_free, ops.h_m12c)))),
        comm_charger_battery=float(np.max(np.abs(_comm(ops.h_free, ops.h_cb)))),
        drive_residual=float(np.max(np.abs(_comm(ops.h_free, ops.drive(t)) - closed_form))),
    )
