"""Master-equation integration on a uniform time grid.

The generator combines the free evolution with a window-gated part: the
inter-subsystem couplings, the charger drive and the machine dissipators
are all switched by the indicator ``phi(t, tau)``.  Integration is
classical fixed-step RK4 with the drive evaluated at stage times; each
accepted step is re-hermitized and trace-renormalized, with the
renormalization magnitude recorded.

Two backends produce identical trajectories up to floating-point noise:
a numba-compiled kernel (default) and a pure-numpy loop.  Set the
environment variable ``QATM_BATTERY_FORCE_NUMPY=1`` to force the numpy
path; it is also used automatically when numba cannot be imported.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .linalg import STANDARD_LAYOUT, SubsystemLayout, dag, hermiticity_defect, partial_trace
from .model import ModelParams, SystemOperators, build_operators

logger = logging.getLogger(__name__)

FORCE_NUMPY_ENV = "QATM_BATTERY_FORCE_NUMPY"

#: abort thresholds of the integrator (invariant checks use tighter ones)
TRACE_ABORT_TOL = 1e-6
NEGATIVITY_ABORT_TOL = -1e-6

#: hard stability guard: dt * omega_m2 must stay below this
DT_STABILITY_LIMIT = 0.05


class InvalidStateError(ValueError):
    """A density matrix violates trace, Hermiticity or positivity bounds."""


class IntegrationError(RuntimeError):
    """Integration aborted because a state invariant broke down."""


@dataclass(frozen=True)
class DensityMatrix:
    """A validated state with its subsystem layout."""

    matrix: np.ndarray
    layout: SubsystemLayout = STANDARD_LAYOUT

    def validate(self, trace_atol: float = 1e-8, herm_atol: float = 1e-10,
                 eig_floor: float = -1e-8) -> "DensityMatrix":
        m = self.matrix
        if m.shape != (self.layout.dim, self.layout.dim):
            raise InvalidStateError(f"matrix shape {m.shape} does not match layout dim {self.layout.dim}")
        if not np.all(np.isfinite(m)):
            raise InvalidStateError("state contains non-finite entries")
        tr_dev = abs(np.trace(m) - 1.0)
        if tr_dev > trace_atol:
            raise InvalidStateError(f"|Tr rho - 1| = {tr_dev:.3e} exceeds {trace_atol}")
        defect = hermiticity_defect(m)
        if defect > herm_atol:
            raise InvalidStateError(f"Hermiticity defect {defect:.3e} exceeds {herm_atol}")
        min_eig = float(np.linalg.eigvalsh(0.5 * (m + dag(m)))[0])
        if min_eig < eig_floor:
            raise InvalidStateError(f"minimum eigenvalue {min_eig:.3e} below {eig_floor}")
        return self

    def reduced(self, keep) -> "DensityMatrix":
        return DensityMatrix(partial_trace(self.matrix, keep, self.layout),
                             self.layout.reduced(keep))


def phi(t: float, tau: float) -> float:
    """Interaction window indicator: 1 on [0, tau], 0 elsewhere."""
    return 1.0 if 0.0 <= t <= tau else 0.0


def lindblad_rhs(p: ModelParams, ops: SystemOperators, t: float, rho: np.ndarray) -> np.ndarray:
    """Right-hand side of the master equation, assembled term by term.

    This is the direct dense-matrix reference; the integration backends
    are checked against it.  Output is Hermitian and traceless for
    Hermitian input.
    """
    out = -1j * (ops.h_free @ rho - rho @ ops.h_free)
    gate = phi(t, p.tau)
    if gate:
        h_int = ops.h_cb + ops.h_m12c + ops.drive(t)
        out = out - 1j * gate * (h_int @ rho - rho @ h_int)
        for op, rate in ops.jumps:
            opd = dag(op)
            opdop = opd @ op
            out = out + gate * rate * (
                op @ rho @ opd - 0.5 * (opdop @ rho + rho @ opdop)
            )
    return out


@dataclass
class Trajectory:
    """Integration output: dense marginals every step, full states every
    ``stride`` steps, and per-step renormalization magnitudes."""

    params: ModelParams
    t: np.ndarray            # dense grid, (n_steps + 1,)
    dt: float
    stride: int
    states: np.ndarray       # (n_stored, 16, 16), at t[::stride]
    marg_m12: np.ndarray     # (n_steps + 1, 4, 4)
    marg_c: np.ndarray       # (n_steps + 1, 2, 2)
    marg_b: np.ndarray       # (n_steps + 1, 2, 2)
    renorm: np.ndarray       # (n_steps + 1,) pre-renormalization |Tr - 1|
    backend: str
    layout: SubsystemLayout = field(default=STANDARD_LAYOUT)

    @property
    def n_steps(self) -> int:
        return len(self.t) - 1

    @property
    def t_stored(self) -> np.ndarray:
        return self.t[:: self.stride]

    def state(self, index: int) -> DensityMatrix:
        return DensityMatrix(self.states[index], self.layout)

    def marginal(self, subsystem: str) -> np.ndarray:
        try:
            return {"M12": self.marg_m12, "C": self.marg_c, "B": self.marg_b}[subsystem]
        except KeyError:
            raise ValueError(f"unknown subsystem {subsystem!r}; expected M12, C or B") from None

    def invariant_summary(self) -> dict:
        """Worst-case state-invariant numbers over all stored steps."""
        herm = float(np.max(np.abs(self.states - dag(self.states))))
        tr_dev = float(np.max(np.abs(np.trace(self.states, axis1=-2, axis2=-1) - 1.0)))
        min_eig = float(np.min(np.linalg.eigvalsh(self.states)))
        return {
            "trace_deviation": max(tr_dev, float(np.max(self.renorm))),
            "hermiticity_defect": herm,
            "min_eigenvalue": min_eig,
        }


def _transition_indices(op: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Decompose a 0/1 transition matrix into (dst, src) index lists."""
    dst, src = np.nonzero(op)
    if not np.all(op[dst, src] == 1.0):
        raise ValueError("jump operator entries must all equal 1")
    if len(np.unique(dst)) != len(dst) or len(np.unique(src)) != len(src):
        raise ValueError("jump operator must be a partial permutation")
    return dst.astype(np.int64), src.astype(np.int64)


def _compile_generator(ops: SystemOperators) -> dict:
    """Precompute the static arrays both backends run on."""
    p = ops.params
    dsts, srcs, rates = [], [], []
    for op, rate in ops.jumps:
        d, s = _transition_indices(op)
        dsts.append(d)
        srcs.append(s)
        rates.append(rate)
    jump_dst = np.stack(dsts)
    jump_src = np.stack(srcs)
    jump_rate = np.asarray(rates, dtype=np.float64)
    decay = np.zeros(ops.h_free.shape[0], dtype=np.float64)
    for s, rate in zip(srcs, rates):
        decay[s] += rate
    sp_rows, sp_cols = np.nonzero(ops.sp_c)
    return {
        "h_free": np.ascontiguousarray(ops.h_free),
        "h_on": np.ascontiguousarray(ops.h_free + ops.h_cb + ops.h_m12c),
        "sp_rows": sp_rows.astype(np.int64),
        "sp_cols": sp_cols.astype(np.int64),
        "f": float(p.f),
        "omega_c": float(p.omega_c),
        "jump_dst": jump_dst,
        "jump_src": jump_src,
        "jump_rate": jump_rate,
        "decay": decay,
        "tau": float(p.tau),
    }


def _rhs_numpy(t: float, rho: np.ndarray, gen: dict, sp_dense, sm_dense, jump_ix, dmat) -> np.ndarray:
    gated = t <= gen["tau"]
    h = gen["h_on"] if gated else gen["h_free"]
    if gated and gen["f"] != 0.0:
        z = gen["f"] * np.exp(-1j * gen["omega_c"] * t)
        h = h + z * sp_dense + np.conj(z) * sm_dense
    m = h @ rho
    out = -1j * (m - m.conj().T)
    if gated:
        out -= dmat * rho
        for (dst_ix, src_ix), rate in zip(jump_ix, gen["jump_rate"]):
            out[dst_ix] += rate * rho[src_ix]
    return out


def _run_numpy(rho0: np.ndarray, gen: dict, dt: float, n_steps: int, stride: int,
               trace_tol: float):
    n = rho0.shape[0]
    n_stored = n_steps // stride + 1
    states = np.zeros((n_stored, n, n), dtype=np.complex128)
    marg_m12 = np.zeros((n_steps + 1, 4, 4), dtype=np.complex128)
    marg_c = np.zeros((n_steps + 1, 2, 2), dtype=np.complex128)
    marg_b = np.zeros((n_steps + 1, 2, 2), dtype=np.complex128)
    renorm = np.zeros(n_steps + 1)

    sp_dense = np.zeros((n, n), dtype=np.complex128)
    sp_dense[gen["sp_rows"], gen["sp_cols"]] = 1.0
    sm_dense = sp_dense.conj().T.copy()
    jump_ix = [
        (np.ix_(d, d), np.ix_(s, s))
        for d, s in zip(gen["jump_dst"], gen["jump_src"])
    ]
    dmat = 0.5 * (gen["decay"][:, None] + gen["decay"][None, :])

    def record(rho, idx):
        marg_m12[idx] = np.einsum("axbx->ab", rho.reshape(4, 4, 4, 4))
        marg_c[idx] = np.einsum("qcbqdb->cd", rho.reshape(4, 2, 2, 4, 2, 2))
        marg_b[idx] = np.einsum("aiaj->ij", rho.reshape(8, 2, 8, 2))

    rho = rho0.copy()
    states[0] = rho
    record(rho, 0)
    status, fail_step = 0, -1
    for step in range(1, n_steps + 1):
        t = (step - 1) * dt
        k1 = _rhs_numpy(t, rho, gen, sp_dense, sm_dense, jump_ix, dmat)
        k2 = _rhs_numpy(t + 0.5 * dt, rho + (0.5 * dt) * k1, gen, sp_dense, sm_dense, jump_ix, dmat)
        k3 = _rhs_numpy(t + 0.5 * dt, rho + (0.5 * dt) * k2, gen, sp_dense, sm_dense, jump_ix, dmat)
        k4 = _rhs_numpy(t + dt, rho + dt * k3, gen, sp_dense, sm_dense, jump_ix, dmat)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        rho = 0.5 * (rho + rho.conj().T)
        tr = float(np.trace(rho).real)
        drift = abs(tr - 1.0)
        renorm[step] = drift
        if not (drift <= trace_tol):
            status, fail_step = 1, step
            break
        rho /= tr
        record(rho, step)
        if step % stride == 0:
            states[step // stride] = rho
    return states, marg_m12, marg_c, marg_b, renorm, status, fail_step


def default_backend() -> str:
    if os.environ.get(FORCE_NUMPY_ENV, "").strip() not in ("", "0"):
        return "numpy"
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return "numpy"
    return "numba"


def integrate(
    p: ModelParams,
    rho0: Union[DensityMatrix, np.ndarray],
    dt: float,
    t_max: float,
    stride: int = 10,
    backend: str | None = None,
) -> Trajectory:
    """Integrate the master equation from ``rho0`` over [0, t_max].

    ``dt`` must satisfy the stability guard ``dt * omega_m2 <= 0.05``.
    Raises :class:`IntegrationError` when the trace drifts by more than
    ``1e-6`` in one step or a stored state becomes negative beyond
    ``-1e-6``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if dt * p.omega_m2 > DT_STABILITY_LIMIT * (1 + 1e-12):
        raise ValueError(
            f"dt * omega_m2 = {dt * p.omega_m2:.3g} exceeds the stability "
            f"guard {DT_STABILITY_LIMIT}; reduce dt"
        )
    if t_max <= 0:
        raise ValueError(f"t_max must be positive, got {t_max}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")

    if isinstance(rho0, np.ndarray):
        rho0 = DensityMatrix(np.asarray(rho0, dtype=np.complex128))
    rho0.validate()
    start = 0.5 * (rho0.matrix + dag(rho0.matrix))
    start = np.ascontiguousarray(start / np.trace(start).real)

    n_steps = int(round(t_max / dt))
    if n_steps < 1:
        raise ValueError("t_max shorter than one step")

    ops = build_operators(p)
    gen = _compile_generator(ops)

    chosen = backend or default_backend()
    if chosen == "numba":
        from . import _kernels

        out = _kernels.rk4_run(
            start, gen["h_free"], gen["h_on"], gen["sp_rows"], gen["sp_cols"],
            gen["f"], gen["omega_c"], gen["jump_dst"], gen["jump_src"],
            gen["jump_rate"], gen["decay"], gen["tau"],
            float(dt), n_steps, stride, TRACE_ABORT_TOL,
        )
    elif chosen == "numpy":
        out = _run_numpy(start, gen, float(dt), n_steps, stride, TRACE_ABORT_TOL)
    else:
        raise ValueError(f"unknown backend {chosen!r}; use 'numba' or 'numpy'")

    states, marg_m12, marg_c, marg_b, renorm, status, fail_step = out
    if status != 0:
        raise IntegrationError(
            f"trace drift {renorm[fail_step]:.3e} exceeded {TRACE_ABORT_TOL} "
            f"at step {fail_step} (t = {fail_step * dt:.6g})"
        )
    min_eigs = np.linalg.eigvalsh(states)[:, 0]
    worst = int(np.argmin(min_eigs))
    if min_eigs[worst] < NEGATIVITY_ABORT_TOL:
        raise IntegrationError(
            f"state eigenvalue {min_eigs[worst]:.3e} below {NEGATIVITY_ABORT_TOL} "
            f"at stored step {worst} (t = {worst * stride * dt:.6g})"
        )

    max_renorm = float(np.max(renorm))
    logger.info(
        "integrated %d steps (dt=%g, backend=%s); max per-step trace renormalization %.3e",
        n_steps, dt, chosen, max_renorm,
    )
    t_grid = np.arange(n_steps + 1) * dt
    return Trajectory(
        params=p, t=t_grid, dt=float(dt), stride=stride, states=states,
        marg_m12=marg_m12, marg_c=marg_c, marg_b=marg_b, renorm=renorm,
        backend=chosen,
    )
