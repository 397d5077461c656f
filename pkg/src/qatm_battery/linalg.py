"""Dense complex linear algebra for small multi-qubit systems.

Operators and states are plain ``complex128`` numpy arrays; this module has
no knowledge of the physics built on top of it.  Subsystem bookkeeping is
done through :class:`SubsystemLayout`, which records the tensor factors of
the composite Hilbert space (first label = slowest Kronecker index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

#: tolerance for "Hermitian within floating-point slack" preconditions
HERMITICITY_ATOL = 1e-9

_EINSUM_LETTERS = "abcdefghijklmnopqrstuvwxy"


@dataclass(frozen=True)
class SubsystemLayout:
    """Ordered tensor-factor structure of a composite operator."""

    labels: tuple[str, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.dims):
            raise ValueError("labels and dims must have equal length")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"subsystem labels must be unique, got {self.labels}")
        if not self.labels:
            raise ValueError("layout needs at least one subsystem")
        if any(d < 1 for d in self.dims):
            raise ValueError(f"subsystem dims must be >= 1, got {self.dims}")

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def axis(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValueError(
                f"unknown subsystem {label!r}; expected one of {self.labels}"
            ) from None

    def local_dim(self, label: str) -> int:
        return self.dims[self.axis(label)]

    def reduced(self, keep: Iterable[str]) -> "SubsystemLayout":
        """Layout left after tracing out everything not in ``keep``."""
        keep_set = _as_label_set(self, keep)
        labels = tuple(lab for lab in self.labels if lab in keep_set)
        dims = tuple(d for lab, d in zip(self.labels, self.dims) if lab in keep_set)
        return SubsystemLayout(labels, dims)


#: machine qubits M1, M2, charger C, battery B -- the layout used everywhere
STANDARD_LAYOUT = SubsystemLayout(("M1", "M2", "C", "B"), (2, 2, 2, 2))


class HermitianEig(NamedTuple):
    eigenvalues: np.ndarray  # real, ascending
    eigenvectors: np.ndarray  # unitary, columns match eigenvalues


def dag(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose (acting on the last two axes)."""
    return np.conj(np.swapaxes(a, -1, -2))


def hermiticity_defect(a: np.ndarray) -> float:
    """Max-entry distance of ``a`` from its Hermitian part."""
    return float(np.max(np.abs(a - dag(a)), initial=0.0))


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; the first factor carries the slowest index."""
    return np.kron(a, b)


def kron_all(ops: Iterable[np.ndarray]) -> np.ndarray:
    out = np.array([[1.0 + 0.0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


def embed(op: np.ndarray, slot: str, layout: SubsystemLayout = STANDARD_LAYOUT) -> np.ndarray:
    """Lift a local operator into the full space: I x ... x op x ... x I."""
    axis = layout.axis(slot)
    d = layout.dims[axis]
    op = np.asarray(op, dtype=np.complex128)
    if op.shape != (d, d):
        raise ValueError(f"operator for slot {slot!r} must be {d}x{d}, got {op.shape}")
    factors = [
        op if i == axis else np.eye(dim, dtype=np.complex128)
        for i, dim in enumerate(layout.dims)
    ]
    return kron_all(factors)


def _as_label_set(layout: SubsystemLayout, keep) -> frozenset:
    labels = (keep,) if isinstance(keep, str) else tuple(keep)
    if not labels:
        raise ValueError("keep must name at least one subsystem")
    unknown = set(labels) - set(layout.labels)
    if unknown:
        raise ValueError(f"unknown subsystem labels {sorted(unknown)}; layout has {layout.labels}")
    return frozenset(labels)


def partial_trace(
    rho: np.ndarray, keep, layout: SubsystemLayout = STANDARD_LAYOUT
) -> np.ndarray:
    """Trace out every subsystem not named in ``keep``.

    Accepts stacked input of shape (..., D, D) and reduces each matrix in the
    stack; kept subsystems retain their original order.  Use
    ``layout.reduced(keep)`` for the layout of the result.
    """
    keep_set = _as_label_set(layout, keep)
    rho = np.asarray(rho)
    n = len(layout.dims)
    batch = rho.shape[:-2]
    if rho.shape[-2:] != (layout.dim, layout.dim):
        raise ValueError(f"matrix dim {rho.shape[-2:]} does not match layout dim {layout.dim}")
    tensor = rho.reshape(*batch, *layout.dims, *layout.dims)
    bra = list(_EINSUM_LETTERS[:n])
    ket = list(_EINSUM_LETTERS[n : 2 * n])
    for i, lab in enumerate(layout.labels):
        if lab not in keep_set:
            ket[i] = bra[i]  # repeated index -> contraction
    out = [bra[i] for i, lab in enumerate(layout.labels) if lab in keep_set]
    out += [ket[i] for i, lab in enumerate(layout.labels) if lab in keep_set]
    spec = "..." + "".join(bra + ket) + "->..." + "".join(out)
    reduced = np.einsum(spec, tensor)
    d = layout.reduced(keep_set).dim
    return np.ascontiguousarray(reduced.reshape(*batch, d, d))


def _symmetrized(a: np.ndarray, what: str) -> np.ndarray:
    defect = hermiticity_defect(a)
    if defect > HERMITICITY_ATOL:
        raise ValueError(
            f"{what} expects a Hermitian matrix; max |a - a^dag| = {defect:.3e}"
        )
    return 0.5 * (a + dag(a))


def hermitian_eig(a: np.ndarray) -> HermitianEig:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Raises ``ValueError`` if the input is not Hermitian within
    ``HERMITICITY_ATOL``; solver non-convergence propagates as
    ``numpy.linalg.LinAlgError``.
    """
    sym = _symmetrized(np.asarray(a, dtype=np.complex128), "hermitian_eig")
    w, v = np.linalg.eigh(sym)
    return HermitianEig(w, v)


def trace_norm(a: np.ndarray) -> float:
    """Trace norm of a Hermitian matrix: sum of |eigenvalues|."""
    sym = _symmetrized(np.asarray(a, dtype=np.complex128), "trace_norm")
    return float(np.sum(np.abs(np.linalg.eigvalsh(sym))))


def trace_norm_stack(mats: np.ndarray) -> np.ndarray:
    """Trace norms of a stack (..., d, d) of Hermitian matrices."""
    w = np.linalg.eigvalsh(mats)
    return np.sum(np.abs(w), axis=-1)
