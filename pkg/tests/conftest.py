import numpy as np
import pytest


def rand_hermitian(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (a + a.conj().T)


def rand_density(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def naive_partial_trace(rho, dims, keep_axes):
    """Index-summation partial trace by explicit loops, used as an oracle."""
    n = len(dims)
    traced = [ax for ax in range(n) if ax not in keep_axes]
    kept_dims = [dims[ax] for ax in keep_axes]
    d_out = int(np.prod(kept_dims))
    out = np.zeros((d_out, d_out), dtype=complex)

    def flat(multi):
        idx = 0
        for ax in range(n):
            idx = idx * dims[ax] + multi[ax]
        return idx

    kept_ranges = [range(dims[ax]) for ax in keep_axes]
    traced_ranges = [range(dims[ax]) for ax in traced]
    import itertools

    for ki, kmulti in enumerate(itertools.product(*kept_ranges)):
        for kj, kmulti2 in enumerate(itertools.product(*kept_ranges)):
            acc = 0.0 + 0.0j
            for tmulti in itertools.product(*traced_ranges):
                row = [0] * n
                col = [0] * n
                for ax, v in zip(keep_axes, kmulti):
                    row[ax] = v
                for ax, v in zip(keep_axes, kmulti2):
                    col[ax] = v
                for ax, v in zip(traced, tmulti):
                    row[ax] = v
                    col[ax] = v
                acc += rho[flat(row), flat(col)]
            out[ki, kj] = acc
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
