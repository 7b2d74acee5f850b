"""Shared helpers for building random test systems."""
import numpy as np
import pytest

from koopmetrics.koopman import (
    KoopmanModel,
    ObservableMatrix,
    decompose,
    eigenfunction_trajectories,
)


def random_unitary(rng, n):
    """Haar-ish unitary via QR with phase normalization."""
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_well_conditioned(rng, n, smin=0.5, smax=2.0):
    """Random invertible matrix with singular values in [smin, smax]."""
    u = random_unitary(rng, n)
    v = random_unitary(rng, n)
    s = rng.uniform(smin, smax, size=n)
    return (u * s) @ v.conj().T


def random_diagonalizable(rng, n, radius=1.0):
    """K = S D S^-1 with well separated eigenvalues and tame S."""
    mods = rng.uniform(0.3, radius, size=n)
    phases = rng.uniform(0, 2 * np.pi, size=n)
    d = mods * np.exp(1j * phases)
    s = random_well_conditioned(rng, n)
    return s @ np.diag(d) @ np.linalg.inv(s)


def raw_observables(psi, dt=0.1):
    """Wrap a bare complex matrix as an observable matrix (no constant row)."""
    psi = np.asarray(psi, dtype=complex)
    return ObservableMatrix(
        psi=psi,
        names=tuple(f"g{i}" for i in range(psi.shape[0])),
        has_constant=False,
        n_primary=psi.shape[0],
        aux=None,
        train_snapshots=None,
        dt=dt,
    )


def lifted_system(k, psi, dt=0.1):
    """(model, trajectory) for an operator K and observable samples Psi."""
    model = decompose(k, dt)
    phi = eigenfunction_trajectories(model, raw_observables(psi, dt))
    return model, phi


def random_system(rng, n, n_steps, radius=1.0):
    """Random diagonalizable operator plus a random observable trajectory."""
    k = random_diagonalizable(rng, n, radius)
    psi = rng.standard_normal((n, n_steps)) + 1j * rng.standard_normal((n, n_steps))
    return lifted_system(k, psi)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
