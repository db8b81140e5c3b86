"""Thermofield-double trajectories and their representations in four bases.

The TFD state never leaves the span of the diagonal pairs |n, n>, so every
state here is an N-vector of amplitudes over that span. Time evolution uses
the single-copy phases exp(-i E_n t).
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgumentError, NumericalError
from .kcx import atomic_open
from .krylov import KrylovData, krylov_project
from .numerics import EigenDecomposition, unitarity_error

UNITARY_TOL = 1e-8


class Basis(str, enum.Enum):
    ENERGY = "energy"
    KRYLOV = "krylov"
    ORIGINAL = "original"
    PSEUDO_RANDOM = "pseudorandom"

    @classmethod
    def parse(cls, name) -> "Basis":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "").replace("_", "")
        for b in cls:
            if b.value == key:
                return b
        raise InvalidArgumentError(f"unknown basis {name!r}; expected one of {[b.value for b in cls]}")


def time_grid(n: int) -> np.ndarray:
    """Integer times 0, 1, ..., 3n - 1."""
    return np.arange(3 * n, dtype=float)


@dataclass(frozen=True)
class StateTrajectory:
    basis: Basis
    beta: float
    sample_id: int
    psi0: np.ndarray
    psi_t: np.ndarray  # (dim, len(times)), one column per time
    times: np.ndarray

    @property
    def n(self) -> int:
        return self.psi_t.shape[0]

    def norm_drift(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.psi_t, axis=0) - 1.0)))


def _energies(eig) -> np.ndarray:
    if isinstance(eig, EigenDecomposition):
        return eig.eigenvalues
    return np.asarray(eig, dtype=float)


def tfd_state(eig, beta: float) -> np.ndarray:
    """TFD amplitudes exp(-beta E_n / 2) / sqrt(Z) in the energy basis."""
    if not (np.isfinite(beta) and beta >= 0):
        raise InvalidArgumentError(f"beta must be finite and >= 0, got {beta}")
    e = _energies(eig)
    log_amp = -0.5 * beta * e
    amp = np.exp(log_amp - log_amp.max())
    amp /= np.linalg.norm(amp)
    return amp.astype(np.complex128)


def evolve_eigenbasis(psi0, eig, times) -> np.ndarray:
    e = _energies(eig)
    psi0 = np.asarray(psi0, dtype=np.complex128)
    return np.exp(-1j * np.outer(e, np.asarray(times, dtype=float))) * psi0[:, None]


def energy_trajectory(eig, beta: float, sample_id: int = 0, times=None) -> StateTrajectory:
    e = _energies(eig)
    if times is None:
        times = time_grid(len(e))
    psi0 = tfd_state(e, beta)
    return StateTrajectory(Basis.ENERGY, float(beta), sample_id, psi0,
                           evolve_eigenbasis(psi0, e, times), np.asarray(times, dtype=float))


def diagonalizing_unitary(eig: EigenDecomposition) -> np.ndarray:
    """U with U H U^+ = diag(E), i.e. the adjoint of the eigenvector matrix.

    Applying U^+ to energy-basis amplitudes gives the amplitudes in the
    basis H was originally written in.
    """
    return eig.eigenvectors.conj().T


def _rotate(traj: StateTrajectory, u, basis: Basis) -> StateTrajectory:
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (traj.n, traj.n):
        raise InvalidArgumentError(f"unitary has shape {u.shape}, expected {(traj.n, traj.n)}")
    err = unitarity_error(u)
    if err > UNITARY_TOL:
        raise InvalidArgumentError(f"transformation is not unitary (|U^+U - I| = {err:.3e})")
    ud = u.conj().T
    return replace(traj, basis=basis, psi0=ud @ traj.psi0, psi_t=ud @ traj.psi_t)


def to_original_basis(traj_energy: StateTrajectory, u_s) -> StateTrajectory:
    """Amplitudes U_s^+ psi with the sample's own diagonalizing unitary."""
    return _rotate(traj_energy, u_s, Basis.ORIGINAL)


def to_pseudorandom_basis(traj_energy: StateTrajectory, u_0) -> StateTrajectory:
    """Amplitudes U_0^+ psi with one unitary shared by every sample."""
    return _rotate(traj_energy, u_0, Basis.PSEUDO_RANDOM)


def to_krylov_basis(traj_energy: StateTrajectory, kd: KrylovData) -> StateTrajectory:
    psi_k = krylov_project(kd, traj_energy.psi_t)
    drift = np.max(np.abs(np.linalg.norm(psi_k, axis=0) - 1.0))
    if drift > 1e-10:
        raise NumericalError(f"trajectory leaves the Krylov span (norm drift {drift:.3e})")
    psi0 = np.zeros(kd.dim, dtype=np.complex128)
    psi0[0] = 1.0
    return replace(traj_energy, basis=Basis.KRYLOV, psi0=psi0, psi_t=psi_k)


def amplitude_grid(traj: StateTrajectory) -> np.ndarray:
    """|Re psi_n(t) + Im psi_n(t)| with rows n and columns t."""
    return np.abs(traj.psi_t.real + traj.psi_t.imag)


def write_amplitude_csv(grid, path) -> None:
    grid = np.asarray(grid)
    with atomic_open(path, newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "t", "value"])
        for n in range(grid.shape[0]):
            for t in range(grid.shape[1]):
                w.writerow([n, t, repr(float(grid[n, t]))])
