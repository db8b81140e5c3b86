"""Lanczos tridiagonalization and Krylov spread complexity.

Complexity can be obtained two independent ways:

* project an explicitly evolved state onto the Krylov basis
  (:func:`krylov_project`), or
* solve the tridiagonal Schrodinger equation in the Krylov chain directly
  (:func:`propagate_tridiagonal`).

Both feed :func:`spread_complexity`, which weights |psi_n|^2 by the chain
index n.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericalError
from .kcx import atomic_open

NORM_TOL = 1e-10


@dataclass(frozen=True)
class KrylovData:
    """Lanczos coefficients and orthonormal Krylov basis (columns)."""

    a: np.ndarray
    b: np.ndarray  # b[0] == 0, b[n] couples K_{n-1} and K_n
    basis: np.ndarray
    residual: float  # norm of the unnormalized vector that ended the recursion

    @property
    def dim(self) -> int:
        return len(self.a)

    def tridiagonal(self) -> np.ndarray:
        t = np.diag(self.a).astype(float)
        off = self.b[1:]
        t[np.arange(1, self.dim), np.arange(self.dim - 1)] = off
        t[np.arange(self.dim - 1), np.arange(1, self.dim)] = off
        return t

    def orthonormality_error(self) -> float:
        q = self.basis
        return float(np.max(np.abs(q.conj().T @ q - np.eye(self.dim))))


def _matvec(h):
    h = np.asarray(getattr(h, "h", h))
    if h.ndim == 1:
        return (lambda v: h * v), h.shape[0]
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InvalidArgumentError(f"Hamiltonian must be square, got shape {h.shape}")
    return (lambda v: h @ v), h.shape[0]


def lanczos_tridiagonalize(h, psi0, tol_breakdown: float = 1e-10) -> KrylovData:
    """Run the Lanczos recursion from ``psi0`` with full reorthogonalization.

    ``h`` may be a dense Hermitian matrix, a :class:`HermitianMatrix`, or a
    1-D array holding the diagonal of a Hamiltonian that is already diagonal
    (the energy-basis case). Every new vector is orthogonalized twice against
    the whole basis built so far. The recursion stops when the next ``b``
    drops to ``tol_breakdown`` or the basis spans the full space.
    """
    if not tol_breakdown > 0:
        raise InvalidArgumentError("tol_breakdown must be positive")
    apply_h, n = _matvec(h)
    psi0 = np.asarray(psi0, dtype=np.complex128)
    if psi0.shape != (n,):
        raise InvalidArgumentError(f"psi0 has shape {psi0.shape}, expected ({n},)")
    norm = np.linalg.norm(psi0)
    if abs(norm - 1.0) > NORM_TOL:
        raise InvalidArgumentError(f"psi0 is not normalized (|psi0| = {norm!r})")

    basis = np.zeros((n, n), dtype=np.complex128)
    basis[:, 0] = psi0
    a = np.zeros(n)
    b = np.zeros(n)
    residual = 0.0
    k = n
    for j in range(n):
        kj = basis[:, j]
        w = apply_h(kj)
        a[j] = np.vdot(kj, w).real
        w = w - a[j] * kj
        if j > 0:
            w = w - b[j] * basis[:, j - 1]
        q = basis[:, : j + 1]
        for _ in range(2):
            w = w - q @ (q.conj().T @ w)
        residual = float(np.linalg.norm(w))
        if j + 1 == n:
            break
        if residual <= tol_breakdown:
            k = j + 1
            break
        b[j + 1] = residual
        basis[:, j + 1] = w / residual

    kd = KrylovData(a[:k].copy(), b[:k].copy(), basis[:, :k].copy(), residual)
    err = kd.orthonormality_error()
    if err > 1e-8:
        raise NumericalError(f"Krylov basis lost orthogonality ({err:.3e}) after reorthogonalization")
    return kd


def krylov_project(kd: KrylovData, psi_t) -> np.ndarray:
    """Krylov amplitudes <K_n|psi> of a state (1-D) or of each column (2-D)."""
    psi_t = np.asarray(psi_t, dtype=np.complex128)
    if psi_t.shape[0] != kd.basis.shape[0]:
        raise InvalidArgumentError(
            f"state dimension {psi_t.shape[0]} does not match Krylov basis dimension {kd.basis.shape[0]}"
        )
    return kd.basis.conj().T @ psi_t


def propagate_tridiagonal(kd: KrylovData, times) -> np.ndarray:
    """Exact solution of the Krylov-chain Schrodinger equation.

    Returns a (K, len(times)) array whose column j is psi^K(times[j]) for the
    initial condition psi^K(0) = e_0.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise InvalidArgumentError("times must be a non-empty 1-D sequence")
    if times[0] != 0 or np.any(np.diff(times) < 0):
        raise InvalidArgumentError("times must start at 0 and be sorted ascending")
    try:
        eps, v = np.linalg.eigh(kd.tridiagonal())
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"tridiagonal eigensolver failed: {exc}") from exc
    phases = np.exp(-1j * np.outer(eps, times))
    return v @ (phases * v[0, :, None])


@dataclass(frozen=True)
class ComplexityCurve:
    times: np.ndarray
    values: np.ndarray
    normalization: int
    sample_id: int = -1
    beta: float = 0.0

    @property
    def t_over_n(self) -> np.ndarray:
        return self.times / self.normalization

    @property
    def over_n(self) -> np.ndarray:
        return self.values / self.normalization


def spread_complexity(psi_k, times, normalization=None, sample_id=-1, beta=0.0) -> ComplexityCurve:
    """C(t) = sum_n n |psi^K_n(t)|^2 for each column of ``psi_k``."""
    psi_k = np.asarray(psi_k)
    if psi_k.ndim == 1:
        psi_k = psi_k[:, None]
    times = np.asarray(times, dtype=float)
    if psi_k.shape[1] != len(times):
        raise InvalidArgumentError(f"{psi_k.shape[1]} state columns for {len(times)} times")
    prob = np.abs(psi_k) ** 2
    norms = prob.sum(axis=0)
    bad = np.flatnonzero(np.abs(norms - 1.0) > 1e-8)
    if bad.size:
        i = int(bad[0])
        raise NumericalError(f"state at time index {i} (t={times[i]}) has norm^2 {norms[i]!r}")
    values = np.arange(psi_k.shape[0]) @ prob
    n = psi_k.shape[0] if normalization is None else normalization
    return ComplexityCurve(times, values, int(n), sample_id, beta)


def ensemble_mean(curves) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(t/N, mean C/N, std C/N) across curves sharing one grid."""
    stack = np.stack([c.over_n for c in curves])
    return curves[0].t_over_n, stack.mean(axis=0), stack.std(axis=0)


def write_curves_csv(curves, path) -> None:
    with atomic_open(path, newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "t_over_N", "C", "C_over_N", "sample_id", "beta"])
        for c in curves:
            for t, tn, v, vn in zip(c.times, c.t_over_n, c.values, c.over_n):
                w.writerow([f"{t:g}", repr(float(tn)), repr(float(v)), repr(float(vn)), c.sample_id, c.beta])


def write_mean_curve_csv(curves, path) -> None:
    t, mean, std = ensemble_mean(curves)
    with atomic_open(path, newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_over_N", "mean_C_over_N", "std_C_over_N"])
        for row in zip(t, mean, std):
            w.writerow([repr(float(x)) for x in row])
