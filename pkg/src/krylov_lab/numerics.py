"""Dense complex linear algebra and seeded random streams.

Random numbers come from numpy's Philox4x32-10 counter-based generator. A
64-bit seed is expanded into the Philox key with splitmix64, so the same seed
gives the same stream on every platform numpy supports. Independent
sub-streams (one per ensemble sample, per worker, ...) are derived with
:meth:`Rng.spawn`, which mixes ``splitmix64(seed) ^ index`` through
splitmix64 once more.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericalError

_MASK64 = (1 << 64) - 1

HERMITIAN_TOL = 1e-12
DEGENERACY_TOL = 1e-12


def splitmix64(x: int) -> int:
    """One round of the splitmix64 finalizer (Steele, Lea & Flood 2014)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class Rng:
    """Seeded random stream backed by Philox4x32-10.

    Not thread-safe; give each worker its own stream via :meth:`spawn`.
    """

    def __init__(self, seed: int):
        if not 0 <= int(seed) <= _MASK64:
            raise InvalidArgumentError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        key = [splitmix64(self.seed), splitmix64(self.seed ^ 0xD1B54A32D192ED03)]
        self._gen = np.random.Generator(np.random.Philox(key=np.array(key, dtype=np.uint64)))

    def spawn(self, index: int) -> "Rng":
        return Rng(splitmix64(splitmix64(self.seed) ^ (int(index) & _MASK64)))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def normal(self, mean=0.0, stddev=1.0, size=None):
        return self._gen.normal(mean, stddev, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


def gaussian(rng: Rng, mean: float = 0.0, stddev: float = 1.0) -> float:
    """Draw a single normal variate."""
    if not stddev > 0:
        raise InvalidArgumentError(f"stddev must be positive, got {stddev}")
    return float(rng.normal(mean, stddev))


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues and column eigenvectors of a Hermitian matrix."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    @property
    def degenerate(self) -> bool:
        return bool(np.any(np.diff(self.eigenvalues) <= DEGENERACY_TOL))

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


def hermiticity_error(h) -> float:
    h = np.asarray(h)
    return float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    # make the largest-magnitude component of every column real and positive
    idx = np.argmax(np.abs(vectors), axis=0)
    pivots = vectors[idx, np.arange(vectors.shape[1])]
    return vectors * (np.abs(pivots) / pivots)


def hermitian_eigh(h) -> EigenDecomposition:
    """Diagonalize a Hermitian matrix with a deterministic eigenvector phase.

    LAPACK ``zheevd`` (through numpy) does the work; the residual and
    orthonormality bounds are checked afterwards.
    """
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise InvalidArgumentError("matrix has non-finite entries")
    err = hermiticity_error(h)
    if err > HERMITIAN_TOL:
        raise InvalidArgumentError(f"matrix is not Hermitian (max |H - H^+| = {err:.3e})")
    try:
        evals, evecs = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver did not converge: {exc}") from exc
    evecs = _fix_phases(evecs)

    n = h.shape[0]
    ortho = np.max(np.abs(evecs.conj().T @ evecs - np.eye(n)))
    if ortho > 1e-10:
        raise NumericalError(f"eigenvectors not orthonormal (residual {ortho:.3e})")
    evals.setflags(write=False)
    evecs.setflags(write=False)
    eig = EigenDecomposition(evals, evecs)
    scale = max(float(np.max(np.abs(h))), np.finfo(float).tiny)
    resid = np.max(np.abs(h - eig.reconstruct()))
    if resid > 1e-8 * scale:
        raise NumericalError(f"eigendecomposition residual {resid:.3e} exceeds tolerance")
    return eig


def haar_unitary(n: int, rng: Rng) -> np.ndarray:
    """Haar-random unitary from the QR factorization of a complex Ginibre matrix."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def unitarity_error(u) -> float:
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))))
