"""Gaussian unitary ensemble sampling and spectral checks."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kcx
from .errors import FormatError, InvalidArgumentError
from .numerics import EigenDecomposition, Rng, hermitian_eigh


@dataclass
class HermitianMatrix:
    h: np.ndarray
    eig_precomputed: EigenDecomposition | None = field(default=None, repr=False)

    @cached_property
    def eig(self) -> EigenDecomposition:
        if self.eig_precomputed is not None:
            return self.eig_precomputed
        return hermitian_eigh(self.h)

    @property
    def eig_mode(self) -> str:
        return "eager" if self.eig_precomputed is not None else "lazy"

    @property
    def n(self) -> int:
        return self.h.shape[0]


def sample_gue(n: int, rng: Rng) -> HermitianMatrix:
    """H = (M + M^+)/2 with Re M_ij, Im M_ij i.i.d. Normal(0, 1/n).

    With this scaling the spectrum fills the semicircle on [-2, 2].
    """
    if n < 2:
        raise InvalidArgumentError(f"GUE dimension must be >= 2, got {n}")
    sigma = 1.0 / np.sqrt(n)
    m = rng.normal(0.0, sigma, (n, n)) + 1j * rng.normal(0.0, sigma, (n, n))
    h = 0.5 * (m + m.conj().T)
    h.setflags(write=False)
    return HermitianMatrix(h)


class GueEnsemble:
    """M GUE samples of dimension n; sample s is a pure function of (seed, s)."""

    def __init__(self, n: int, m: int, seed: int, threads: int = 1):
        if n < 2:
            raise InvalidArgumentError(f"GUE dimension must be >= 2, got {n}")
        if m < 1:
            raise InvalidArgumentError(f"sample count must be >= 1, got {m}")
        self.n = n
        self.m = m
        self.seed = seed
        self.threads = max(1, int(threads))
        self._root = Rng(seed)
        self._cache: dict[int, HermitianMatrix] = {}

    @classmethod
    def from_matrices(cls, matrices, seed: int = 0) -> "GueEnsemble":
        """Wrap already-built matrices (e.g. read back from disk)."""
        matrices = [np.asarray(h, dtype=np.complex128) for h in matrices]
        if not matrices:
            raise InvalidArgumentError("ensemble needs at least one matrix")
        ens = cls.__new__(cls)
        ens.n = matrices[0].shape[0]
        ens.m = len(matrices)
        ens.seed = seed
        ens.threads = 1
        ens._root = Rng(seed)
        ens._cache = {s: HermitianMatrix(h) for s, h in enumerate(matrices)}
        return ens

    def sample_rng(self, s: int) -> Rng:
        return self._root.spawn(s)

    def sample(self, s: int) -> HermitianMatrix:
        if not 0 <= s < self.m:
            raise IndexError(f"sample index {s} out of range [0, {self.m})")
        if s not in self._cache:
            self._cache[s] = sample_gue(self.n, self.sample_rng(s))
        return self._cache[s]

    def __len__(self) -> int:
        return self.m

    def __getitem__(self, s: int) -> HermitianMatrix:
        return self.sample(s)

    @property
    def samples(self) -> list[HermitianMatrix]:
        missing = [s for s in range(self.m) if s not in self._cache]
        if missing:
            def build(s):
                hm = sample_gue(self.n, self.sample_rng(s))
                _ = hm.eig
                return hm

            if self.threads > 1:
                with ThreadPoolExecutor(self.threads) as pool:
                    built = list(pool.map(build, missing))
            else:
                built = [build(s) for s in missing]
            self._cache.update(zip(missing, built))
        return [self._cache[s] for s in range(self.m)]

    def eigenvalues(self) -> np.ndarray:
        """All eigenvalues, shape (m, n)."""
        return np.stack([hm.eig.eigenvalues for hm in self.samples])


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    density: np.ndarray
    count: int

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def integral(self) -> float:
        return float(np.sum(self.density * self.widths))


def spectral_density(ensemble, bins: int = 40, value_range=None) -> Histogram:
    """Normalized eigenvalue histogram pooled over all samples.

    ``ensemble`` is a :class:`GueEnsemble` or any sequence of Hermitian
    matrices / HermitianMatrix objects. Eigenvalues outside ``value_range``
    are dropped before normalization, so the histogram always integrates to 1.
    """
    if bins < 8:
        raise InvalidArgumentError(f"need at least 8 bins, got {bins}")
    if isinstance(ensemble, GueEnsemble):
        evals = ensemble.eigenvalues().ravel()
    else:
        items = list(ensemble)
        if not items:
            raise InvalidArgumentError("ensemble is empty")
        evals = np.concatenate([
            (it.eig.eigenvalues if isinstance(it, HermitianMatrix) else hermitian_eigh(it).eigenvalues)
            for it in items
        ])
    if value_range is None:
        lo, hi = float(evals.min()), float(evals.max())
        if hi - lo < 1e-12:
            lo, hi = lo - 0.5, hi + 0.5
        value_range = (lo, hi)
    counts, edges = np.histogram(evals, bins=bins, range=value_range)
    total = counts.sum()
    if total == 0:
        raise InvalidArgumentError("no eigenvalues fall inside the histogram range")
    density = counts / (total * np.diff(edges))
    return Histogram(edges, density, int(total))


def semicircle_density(e) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    return np.sqrt(np.clip(4.0 - e * e, 0.0, None)) / (2.0 * np.pi)


def semicircle_cdf(e) -> np.ndarray:
    x = np.clip(np.asarray(e, dtype=float), -2.0, 2.0)
    return 0.5 + (x * np.sqrt(4.0 - x * x) / 4.0 + np.arcsin(x / 2.0)) / np.pi


def semicircle_deviation(hist: Histogram) -> float:
    """Max |histogram - semicircle| with the semicircle averaged over each bin."""
    expected = np.diff(semicircle_cdf(hist.edges)) / hist.widths
    return float(np.max(np.abs(hist.density - expected)))


def write_ensemble_kcx(ensemble: GueEnsemble, path) -> None:
    mats = np.stack([hm.h for hm in ensemble.samples]).astype("<c16")
    meta = {"n": ensemble.n, "m": ensemble.m, "seed": ensemble.seed, "dtype": "f64"}
    kcx.write(path, {"kind": "ensemble"}, [kcx.Section("ENSEMBLE", meta, mats.tobytes())])


def read_ensemble_kcx(path) -> GueEnsemble:
    header, sections = kcx.read(path)
    sec = next((s for s in sections if s.tag == "ENSEMBLE"), None)
    if header.get("kind") != "ensemble" or sec is None:
        raise FormatError("container has no ENSEMBLE section")
    n, m = int(sec.meta["n"]), int(sec.meta["m"])
    if sec.meta.get("dtype") != "f64" or len(sec.payload) != m * n * n * 16:
        raise FormatError("ENSEMBLE payload does not match its header")
    mats = np.frombuffer(sec.payload, dtype="<c16").reshape(m, n, n)
    return GueEnsemble.from_matrices(mats.astype(np.complex128), seed=int(sec.meta["seed"]))
