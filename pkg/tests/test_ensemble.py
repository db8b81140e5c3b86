import numpy as np
import pytest

from krylov_lab.ensemble import (GueEnsemble, HermitianMatrix, read_ensemble_kcx, sample_gue,
                                 semicircle_cdf, semicircle_deviation, spectral_density,
                                 write_ensemble_kcx)
from krylov_lab.errors import FormatError, InvalidArgumentError
from krylov_lab.numerics import Rng


@pytest.fixture(scope="module")
def ens64():
    return GueEnsemble(64, 200, seed=2024)


def test_small_sample_is_hermitian():
    hm = sample_gue(2, Rng(3))
    assert np.array_equal(hm.h, hm.h.conj().T)
    assert np.all(np.diag(hm.h).imag == 0)


def test_rejects_small_n():
    with pytest.raises(InvalidArgumentError):
        sample_gue(1, Rng(0))


def test_entry_variances(ens64):
    hs = np.stack([hm.h for hm in ens64.samples])
    n = 64
    diag = np.einsum("sii->si", hs).real
    off = hs[:, ~np.eye(n, dtype=bool)]
    # Var(H_ii) = 1/n, Var(Re H_ij) = 1/(2n) for Var(u) = Var(v) = 1/n
    assert abs(diag.var() * n - 1.0) < 0.15
    assert abs(off.real.var() * 2 * n - 1.0) < 0.15
    assert abs(off.imag.var() * 2 * n - 1.0) < 0.15


def test_mean_eigenvalue(ens64):
    assert abs(ens64.eigenvalues().mean()) < 0.02


def test_eigenvalue_support(ens64):
    ev = ens64.eigenvalues()
    assert ev.min() >= -2.5 and ev.max() <= 2.5


def test_exact_hermiticity(ens64):
    for s in (0, 17, 199):
        h = ens64[s].h
        assert np.max(np.abs(h - h.conj().T)) == 0


def test_regeneration_is_byte_identical(ens64):
    again = GueEnsemble(64, 200, seed=2024)
    for s in (0, 5, 199):
        assert again.sample(s).h.tobytes() == ens64.sample(s).h.tobytes()


def test_sample_independent_of_generation_order():
    a = GueEnsemble(8, 10, seed=9)
    b = GueEnsemble(8, 10, seed=9, threads=4)
    late = a.sample(7).h.copy()
    assert np.array_equal(b.samples[7].h, late)


def test_semicircle_fit(ens64):
    hist = spectral_density(ens64, bins=40, value_range=(-2.2, 2.2))
    assert abs(hist.integral() - 1.0) < 1e-12
    assert semicircle_deviation(hist) <= 0.03


def test_delta_histogram():
    hist = spectral_density([HermitianMatrix(np.eye(5))], bins=8)
    assert abs(hist.integral() - 1.0) < 1e-12
    peak = np.argmax(hist.density)
    assert hist.edges[peak] <= 1.0 < hist.edges[peak + 1]
    assert np.count_nonzero(hist.density) == 1


def test_histogram_validation():
    with pytest.raises(InvalidArgumentError):
        spectral_density([], bins=10)
    with pytest.raises(InvalidArgumentError):
        spectral_density([np.eye(2)], bins=4)


def test_deviation_shrinks_with_sample_count():
    def rms(m):
        hist = spectral_density(GueEnsemble(64, m, seed=3), 40, (-2.2, 2.2))
        expected = np.diff(semicircle_cdf(hist.edges)) / hist.widths
        return np.sqrt(np.mean((hist.density - expected) ** 2))

    devs = [rms(m) for m in (25, 50, 100, 200, 400)]
    assert all(b < a for a, b in zip(devs, devs[1:]))
    # 16x the samples: 1/sqrt(M) scaling predicts a factor 1/4
    assert 0.125 < devs[-1] / devs[0] < 0.45


def test_kcx_round_trip(tmp_path):
    ens = GueEnsemble(6, 4, seed=12)
    path = tmp_path / "ens.kcx"
    write_ensemble_kcx(ens, path)
    back = read_ensemble_kcx(path)
    assert back.n == 6 and back.m == 4 and back.seed == 12
    for s in range(4):
        assert back[s].h.tobytes() == ens[s].h.tobytes()


def test_kcx_rejects_dataset_file(tmp_path):
    path = tmp_path / "bad.kcx"
    path.write_bytes(b"KCX0" + bytes(20))
    with pytest.raises(FormatError):
        read_ensemble_kcx(path)
