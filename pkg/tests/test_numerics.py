import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from krylov_lab.errors import InvalidArgumentError
from krylov_lab.numerics import Rng, gaussian, haar_unitary, hermitian_eigh, unitarity_error
from oracles import charpoly_eigenvalues


def random_hermitian(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2


def test_gaussian_moments():
    rng = Rng(1)
    draws = np.array([gaussian(rng, 0.0, 1.0) for _ in range(10**6)])
    assert abs(draws.mean()) < 0.005
    assert abs(draws.var() - 1.0) < 0.01


def test_gaussian_scaling():
    rng1, rng3 = Rng(7), Rng(7)
    x1 = [gaussian(rng1, 0.0, 1.0) for _ in range(100)]
    x3 = [gaussian(rng3, 0.0, 3.0) / 3.0 for _ in range(100)]
    np.testing.assert_allclose(x1, x3, rtol=1e-14)


def test_gaussian_determinism():
    r1, r2 = Rng(42), Rng(42)
    s1 = np.array([gaussian(r1) for _ in range(1000)])
    s2 = np.array([gaussian(r2) for _ in range(1000)])
    assert s1.tobytes() == s2.tobytes()


@pytest.mark.parametrize("sd", [0.0, -1.0])
def test_gaussian_rejects_bad_stddev(sd):
    with pytest.raises(InvalidArgumentError):
        gaussian(Rng(0), 0.0, sd)


def test_spawned_streams_differ_and_repeat():
    root = Rng(5)
    a = root.spawn(0).normal(size=8)
    b = root.spawn(1).normal(size=8)
    assert not np.allclose(a, b)
    assert Rng(5).spawn(0).normal(size=8).tobytes() == a.tobytes()


def test_eigh_diagonal():
    eig = hermitian_eigh(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_allclose(eig.eigenvalues, [1, 2, 3])
    perm = np.abs(eig.eigenvectors)
    np.testing.assert_allclose(perm, np.eye(3)[:, [1, 2, 0]], atol=1e-15)


def test_eigh_pauli_x():
    eig = hermitian_eigh([[0, 1], [1, 0]])
    np.testing.assert_allclose(eig.eigenvalues, [-1, 1], atol=1e-14)
    s = 1 / np.sqrt(2)
    # phase convention: largest component real positive (first on a tie)
    np.testing.assert_allclose(eig.eigenvectors[:, 0], [s, -s], atol=1e-14)
    np.testing.assert_allclose(eig.eigenvectors[:, 1], [s, s], atol=1e-14)


def test_eigh_reconstruction_8x8():
    h = random_hermitian(8, 3)
    eig = hermitian_eigh(h)
    assert np.max(np.abs(h - eig.reconstruct())) <= 1e-10
    assert unitarity_error(eig.eigenvectors) <= 1e-10
    assert np.all(np.diff(eig.eigenvalues) > 0)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("seed", range(5))
def test_eigh_matches_charpoly(n, seed):
    h = random_hermitian(n, 100 * n + seed)
    np.testing.assert_allclose(hermitian_eigh(h).eigenvalues, charpoly_eigenvalues(h), atol=1e-8)


def test_eigh_phase_convention_and_determinism():
    h = random_hermitian(16, 9)
    e1, e2 = hermitian_eigh(h), hermitian_eigh(h.copy())
    assert e1.eigenvalues.tobytes() == e2.eigenvalues.tobytes()
    assert e1.eigenvectors.tobytes() == e2.eigenvectors.tobytes()
    v = e1.eigenvectors
    piv = v[np.argmax(np.abs(v), axis=0), np.arange(16)]
    assert np.all(np.abs(piv.imag) < 1e-15) and np.all(piv.real > 0)


def test_eigh_does_not_mutate_input():
    h = random_hermitian(6, 1)
    before = h.copy()
    hermitian_eigh(h)
    assert np.array_equal(h, before)


def test_eigh_rejects_non_hermitian():
    with pytest.raises(InvalidArgumentError):
        hermitian_eigh([[0, 1], [0, 0]])
    with pytest.raises(InvalidArgumentError):
        hermitian_eigh(np.zeros((2, 3)))


def test_degenerate_flag():
    assert hermitian_eigh(np.eye(3)).degenerate
    assert not hermitian_eigh(np.diag([1.0, 2.0])).degenerate


def test_haar_n1():
    u = haar_unitary(1, Rng(3))
    assert u.shape == (1, 1)
    assert abs(abs(u[0, 0]) - 1) < 1e-14


def test_haar_unitarity():
    u = haar_unitary(16, Rng(4))
    np.testing.assert_allclose(np.linalg.norm(u, axis=0), 1, atol=1e-12)
    assert unitarity_error(u) <= 1e-10


def test_haar_second_moment():
    rng = Rng(11)
    acc = np.zeros((16, 16))
    for _ in range(10**4):
        acc += np.abs(haar_unitary(16, rng)) ** 2
    acc /= 10**4
    assert np.max(np.abs(acc - 1 / 16)) < 0.002


def test_haar_rejects_n0():
    with pytest.raises(InvalidArgumentError):
        haar_unitary(0, Rng(0))


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=12), st.integers(min_value=0, max_value=2**32))
def test_eigh_invariants_property(n, seed):
    h = random_hermitian(n, seed)
    eig = hermitian_eigh(h)
    assert unitarity_error(eig.eigenvectors) <= 1e-10
    assert np.max(np.abs(h - eig.reconstruct())) <= 1e-8 * max(np.max(np.abs(h)), 1e-300)
    assert np.all(np.diff(eig.eigenvalues) >= 0)
