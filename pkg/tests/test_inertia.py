import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spectral_localizer.errors import DimensionError, GapClosedError
from spectral_localizer.inertia import (
    Inertia,
    bunch_kaufman,
    dense_eigenvalues,
    half_signature,
    inertia_ldl,
    signature,
    spectral_gap,
)


def random_hermitian(rng, n, spread=True):
    """Hermitian matrix with eigenvalue moduli spread over 1e-6..1e2 and random signs."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    mags = 10.0 ** rng.uniform(-6, 2, n) if spread else rng.uniform(0.1, 2, n)
    ev = mags * rng.choice([-1.0, 1.0], n)
    return (q * ev) @ q.conj().T, ev


def census(ev, tol):
    return Inertia(int(np.sum(ev > tol)), int(np.sum(ev < -tol)), int(np.sum(np.abs(ev) <= tol)))


def test_trivial_examples():
    assert inertia_ldl(np.diag([1.0, -2.0, 3.0])) == Inertia(2, 1, 0)
    assert inertia_ldl(np.zeros((4, 4))) == Inertia(0, 0, 4)
    assert half_signature(np.diag([1.0, 1.0, -1.0, 1.0])) == 1
    assert signature(np.diag([1.0, -1.0])) == 0


def test_half_signature_singular_raises():
    with pytest.raises(GapClosedError):
        half_signature(np.diag([1.0, 0.0]))


def test_block_sign_flip_has_zero_signature():
    rng = np.random.default_rng(3)
    h, _ = random_hermitian(rng, 10, spread=False)
    z = np.zeros_like(h)
    assert half_signature(np.block([[-h, z], [z, h]])) == 0


@pytest.mark.parametrize("backend", ["lapack", "native"])
def test_sylvester_against_dense_oracle(backend):
    rng = np.random.default_rng(2018)
    for _ in range(60):
        n = int(rng.integers(20, 81))
        a, ev = random_hermitian(rng, n)
        tol = 1e-10 * np.abs(a).sum(axis=0).max()
        assert inertia_ldl(a, backend=backend) == census(ev, tol)


def test_two_by_two_pivots():
    # zero diagonal forces 2x2 pivots
    a = np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 2j], [0, 0, -2j, 0]], dtype=complex)
    f = bunch_kaufman(a)
    assert any(step == 2 for _, step in f.blocks)
    assert inertia_ldl(a, backend="native") == Inertia(2, 2, 0)
    assert inertia_ldl(a, backend="lapack") == Inertia(2, 2, 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2 ** 32 - 1))
def test_bunch_kaufman_reconstructs(n, seed):
    rng = np.random.default_rng(seed)
    a, _ = random_hermitian(rng, n, spread=False)
    f = bunch_kaufman(a)
    p = f.perm
    assert np.allclose(a[np.ix_(p, p)], f.lower @ f.block_diag @ f.lower.conj().T, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 25), st.integers(0, 2 ** 32 - 1))
def test_congruence_invariance(n, seed):
    rng = np.random.default_rng(seed)
    a, _ = random_hermitian(rng, n, spread=False)
    s = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)) + 3 * np.eye(n)
    assert signature(s.conj().T @ a @ s) == signature(a)


def test_shift_counting_matches_oracle():
    rng = np.random.default_rng(9)
    a, ev = random_hermitian(rng, 40, spread=False)
    for s in rng.uniform(-2, 2, 10):
        if np.min(np.abs(ev - s)) < 1e-6:
            continue
        assert inertia_ldl(a - s * np.eye(40)).n_minus == int(np.sum(ev < s))


def test_gap_examples():
    assert spectral_gap(np.diag([0.5, -0.3]), "bisection").gap == pytest.approx(0.3, abs=1e-9)
    assert spectral_gap(np.diag([0.5, -0.3]), "dense").gap == pytest.approx(0.3)
    assert spectral_gap(np.diag([0.5, 0.0]), "bisection").gap == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_gap_methods_agree(seed):
    rng = np.random.default_rng(seed)
    a, _ = random_hermitian(rng, 80, spread=False)
    dense = spectral_gap(a, "dense").gap
    bis = spectral_gap(a, "bisection")
    assert bis.certified
    assert abs(bis.gap - dense) < 1e-8
    assert spectral_gap(a, "shift_invert").gap == pytest.approx(dense, abs=1e-10)


def test_bad_gap_arguments():
    with pytest.raises(ValueError):
        spectral_gap(np.eye(2), "nope")
    with pytest.raises(ValueError):
        spectral_gap(np.eye(2), "dense", tol=0)


def test_dense_eigenvalues_examples():
    assert np.allclose(dense_eigenvalues(np.array([[0.0, 1.0], [1.0, 0.0]])), [-1, 1])
    assert np.allclose(dense_eigenvalues(np.array([[-2.0, 1.0], [1.0, 2.0]])), [-np.sqrt(5), np.sqrt(5)])
    rng = np.random.default_rng(1)
    a, _ = random_hermitian(rng, 30, spread=False)
    assert abs(dense_eigenvalues(a).sum() - np.trace(a).real) < 1e-10 * 30 * np.linalg.norm(a, 2)
    with pytest.raises(DimensionError):
        dense_eigenvalues(np.eye(5), dense_limit=4)


def test_non_square_rejected():
    with pytest.raises(DimensionError):
        inertia_ldl(np.ones((2, 3)))
