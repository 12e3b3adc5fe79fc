import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from spectral_localizer.errors import DimensionError, GeometryError
from spectral_localizer.lattice import (
    DISK,
    PERIODIC,
    SQUARE,
    LatticeGeometry,
    SparseComplex,
    SparseHermitian,
    commutator,
    enumerate_sites,
    operator_norm,
    shift_operator,
)


def test_square_radius_one_sites():
    sites = enumerate_sites(LatticeGeometry(SQUARE, 1))
    assert len(sites) == 9
    assert sites[0] == (-1, -1) and sites[-1] == (1, 1)
    assert sites == sorted(sites)


def test_unit_disk_sites():
    assert set(enumerate_sites(LatticeGeometry(DISK, 1))) == {(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)}


def test_disk_radius_30_count_brute_force():
    count = sum(1 for a in range(-30, 31) for b in range(-30, 31) if a * a + b * b <= 900)
    assert count == 2821
    assert LatticeGeometry(DISK, 30).n_sites == count


def test_periodic_disk_rejected():
    with pytest.raises(GeometryError):
        LatticeGeometry(DISK, 3, PERIODIC)


def test_bad_radius_rejected():
    with pytest.raises(GeometryError):
        LatticeGeometry(SQUARE, 0)


@pytest.mark.parametrize("geo", [LatticeGeometry(SQUARE, 4), LatticeGeometry(DISK, 6, center=(2, -1)),
                                 LatticeGeometry.torus(10)])
def test_index_bijection(geo):
    for i in range(geo.n_sites):
        assert geo.index_of(geo.site_of(i)) == i
    with pytest.raises(GeometryError):
        geo.index_of((100, 100))


def test_torus_even_side():
    geo = LatticeGeometry.torus(30)
    assert geo.n_sites == 900
    assert geo.box_lower == (-15, -15)
    assert geo.coords[:, 0].max() == 14


def test_shift_operator_open_and_periodic():
    open_ = LatticeGeometry(SQUARE, 2)
    s = shift_operator(open_, 0).toarray()
    i, j = open_.index_of((0, 0)), open_.index_of((1, 0))
    assert s[j, i] == 1
    # hops leaving the box are dropped: 5 sites on the right edge have no image
    assert s.sum() == 25 - 5
    torus = LatticeGeometry.torus(5)
    st_ = shift_operator(torus, 1).toarray()
    assert np.allclose(st_.sum(axis=0), 1) and np.allclose(st_.sum(axis=1), 1)


def test_minimal_image_displacement():
    geo = LatticeGeometry.torus(6)
    d = geo.displacement(0)
    assert np.abs(d).max() <= 3
    a, b = geo.index_of((2, 0)), geo.index_of((-3, 0))
    assert d[a, b] == -1.0


def test_sparse_hermitian_roundtrip():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
    a = a + a.conj().T
    h = SparseHermitian.from_matrix(a)
    dense = h.to_dense()
    assert np.array_equal(dense, dense.conj().T)
    assert np.all(h.rows <= h.cols)
    assert np.all(h.vals[h.rows == h.cols].imag == 0)
    assert np.allclose(dense, a)


def test_sparse_hermitian_triplets_sum_duplicates():
    h = SparseHermitian.from_triplets(3, [0, 0, 1], [1, 1, 1], [1 + 1j, 2, 5])
    assert h.nnz == 2
    assert h.to_dense()[1, 0] == 3 - 1j
    with pytest.raises(ValueError):
        SparseHermitian.from_triplets(2, [1], [0], [1.0])
    with pytest.raises(ValueError):
        SparseHermitian.from_triplets(2, [0], [0], [1j])


def test_non_hermitian_rejected():
    with pytest.raises(ValueError):
        SparseHermitian.from_matrix(np.array([[0, 1], [2, 0]]))


def test_operator_norm_examples():
    assert operator_norm(np.diag([1.0, -3.0, 2.0])) == pytest.approx(3.0, rel=1e-9)
    assert operator_norm(np.zeros((4, 4))) == 0.0


def test_operator_norm_matches_dense_oracle():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((50, 50)) + 1j * rng.standard_normal((50, 50))
    a = a + a.conj().T
    oracle = np.abs(np.linalg.eigvalsh(a)).max()
    assert operator_norm(a, tol=1e-12) == pytest.approx(oracle, rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 20), st.integers(0, 2 ** 32 - 1))
def test_operator_norm_adjoint_invariant(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    ref = np.linalg.norm(a, 2)
    assert operator_norm(a, tol=1e-12) == pytest.approx(ref, rel=1e-4)
    assert operator_norm(a.conj().T, tol=1e-12) == pytest.approx(ref, rel=1e-4)


def test_commutator_examples():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((6, 6))
    assert commutator(a, a).nnz == 0
    assert commutator(np.diag([1.0, 2, 3]), np.diag([4.0, 5, 6])).nnz == 0
    with pytest.raises(DimensionError):
        commutator(np.eye(2), np.eye(3))


def test_position_shift_commutator_is_shift():
    # 1D open chain embedded as a 1-wide strip: [X1, S1] = S1
    geo = LatticeGeometry(SQUARE, 5, orbitals=1)
    s1 = shift_operator(geo, 0)
    x1 = sp.diags(geo.position_diagonal(0))
    c = commutator(x1, s1).to_dense()
    assert np.array_equal(c, s1.toarray())


def test_sparse_complex_adjoint_and_diag():
    m = SparseComplex.diag([1 + 2j, 3])
    assert np.array_equal(m.adjoint().to_dense(), np.diag([1 - 2j, 3]))
    assert np.array_equal(m.diagonal(), [1 + 2j, 3])
