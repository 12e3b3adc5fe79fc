"""Lattice geometries, site indexing and sparse matrices over l2(lattice) x C^L.

Sites are ordered lexicographically by ``(n1, n2)`` and the orbital index runs
innermost, so the matrix row of orbital ``a`` at site ``i`` is ``i * L + a``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, GeometryError, NumericalFailure

SQUARE = "square"
DISK = "disk"
OPEN = "open"
PERIODIC = "periodic"

POWER_MAX_ITER = 10_000
POWER_SEED = 20_180_117


@dataclass(frozen=True)
class LatticeGeometry:
    """Finite region of Z^2 with ``orbitals`` internal degrees of freedom per site.

    ``shape="square"`` is the box ``[c - radius, c + radius]^2``; an explicit
    ``side`` replaces it by a ``side x side`` box whose lower-left corner is
    ``c - side // 2`` (this allows even torus sizes). ``shape="disk"`` is
    ``{n : |n - c|^2 <= radius^2}``. Periodic boundaries exist only for squares.
    """

    shape: str = SQUARE
    radius: int = 1
    boundary: str = OPEN
    orbitals: int = 2
    center: tuple[int, int] = (0, 0)
    side: int | None = None

    def __post_init__(self):
        if self.shape not in (SQUARE, DISK):
            raise GeometryError(f"unknown shape {self.shape!r}")
        if self.boundary not in (OPEN, PERIODIC):
            raise GeometryError(f"unknown boundary {self.boundary!r}")
        if int(self.radius) != self.radius or self.radius < 1:
            raise GeometryError("radius must be a positive integer")
        if int(self.orbitals) != self.orbitals or self.orbitals < 1:
            raise GeometryError("orbitals must be a positive integer")
        if self.boundary == PERIODIC and self.shape != SQUARE:
            raise GeometryError("periodic boundary is only valid for the square shape")
        if self.side is not None:
            if self.shape != SQUARE:
                raise GeometryError("side is only meaningful for the square shape")
            if int(self.side) != self.side or self.side < 1:
                raise GeometryError("side must be a positive integer")
        object.__setattr__(self, "center", (int(self.center[0]), int(self.center[1])))

    @classmethod
    def torus(cls, side: int, orbitals: int = 2) -> "LatticeGeometry":
        """Periodic ``side x side`` square."""
        return cls(SQUARE, max(1, side // 2), PERIODIC, orbitals, (0, 0), side)

    @property
    def box_side(self) -> int:
        if self.shape != SQUARE:
            return 2 * self.radius + 1
        return 2 * self.radius + 1 if self.side is None else self.side

    @property
    def box_lower(self) -> tuple[int, int]:
        half = self.radius if self.side is None or self.shape != SQUARE else self.side // 2
        return (self.center[0] - half, self.center[1] - half)

    @cached_property
    def coords(self) -> np.ndarray:
        """Integer site coordinates, shape ``(N, 2)``, lexicographic order."""
        lo1, lo2 = self.box_lower
        n = self.box_side
        g1, g2 = np.meshgrid(np.arange(lo1, lo1 + n), np.arange(lo2, lo2 + n), indexing="ij")
        pts = np.column_stack([g1.ravel(), g2.ravel()])
        if self.shape == DISK:
            rel = pts - np.asarray(self.center)
            pts = pts[(rel ** 2).sum(axis=1) <= self.radius ** 2]
        pts.setflags(write=False)
        return pts

    @cached_property
    def sites(self) -> tuple[tuple[int, int], ...]:
        return tuple((int(a), int(b)) for a, b in self.coords)

    @cached_property
    def _index(self) -> dict[tuple[int, int], int]:
        return {s: i for i, s in enumerate(self.sites)}

    @property
    def n_sites(self) -> int:
        return len(self.coords)

    @property
    def dim(self) -> int:
        return self.n_sites * self.orbitals

    def index_of(self, site: Sequence[int]) -> int:
        try:
            return self._index[(int(site[0]), int(site[1]))]
        except KeyError:
            raise GeometryError(f"site {tuple(site)} is not in the geometry") from None

    def site_of(self, index: int) -> tuple[int, int]:
        return self.sites[index]

    def contains(self, site: Sequence[int]) -> bool:
        return (int(site[0]), int(site[1])) in self._index

    def neighbor_indices(self, step: Sequence[int]) -> np.ndarray:
        """Index of ``n + step`` for every site ``n``; -1 where it leaves an open region."""
        target = self.coords + np.asarray(step, dtype=int)
        if self.boundary == PERIODIC:
            lo = np.asarray(self.box_lower)
            target = (target - lo) % self.box_side + lo
        lo = np.asarray(self.box_lower)
        n = self.box_side
        # dense lookup table over the bounding box
        table = np.full((n, n), -1, dtype=np.int64)
        rel = self.coords - lo
        table[rel[:, 0], rel[:, 1]] = np.arange(self.n_sites)
        rel_t = target - lo
        inside = np.all((rel_t >= 0) & (rel_t < n), axis=1)
        out = np.full(self.n_sites, -1, dtype=np.int64)
        out[inside] = table[rel_t[inside, 0], rel_t[inside, 1]]
        return out

    def displacement(self, axis: int) -> np.ndarray:
        """Matrix of coordinate differences ``x_n - x_m`` along ``axis`` (sites only).

        On a torus the minimal-image difference is used.
        """
        x = self.coords[:, axis].astype(float)
        d = x[:, None] - x[None, :]
        if self.boundary == PERIODIC:
            n = self.box_side
            d = (d + n / 2.0) % n - n / 2.0
        return d

    def position_diagonal(self, axis: int) -> np.ndarray:
        """Coordinate ``n_axis`` of every matrix row (orbitals replicated)."""
        return np.repeat(self.coords[:, axis].astype(float), self.orbitals)


def enumerate_sites(geometry: LatticeGeometry) -> list[tuple[int, int]]:
    """Sites of ``geometry`` in lexicographic ``(n1, n2)`` order."""
    return list(geometry.sites)


def shift_operator(geometry: LatticeGeometry, axis: int) -> sp.csr_matrix:
    """Lattice shift ``S_axis |n> = |n + e_axis>`` on l2(sites), without orbitals.

    Hops leaving an open region are dropped; periodic squares wrap around.
    """
    step = (1, 0) if axis == 0 else (0, 1)
    tgt = geometry.neighbor_indices(step)
    src = np.arange(geometry.n_sites)
    keep = tgt >= 0
    n = geometry.n_sites
    return sp.csr_matrix((np.ones(keep.sum()), (tgt[keep], src[keep])), shape=(n, n))


def _csr(m) -> sp.csr_matrix:
    m = sp.csr_matrix(m, dtype=complex)
    m.sum_duplicates()
    m.eliminate_zeros()
    return m


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SparseHermitian:
    """Complex Hermitian matrix stored as its upper triangle (``row <= col``)."""

    dim: int
    rows: np.ndarray = field(repr=False)
    cols: np.ndarray = field(repr=False)
    vals: np.ndarray = field(repr=False)

    @classmethod
    def from_triplets(cls, dim, rows, cols, vals, diag_atol=1e-12) -> "SparseHermitian":
        """Finalize an assembly: duplicates are summed, the diagonal made exactly real."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if np.any(rows > cols):
            raise ValueError("only upper-triangle entries (row <= col) may be given")
        if rows.size and (rows.min() < 0 or cols.max() >= dim):
            raise DimensionError("triplet index out of range")
        m = sp.coo_matrix((np.asarray(vals, dtype=complex), (rows, cols)), shape=(dim, dim))
        m = _csr(m).tocoo()
        vals = m.data.copy()
        diag = m.row == m.col
        scale = max(1.0, float(np.abs(vals).max(initial=0.0)))
        if np.any(np.abs(vals[diag].imag) > diag_atol * scale):
            raise ValueError("diagonal entries of a Hermitian matrix must be real")
        vals[diag] = vals[diag].real
        order = np.lexsort((m.col, m.row))
        return cls(int(dim), _frozen(m.row[order], np.int64), _frozen(m.col[order], np.int64),
                   _frozen(vals[order], complex))

    @classmethod
    def from_matrix(cls, m, atol=1e-12) -> "SparseHermitian":
        """Wrap a dense or scipy matrix after checking ``m == m*`` up to ``atol``."""
        m = _csr(m)
        if m.shape[0] != m.shape[1]:
            raise DimensionError("matrix must be square")
        diff = m - m.conj().T
        scale = max(1.0, float(np.abs(m.data).max(initial=0.0)))
        if diff.nnz and np.abs(diff.data).max() > atol * scale:
            raise ValueError("matrix is not Hermitian")
        up = sp.triu(m).tocoo()
        return cls.from_triplets(m.shape[0], up.row, up.col, up.data, diag_atol=atol)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.dim, self.dim)

    @property
    def nnz(self) -> int:
        return len(self.vals)

    def entries(self) -> Iterator[tuple[int, int, complex]]:
        return zip(self.rows.tolist(), self.cols.tolist(), self.vals.tolist())

    @cached_property
    def _full(self) -> sp.csr_matrix:
        up = sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=self.shape)
        strict = sp.triu(up, k=1)
        return (up + strict.conj().T).tocsr()

    def to_csr(self) -> sp.csr_matrix:
        return self._full.copy()

    def to_dense(self) -> np.ndarray:
        return self._full.toarray()

    def diagonal(self) -> np.ndarray:
        return self._full.diagonal()


@dataclass(frozen=True, eq=False)
class SparseComplex:
    """General complex square matrix in triplet form."""

    dim: int
    rows: np.ndarray = field(repr=False)
    cols: np.ndarray = field(repr=False)
    vals: np.ndarray = field(repr=False)

    @classmethod
    def from_matrix(cls, m) -> "SparseComplex":
        m = _csr(m)
        if m.shape[0] != m.shape[1]:
            raise DimensionError("matrix must be square")
        c = m.tocoo()
        order = np.lexsort((c.col, c.row))
        return cls(m.shape[0], _frozen(c.row[order], np.int64), _frozen(c.col[order], np.int64),
                   _frozen(c.data[order], complex))

    @classmethod
    def diag(cls, values) -> "SparseComplex":
        return cls.from_matrix(sp.diags(np.asarray(values, dtype=complex)))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.dim, self.dim)

    @property
    def nnz(self) -> int:
        return len(self.vals)

    def entries(self) -> Iterator[tuple[int, int, complex]]:
        return zip(self.rows.tolist(), self.cols.tolist(), self.vals.tolist())

    @cached_property
    def _full(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=self.shape)

    def to_csr(self) -> sp.csr_matrix:
        return self._full.copy()

    def to_dense(self) -> np.ndarray:
        return self._full.toarray()

    def diagonal(self) -> np.ndarray:
        return self._full.diagonal()

    def adjoint(self) -> "SparseComplex":
        return SparseComplex.from_matrix(self._full.conj().T)


MatrixLike = Union[SparseHermitian, SparseComplex, np.ndarray, sp.spmatrix]


def as_csr(a: MatrixLike) -> sp.csr_matrix:
    if isinstance(a, (SparseHermitian, SparseComplex)):
        return a.to_csr()
    return sp.csr_matrix(a)


def as_dense(a: MatrixLike) -> np.ndarray:
    if isinstance(a, (SparseHermitian, SparseComplex)):
        return a.to_dense()
    if sp.issparse(a):
        return a.toarray()
    return np.asarray(a)


def operator_norm(a: MatrixLike, tol: float = 1e-10, max_iter: int = POWER_MAX_ITER) -> float:
    """Largest singular value by power iteration on ``A* A``.

    The start vector comes from a fixed-seed generator, so the result is
    reproducible. Iteration stops once the Rayleigh quotient changes by less
    than ``tol`` relative to itself.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    m = as_csr(a)
    n = m.shape[0]
    if n < 1:
        raise DimensionError("empty matrix")
    mh = m.conj().T.tocsr()
    rng = np.random.default_rng(POWER_SEED)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    theta = 0.0
    for _ in range(max_iter):
        w = mh @ (m @ v)
        new = float(np.vdot(v, w).real)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        if abs(new - theta) <= tol * new:
            return float(np.sqrt(new))
        theta = new
        v = w / nw
    raise NumericalFailure(f"power iteration did not converge in {max_iter} iterations")


def commutator(a: MatrixLike, b: MatrixLike) -> SparseComplex:
    """``AB - BA`` in exact sparse arithmetic."""
    ma, mb = as_csr(a), as_csr(b)
    if ma.shape != mb.shape:
        raise DimensionError(f"dimension mismatch {ma.shape} vs {mb.shape}")
    return SparseComplex.from_matrix(ma @ mb - mb @ ma)
