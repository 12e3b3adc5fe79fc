"""Spectral flow of finite Hermitian paths, Fermi projections and the real-space Chern number."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment

from .errors import AmbiguousFlowError, DimensionError, GapClosedError, GeometryError, NumericalFailure
from .inertia import inertia_ldl, spectral_gap
from .lattice import DISK, PERIODIC, LatticeGeometry, MatrixLike, as_csr, as_dense, operator_norm
from .localizer import LocalizerParams, assemble_even_localizer, compress, truncation_indices

MAX_REFINE = 12
PROJ_TOL = 1e-10
IMAG_TOL = 1e-8


@dataclass(frozen=True)
class MatrixPath:
    """``t in [0, 1] -> T_t``, sampled at ``samples`` equispaced points."""

    evaluator: Callable[[float], np.ndarray]
    samples: int = 2

    def __post_init__(self):
        if self.samples < 2:
            raise ValueError("a path needs at least 2 samples")

    def __call__(self, t: float) -> np.ndarray:
        return as_dense(self.evaluator(float(t)))

    @classmethod
    def line(cls, t0: MatrixLike, t1: MatrixLike, samples: int = 2) -> "MatrixPath":
        a, b = as_dense(t0), as_dense(t1)
        if a.shape != b.shape:
            raise DimensionError(f"endpoint shapes differ: {a.shape} vs {b.shape}")
        return cls(lambda t: (1 - t) * a + t * b, samples)

    def restrict(self, t0: float, t1: float, samples: int | None = None) -> "MatrixPath":
        """The sub-path on ``[t0, t1]``, reparametrized to ``[0, 1]``."""
        f = self.evaluator
        return MatrixPath(lambda s: f(t0 + s * (t1 - t0)), samples or self.samples)


def _invertible_signature(m: np.ndarray) -> int | None:
    inr = inertia_ldl(m)
    return None if inr.n_zero else inr.signature


def spectral_flow_line(t0: MatrixLike, t1: MatrixLike) -> int:
    """Flow along the straight line: ``(Sig T1 - Sig T0) / 2``."""
    a, b = as_dense(t0), as_dense(t1)
    if a.shape != b.shape:
        raise DimensionError(f"endpoint shapes differ: {a.shape} vs {b.shape}")
    s0, s1 = _invertible_signature(a), _invertible_signature(b)
    if s0 is None or s1 is None:
        raise GapClosedError("endpoint of the path is not invertible")
    return (s1 - s0) // 2


def spectral_flow_path(path: MatrixPath) -> int:
    """Sum of half signature jumps between consecutive samples.

    A singular interior sample is moved towards its left neighbour by
    successive halvings (at most ``MAX_REFINE``); if every trial point is
    singular the flow is reported as ambiguous.
    """
    ts = np.linspace(0.0, 1.0, path.samples)
    sigs = []
    for k, t in enumerate(ts):
        s = _invertible_signature(path(t))
        if s is None and 0 < k < len(ts) - 1:
            step = t - ts[k - 1]
            for _ in range(MAX_REFINE):
                step /= 2
                s = _invertible_signature(path(t - step))
                if s is not None:
                    break
            else:
                raise AmbiguousFlowError(f"path stays singular near t={t:.6g}", index=k)
        elif s is None:
            raise GapClosedError(f"endpoint t={t:g} of the path is not invertible", index=k)
        sigs.append(s)
    return sum((b - a) // 2 for a, b in zip(sigs, sigs[1:]))


def crossing_count(path: MatrixPath, samples: int | None = None) -> int:
    """Independent flow oracle: follow eigenvalue branches and count zero crossings.

    Branches are matched between samples by maximal eigenvector overlap, so
    no inertia computation is involved.
    """
    ts = np.linspace(0.0, 1.0, samples or path.samples)
    vals, vecs = sla.eigh(path(ts[0]))
    flow = 0
    for t in ts[1:]:
        nv, nw = sla.eigh(path(t))
        overlap = np.abs(vecs.conj().T @ nw) ** 2
        rows, cols = linear_sum_assignment(-overlap)
        order = cols[np.argsort(rows)]
        nv, nw = nv[order], nw[:, order]
        flow += int(np.sum((vals < 0) & (nv > 0))) - int(np.sum((vals > 0) & (nv < 0)))
        vals, vecs = nv, nw
    return flow


@dataclass(frozen=True, eq=False)
class FermiProjection:
    matrix: np.ndarray

    def __post_init__(self):
        p = self.matrix
        if np.abs(p @ p - p).max(initial=0.0) > PROJ_TOL:
            raise NumericalFailure("Fermi projection is not idempotent")
        if not np.array_equal(p, p.conj().T):
            raise NumericalFailure("Fermi projection is not selfadjoint")

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.matrix).real))


def fermi_projection(h: MatrixLike, tol: float = 1e-10, mode: str = "strict") -> FermiProjection:
    """``P = chi(H < 0)`` from a dense eigendecomposition.

    ``mode="strict"`` rejects eigenvalues within ``tol`` of 0; ``mode="mobility"``
    keeps them out of ``P`` (only strictly negative energies are counted).
    """
    if mode not in ("strict", "mobility"):
        raise ValueError(f"unknown mode {mode!r}")
    vals, vecs = sla.eigh(as_dense(h))
    if mode == "strict" and np.any(np.abs(vals) < tol):
        raise GapClosedError("eigenvalue at the Fermi level; use mobility mode")
    occ = vecs[:, vals < (-tol if mode == "strict" else 0.0)]
    p = occ @ occ.conj().T
    p = 0.5 * (p + p.conj().T)
    return FermiProjection(p)


def edge_distance(geometry: LatticeGeometry) -> np.ndarray:
    """Lattice distance of each site to the outside of an open geometry (inf on a torus)."""
    if geometry.boundary == PERIODIC:
        return np.full(geometry.n_sites, np.inf)
    rel = geometry.coords - np.asarray(geometry.center)
    if geometry.shape == DISK:
        return geometry.radius + 1 - np.sqrt((rel ** 2).sum(axis=1))
    lo = np.asarray(geometry.box_lower)
    hi = lo + geometry.box_side - 1
    return np.minimum(geometry.coords - lo + 1, hi - geometry.coords + 1).min(axis=1).astype(float)


def chern_real_space(p: FermiProjection | np.ndarray, geometry: LatticeGeometry,
                     region: Sequence[int] | None = None, margin: float = 0.0) -> float:
    """``-2 pi i`` times the mean over ``region`` of ``Tr <n|P[[X1,P],[X2,P]]|n>``.

    ``region`` holds site indices (default: every site at distance ``>= margin``
    from the boundary). Commutators with positions use minimal-image
    differences on a torus.
    """
    pm = p.matrix if isinstance(p, FermiProjection) else np.asarray(p)
    if pm.shape != (geometry.dim, geometry.dim):
        raise DimensionError("projection does not match the geometry")
    dist = edge_distance(geometry)
    if region is None:
        region = np.flatnonzero(dist >= margin)
    region = np.asarray(region, dtype=int)
    if region.size == 0:
        raise GeometryError("empty averaging region")
    if np.any(dist[region] < margin):
        raise GeometryError("averaging region touches the boundary margin")
    block = np.ones((geometry.orbitals, geometry.orbitals))
    a = np.kron(geometry.displacement(0), block) * pm
    b = np.kron(geometry.displacement(1), block) * pm
    pa, pb = pm @ a, pm @ b
    # diag of P[A, B] = diag(PAB) - diag(PBA)
    local = np.einsum("ij,ji->i", pa, b) - np.einsum("ij,ji->i", pb, a)
    local = local.reshape(geometry.n_sites, geometry.orbitals).sum(axis=1)
    val = -2j * np.pi * local[region].mean()
    if abs(val.imag) > IMAG_TOL:
        raise NumericalFailure(f"Chern number has imaginary residual {val.imag:.3g}")
    return float(val.real)


@dataclass(frozen=True)
class PathGap:
    min_gap: float
    gaps: np.ndarray
    ts: np.ndarray
    lower_bound: float = 0.0


def _path_gaps(evaluate, samples: int, method: str) -> tuple[np.ndarray, np.ndarray]:
    ts = np.linspace(0.0, 1.0, samples)
    gaps = np.array([spectral_gap(evaluate(t), method=method).gap for t in ts])
    return ts, gaps


def _dirac_block(d0: sp.spmatrix) -> sp.csr_matrix:
    return sp.bmat([[None, d0.conj().T], [d0, None]], format="csr")


def localizer_path_gap(h: MatrixLike, d0: MatrixLike, kappa: float, samples: int = 21,
                       rho: float | None = None, method: str = "shift_invert") -> PathGap:
    """Gap along ``t -> -H x Gamma + t kappa D`` on the ``rho``-truncation.

    ``lower_bound`` is ``sqrt(g^2 - kappa ||[D0, H]||)`` (0 if negative), with
    ``g`` and the commutator measured on the truncated matrices; it holds for
    every finite pair ``H, D0``.
    """
    hm, dm = as_csr(h), as_csr(d0)
    if rho is not None:
        idx = truncation_indices(dm, rho)
        hm, dm = compress(hm, idx), compress(dm, idx)
    base = sp.block_diag([-hm, hm], format="csr")
    dirac = _dirac_block(dm)
    ts, gaps = _path_gaps(lambda t: base + t * kappa * dirac, samples, method)
    g = spectral_gap(hm, method=method).gap
    c = operator_norm(dm @ hm - hm @ dm, tol=1e-9)
    return PathGap(float(gaps.min()), gaps, ts, float(np.sqrt(max(g * g - kappa * c, 0.0))))


def _inner_mask(d0: sp.spmatrix, rho_inner: float) -> np.ndarray:
    d = d0.diagonal()
    inner = np.abs(d) <= rho_inner + 1e-9
    return np.concatenate([inner, inner])


def decoupling_path_gap(h: MatrixLike, d0: MatrixLike, kappa: float, rho_inner: float,
                        rho_outer: float, samples: int = 21, method: str = "shift_invert") -> PathGap:
    """Gap along ``t -> L_{kappa,rho_outer}`` with the inner/outer coupling scaled by ``1 - t``.

    At ``t = 1`` the matrix is ``L_{kappa,rho_inner} (+) L_outer`` where
    ``L_outer`` lives on ``rho_inner < |d| <= rho_outer``.
    """
    if not rho_inner < rho_outer:
        raise ValueError("rho_inner must be smaller than rho_outer")
    dm = as_csr(d0)
    loc = assemble_even_localizer(h, dm, LocalizerParams(kappa, rho_outer)).to_csr()
    d_out = compress(dm, truncation_indices(dm, rho_outer))
    inner = _inner_mask(d_out, rho_inner)
    keep = sp.diags(inner.astype(float)) @ loc @ sp.diags(inner.astype(float))
    keep = keep + sp.diags((~inner).astype(float)) @ loc @ sp.diags((~inner).astype(float))
    coupling = loc - keep
    ts, gaps = _path_gaps(lambda t: keep + (1 - t) * coupling, samples, method)
    return PathGap(float(gaps.min()), gaps, ts)


def outer_block_gap(h: MatrixLike, d0: MatrixLike, kappa: float, rho_inner: float,
                    rho_outer: float) -> float:
    """Gap of the localizer block living on ``rho_inner < |d| <= rho_outer``."""
    dm = as_csr(d0)
    loc = assemble_even_localizer(h, dm, LocalizerParams(kappa, rho_outer)).to_csr()
    d_out = compress(dm, truncation_indices(dm, rho_outer))
    outer = np.flatnonzero(~_inner_mask(d_out, rho_inner))
    return spectral_gap(compress(loc, outer), method="dense").gap


def perturb_to_invertible(a: MatrixLike, epsilon: float) -> np.ndarray:
    """Finite-rank perturbation of norm ``<= epsilon`` making ``A`` invertible.

    Eigenvalues with ``|lambda| < 1e-3 epsilon`` are shifted by ``epsilon / 2``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    m = as_dense(a)
    vals, vecs = sla.eigh(m)
    near = np.abs(vals) < 1e-3 * epsilon
    if not near.any():
        return m
    q = vecs[:, near]
    return m + 0.5 * epsilon * (q @ q.conj().T)
