"""Dirac operators and the even/odd spectral localizer at finite volume.

Even case, on the sites where ``|D0| <= rho``::

    L = [[ -H_rho,        kappa D0_rho* ],
         [ kappa D0_rho,  H_rho         ]]

Odd case, the compression of ``[[kappa D, A], [A*, -kappa D]]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, GapClosedError, GeometryError
from .inertia import half_signature, spectral_gap
from .lattice import (
    DISK,
    PERIODIC,
    SQUARE,
    LatticeGeometry,
    MatrixLike,
    SparseComplex,
    SparseHermitian,
    as_csr,
    commutator,
    operator_norm,
)

ORIGIN_EPS = 1e-12
_RADIUS_SLACK = 1e-9


@dataclass(frozen=True)
class LocalizerParams:
    kappa: float
    rho: float
    center: tuple[float, float] = (0.0, 0.0)
    truncation: str = DISK

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.rho >= 1:
            raise ValueError("rho must be >= 1")
        if self.truncation not in (DISK, SQUARE):
            raise ValueError(f"unknown truncation {self.truncation!r}")


@dataclass(frozen=True)
class BoundsReport:
    """Admissibility of ``(kappa, rho)`` under the sufficient gap conditions.

    ``kappa <= g^3 / (12 ||H|| ||[D, H (+) H]||)`` and ``rho > 2 g / kappa``.
    """

    g: float
    norm_H: float
    norm_comm: float
    kappa: float
    rho: float
    kappa_max: float
    rho_min: float
    kappa_ok: bool
    rho_ok: bool

    @property
    def admissible(self) -> bool:
        return self.kappa_ok and self.rho_ok


def build_dirac(geometry: LatticeGeometry, center: Sequence[float] = (0.0, 0.0)) -> SparseComplex:
    """Diagonal ``D0 = (X1 - c1) + i (X2 - c2)``, with a vanishing entry replaced by 1."""
    d = (geometry.coords[:, 0] - center[0]) + 1j * (geometry.coords[:, 1] - center[1])
    d = d.astype(complex)
    d[np.abs(d) < ORIGIN_EPS] = 1.0
    return SparseComplex.diag(np.repeat(d, geometry.orbitals))


def _diagonal_of(d0: MatrixLike) -> np.ndarray:
    m = as_csr(d0)
    off = m - sp.diags(m.diagonal())
    if off.count_nonzero():
        raise ValueError("Dirac operator must be diagonal in the lattice basis")
    return m.diagonal()


def dirac_phase(d0: MatrixLike) -> SparseComplex:
    """Unitary ``F = D0 |D0|^{-1}``."""
    d = _diagonal_of(d0)
    if np.any(np.abs(d) == 0):
        raise ValueError("D0 has a zero diagonal entry; apply the origin fix first")
    return SparseComplex.diag(d / np.abs(d))


def truncation_indices(d0: MatrixLike, rho: float, truncation: str = DISK) -> np.ndarray:
    """Matrix rows inside the finite volume ``|D0| <= rho`` (or the square box)."""
    d = _diagonal_of(d0)
    if truncation == DISK:
        inside = np.abs(d) <= rho + _RADIUS_SLACK
    elif truncation == SQUARE:
        inside = np.maximum(np.abs(d.real), np.abs(d.imag)) <= rho + _RADIUS_SLACK
    else:
        raise ValueError(f"unknown truncation {truncation!r}")
    return np.flatnonzero(inside)


def check_region_fits(geometry: LatticeGeometry, center: Sequence[float], rho: float,
                      truncation: str = DISK) -> None:
    """Raise :class:`GeometryError` unless the truncation region lies inside ``geometry``."""
    r = int(np.floor(rho + _RADIUS_SLACK)) + 1
    c1, c2 = int(np.floor(center[0])), int(np.floor(center[1]))
    g1, g2 = np.meshgrid(np.arange(c1 - r, c1 + r + 2), np.arange(c2 - r, c2 + r + 2), indexing="ij")
    pts = np.column_stack([g1.ravel(), g2.ravel()])
    rel = pts - np.asarray(center, dtype=float)
    if truncation == DISK:
        inside = (rel ** 2).sum(axis=1) <= (rho + _RADIUS_SLACK) ** 2
    else:
        inside = np.abs(rel).max(axis=1) <= rho + _RADIUS_SLACK
    pts = pts[inside]
    missing = [tuple(p) for p in pts if not geometry.contains(p)]
    if missing:
        raise GeometryError(f"truncation radius {rho} around {tuple(center)} exceeds the geometry "
                            f"({len(missing)} sites missing)")
    if geometry.boundary == PERIODIC:
        lo = np.asarray(geometry.box_lower)
        hi = lo + geometry.box_side - 1
        for ax in (0, 1):
            if pts[:, ax].min() == lo[ax] and pts[:, ax].max() == hi[ax]:
                raise GeometryError("truncation region wraps around the periodic geometry")


def compress(a: MatrixLike, idx: np.ndarray) -> sp.csr_matrix:
    """Dirichlet restriction ``pi A pi*`` to the rows/columns ``idx``."""
    return as_csr(a)[idx][:, idx]


def assemble_even_localizer(h: MatrixLike, d0: MatrixLike, params: LocalizerParams,
                            geometry: LatticeGeometry | None = None) -> SparseHermitian:
    """Even spectral localizer ``(kappa D - H x Gamma)_rho``.

    ``D0`` must be the Dirac operator centred at ``params.center``. When
    ``geometry`` is given, the truncation region is checked to fit into it.
    """
    hm, dm = as_csr(h), as_csr(d0)
    if hm.shape != dm.shape:
        raise DimensionError(f"H has shape {hm.shape} but D0 has shape {dm.shape}")
    if geometry is not None:
        if geometry.dim != hm.shape[0]:
            raise DimensionError("geometry does not match the Hamiltonian")
        check_region_fits(geometry, params.center, params.rho, params.truncation)
    idx = truncation_indices(dm, params.rho, params.truncation)
    if idx.size == 0:
        raise GeometryError("empty truncation region")
    hr = compress(hm, idx)
    dr = params.kappa * compress(dm, idx)
    loc = sp.bmat([[-hr, dr.conj().T], [dr, hr]], format="csr")
    return SparseHermitian.from_matrix(loc)


def assemble_odd_localizer(a: MatrixLike, d: MatrixLike, kappa: float,
                           rho: float | None = None) -> SparseHermitian:
    """Odd spectral localizer ``[[kappa D, A], [A*, -kappa D]]`` restricted to ``|D| <= rho``."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    am, dm = as_csr(a), as_csr(d)
    if am.shape != dm.shape:
        raise DimensionError(f"A has shape {am.shape} but D has shape {dm.shape}")
    dd = _diagonal_of(dm)
    if np.any(np.abs(dd.imag) > 0):
        raise ValueError("D must be selfadjoint")
    idx = np.arange(dm.shape[0]) if rho is None else np.flatnonzero(np.abs(dd) <= rho + _RADIUS_SLACK)
    ar = compress(am, idx)
    dr = kappa * compress(dm, idx)
    loc = sp.bmat([[dr, ar], [ar.conj().T, -dr]], format="csr")
    return SparseHermitian.from_matrix(loc)


def commutator_norm(h: MatrixLike, d0: MatrixLike, tol: float = 1e-9) -> float:
    """``||[D, H (+) H]|| = ||[D0, H]||`` for Hermitian ``H``."""
    return operator_norm(commutator(d0, h), tol=tol)


def bounds_report(g: float, norm_h: float, norm_comm: float, kappa: float, rho: float) -> BoundsReport:
    kappa_max = np.inf if norm_h * norm_comm == 0 else g ** 3 / (12.0 * norm_h * norm_comm)
    rho_min = 2.0 * g / kappa
    return BoundsReport(g, norm_h, norm_comm, kappa, rho, float(kappa_max), rho_min,
                        bool(kappa <= kappa_max), bool(rho > rho_min))


def check_bounds(h: MatrixLike, d0: MatrixLike, params: LocalizerParams, g: float | None = None,
                 gap_method: str = "shift_invert") -> BoundsReport:
    """Measure ``g``, ``||H||`` and ``||[D, H (+) H]||`` and report admissibility.

    Advisory only; raises :class:`GapClosedError` when ``H`` is not invertible.
    """
    norm_h = operator_norm(h, tol=1e-9)
    if g is None:
        g = spectral_gap(h, method=gap_method).gap
    if not g > 1e-10 * max(1.0, norm_h):
        raise GapClosedError(f"H is not invertible (gap {g:.3g})")
    return bounds_report(g, norm_h, commutator_norm(h, d0), params.kappa, params.rho)


def auto_kappa(g: float, norm_comm: float) -> float:
    """Default tuning ``g / (2 ||[D, H x 1]||)``."""
    return g / (2.0 * norm_comm)


def theorem_kappa(g: float, norm_h: float, norm_comm: float) -> float:
    """Largest tuning allowed by the sufficient bound ``g^3 / (12 ||H|| ||[D, H]||)``."""
    return g ** 3 / (12.0 * norm_h * norm_comm)


def localizer_half_signature(h: MatrixLike, geometry: LatticeGeometry, params: LocalizerParams) -> float:
    d0 = build_dirac(geometry, params.center)
    return half_signature(assemble_even_localizer(h, d0, params, geometry))


def local_marker_map(h: MatrixLike, geometry: LatticeGeometry, kappa: float, rho: float,
                     centers: Iterable[Sequence[float]], truncation: str = DISK) -> dict:
    """Half-signature of the localizer recentred at each of ``centers``."""
    out = {}
    for c in centers:
        c = (float(c[0]), float(c[1]))
        out[c] = localizer_half_signature(h, geometry, LocalizerParams(kappa, rho, c, truncation))
    return out
