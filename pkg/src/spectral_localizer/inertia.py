"""Inertia, signature and spectral-gap kernels for Hermitian matrices.

Signatures are obtained from a symmetric-indefinite factorization
``P A P^T = L D L*`` with 1x1 and 2x2 pivot blocks (Bunch-Kaufman). By
Sylvester's law of inertia the signs of ``D`` are the signs of the
eigenvalues of ``A``; no eigenvalues are computed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import DimensionError, GapClosedError, NumericalFailure
from .lattice import MatrixLike, as_csr, as_dense

DENSE_LIMIT = 8000
BK_ALPHA = (1.0 + np.sqrt(17.0)) / 8.0
SHIFT_RETRIES = 3


@dataclass(frozen=True)
class Inertia:
    n_plus: int
    n_minus: int
    n_zero: int

    @property
    def dim(self) -> int:
        return self.n_plus + self.n_minus + self.n_zero

    @property
    def signature(self) -> int:
        return self.n_plus - self.n_minus


@dataclass(frozen=True)
class GapResult:
    gap: float
    method: str
    certified: bool = True


class LDLFactors(NamedTuple):
    """``A[perm][:, perm] = lower @ block_diag @ lower.conj().T``."""

    lower: np.ndarray
    block_diag: np.ndarray
    perm: np.ndarray
    blocks: list


def default_pivot_tol(a: np.ndarray) -> float:
    return 1e-10 * float(np.abs(a).sum(axis=0).max(initial=0.0))


def _dense_hermitian(a: MatrixLike) -> np.ndarray:
    m = np.array(as_dense(a), dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError("square matrix required")
    if not np.all(np.isfinite(m)):
        raise NumericalFailure("matrix has non-finite entries")
    # drop rounding-level imaginary parts on the diagonal
    np.fill_diagonal(m, m.diagonal().real)
    return m


def bunch_kaufman(a: MatrixLike, pivot_tol: float | None = None) -> LDLFactors:
    """Unblocked Bunch-Kaufman ``L D L*`` factorization of a Hermitian matrix.

    Columns whose pivot candidates are all below ``pivot_tol`` produce a zero
    1x1 pivot and are not eliminated.
    """
    w = _dense_hermitian(a)
    n = w.shape[0]
    tol = default_pivot_tol(w) if pivot_tol is None else pivot_tol
    lower = np.eye(n, dtype=complex)
    dmat = np.zeros((n, n), dtype=complex)
    perm = np.arange(n)
    blocks = []
    k = 0
    while k < n:
        absakk = abs(w[k, k].real)
        if k + 1 < n:
            col = np.abs(w[k + 1:, k])
            imax = k + 1 + int(np.argmax(col))
            colmax = float(col.max())
        else:
            imax, colmax = k, 0.0
        if max(absakk, colmax) <= tol:
            dmat[k, k] = w[k, k].real
            blocks.append((k, 1))
            k += 1
            continue
        step, kp = 1, k
        if absakk < BK_ALPHA * colmax:
            others = np.abs(w[imax, k:])
            others[imax - k] = 0.0
            rowmax = float(others.max())
            if absakk * rowmax >= BK_ALPHA * colmax ** 2:
                kp = k
            elif abs(w[imax, imax].real) >= BK_ALPHA * rowmax:
                kp = imax
            else:
                kp, step = imax, 2
        kk = k + step - 1
        if kp != kk:
            w[[kk, kp], :] = w[[kp, kk], :]
            w[:, [kk, kp]] = w[:, [kp, kk]]
            perm[[kk, kp]] = perm[[kp, kk]]
            lower[[kk, kp], :k] = lower[[kp, kk], :k]
        if step == 1:
            d = w[k, k].real
            if not np.isfinite(d):
                raise NumericalFailure("non-finite pivot", index=k)
            c = w[k + 1:, k].copy()
            w[k + 1:, k + 1:] -= np.outer(c, c.conj()) / d
            lower[k + 1:, k] = c / d
            dmat[k, k] = d
        else:
            e = w[k:k + 2, k:k + 2].copy()
            e[0, 0], e[1, 1] = e[0, 0].real, e[1, 1].real
            c = w[k + 2:, k:k + 2].copy()
            try:
                lblk = c @ np.linalg.inv(e)
            except np.linalg.LinAlgError:
                raise NumericalFailure("singular 2x2 pivot block", index=k) from None
            w[k + 2:, k + 2:] -= lblk @ c.conj().T
            lower[k + 2:, k:k + 2] = lblk
            dmat[k:k + 2, k:k + 2] = e
        blocks.append((k, step))
        k += step
    return LDLFactors(lower, dmat, perm, blocks)


def _count_block(d: np.ndarray, k: int, step: int, tol: float, counts: list) -> None:
    if step == 1:
        v = d[k, k].real
        if not np.isfinite(v):
            raise NumericalFailure("non-finite pivot", index=k)
        counts[0 if v > tol else 1 if v < -tol else 2] += 1
        return
    a, c, b = d[k, k].real, d[k + 1, k + 1].real, d[k + 1, k]
    if not np.all(np.isfinite([a, c, abs(b)])):
        raise NumericalFailure("non-finite pivot block", index=k)
    mean, rad = 0.5 * (a + c), float(np.hypot(0.5 * (a - c), abs(b)))
    for v in (mean + rad, mean - rad):
        counts[0 if v > tol else 1 if v < -tol else 2] += 1


def _blocks_from_d(d: np.ndarray) -> list:
    n = d.shape[0]
    sub = np.abs(np.diagonal(d, -1)) != 0
    blocks, k = [], 0
    while k < n:
        if k + 1 < n and sub[k]:
            blocks.append((k, 2))
            k += 2
        else:
            blocks.append((k, 1))
            k += 1
    return blocks


def inertia_ldl(a: MatrixLike, pivot_tol: float | None = None, backend: str = "lapack") -> Inertia:
    """Inertia ``(n+, n-, n0)`` from a Bunch-Kaufman factorization.

    ``backend="lapack"`` uses the blocked LAPACK ``?hetrf`` routine,
    ``backend="native"`` the unblocked implementation in :func:`bunch_kaufman`.
    Pivots (or 2x2 block eigenvalues) below ``pivot_tol`` in modulus count as
    null; the default tolerance is ``1e-10 * ||A||_1``.
    """
    m = _dense_hermitian(a)
    if m.shape[0] == 0:
        return Inertia(0, 0, 0)
    tol = default_pivot_tol(m) if pivot_tol is None else pivot_tol
    if backend == "native":
        f = bunch_kaufman(m, tol)
        d, blocks = f.block_diag, f.blocks
    elif backend == "lapack":
        _, d, _ = sla.ldl(m, lower=True, hermitian=True, overwrite_a=True, check_finite=False)
        blocks = _blocks_from_d(d)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    counts = [0, 0, 0]
    for k, step in blocks:
        _count_block(d, k, step, tol, counts)
    return Inertia(*counts)


def signature(a: MatrixLike, **kw) -> int:
    return inertia_ldl(a, **kw).signature


def half_signature(a: MatrixLike, **kw) -> float:
    """``(n+ - n-) / 2``; raises :class:`GapClosedError` if ``A`` is singular at tolerance."""
    inr = inertia_ldl(a, **kw)
    if inr.n_zero:
        raise GapClosedError(f"matrix has {inr.n_zero} null pivots; half-signature undefined")
    return inr.signature / 2


def dense_eigenvalues(a: MatrixLike, dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    """All eigenvalues in ascending order (LAPACK ``?heevd``, backward stable)."""
    m = as_dense(a)
    if m.shape[0] > dense_limit:
        raise DimensionError(f"dimension {m.shape[0]} exceeds dense limit {dense_limit}")
    return sla.eigvalsh(m, check_finite=False)


def _bisection_gap(m: np.ndarray, tol: float) -> GapResult:
    n = m.shape[0]
    scale = float(np.abs(m).sum(axis=0).max(initial=0.0))
    width = tol * max(1.0, scale)
    eye = np.eye(n)
    certified = True

    def below(s):
        # eigenvalues strictly below s, via n- of A - sI
        nonlocal certified
        shift = s
        for attempt in range(SHIFT_RETRIES + 1):
            inr = inertia_ldl(m - shift * eye)
            if inr.n_zero == 0:
                return inr.n_minus
            shift = s + (attempt + 1) * width
        certified = False
        return inr.n_minus

    if inertia_ldl(m).n_zero:
        return GapResult(0.0, "bisection", True)
    lo, hi = 0.0, scale * (1 + 1e-12) + width
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if below(mid) - below(-mid) > 0:
            hi = mid
        else:
            lo = mid
    return GapResult(0.5 * (lo + hi), "bisection", certified)


def _shift_invert_gap(a: MatrixLike) -> GapResult:
    m = as_csr(a)
    n = m.shape[0]
    if n <= 32:
        return GapResult(float(np.min(np.abs(dense_eigenvalues(m)))), "dense", True)
    v0 = np.ones(n) / np.sqrt(n)
    try:
        vals = spla.eigsh(m.tocsc(), k=min(4, n - 2), sigma=0.0, which="LM", v0=v0,
                          return_eigenvectors=False)
    except RuntimeError:
        # exactly singular factorization
        return GapResult(0.0, "shift_invert", True)
    except spla.ArpackNoConvergence:
        if n <= DENSE_LIMIT:
            return GapResult(float(np.min(np.abs(dense_eigenvalues(m)))), "dense", True)
        return GapResult(float("nan"), "shift_invert", False)
    return GapResult(float(np.min(np.abs(vals))), "shift_invert", True)


def spectral_gap(a: MatrixLike, method: str = "bisection", tol: float = 1e-10) -> GapResult:
    """Distance of the spectrum of a Hermitian matrix from zero.

    ``bisection`` brackets ``min |eig|`` by eigenvalue counting with shifted
    inertias; ``dense`` diagonalizes; ``shift_invert`` runs Lanczos on
    ``A^{-1}`` (sparse LU) and is meant for large sparse matrices.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if method == "dense":
        return GapResult(float(np.min(np.abs(dense_eigenvalues(a)))), "dense", True)
    if method == "bisection":
        return _bisection_gap(_dense_hermitian(a), tol)
    if method == "shift_invert":
        return _shift_invert_gap(a)
    raise ValueError(f"unknown gap method {method!r}")

