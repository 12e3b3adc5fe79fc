"""Tight-binding Hamiltonians: the p+ip BdG superconductor and a chiral chain.

The p+ip Hamiltonian on l2(Z^2) x C^2 (particle, hole) is

    H(0) = [[ h,      Delta* ],
            [ Delta,  -h     ]]

with ``h = S1 + S1* + S2 + S2* - mu`` and
``Delta = delta (S1 - S1* + i (S2 - S2*))``.
The pairing sits in the hole-particle block; with this orientation the
Fermi projection has Chern number +1 for ``mu > 0`` and -1 for ``mu < 0``
under ``D0 = X1 + i X2`` and ``Ch = -2 pi i Tr <0|P[[X1,P],[X2,P]]|0>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import GeometryError
from .lattice import LatticeGeometry, SparseComplex, SparseHermitian, shift_operator

SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
_HOLE_PARTICLE = np.array([[0.0, 0.0], [1.0, 0.0]])
_PARTICLE_HOLE = _HOLE_PARTICLE.T


@dataclass(frozen=True)
class ModelParams:
    mu: float
    delta: float
    lam: float = 0.0

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("disorder coupling lambda must be >= 0")


@dataclass(frozen=True, eq=False)
class DisorderRealization:
    """One i.i.d. Uniform[-1/2, 1/2) value per site of ``geometry``."""

    seed: int
    geometry: LatticeGeometry
    values: np.ndarray = field(repr=False)


def _onsite_lattice(mu, geometry):
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (geometry.n_sites,))
    return sp.diags(mu)


def pip_hamiltonian(mu, delta: float, geometry: LatticeGeometry) -> SparseHermitian:
    """Clean p+ip Hamiltonian with a scalar or per-site chemical potential ``mu``."""
    if geometry.orbitals != 2:
        raise GeometryError("the BdG model needs orbitals = 2")
    s1 = shift_operator(geometry, 0)
    s2 = shift_operator(geometry, 1)
    kinetic = s1 + s1.T + s2 + s2.T - _onsite_lattice(mu, geometry)
    pairing = delta * (s1 - s1.T + 1j * (s2 - s2.T))
    h = (sp.kron(kinetic, SIGMA_Z)
         + sp.kron(pairing, _HOLE_PARTICLE)
         + sp.kron(pairing.conj().T, _PARTICLE_HOLE))
    return SparseHermitian.from_matrix(h)


def build_clean_pip(params: ModelParams, geometry: LatticeGeometry) -> SparseHermitian:
    """H(0) on ``geometry``; open boundaries drop outgoing hops, periodic ones wrap."""
    return pip_hamiltonian(params.mu, params.delta, geometry)


def build_interface_pip(mu_left: float, mu_right: float, delta: float,
                        geometry: LatticeGeometry, cut: float = 0.0) -> SparseHermitian:
    """Two p+ip bulks glued along the line ``n1 = cut``.

    Sites with ``n1 < cut`` carry ``mu_left``, the others ``mu_right``.
    """
    mu = np.where(geometry.coords[:, 0] < cut, mu_left, mu_right)
    return pip_hamiltonian(mu, delta, geometry)


def _zigzag(n: int) -> int:
    return 2 * n if n >= 0 else -2 * n - 1


def site_uniform(seed: int, site) -> float:
    """Uniform[-1/2, 1/2) value of one site.

    Philox4x64-10 keyed with ``seed`` (low 64 bits) and the zigzag-encoded site
    (high 64 bits); the first raw 64-bit output is mapped to a 53-bit double.
    Values are keyed by lattice coordinates, so geometries sharing a site
    share its disorder value.
    """
    code = (_zigzag(int(site[0])) << 32) | _zigzag(int(site[1]))
    key = (int(seed) & 0xFFFF_FFFF_FFFF_FFFF) | (code << 64)
    raw = int(np.random.Philox(key=key).random_raw())
    return (raw >> 11) * 2.0 ** -53 - 0.5


def sample_disorder(geometry: LatticeGeometry, seed: int) -> DisorderRealization:
    values = np.array([site_uniform(seed, s) for s in geometry.sites])
    values.setflags(write=False)
    return DisorderRealization(int(seed), geometry, values)


def disorder_potential(realization: DisorderRealization) -> SparseHermitian:
    """V = sum_n v_n diag(1, -1) |n><n|."""
    return SparseHermitian.from_matrix(sp.kron(sp.diags(realization.values), SIGMA_Z))


def build_dirty(params: ModelParams, geometry: LatticeGeometry,
                realization: DisorderRealization | None) -> SparseHermitian:
    """H(lambda) = H(0) + lambda V."""
    clean = build_clean_pip(params, geometry)
    if realization is None:
        return clean
    if realization.geometry != geometry:
        raise GeometryError("disorder realization was drawn for a different geometry")
    if params.lam == 0:
        return clean
    v = sp.kron(sp.diags(realization.values), SIGMA_Z)
    return SparseHermitian.from_matrix(clean.to_csr() + params.lam * v)


def pip_band_energies(mu: float, delta: float, k1, k2) -> np.ndarray:
    """Upper band ``sqrt(eps^2 + 4 delta^2 (sin^2 k1 + sin^2 k2))`` of the clean model."""
    eps = 2 * np.cos(k1) + 2 * np.cos(k2) - mu
    return np.sqrt(eps ** 2 + 4 * delta ** 2 * (np.sin(k1) ** 2 + np.sin(k2) ** 2))


def build_chiral_chain(t1: float, t2: float, length: int) -> SparseComplex:
    """Off-diagonal block ``A`` of a dimerized chiral chain with open ends.

    ``A |j> = t1 |j> + t2 |j-1>``: intra-cell hopping on the diagonal, the
    inter-cell bond pointing to the previous cell. Its Bloch symbol is
    ``t1 + t2 e^{ik}``.
    """
    if length < 2:
        raise ValueError("length must be >= 2")
    a = sp.diags([np.full(length, complex(t1)), np.full(length - 1, complex(t2))], [0, 1],
                 shape=(length, length))
    return SparseComplex.from_matrix(a)


def chain_winding_number(t1: float, t2: float, n_k: int = 4096) -> int:
    """Winding of ``k -> t1 + t2 e^{ik}`` around 0, by summing phase increments."""
    k = np.linspace(0.0, 2 * np.pi, n_k + 1)
    z = t1 + t2 * np.exp(1j * k)
    if np.min(np.abs(z)) < 1e-12:
        raise ValueError("symbol vanishes on the unit circle; winding undefined")
    dphi = np.angle(z[1:] / z[:-1])
    return int(round(dphi.sum() / (2 * np.pi)))


def chain_position(length: int) -> np.ndarray:
    """Position ``j - length // 2`` of each chain site, with 0 replaced by 1."""
    x = np.arange(length, dtype=float) - length // 2
    x[x == 0] = 1.0
    return x
