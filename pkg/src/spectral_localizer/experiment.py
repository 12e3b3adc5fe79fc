"""Disorder-ensemble sweeps of the localizer half-signature and spectral gaps."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import GapClosedError, NumericalFailure
from .inertia import DENSE_LIMIT, dense_eigenvalues, half_signature, spectral_gap
from .lattice import DISK, LatticeGeometry, MatrixLike, operator_norm
from .localizer import (
    LocalizerParams,
    assemble_even_localizer,
    auto_kappa,
    build_dirac,
    commutator_norm,
    theorem_kappa,
)
from .models import ModelParams, build_clean_pip, build_dirty, sample_disorder

KAPPA_POLICIES = ("auto", "fixed", "theorem1")
CSV_HEADER = ("lambda", "mean_half_sig", "min_gap_L", "mean_gap_L", "min_gap_H", "mean_gap_H",
              "n_closed_L", "n_closed_H", "samples")


def default_lambda_grid() -> tuple[float, ...]:
    return tuple(0.25 * k for k in range(33))


@dataclass(frozen=True)
class SweepConfig:
    mu: float = 0.25
    delta: float = -0.35
    lambda_grid: tuple[float, ...] = field(default_factory=default_lambda_grid)
    samples: int = 20
    base_seed: int = 0
    rho: float = 15.0
    kappa_policy: str = "auto"
    kappa: float | None = None
    truncation: str = DISK
    h_side: int | None = None
    h_gap_threshold: float = 1e-8
    dense_limit: int = DENSE_LIMIT
    threads: int = 1

    def __post_init__(self):
        grid = tuple(float(x) for x in self.lambda_grid)
        object.__setattr__(self, "lambda_grid", grid)
        if not grid:
            raise ValueError("lambda grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("lambda grid must be strictly increasing")
        if grid[0] < 0:
            raise ValueError("lambda values must be >= 0")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if not 0 <= self.base_seed < 2 ** 64:
            raise ValueError("base_seed must be a 64-bit unsigned integer")
        if self.rho < 1:
            raise ValueError("rho must be >= 1")
        if self.kappa_policy not in KAPPA_POLICIES:
            raise ValueError(f"kappa_policy must be one of {KAPPA_POLICIES}")
        if self.kappa_policy == "fixed" and not (self.kappa and self.kappa > 0):
            raise ValueError("fixed kappa policy needs kappa > 0")
        if self.h_side is not None and self.h_side < 2:
            raise ValueError("h_side must be >= 2")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def localizer_geometry(self) -> LatticeGeometry:
        return LatticeGeometry(self.truncation, radius=int(math.ceil(self.rho)))

    @property
    def hamiltonian_geometry(self) -> LatticeGeometry:
        """Periodic square on which the gap of H is measured (side ``2 rho`` by default)."""
        return LatticeGeometry.torus(self.h_side or 2 * int(math.ceil(self.rho)))


@dataclass(frozen=True)
class CleanReference:
    """Scales of the clean model that fix the tuning ``kappa`` for a whole sweep."""

    g: float
    norm_H: float
    norm_comm: float
    kappa: float


@dataclass(frozen=True)
class SampleResult:
    lam_index: int
    sample_index: int
    seed: int
    half_sig: float | None
    gap_L: float
    gap_H: float
    error: str | None = None


@dataclass(frozen=True)
class SweepRow:
    lam: float
    mean_half_sig: float
    half_sig_histogram: dict
    mean_gap_L: float
    min_gap_L: float
    mean_gap_H: float
    min_gap_H: float
    n_gap_closed_L: int
    n_gap_closed_H: int
    samples: int
    n_failed: int = 0

    def fraction(self, value: float) -> float:
        return self.half_sig_histogram.get(value, 0) / self.samples

    def csv_fields(self) -> list[str]:
        vals = [self.lam, self.mean_half_sig, self.min_gap_L, self.mean_gap_L, self.min_gap_H,
                self.mean_gap_H]
        return [format(v, ".12g") for v in vals] + [
            str(self.n_gap_closed_L), str(self.n_gap_closed_H), str(self.samples)]


def sample_seed(base_seed: int, lam_index: int, sample_index: int) -> int:
    """64-bit disorder seed of one realization; independent of grid length and sample count."""
    ss = np.random.SeedSequence([int(base_seed), int(lam_index), int(sample_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def clean_reference(config: SweepConfig) -> CleanReference:
    """``g`` and ``||H||`` on the clean torus, ``||[D0, H]||`` on the clean localizer geometry."""
    params = ModelParams(config.mu, config.delta)
    h_torus = build_clean_pip(params, config.hamiltonian_geometry)
    g = spectral_gap(h_torus, method="shift_invert").gap
    if not g > 1e-10:
        raise GapClosedError("clean Hamiltonian is gapless; kappa cannot be tuned")
    norm_h = operator_norm(h_torus, tol=1e-9)
    geo = config.localizer_geometry
    c = commutator_norm(build_clean_pip(params, geo), build_dirac(geo))
    if config.kappa_policy == "fixed":
        kappa = float(config.kappa)
    elif config.kappa_policy == "theorem1":
        kappa = theorem_kappa(g, norm_h, c)
    else:
        kappa = auto_kappa(g, c)
    return CleanReference(g, norm_h, c, kappa)


def run_sample(config: SweepConfig, kappa: float, lam_index: int, sample_index: int) -> SampleResult:
    """One realization: localizer half-signature and gap (open disk), gap of H (torus)."""
    lam = config.lambda_grid[lam_index]
    seed = sample_seed(config.base_seed, lam_index, sample_index)
    params = ModelParams(config.mu, config.delta, lam)
    geo, torus = config.localizer_geometry, config.hamiltonian_geometry
    try:
        h = build_dirty(params, geo, sample_disorder(geo, seed) if lam else None)
        loc = assemble_even_localizer(h, build_dirac(geo), LocalizerParams(kappa, config.rho, (0.0, 0.0),
                                                                           config.truncation))
        gap_l = spectral_gap(loc, method="shift_invert").gap
        try:
            hs = half_signature(loc)
        except GapClosedError:
            hs = None
        h_t = build_dirty(params, torus, sample_disorder(torus, seed) if lam else None)
        gap_h = spectral_gap(h_t, method="shift_invert").gap
    except NumericalFailure as exc:
        return SampleResult(lam_index, sample_index, seed, None, math.nan, math.nan, str(exc))
    return SampleResult(lam_index, sample_index, seed, hs, gap_l, gap_h)


def _run_task(args):
    return run_sample(*args)


def aggregate(config: SweepConfig, lam_index: int, results: Sequence[SampleResult]) -> SweepRow:
    ok = [r for r in results if r.error is None]
    sigs = [r.half_sig for r in ok if r.half_sig is not None]
    gl = np.array([r.gap_L for r in ok])
    gh = np.array([r.gap_H for r in ok])
    nan = math.nan
    return SweepRow(
        lam=config.lambda_grid[lam_index],
        mean_half_sig=float(np.mean(sigs)) if sigs else nan,
        half_sig_histogram=dict(sorted(Counter(sigs).items())),
        mean_gap_L=float(gl.mean()) if gl.size else nan,
        min_gap_L=float(gl.min()) if gl.size else nan,
        mean_gap_H=float(gh.mean()) if gh.size else nan,
        min_gap_H=float(gh.min()) if gh.size else nan,
        n_gap_closed_L=sum(r.half_sig is None for r in ok),
        n_gap_closed_H=int(np.sum(gh < config.h_gap_threshold)),
        samples=len(results),
        n_failed=len(results) - len(ok),
    )


def run_samples(config: SweepConfig, reference: CleanReference | None = None) -> list[SampleResult]:
    """All realizations of the sweep, in (lambda, sample) order regardless of ``threads``."""
    ref = reference or clean_reference(config)
    tasks = [(config, ref.kappa, i, s) for i in range(len(config.lambda_grid)) for s in range(config.samples)]
    if config.threads == 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=config.threads) as pool:
        return list(pool.map(_run_task, tasks, chunksize=1))


def run_sweep(config: SweepConfig, reference: CleanReference | None = None) -> list[SweepRow]:
    results = run_samples(config, reference)
    n = config.samples
    return [aggregate(config, i, results[i * n:(i + 1) * n]) for i in range(len(config.lambda_grid))]


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow(row.csv_fields())
    return buf.getvalue()


def export_spectrum(a: MatrixLike, k_lowest: int | None = None,
                    dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    """Sorted eigenvalues; with ``k_lowest``, only the ``k`` closest to zero."""
    vals = dense_eigenvalues(a, dense_limit)
    if k_lowest is not None:
        vals = np.sort(vals[np.argsort(np.abs(vals), kind="stable")[:k_lowest]])
    return vals


def spectrum_csv(values: Sequence[float]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("index", "value"))
    for i, v in enumerate(values):
        w.writerow((i, format(float(v), ".12g")))
    return buf.getvalue()


@dataclass(frozen=True)
class MobilityReport:
    lam: float
    g0: float
    kappa: float
    gap_H_quantiles: tuple[float, ...]
    localizer_gap_quantiles: tuple[float, ...]
    half_sig_mode: float | None
    half_sig_mode_fraction: float
    n_closed_L: int


QUANTILES = (0.0, 0.25, 0.5, 0.75, 1.0)


def mobility_probe(config: SweepConfig, lam: float) -> MobilityReport:
    """Statistics at a single ``lam``: near-zero H spectrum vs. open localizer gap."""
    cfg = replace(config, lambda_grid=(lam,))
    ref = clean_reference(cfg)
    results = [r for r in run_samples(cfg, ref) if r.error is None]
    sigs = Counter(r.half_sig for r in results if r.half_sig is not None)
    mode, count = sigs.most_common(1)[0] if sigs else (None, 0)
    gh = np.array([r.gap_H for r in results])
    gl = np.array([r.gap_L for r in results])
    return MobilityReport(
        lam=float(lam), g0=ref.g, kappa=ref.kappa,
        gap_H_quantiles=tuple(float(q) for q in np.quantile(gh, QUANTILES)),
        localizer_gap_quantiles=tuple(float(q) for q in np.quantile(gl, QUANTILES)),
        half_sig_mode=mode, half_sig_mode_fraction=count / cfg.samples,
        n_closed_L=sum(r.half_sig is None for r in results),
    )


def stability_grid(mu: float, delta: float, kappas: Sequence[float], rhos: Sequence[float],
                   truncation: str = DISK) -> dict:
    """Clean-model ``(half_sig, gap_L)`` for every ``(kappa, rho)`` pair."""
    out = {}
    for rho in rhos:
        geo = LatticeGeometry(truncation, radius=int(math.ceil(rho)))
        h = build_clean_pip(ModelParams(mu, delta), geo)
        d0 = build_dirac(geo)
        for kappa in kappas:
            loc = assemble_even_localizer(h, d0, LocalizerParams(kappa, rho, (0.0, 0.0), truncation))
            out[(kappa, rho)] = (half_signature(loc), spectral_gap(loc, method="shift_invert").gap)
    return out


def localizer_matrix(mu: float, delta: float, lam: float, rho: float, kappa: float, seed: int = 0,
                     center=(0.0, 0.0), truncation: str = DISK):
    """Localizer of one realization on the open disk (or square) of radius ``ceil(rho)``."""
    geo = LatticeGeometry(truncation, radius=int(math.ceil(rho)))
    h = build_dirty(ModelParams(mu, delta, lam), geo, sample_disorder(geo, seed) if lam else None)
    return assemble_even_localizer(h, build_dirac(geo, center), LocalizerParams(kappa, rho, center, truncation),
                                   geo)


def hamiltonian_matrix(mu: float, delta: float, lam: float, geometry: LatticeGeometry, seed: int = 0):
    return build_dirty(ModelParams(mu, delta, lam), geometry,
                       sample_disorder(geometry, seed) if lam else None)
