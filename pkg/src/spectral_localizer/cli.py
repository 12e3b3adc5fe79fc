"""Command-line front end.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure.
Settings come from an optional INI file (``--config``) and are overridden
by command-line flags.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigError, LocalizerError, NumericalFailure
from .experiment import (
    SweepConfig,
    clean_reference,
    default_lambda_grid,
    export_spectrum,
    hamiltonian_matrix,
    localizer_matrix,
    run_sweep,
    spectrum_csv,
    sweep_csv,
)
from .inertia import half_signature, spectral_gap
from .lattice import DISK, SQUARE, LatticeGeometry, operator_norm
from .localizer import bounds_report, build_dirac, commutator_norm, local_marker_map
from .models import build_interface_pip
from .specflow import chern_real_space, fermi_projection

log = logging.getLogger("spectral_localizer")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _bool(s: str) -> bool:
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in str(s).replace(";", ",").split(",") if x.strip())


def _centers(s: str) -> tuple[tuple[float, float], ...]:
    out = []
    for item in str(s).split(";"):
        if item.strip():
            x, y = _floats(item)
            out.append((x, y))
    return tuple(out)


# section -> key -> parser; the key doubles as the argparse dest
SCHEMA = {
    "model": {"mu": float, "delta": float, "lambda": float, "mu_right": float},
    "localizer": {"rho": float, "kappa": str, "truncation": str, "strict": _bool},
    "sweep": {"lambda_grid": _floats, "lambda_min": float, "lambda_max": float, "lambda_step": float,
              "samples": int, "h_side": int, "h_gap_threshold": float, "min_success": float},
    "spectrum": {"target": str, "bc": str, "k": int, "side": int},
    "marker": {"centers": _centers, "grid": int, "spacing": float, "size": int},
    "oracle": {"side": int, "bc": str, "margin": float},
    "run": {"seed": int, "threads": int, "out": str, "format": str, "plot": str},
}

DEFAULTS = {
    "mu": 0.25, "delta": -0.35, "lambda": 0.0, "mu_right": None,
    "rho": 15.0, "kappa": "auto", "truncation": DISK, "strict": False,
    "lambda_grid": None, "lambda_min": None, "lambda_max": None, "lambda_step": None,
    "samples": 20, "h_side": None, "h_gap_threshold": 1e-8, "min_success": 0.9,
    "target": "H", "bc": "periodic", "k": None, "side": None,
    "centers": None, "grid": 3, "spacing": 1.0, "size": None,
    "margin": 0.0,
    "seed": 0, "threads": None, "out": None, "format": "csv", "plot": None,
}


def read_config(path: str | os.PathLike) -> dict:
    """Parse an INI file into a flat ``key -> value`` dict; unknown sections or keys are errors."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    out = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            try:
                out[key] = SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {exc}") from None
    return out


def resolve(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    if args.config:
        opts.update(read_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    if opts["format"] != "csv":
        raise ConfigError(f"unsupported format {opts['format']!r}")
    if opts["plot"] not in (None, "svg"):
        raise ConfigError(f"unsupported plot type {opts['plot']!r}")
    if opts["truncation"] not in (DISK, SQUARE):
        raise ConfigError(f"truncation must be {DISK!r} or {SQUARE!r}")
    return opts


def _kappa_policy(opts) -> tuple[str, float | None]:
    k = str(opts["kappa"]).strip().lower()
    if k in ("auto", "theorem1"):
        return k, None
    try:
        val = float(k)
    except ValueError:
        raise ConfigError(f"kappa must be 'auto', 'theorem1' or a positive number, got {k!r}") from None
    if not val > 0:
        raise ConfigError("kappa must be positive")
    return "fixed", val


def sweep_config(opts, grid=None) -> SweepConfig:
    policy, kval = _kappa_policy(opts)
    if grid is None:
        grid = opts["lambda_grid"]
    if grid is None and opts["lambda_max"] is not None:
        lo, hi = opts["lambda_min"] or 0.0, opts["lambda_max"]
        step = opts["lambda_step"] or 0.25
        grid = tuple(lo + step * k for k in range(int(math.floor((hi - lo) / step + 1e-9)) + 1))
    if grid is None:
        grid = default_lambda_grid()
    try:
        return SweepConfig(mu=opts["mu"], delta=opts["delta"], lambda_grid=grid, samples=opts["samples"],
                           base_seed=opts["seed"], rho=opts["rho"], kappa_policy=policy, kappa=kval,
                           truncation=opts["truncation"], h_side=opts["h_side"],
                           h_gap_threshold=opts["h_gap_threshold"], threads=opts["threads"] or 1)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _publish(tmp: str, target: Path) -> None:
    umask = os.umask(0)
    os.umask(umask)
    os.chmod(tmp, 0o666 & ~umask)
    os.replace(tmp, target)


def write_output(text: str, out: str | None) -> None:
    """Write to ``out`` atomically (temp file + rename), or to stdout."""
    if out is None:
        sys.stdout.write(text)
        return
    target = Path(out)
    fd, tmp = tempfile.mkstemp(dir=target.parent or Path("."), prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        _publish(tmp, target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _svg_path(opts) -> Path | None:
    if opts["plot"] != "svg":
        return None
    return Path(opts["out"]).with_suffix(".svg") if opts["out"] else Path("plot.svg")


def _plot(path: Path, xs, series: dict, xlabel: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, ys in series.items():
        ax.plot(xs, ys, "o", ms=3, label=label)
    ax.set_xlabel(xlabel)
    ax.legend()
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".svg")
    os.close(fd)
    fig.savefig(tmp, format="svg", metadata={"Date": None})
    plt.close(fig)
    _publish(tmp, path)


def _kv_csv(pairs) -> str:
    lines = ["key,value"]
    for k, v in pairs:
        if isinstance(v, float):
            v = format(v, ".12g")
        lines.append(f"{k},{v}")
    return "\n".join(lines) + "\n"


def _geometry_for(opts) -> LatticeGeometry:
    return LatticeGeometry(opts["truncation"], radius=int(math.ceil(opts["rho"])))


def _bounds_pairs(rep):
    return [("g", rep.g), ("norm_H", rep.norm_H), ("norm_comm", rep.norm_comm), ("kappa", rep.kappa),
            ("rho", rep.rho), ("kappa_max", rep.kappa_max), ("rho_min", rep.rho_min),
            ("kappa_ok", str(rep.kappa_ok).lower()), ("rho_ok", str(rep.rho_ok).lower())]


def _measured_bounds(opts, kappa):
    """Bounds with ``g``, ``||H||`` from H(lambda) on the torus and ``||[D0, H]||`` on the disk."""
    cfg = sweep_config(opts, grid=(opts["lambda"],))
    torus = cfg.hamiltonian_geometry
    h_t = hamiltonian_matrix(opts["mu"], opts["delta"], opts["lambda"], torus, opts["seed"])
    g = spectral_gap(h_t, method="shift_invert").gap
    geo = _geometry_for(opts)
    h = hamiltonian_matrix(opts["mu"], opts["delta"], opts["lambda"], geo, opts["seed"])
    return bounds_report(g, operator_norm(h_t, tol=1e-9), commutator_norm(h, build_dirac(geo)),
                         kappa, opts["rho"])


def cmd_signature(opts) -> int:
    ref = clean_reference(sweep_config(opts, grid=(opts["lambda"],)))
    loc = localizer_matrix(opts["mu"], opts["delta"], opts["lambda"], opts["rho"], ref.kappa, opts["seed"],
                           truncation=opts["truncation"])
    rep = _measured_bounds(opts, ref.kappa)
    if opts["strict"] and not rep.admissible:
        raise NumericalFailure(f"strict mode: kappa={ref.kappa:.6g}, rho={opts['rho']} violate the "
                               f"sufficient bounds (kappa_max={rep.kappa_max:.6g}, rho_min={rep.rho_min:.6g})")
    hs = half_signature(loc)
    gap = spectral_gap(loc, method="shift_invert").gap
    pairs = [("mu", opts["mu"]), ("delta", opts["delta"]), ("lambda", opts["lambda"]),
             ("seed", opts["seed"]), ("half_sig", hs), ("gap_L", gap)] + _bounds_pairs(rep)
    write_output(_kv_csv(pairs), opts["out"])
    return EXIT_OK


def cmd_sweep(opts) -> int:
    if opts["threads"] is None:
        opts["threads"] = os.cpu_count() or 1
    cfg = sweep_config(opts)
    rows = run_sweep(cfg)
    bad = [r for r in rows if (r.samples - r.n_failed) < opts["min_success"] * r.samples]
    for r in rows:
        if r.n_failed:
            log.warning("lambda=%g: %d of %d samples failed", r.lam, r.n_failed, r.samples)
    if bad:
        log.error("%d lambda points below the success threshold", len(bad))
        return EXIT_NUMERIC
    write_output(sweep_csv(rows), opts["out"])
    svg = _svg_path(opts)
    if svg:
        lam = [r.lam for r in rows]
        _plot(svg, lam, {"mean half-signature": [r.mean_half_sig for r in rows],
                         "min gap L": [r.min_gap_L for r in rows],
                         "min gap H": [r.min_gap_H for r in rows]}, "lambda")
    return EXIT_OK


def cmd_spectrum(opts) -> int:
    target, bc = opts["target"].upper(), opts["bc"].lower()
    if target not in ("H", "L"):
        raise ConfigError("target must be H or L")
    if bc not in ("periodic", "open"):
        raise ConfigError("bc must be periodic or open")
    if target == "L":
        ref = clean_reference(sweep_config(opts, grid=(opts["lambda"],)))
        mat = localizer_matrix(opts["mu"], opts["delta"], opts["lambda"], opts["rho"], ref.kappa,
                               opts["seed"], truncation=opts["truncation"])
    else:
        if bc == "periodic":
            geo = LatticeGeometry.torus(opts["side"] or 2 * int(math.ceil(opts["rho"])))
        else:
            geo = _geometry_for(opts)
        mat = hamiltonian_matrix(opts["mu"], opts["delta"], opts["lambda"], geo, opts["seed"])
    vals = export_spectrum(mat, opts["k"])
    write_output(spectrum_csv(vals), opts["out"])
    svg = _svg_path(opts)
    if svg:
        _plot(svg, np.arange(len(vals)), {f"spectrum of {target}": vals}, "index")
    return EXIT_OK


def cmd_marker(opts) -> int:
    centers = opts["centers"]
    if centers is None:
        n, s = opts["grid"], opts["spacing"]
        offs = (np.arange(n) - (n - 1) / 2) * s
        centers = tuple((float(x), float(y)) for x in offs for y in offs)
    reach = max(max(abs(c[0]), abs(c[1])) for c in centers)
    size = opts["size"] or int(math.ceil(opts["rho"] + reach)) + 1
    geo = LatticeGeometry(SQUARE, radius=size)
    if opts["mu_right"] is not None:
        if opts["lambda"]:
            raise ConfigError("the two-phase sample is clean; set lambda = 0")
        h = build_interface_pip(opts["mu"], opts["mu_right"], opts["delta"], geo)
    else:
        h = hamiltonian_matrix(opts["mu"], opts["delta"], opts["lambda"], geo, opts["seed"])
    ref = clean_reference(sweep_config(opts, grid=(opts["lambda"],)))
    res = local_marker_map(h, geo, ref.kappa, opts["rho"], centers, opts["truncation"])
    lines = ["x,y,half_sig"] + [f"{format(x, '.12g')},{format(y, '.12g')},{format(v, '.12g')}"
                                for (x, y), v in res.items()]
    write_output("\n".join(lines) + "\n", opts["out"])
    return EXIT_OK


def cmd_oracle(opts) -> int:
    bc = opts["bc"].lower()
    side = opts["side"] or 30
    if bc == "periodic":
        geo = LatticeGeometry.torus(side)
    elif bc == "open":
        geo = LatticeGeometry(SQUARE, radius=side // 2)
    else:
        raise ConfigError("bc must be periodic or open")
    h = hamiltonian_matrix(opts["mu"], opts["delta"], opts["lambda"], geo, opts["seed"])
    p = fermi_projection(h, mode="mobility" if opts["lambda"] else "strict")
    ch = chern_real_space(p, geo, margin=opts["margin"])
    pairs = [("mu", opts["mu"]), ("delta", opts["delta"]), ("lambda", opts["lambda"]), ("bc", bc),
             ("side", side), ("chern", ch)]
    write_output(_kv_csv(pairs), opts["out"])
    return EXIT_OK


def cmd_bounds(opts) -> int:
    ref = clean_reference(sweep_config(opts, grid=(opts["lambda"],)))
    write_output(_kv_csv(_bounds_pairs(_measured_bounds(opts, ref.kappa))), opts["out"])
    return EXIT_OK


COMMANDS = {"signature": cmd_signature, "sweep": cmd_sweep, "spectrum": cmd_spectrum,
            "marker": cmd_marker, "oracle": cmd_oracle, "bounds": cmd_bounds}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [model], [localizer], ... sections")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=["csv"])
    common.add_argument("--threads", type=int)
    common.add_argument("--plot", choices=["svg"])
    common.add_argument("--mu", type=float)
    common.add_argument("--delta", type=float)
    common.add_argument("--lambda", dest="lambda", type=float)
    common.add_argument("--rho", type=float)
    common.add_argument("--kappa", help="'auto', 'theorem1' or a number")
    common.add_argument("--truncation", choices=[DISK, SQUARE])
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="spectral-localizer", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("signature", parents=[common], help="half-signature of the localizer")
    s.add_argument("--strict", action="store_const", const=True,
                   help="fail unless kappa and rho satisfy the sufficient bounds")
    s = sub.add_parser("sweep", parents=[common], help="disorder sweep over lambda")
    s.add_argument("--lambda-grid", dest="lambda_grid", type=_floats)
    s.add_argument("--samples", type=int)
    s.add_argument("--h-side", dest="h_side", type=int)
    s = sub.add_parser("spectrum", parents=[common], help="eigenvalues of H or L")
    s.add_argument("--target", choices=["H", "L"])
    s.add_argument("--bc", choices=["periodic", "open"])
    s.add_argument("--k", type=int, help="only the k eigenvalues closest to 0")
    s.add_argument("--side", type=int)
    s = sub.add_parser("marker", parents=[common], help="local marker on a grid of centers")
    s.add_argument("--centers", type=_centers, help="'x,y;x,y;...'")
    s.add_argument("--grid", type=int)
    s.add_argument("--spacing", type=float)
    s.add_argument("--size", type=int, help="half side of the open square sample")
    s.add_argument("--mu-right", dest="mu_right", type=float, help="mu for n1 >= 0 (two-phase sample)")
    s = sub.add_parser("oracle", parents=[common], help="real-space Chern number")
    s.add_argument("--side", type=int)
    s.add_argument("--bc", choices=["periodic", "open"])
    s.add_argument("--margin", type=float)
    sub.add_parser("bounds", parents=[common], help="sufficient-bound report")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts)
    except (ConfigError, ValueError) as exc:
        # GeometryError and DimensionError are ValueErrors: bad input, not bad numerics
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, LocalizerError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
