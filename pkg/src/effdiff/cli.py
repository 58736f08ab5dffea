"""Command-line front end.

Usage::

    effdiff SUBCOMMAND [--config FILE] [--output PATH] [--workers N] [-v] [--KEY VALUE ...]

Subcommands: ``layered``, ``estimate``, ``cellprob``, ``mc2d``, ``mc3d``,
``transient``.  A config file holds flat ``key=value`` lines (``#`` starts a
comment) using the same keys as the flags; flags override file entries.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .comparison import TransientSettings, transient_comparison
from .errors import ConfigError, EffDiffError
from .grid import StructuredGrid, TensorField
from .linalg import PRECONDITIONERS, SolverOptions
from .masks import (SynthLayerSpec, file_mask_reader, ingest_mask, layer_profile,
                    synth_layered_mask)
from .montecarlo import McConfig, campaign_csv, default_workers, monte_carlo
from .solver import EstimationBC, estimate, solve_cell_problem
from .tensors import LayeredMedium, harmonic_mean_profile, layered_effective_tensor

log = logging.getLogger("effdiff")

REQUIRED = object()


def _positive(v):
    return v > 0


def _fraction(v):
    return 0 < v < 1


def _floats(text):
    return tuple(float(t) for t in str(text).split(","))


@dataclass(frozen=True)
class Param:
    type: object
    default: object = None
    check: object = None
    help: str = ""


_MASK = {
    "mask": Param(str, None, help="PGM phase mask (dark = lipid); synthetic stripes if omitted"),
    "threshold": Param(float, None, help="grey level separating lipid from aqueous"),
    "lx": Param(float, 4.359e-7, _positive, "domain length along x"),
    "p2": Param(float, 0.1878, _fraction, "lipid volume fraction of synthetic stripes"),
    "layers": Param(int, 8, _positive, "number of synthetic layers"),
    "nx": Param(int, 256, _positive, "synthetic raster columns"),
    "ny": Param(int, 16, _positive, "synthetic raster rows"),
    "wobble": Param(float, 0.0, lambda v: v >= 0, "layer wobble amplitude / pitch"),
    "gaps": Param(float, 0.0, lambda v: v >= 0, "expected gaps per layer"),
    "mask_seed": Param(int, 0, help="seed of the synthetic mask"),
    "d1": Param(float, 1e-14, _positive, "aqueous diffusivity"),
    "d2n": Param(float, 1e-12, _positive, "lipid diffusivity normal to layers (x)"),
    "d2t": Param(float, 1e-10, _positive, "lipid diffusivity along layers (y)"),
    "kp": Param(float, 1.0, _positive, "partition coefficient"),
    "c0": Param(float, 1.0, help="inlet concentration"),
    "c1": Param(float, 0.0, help="bulk concentration"),
    "mass": Param(float, None, _positive, "mass transfer coefficient M (default 0.5 d_ref / L)"),
    "tol": Param(float, 1e-10, _positive, "relative residual tolerance"),
    "precond": Param(str, "jacobi", lambda v: v in PRECONDITIONERS, "jacobi or amg"),
}

_MC = {
    "n": Param(int, REQUIRED, _positive, "sub-cells per axis"),
    "trials": Param(int, REQUIRED, _positive, "sample size"),
    "q": Param(_floats, REQUIRED, lambda v: min(v) > 0, "diagonal of Q, comma separated"),
    "seed": Param(int, 0, help="master seed"),
    "refine": Param(int, 3, _positive, "elements per sub-cell edge"),
    "mass": _MASK["mass"],
    "c0": _MASK["c0"],
    "c1": _MASK["c1"],
    "tol": _MASK["tol"],
    "precond": _MASK["precond"],
}

SCHEMAS = {
    "layered": {
        "p1": Param(float, REQUIRED, _fraction, "aqueous volume fraction"),
        "d1": Param(float, REQUIRED, _positive, "aqueous diffusivity"),
        "d2n": Param(float, REQUIRED, _positive, "lipid diffusivity normal to layers"),
        "d2t": Param(float, None, _positive, "lipid diffusivity along layers (default d2n)"),
        "kp": Param(float, 1.0, _positive, "partition coefficient"),
        "dim": Param(int, 3, lambda v: v in (2, 3), "2 or 3"),
    },
    "estimate": dict(_MASK),
    "cellprob": {
        "pattern": Param(str, "checkerboard", lambda v: v in ("checkerboard", "layers"),
                         "checkerboard or layers"),
        "d1": Param(float, 1.0, _positive, "phase-1 diffusivity"),
        "d2": Param(float, 4.0, _positive, "phase-2 diffusivity"),
        "p1": Param(float, 0.5, _fraction, "phase-1 fraction (layers)"),
        "cells": Param(int, 32, lambda v: v >= 2, "cells per axis"),
        "dim": Param(int, 2, lambda v: v in (2, 3), "2 or 3"),
        "tol": _MASK["tol"],
    },
    "mc2d": dict(_MC),
    "mc3d": dict(_MC),
    "transient": dict(_MASK, **{
        "t_end": Param(float, None, _positive, "end time (default 2 sigma L^2 / d_eff)"),
        "dt": Param(float, None, _positive, "time step (default t_end / 200)"),
        "inlet": Param(str, "dirichlet", lambda v: v in ("dirichlet", "insulated"),
                       "dirichlet or insulated"),
        "amplitude": Param(float, 1e-6, help="initial Gaussian amplitude"),
        "sharpness": Param(float, 1000.0, _positive, "initial Gaussian exponent factor"),
        "length": Param(float, None, _positive, "initial Gaussian length (default L/2)"),
        "d_eff": Param(float, None, _positive, "homogenized diffusivity (default: estimate)"),
    }),
}


@dataclass
class RunConfig:
    subcommand: str
    params: dict
    output: Path | None = None
    verbosity: int = 0
    workers: int = 1
    extra: dict = field(default_factory=dict)


def read_config_file(path):
    """Parse flat ``key=value`` lines; ``#`` starts a comment."""
    entries = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}", "expected key=value")
        entries[key.strip().replace("-", "_")] = value.strip()
    return entries


def _convert(key, spec, raw):
    try:
        value = spec.type(raw)
    except (TypeError, ValueError):
        raise ConfigError(key, f"cannot parse {raw!r}") from None
    if spec.check is not None and not spec.check(value):
        raise ConfigError(key, f"invalid value {raw!r}")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="effdiff", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, schema in SCHEMAS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--output", "-o", help="CSV output path")
        p.add_argument("--workers", help="parallel processes (default: all cores)")
        p.add_argument("--verbose", "-v", action="count", default=0)
        for key, spec in schema.items():
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None, help=spec.help)
    return parser


def parse_config(argv=None) -> RunConfig:
    """Resolve flags and an optional config file into a validated config.

    Raises :class:`ConfigError` naming the offending key.
    """
    args = build_parser().parse_args(argv)
    schema = SCHEMAS[args.subcommand]
    raw = {}
    if args.config:
        file_entries = read_config_file(args.config)
        for key in file_entries:
            if key not in schema and key not in ("output", "workers"):
                raise ConfigError(key, f"unknown key for {args.subcommand}")
        raw.update(file_entries)
    for key in schema:
        if getattr(args, key) is not None:
            raw[key] = getattr(args, key)
    params = {}
    for key, spec in schema.items():
        if key in raw:
            params[key] = _convert(key, spec, raw[key])
        elif spec.default is REQUIRED:
            raise ConfigError(key, "required")
        else:
            params[key] = spec.default
    output = args.output or raw.get("output")
    workers = args.workers or raw.get("workers")
    workers = default_workers() if workers is None else _convert("workers", Param(int, check=_positive), workers)
    return RunConfig(args.subcommand, params, Path(output) if output else None,
                     args.verbose, workers)


def _settings_header(config: RunConfig):
    lines = [f"# subcommand={config.subcommand}"]
    for key, value in config.params.items():
        if isinstance(value, tuple):
            value = ",".join(repr(v) for v in value)
        lines.append(f"# {key}={value}")
    return "\n".join(lines) + "\n"


def _write(config: RunConfig, text):
    if config.output is None:
        return
    try:
        config.output.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {config.output}: {exc.strerror}") from exc


def _rows(config, header, rows):
    body = [",".join(header)] + [",".join(repr(v) if isinstance(v, float) else str(v)
                                          for v in row) for row in rows]
    return _settings_header(config) + "\n".join(body) + "\n"


def run_layered(config, out):
    p = config.params
    dim = p["dim"]
    d2t = p["d2t"] if p["d2t"] is not None else p["d2n"]
    d2 = np.full(dim, d2t)
    d2[1] = p["d2n"]
    medium = LayeredMedium.from_fractions(p["p1"], np.full(dim, p["d1"]), d2, p["kp"])
    eff = np.diag(layered_effective_tensor(medium))
    print(f"normal      {eff[1]:.4e}", file=out)
    print(f"tangential  {eff[0]:.4e}", file=out)
    rows = [(f"d_eff_{i + 1}{i + 1}", float(v)) for i, v in enumerate(eff)]
    _write(config, _rows(config, ("component", "value"), rows))


def _mask_field(p):
    if p["mask"]:
        mask = file_mask_reader(p["mask"], p["threshold"])
        mask.pixel_size = p["lx"] / mask.shape[1]
        for warning in mask.meta["warnings"]:
            log.warning(warning)
    else:
        spec = SynthLayerSpec(p["p2"], p["layers"], p["nx"], p["ny"], p["wobble"], p["gaps"],
                              seed=p["mask_seed"])
        mask = synth_layered_mask(spec, p["lx"] / p["nx"])
    fld = ingest_mask(mask, p["d1"], np.diag([p["d2n"], p["d2t"]]), p["kp"])
    reference = harmonic_mean_profile(layer_profile(mask, p["d1"], p["d2n"], p["kp"]))
    return mask, fld, reference


def _mass(p, d_ref, length):
    return p["mass"] if p["mass"] is not None else 0.5 * d_ref / length


def run_estimate(config, out):
    p = config.params
    mask, fld, reference = _mask_field(p)
    bc = EstimationBC(p["c0"], p["c1"], _mass(p, reference, p["lx"]))
    est = estimate(fld, bc, SolverOptions(p["tol"], preconditioner=p["precond"]))
    rel = est.d_eff / reference - 1.0
    print(f"lipid fraction  {mask.lipid_fraction:.4f}", file=out)
    print(f"d_eff estimate  {est.d_eff:.4e}", file=out)
    print(f"harmonic mean   {reference:.4e}", file=out)
    print(f"rel. difference {100 * rel:.2f}%", file=out)
    rows = [("d_eff", est.d_eff), ("harmonic_mean", reference), ("u_out", est.u_out),
            ("n_average", est.n_average), ("lipid_fraction", mask.lipid_fraction)]
    _write(config, _rows(config, ("quantity", "value"), rows))


def run_cellprob(config, out):
    p = config.params
    dim, n = p["dim"], p["cells"]
    grid = StructuredGrid.unit(dim, n)
    idx = np.meshgrid(*(np.arange(n),) * dim, indexing="ij")
    if p["pattern"] == "checkerboard":
        if n % 2:
            raise ConfigError("cells", "checkerboard needs an even cell count")
        phase2 = sum(i // (n // 2) for i in idx) % 2 == 1
    else:
        phase2 = idx[1] >= round(p["p1"] * n)
    tensors = np.where(phase2[..., None, None], p["d2"] * np.eye(dim), p["d1"] * np.eye(dim))
    sol = solve_cell_problem(TensorField(grid, tensors), SolverOptions(p["tol"]))
    for row in sol.effective:
        print("  ".join(f"{v: .6e}" for v in row), file=out)
    rows = [(f"d_eff_{i + 1}{j + 1}", float(sol.effective[i, j]))
            for i in range(dim) for j in range(dim)]
    _write(config, _rows(config, ("component", "value"), rows))


def run_mc(config, out):
    p = config.params
    dim = 2 if config.subcommand == "mc2d" else 3
    mc = McConfig(dim, p["n"], p["trials"], p["q"], p["seed"], p["refine"], p["c0"], p["c1"],
                  p["mass"], p["tol"], p["precond"])
    stats = monte_carlo(mc, config.workers)
    print(f"N={mc.n} trials={mc.trials} refine={mc.refine}", file=out)
    print(f"mean {stats.mean:.4f}  std {stats.std:.4f}  stderr {stats.stderr:.4f}", file=out)
    ref = stats.reference()
    if ref is not None:
        print(f"reference sqrt(det Q) {ref:.4f}  abs. error {abs(stats.mean - ref):.4f}", file=out)
    _write(config, campaign_csv(stats, {"subcommand": config.subcommand}))


def run_transient(config, out):
    p = config.params
    mask, fld, reference = _mask_field(p)
    d_eff = p["d_eff"]
    if d_eff is None:
        d_eff = reference
    sigma = float(fld.capacity().mean())
    length = fld.grid.extent[0]
    t_end = p["t_end"] or 2.0 * sigma * length**2 / d_eff
    dt = p["dt"] or t_end / 200
    bc = EstimationBC(p["c0"] if p["inlet"] == "dirichlet" else None, p["c1"],
                      _mass(p, d_eff, length))
    settings = TransientSettings(t_end, dt, bc, p["amplitude"], p["sharpness"], p["length"])
    cmp_ = transient_comparison(fld, d_eff, settings,
                                SolverOptions(p["tol"], preconditioner=p["precond"]))
    print(f"steps {len(cmp_.detailed.times)}  dt {dt:.4e}  d_eff {d_eff:.4e}", file=out)
    print(f"relative L2 discrepancy  {cmp_.relative_l2:.4%}", file=out)
    print(f"relative max discrepancy {cmp_.relative_max:.4%}", file=out)
    rows = zip(cmp_.detailed.times.tolist(), cmp_.detailed.flux.tolist(),
               cmp_.homogenized.flux.tolist())
    _write(config, _rows(config, ("time", "flux_detailed", "flux_homogenized"), rows))


RUNNERS = {
    "layered": run_layered,
    "estimate": run_estimate,
    "cellprob": run_cellprob,
    "mc2d": run_mc,
    "mc3d": run_mc,
    "transient": run_transient,
}


def run(config: RunConfig, out=None) -> int:
    """Execute a resolved configuration; returns the process exit status."""
    out = out or sys.stdout
    try:
        RUNNERS[config.subcommand](config, out)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (EffDiffError, ValueError, OSError, ImportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    try:
        config = parse_config(argv)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(config.verbosity, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
