"""Command-line entry point: ``python -m rydberg_dqcp <subcommand>``.

Exit codes: 0 success, 2 partial failure (some sweep points failed), 1 fatal.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import fits, theory
from .config import RunConfig, load_config
from .dmrg import DMRGConfig
from .ed import ground_state_ed
from .hamiltonian import build_terms, spin_operator
from .lattice import blockade_radius, build_geometry, bulk_mask, pairwise_couplings, read_mask_file
from .mps import MPS, sample_snapshots
from .observables import HistogramSpec, marginals, order_parameter, staggered_m, write_density_csv, write_snapshots
from .workflows import (
    RUN_ROOT_ENV, IntegrityError, NoCompletedPoints, ground_state, point_observables, report, run_root, run_sweep,
)


def _ints(text):
    return tuple(int(t) for t in text.replace(",", " ").split())


def _floats(text):
    return tuple(float(t) for t in text.replace(",", " ").split())


def _base_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    lat = cfg.lattice
    kw = {}
    for name in ("lx", "ly", "shell_max"):
        v = getattr(args, name, None)
        if v is not None:
            kw[{"lx": "l_x", "ly": "l_y"}.get(name, name)] = v
    if getattr(args, "boundary_y", None):
        kw["boundary_y"] = args.boundary_y
    if getattr(args, "mask_file", None):
        kw["mask"] = read_mask_file(args.mask_file)
        kw["shape"] = "custom"
    if kw:
        lat = replace(lat, **kw)
        lat.validate()
    cfg.lattice = lat
    if getattr(args, "omega", None) is not None:
        cfg.omega = args.omega
    if getattr(args, "delta", None) is not None:
        cfg.deltas = tuple(args.delta)
    return cfg


def _dmrg_config(args, cfg: RunConfig) -> DMRGConfig:
    d = cfg.dmrg
    kw = {}
    if getattr(args, "chi_schedule", None):
        kw["chi_schedule"] = _ints(args.chi_schedule)
    if getattr(args, "conv", None) is not None:
        kw["energy_tol"] = args.conv
    if getattr(args, "mixer", None) is not None:
        kw["mixer_amplitude"] = args.mixer
    if getattr(args, "seed", None) is not None:
        kw["seed"] = args.seed
    if getattr(args, "init", None):
        kw["init"] = args.init
    return replace(d, **kw) if kw else d


def _emit(obj, out=None):
    text = json.dumps(obj, indent=1, default=lambda o: o.tolist() if hasattr(o, "tolist") else str(o))
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_geom(args):
    cfg = _base_config(args)
    geom = build_geometry(cfg.lattice)
    table = pairwise_couplings(geom)
    _emit({
        "n_sites": geom.n_sites,
        "coords": geom.coords.tolist(),
        "sublattices": geom.sublattices.tolist(),
        "couplings": [[c.i, c.j, c.shell, c.strength] for c in table.entries],
        "blockade_radius": blockade_radius(cfg.omega, cfg.lattice.a),
    }, args.out)
    return 0


def cmd_ed(args):
    cfg = _base_config(args)
    geom = build_geometry(cfg.lattice)
    res = ground_state_ed(spin_operator(build_terms(geom, cfg.params())))
    _emit(res.to_json(), args.out)
    return 0


def cmd_dmrg(args):
    cfg = _base_config(args)
    dm = _dmrg_config(args, cfg)
    init = MPS.load(args.warm) if args.warm else None
    geom, psi, record = ground_state(cfg, cfg.deltas[0], init, dm)
    out = Path(args.out or run_root() / "dmrg")
    out.mkdir(parents=True, exist_ok=True)
    psi.save(out / "state.mps")
    record.dump(out / "run_record.json")
    obs = point_observables(geom, psi, cfg.sampling.bulk, correlations=False)
    _emit({"energy": record.energy, "converged": record.converged, **obs, "directory": str(out)})
    return 0 if record.converged else 2


def cmd_sweep(args):
    cfg = _base_config(args)
    cfg.dmrg = _dmrg_config(args, cfg)
    if args.fresh:
        cfg.sweep.warm_start = False
    if args.shots is not None:
        cfg.sampling.shots = args.shots
    if args.bulk:
        cfg.sampling.bulk = args.bulk
    out = Path(args.out) if args.out else run_root() / "sweep"
    manifest = run_sweep(cfg, out)
    print(json.dumps({"directory": str(out), "complete": len(manifest.completed), "failed": len(manifest.failed)}))
    return 2 if manifest.failed else 0


def cmd_sample(args):
    cfg = _base_config(args)
    geom = build_geometry(cfg.lattice)
    psi = MPS.load(args.state)
    if psi.n_sites != geom.n_sites:
        raise ValueError(f"state has {psi.n_sites} sites, lattice has {geom.n_sites}")
    rng = np.random.default_rng(args.seed)
    shots = sample_snapshots(psi, args.shots, rng)
    out = Path(args.out)
    write_snapshots(out, shots, seed=args.seed, delta_over_u=args.delta_label, units="energies in U, lengths in a")
    m = staggered_m(shots, geom, bulk_mask(geom, args.bulk))
    summary = {"snapshots": str(out), "order_parameter": order_parameter(m)}
    if args.hist:
        spec = HistogramSpec(phi_bins=cfg.fit.phi_bins, rho_bin_width=cfg.fit.rho_bin_width)
        mg = marginals(m, spec)
        stem = out.with_suffix("")
        write_density_csv(f"{stem}_phi_hist.csv", mg.phi_centers, mg.phi_density)
        write_density_csv(f"{stem}_phi_kde.csv", mg.phi_grid, mg.phi_kde)
        write_density_csv(f"{stem}_rho_hist.csv", mg.rho_centers, mg.rho_density)
        write_density_csv(f"{stem}_rho_kde.csv", mg.rho_grid, mg.rho_kde)
    _emit(summary)
    return 0


def _read_columns(path):
    with open(path) as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#")) if r]
    header, body = rows[0], rows[1:]
    cols = {h: np.array([float(r[k]) for r in body]) for k, h in enumerate(header)}
    return cols


def cmd_fit(args):
    cols = _read_columns(args.csv)
    x = cols[args.x] if args.x else None
    y = cols[args.y] if args.y else None
    windows = [_floats(w) for w in (args.window or [])] or None
    echo = {"input": str(args.csv), "x": args.x, "y": args.y, "windows": windows}
    if args.kind == "loglog":
        res = fits.loglog_fit(x, y, windows)
    elif args.kind == "chi":
        res = fits.chi_extrapolate(x, y)
    elif args.kind == "luttinger":
        res = fits.luttinger_from_C1(x, y, windows[0] if windows else None)
    elif args.kind == "central-charge":
        res = fits.central_charge_fit(y, xi=x)
    elif args.kind == "phi":
        res = fits.fit_phi_marginal(_edges(x), y)
    elif args.kind == "rho":
        res = fits.fit_rho_marginal(_edges(x), y)
    elif args.kind == "collapse":
        sizes = cols[args.size]
        data = {int(l): (x[sizes == l], y[sizes == l]) for l in np.unique(sizes)}
        res = fits.fss_collapse(data, args.beta_over_nu, args.inv_nu, args.delta_c, l_y=args.ly_fit,
                                require_quasi_1d=not args.allow_short)
    else:
        raise ValueError(args.kind)
    out = res.to_dict()
    out["echo"] = echo | {"weights": "poisson" if args.kind in ("phi", "rho") else "uniform"}
    _emit(out, args.out)
    return 0 if getattr(res, "ok", True) else 2


def _edges(centers):
    c = np.asarray(centers, float)
    w = np.diff(c)
    if c.size < 2 or not np.allclose(w, w[0]):
        raise ValueError("histogram fits need equally spaced bin centres")
    return np.concatenate([c - w[0] / 2, [c[-1] + w[0] / 2]])


def cmd_theory(args):
    if args.k_prime is not None:
        rep = theory.report_for(k_prime=args.k_prime, g3=args.g3, g6=args.g6)
    else:
        rep = theory.report_for(K=args.K, rho0=args.rho0, l_y=args.ly, g3=args.g3, g6=args.g6)
    print(rep.to_json(indent=1))
    return 0


def cmd_report(args):
    summary = report(args.run_dir)
    _emit(summary)
    return 2 if summary["failed"] else 0


def _lattice_args(p):
    p.add_argument("--config", help="INI file with [lattice], [model], ... sections")
    p.add_argument("--lx", type=int)
    p.add_argument("--ly", type=int)
    p.add_argument("--shell-max", dest="shell_max", type=int)
    p.add_argument("--boundary-y", dest="boundary_y", choices=("periodic", "open"))
    p.add_argument("--mask-file", dest="mask_file")
    p.add_argument("--omega", type=float, help="Omega/U")
    p.add_argument("--delta", type=float, nargs="+", help="Delta/U value(s)")


def _dmrg_args(p):
    p.add_argument("--chi-schedule", dest="chi_schedule", help="e.g. 16,32,64,100")
    p.add_argument("--conv", type=float, help="energy convergence threshold")
    p.add_argument("--mixer", type=float, help="initial subspace-expansion amplitude")
    p.add_argument("--seed", type=int)
    p.add_argument("--init", help="crystal | crystal23 | random | product:<bits>")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rydberg_dqcp", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("geom", help="sites, sublattices and couplings as JSON")
    _lattice_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_geom)

    p = sub.add_parser("ed", help="exact ground state as JSON")
    _lattice_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ed)

    p = sub.add_parser("dmrg", help="DMRG ground state, checkpoint and run record")
    _lattice_args(p)
    _dmrg_args(p)
    p.add_argument("--warm", help="checkpoint to start from")
    p.add_argument("--out", help=f"output directory (default ${RUN_ROOT_ENV}/dmrg)")
    p.set_defaults(func=cmd_dmrg)

    p = sub.add_parser("sweep", help="detuning sweep into a run directory")
    _lattice_args(p)
    _dmrg_args(p)
    p.add_argument("--fresh", action="store_true", help="no warm starts")
    p.add_argument("--shots", type=int)
    p.add_argument("--bulk", help="snapshot bulk policy, e.g. all or rows:3")
    p.add_argument("--out", help=f"run directory (default ${RUN_ROOT_ENV}/sweep)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("sample", help="snapshots from a checkpoint")
    _lattice_args(p)
    p.add_argument("state")
    p.add_argument("--shots", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bulk", default="rows:3")
    p.add_argument("--delta-label", dest="delta_label", default="unknown")
    p.add_argument("--hist", action="store_true", help="also write histogram/KDE CSVs")
    p.add_argument("--out", default="snapshots.txt")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("fit", help="fit a CSV series, JSON result")
    p.add_argument("kind", choices=("loglog", "chi", "luttinger", "central-charge", "phi", "rho", "collapse"))
    p.add_argument("csv")
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--size", default="l_x", help="size column for collapse")
    p.add_argument("--window", action="append", help="lo,hi (repeat for two windows)")
    p.add_argument("--beta-over-nu", dest="beta_over_nu", type=float, default=0.225)
    p.add_argument("--inv-nu", dest="inv_nu", type=float, default=1.775)
    p.add_argument("--delta-c", dest="delta_c", type=float, default=3.158)
    p.add_argument("--ly-fit", dest="ly_fit", type=int, default=1)
    p.add_argument("--allow-short", dest="allow_short", action="store_true", help="collapse: accept l_x <= 4 l_y")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("theory", help="scaling report as JSON")
    p.add_argument("--k-prime", dest="k_prime", type=float)
    p.add_argument("--K", type=float)
    p.add_argument("--rho0", type=float)
    p.add_argument("--ly", type=int, default=1)
    p.add_argument("--g3", type=float, default=0.0)
    p.add_argument("--g6", type=float, default=0.0)
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("report", help="tables from a finished sweep")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (NoCompletedPoints, IntegrityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - fatal exit code
        if args.verbose:
            raise
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
