"""Detuning sweeps with persistent run directories, and reports built from them.

Layout of a run directory::

    run/
      config.json                      config snapshot
      manifest.partial.json            progress while the sweep runs
      manifest.json                    written last; its absence marks a crashed run
      p000/ state.mps run_record.json observables.csv summary.json [snapshots.txt]
      p001/ ...
      report/                          written by :func:`report`
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import platform
import time
import traceback
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import RunConfig
from .dmrg import DMRGConfig, dmrg_ground_state
from .hamiltonian import build_terms, terms_to_mpo
from .lattice import build_geometry, bulk_mask, snake_order
from .mps import MPS, correlation_length_estimate, entanglement_entropy, sample_snapshots
from .observables import (
    coarse_correlator_mps, order_parameter, order_parameter_mps, staggered_m, unit_cells, write_snapshots,
)

logger = logging.getLogger(__name__)

RUN_ROOT_ENV = "RYDBERG_RUN_ROOT"
UNITS = "energies in U, lengths in a"


class IntegrityError(RuntimeError):
    pass


class NoCompletedPoints(RuntimeError):
    def __init__(self, path):
        super().__init__(f"no completed points in {path}")


def run_root() -> Path:
    return Path(os.environ.get(RUN_ROOT_ENV, "runs"))


def code_version() -> str:
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:
        return "unknown"


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, obj) -> None:
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
    os.replace(tmp, path)


@dataclass
class SweepPlan:
    deltas: tuple
    chi_schedule: tuple
    warm_start: bool = True
    shots: int = 0

    def __post_init__(self):
        self.deltas = tuple(float(d) for d in self.deltas)
        if not self.deltas or not all(np.isfinite(self.deltas)):
            raise ValueError("detunings must be finite and non-empty")
        if self.shots < 0:
            raise ValueError("shots must be >= 0")

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "SweepPlan":
        deltas = list(cfg.deltas)
        if cfg.sweep.order == "ascending":
            deltas.sort()
        elif cfg.sweep.order == "descending":
            deltas.sort(reverse=True)
        return cls(tuple(deltas), cfg.dmrg.chi_schedule, cfg.sweep.warm_start, cfg.sampling.shots)


@dataclass
class PointEntry:
    index: int
    delta_over_u: float
    status: str = "pending"
    directory: str = ""
    seed: int | None = None
    timings: dict = field(default_factory=dict)
    error: str | None = None


@dataclass
class RunManifest:
    config: dict
    code_version: str
    seeds: dict
    points: list
    files: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    finalized: bool = False
    platform: str = field(default_factory=platform.platform)

    @property
    def completed(self) -> list:
        return [p for p in self.points if p["status"] == "complete"]

    @property
    def failed(self) -> list:
        return [p for p in self.points if p["status"] == "failed"]

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def load(cls, run_dir) -> "RunManifest":
        run_dir = Path(run_dir)
        path = run_dir / "manifest.json"
        if not path.exists():
            if (run_dir / "manifest.partial.json").exists():
                raise IntegrityError(f"{run_dir}: run was not finalized (crashed or still running)")
            raise FileNotFoundError(f"{run_dir}: no manifest")
        return cls(**json.loads(path.read_text()))

    def verify(self, run_dir) -> None:
        run_dir = Path(run_dir)
        for rel, digest in self.files.items():
            p = run_dir / rel
            if not p.exists():
                raise IntegrityError(f"missing file {rel}")
            if sha256(p) != digest:
                raise IntegrityError(f"hash mismatch for {rel}")


# ------------------------------------------------------------------ one point


def ground_state(cfg: RunConfig, delta: float, init: MPS | None = None, dmrg: DMRGConfig | None = None, solver=None):
    """Geometry, DMRG state and run record for one detuning."""
    geom = build_geometry(cfg.lattice)
    terms = build_terms(geom, cfg.params(delta))
    order = snake_order(geom)
    mpo = terms_to_mpo(terms, order)
    solver = solver or dmrg_ground_state
    psi, record = solver(mpo, dmrg or cfg.dmrg, init, geom.sublattices[order])
    return geom, psi, record


def point_observables(geom, psi: MPS, bulk: str = "rows:3", correlations: bool = True) -> dict:
    """Scalar observables of a converged state (chain order is the site order)."""
    out = {
        "order_parameter": order_parameter_mps(psi, geom),
        "entropy_half": entanglement_entropy(psi, psi.n_sites // 2),
        "max_bond": max(psi.bond_dims),
        "truncation_error": psi.truncation_error,
    }
    try:
        sites = bulk_mask(geom, bulk)
        out["order_parameter_bulk"] = order_parameter_mps(psi, geom, sites)
    except Exception:
        out["order_parameter_bulk"] = float("nan")
    out["xi"] = float("nan")
    if correlations:
        ncell = len(unit_cells(geom))
        if ncell >= 4:
            r = np.arange(1, ncell)
            c1 = coarse_correlator_mps(psi, geom, r)
            fit = correlation_length_estimate(r, np.real(c1.value))
            out["xi"] = fit.xi if fit.usable else float("nan")
    return out


def _write_observables_csv(path, row: dict) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# units: {UNITS}\n")
        w = csv.writer(fh)
        keys = list(row)
        w.writerow(keys)
        w.writerow([repr(row[k]) if isinstance(row[k], float) else row[k] for k in keys])


def run_sweep(cfg: RunConfig, run_dir, plan: SweepPlan | None = None, solver=None, correlations: bool = True) -> RunManifest:
    """Solve every detuning of ``plan`` and persist each point.

    With warm starts each converged state seeds the next point; after a
    failure the chain restarts from the configured initial state. A failed
    point is recorded and the sweep goes on. ``solver`` replaces
    :func:`dmrg_ground_state` (same signature), e.g. for fault injection.
    """
    plan = plan or SweepPlan.from_config(cfg)
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    for stale in ("manifest.json",):
        if (run_dir / stale).exists():
            (run_dir / stale).unlink()
    snap = cfg.snapshot()
    snap["plan"] = asdict(plan)
    _write_json(run_dir / "config.json", snap)

    seq = np.random.SeedSequence(cfg.sampling.seed)
    point_seeds = [int(s.generate_state(1)[0]) for s in seq.spawn(len(plan.deltas))]
    manifest = RunManifest(
        config=snap,
        code_version=code_version(),
        seeds={"sampling_root": cfg.sampling.seed, "dmrg": cfg.dmrg.seed, "points": point_seeds},
        points=[asdict(PointEntry(i, d, seed=point_seeds[i])) for i, d in enumerate(plan.deltas)],
    )
    dmrg_cfg = replace(cfg.dmrg, chi_schedule=tuple(plan.chi_schedule))
    t_start = time.perf_counter()
    prev = None
    for i, delta in enumerate(plan.deltas):
        entry = manifest.points[i]
        pdir = run_dir / f"p{i:03d}"
        pdir.mkdir(exist_ok=True)
        entry["directory"] = pdir.name
        timings = {}
        try:
            t0 = time.perf_counter()
            init = prev if (plan.warm_start and prev is not None) else None
            geom, psi, record = ground_state(cfg, delta, init, dmrg_cfg, solver)
            timings["dmrg"] = time.perf_counter() - t0
            psi.save(pdir / "state.mps")
            record.dump(pdir / "run_record.json")

            t0 = time.perf_counter()
            obs = point_observables(geom, psi, cfg.sampling.bulk, correlations)
            row = {"delta_over_u": delta, "omega_over_u": cfg.omega, "energy": record.energy,
                   "converged": record.converged, **obs}
            if plan.shots > 0:
                rng = np.random.default_rng(point_seeds[i])
                shots = sample_snapshots(psi, plan.shots, rng, batch=cfg.sampling.batch)
                write_snapshots(pdir / "snapshots.txt", shots, seed=point_seeds[i], delta_over_u=repr(delta),
                                omega_over_u=repr(cfg.omega), units=UNITS)
                m = staggered_m(shots, geom, bulk_mask(geom, cfg.sampling.bulk))
                row["order_parameter_snapshots"] = order_parameter(m)
            timings["observables"] = time.perf_counter() - t0
            _write_observables_csv(pdir / "observables.csv", row)
            _write_json(pdir / "summary.json", row)
            entry["status"] = "complete"
            prev = psi
        except Exception as exc:  # noqa: BLE001 - recorded, sweep continues
            logger.error("point %d (delta=%g) failed: %s", i, delta, exc)
            entry["status"] = "failed"
            entry["error"] = "".join(traceback.format_exception_only(type(exc), exc)).strip()
            prev = None
        entry["timings"] = timings
        _write_json(run_dir / "manifest.partial.json", manifest.to_json())

    manifest.timings["total"] = time.perf_counter() - t_start
    for p in sorted(run_dir.glob("p[0-9][0-9][0-9]/*")):
        if p.is_file():
            manifest.files[str(p.relative_to(run_dir))] = sha256(p)
    manifest.files["config.json"] = sha256(run_dir / "config.json")
    manifest.finalized = True
    _write_json(run_dir / "manifest.json", manifest.to_json())
    (run_dir / "manifest.partial.json").unlink(missing_ok=True)
    return manifest


# ------------------------------------------------------------------- report


def crossing_point(x, y) -> float | None:
    """First sign change of ``y(x)`` located by linear interpolation."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    order = np.argsort(x)
    x, y = x[order], y[order]
    for k in range(x.size - 1):
        if y[k] == 0:
            return float(x[k])
        if y[k] * y[k + 1] < 0:
            return float(x[k] - y[k] * (x[k + 1] - x[k]) / (y[k + 1] - y[k]))
    if y.size and y[-1] == 0:
        return float(x[-1])
    return None


def _write_table(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# units: {UNITS}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def report(run_dir) -> dict:
    """Verify a finished run and write plot-ready CSV tables under ``report/``."""
    run_dir = Path(run_dir)
    if not (run_dir / "manifest.json").exists() and not (run_dir / "manifest.partial.json").exists():
        raise NoCompletedPoints(run_dir)
    manifest = RunManifest.load(run_dir)
    manifest.verify(run_dir)
    done = manifest.completed
    if not done:
        raise NoCompletedPoints(run_dir)
    rows = []
    for p in done:
        rows.append(json.loads((run_dir / p["directory"] / "summary.json").read_text()))
    rows.sort(key=lambda r: r["delta_over_u"])
    d = np.array([r["delta_over_u"] for r in rows])
    op = np.array([r["order_parameter"] for r in rows])
    out = run_dir / "report"
    out.mkdir(exist_ok=True)
    _write_table(out / "order_parameter.csv", ["delta_over_u", "order_parameter", "order_parameter_bulk", "energy"],
                 [(r["delta_over_u"], r["order_parameter"], r["order_parameter_bulk"], r["energy"]) for r in rows])
    _write_table(out / "entropy_xi.csv", ["delta_over_u", "max_bond", "entropy_half", "xi", "log_xi"],
                 [(r["delta_over_u"], r["max_bond"], r["entropy_half"], r["xi"],
                   float(np.log(r["xi"])) if r["xi"] and r["xi"] > 0 else float("nan")) for r in rows])
    dc = crossing_point(d, op)
    series = []
    if dc is not None:
        for x, y in zip(d, op):
            if x != dc and y != 0:
                series.append((abs(x - dc), abs(y), float(np.sign(x - dc))))
    _write_table(out / "loglog_order_parameter.csv", ["abs_dbar", "abs_order_parameter", "side"], series)
    summary = {
        "completed": len(done),
        "failed": len(manifest.failed),
        "delta_c": dc,
        "signs": [int(np.sign(v)) for v in op],
        "deltas": d.tolist(),
    }
    _write_json(out / "summary.json", summary)
    return summary
