"""INI configuration with sections [lattice], [model], [dmrg], [sweep],
[sampling] and [fit].

Example::

    [lattice]
    lx = 7
    ly = 1
    boundary_y = periodic
    shell_max = 3

    [model]
    omega_over_u = 0.33
    delta_over_u = 3.0, 3.1, 3.2

    [dmrg]
    chi_schedule = 16, 32, 64, 100
    conv = 1e-6
"""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .dmrg import DMRGConfig
from .hamiltonian import RydbergParams
from .lattice import LatticeSpec, read_mask_file

SECTIONS = ("lattice", "model", "dmrg", "sweep", "sampling", "fit")


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    parts = [p for p in text.replace(",", " ").split() if p]
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"expected numbers, got {text!r}") from exc


def _ints(text: str) -> tuple[int, ...]:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"expected integers, got {text!r}")
    return tuple(int(v) for v in vals)


@dataclass
class SamplingConfig:
    shots: int = 0
    seed: int = 0
    bulk: str = "rows:3"
    batch: int = 4096


@dataclass
class FitConfig:
    window: tuple | None = None
    window2: tuple | None = None
    phi_bins: int = 60
    rho_bin_width: float = 0.02


@dataclass
class SweepConfig:
    warm_start: bool = True
    order: str = "given"


@dataclass
class RunConfig:
    lattice: LatticeSpec = field(default_factory=LatticeSpec)
    omega: float = 0.33
    deltas: tuple = (3.0,)
    dmrg: DMRGConfig = field(default_factory=DMRGConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    mask_file: str | None = None

    def params(self, delta: float | None = None) -> RydbergParams:
        return RydbergParams(self.omega, self.deltas[0] if delta is None else delta)

    def snapshot(self) -> dict:
        d = {
            "lattice": asdict(self.lattice),
            "model": {"omega_over_u": self.omega, "delta_over_u": list(self.deltas)},
            "dmrg": asdict(self.dmrg),
            "sweep": asdict(self.sweep),
            "sampling": asdict(self.sampling),
            "fit": asdict(self.fit),
            "units": "energies in U, lengths in a",
        }
        d["lattice"]["mask_file"] = self.mask_file
        return d


def _section(cp, name):
    return cp[name] if cp.has_section(name) else {}


def _check_keys(sec, name, allowed):
    extra = set(sec) - set(allowed)
    if extra:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(extra)}")


def parse_config(text: str, base: Path | None = None) -> RunConfig:
    """Parse INI text; relative mask paths resolve against ``base``."""
    try:
        return _parse(text, base)
    except ConfigError:
        raise
    except (ValueError, OSError) as exc:
        raise ConfigError(str(exc)) from exc


def _parse(text: str, base: Path | None) -> RunConfig:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    unknown = set(cp.sections()) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")

    lat = _section(cp, "lattice")
    _check_keys(lat, "lattice", ("a", "lx", "ly", "nx", "ny", "boundary_y", "shape", "shell_max", "mask_file"))
    kw = {}
    for key, name in (("lx", "l_x"), ("ly", "l_y"), ("nx", "n_x"), ("ny", "n_y"), ("shell_max", "shell_max")):
        if key in lat:
            kw[name] = int(lat[key])
    for key in ("boundary_y", "shape"):
        if key in lat:
            kw[key] = lat[key].strip()
    if "a" in lat:
        kw["a"] = float(lat["a"])
    mask_file = lat.get("mask_file")
    if mask_file:
        path = Path(mask_file)
        if base is not None and not path.is_absolute():
            path = base / path
        kw["mask"] = read_mask_file(path)
        kw["shape"] = "custom"
        mask_file = str(path)
    spec = LatticeSpec(**kw)
    spec.validate()

    mod = _section(cp, "model")
    _check_keys(mod, "model", ("omega_over_u", "delta_over_u"))
    omega = float(mod.get("omega_over_u", 0.33))
    deltas = _floats(mod.get("delta_over_u", "3.0"))

    dm = _section(cp, "dmrg")
    _check_keys(dm, "dmrg", ("chi_schedule", "conv", "mixer", "mixer_sweeps", "max_sweeps", "min_sweeps", "init", "seed",
                             "svd_cutoff"))
    dkw = {}
    if "chi_schedule" in dm:
        dkw["chi_schedule"] = _ints(dm["chi_schedule"])
    for key, name, typ in (("conv", "energy_tol", float), ("mixer", "mixer_amplitude", float),
                           ("mixer_sweeps", "mixer_sweeps", int), ("max_sweeps", "max_sweeps", int),
                           ("min_sweeps", "min_sweeps", int), ("seed", "seed", int), ("svd_cutoff", "svd_cutoff", float)):
        if key in dm:
            dkw[name] = typ(dm[key])
    if "init" in dm:
        dkw["init"] = dm["init"].strip()
    dmrg = DMRGConfig(**dkw)

    sw = _section(cp, "sweep")
    _check_keys(sw, "sweep", ("values", "warm_start", "order"))
    if "values" in sw:
        deltas = _floats(sw["values"])
    sweep = SweepConfig(
        warm_start=cp.getboolean("sweep", "warm_start", fallback=True),
        order=sw.get("order", "given").strip(),
    )
    if sweep.order not in ("given", "ascending", "descending"):
        raise ConfigError(f"unknown sweep order {sweep.order!r}")

    sa = _section(cp, "sampling")
    _check_keys(sa, "sampling", [f.name for f in fields(SamplingConfig)])
    sampling = SamplingConfig(
        shots=int(sa.get("shots", 0)), seed=int(sa.get("seed", 0)),
        bulk=sa.get("bulk", "rows:3").strip(), batch=int(sa.get("batch", 4096)),
    )
    if sampling.shots < 0:
        raise ConfigError("shots must be >= 0")

    fi = _section(cp, "fit")
    _check_keys(fi, "fit", [f.name for f in fields(FitConfig)])
    fit = FitConfig(
        window=_floats(fi["window"]) if "window" in fi else None,
        window2=_floats(fi["window2"]) if "window2" in fi else None,
        phi_bins=int(fi.get("phi_bins", 60)),
        rho_bin_width=float(fi.get("rho_bin_width", 0.02)),
    )
    if not deltas:
        raise ConfigError("no detuning values")
    return RunConfig(spec, omega, deltas, dmrg, sweep, sampling, fit, mask_file)


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), base=path.parent)
