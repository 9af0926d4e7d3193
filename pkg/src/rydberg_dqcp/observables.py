"""Staggered magnetization statistics from snapshots and matrix-product states.

The complex order parameter on a site set S is

    m = (3 / |S|) * sum_{j in S} n_j exp(2 pi i (2 jx + jy) / 3)

so a perfect 1/3 crystal on sublattice 0 gives m = 1 and the complementary
2/3 crystal gives m = -1. The real order parameter reported everywhere is
``<m^3 + m^3*> = 2 <rho^3 cos(3 phi)>``, i.e. +2 / -2 on perfect crystals.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from math import comb
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import gaussian_kde

from .hamiltonian import LOCAL_OPS
from .lattice import Geometry
from .mps import MPS, Environments, mpo_expectation


def site_phases(geometry: Geometry, sites: Sequence[int] | None = None) -> np.ndarray:
    """``exp(i Q . x_j)``; for site (jx, jy) this is exp(2 pi i (2 jx + jy) / 3)."""
    sub = geometry.sublattices
    if sites is not None:
        sub = sub[np.asarray(sites)]
    return np.exp(2j * np.pi * sub / 3.0)


def _weights(geometry, sites):
    sites = np.arange(geometry.n_sites) if sites is None else np.asarray(sites)
    if sites.size == 0:
        raise ValueError("empty site set")
    return sites, 3.0 / sites.size * site_phases(geometry, sites)


def staggered_m(source, geometry: Geometry, sites: Sequence[int] | None = None):
    """Complex ``m`` for one snapshot / occupation field or a stack of them."""
    sites, w = _weights(geometry, sites)
    occ = np.asarray(source, dtype=float)
    return occ[..., sites] @ w


@dataclass(frozen=True)
class OrderParameterSample:
    m: complex

    @property
    def rho(self) -> float:
        return float(abs(self.m))

    @property
    def phi(self) -> float:
        return float(np.mod(np.angle(self.m), 2 * np.pi))


def polar(m):
    """``(rho, phi)`` with ``phi`` in [0, 2 pi)."""
    m = np.asarray(m)
    return np.abs(m), np.mod(np.angle(m), 2 * np.pi)


def order_parameter(m) -> float:
    """Mean of ``m^3 + conj(m)^3 = 2 rho^3 cos(3 phi)`` over samples."""
    m = np.atleast_1d(np.asarray(m, dtype=complex))
    return float(np.mean(2.0 * np.real(m**3)))


def order_parameter_stderr(m) -> float:
    m = np.atleast_1d(np.asarray(m, dtype=complex))
    vals = 2.0 * np.real(m**3)
    return float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else float("nan")


# --------------------------------------------------------------- exact moments


def power_mpo(coefficients: np.ndarray, power: int) -> list[np.ndarray]:
    """MPO of ``(sum_j c_j n_j)^power`` with bond dimension ``power + 1``.

    Bond state ``q`` carries the partial sum raised to ``q``; a site with
    occupation ``n`` maps ``L^q -> sum_k C(q', k) L^(q'-k) (c n)^k`` using
    ``n^k = n`` for ``k >= 1``.
    """
    c = np.asarray(coefficients, dtype=complex)
    n = LOCAL_OPS["n"].astype(complex)
    eye = np.eye(2, dtype=complex)
    d = power + 1
    tensors = []
    for k, cj in enumerate(c):
        w = np.zeros((d, d, 2, 2), dtype=complex)
        for q_in in range(d):
            for q_out in range(q_in, d):
                j = q_out - q_in
                w[q_in, q_out] = comb(q_out, j) * (eye if j == 0 else cj**j * n)
        if k == 0:
            w = w[:1]
        if k == len(c) - 1:
            w = w[:, -1:]
        tensors.append(w)
    return tensors


def m_moment_mps(mps: MPS, geometry: Geometry, power: int, sites: Sequence[int] | None = None) -> complex:
    """Exact ``<m^power>`` of a matrix-product state."""
    sites, w = _weights(geometry, sites)
    coeff = np.zeros(geometry.n_sites, dtype=complex)
    coeff[sites] = w
    return complex(mpo_expectation(mps, power_mpo(coeff, power)))


def order_parameter_mps(mps: MPS, geometry: Geometry, sites: Sequence[int] | None = None) -> float:
    """Exact ``<m^3 + m^3*>`` of a matrix-product state."""
    return 2.0 * m_moment_mps(mps, geometry, 3, sites).real


def order_parameter_dense(vector: np.ndarray, geometry: Geometry, sites=None) -> float:
    """Exact ``<m^3 + m^3*>`` from a full state vector (m is diagonal)."""
    from .hamiltonian import basis_occupations

    p = np.abs(np.asarray(vector)) ** 2
    m = staggered_m(basis_occupations(geometry.n_sites), geometry, sites)
    return float(p @ (2.0 * np.real(m**3)))


def mean_m_mps(mps: MPS, geometry: Geometry, sites=None) -> complex:
    """``<m>``; finite-size ground states are Z3 symmetric so this should vanish."""
    sites, w = _weights(geometry, sites)
    env = Environments(mps)
    n = LOCAL_OPS["n"]
    return complex(sum(wj * env.local(n, s) for s, wj in zip(sites, w)))


# ---------------------------------------------------------- coarse correlators


def unit_cells(geometry: Geometry, width: int = 3) -> list[np.ndarray]:
    """Sites grouped into cells of ``width`` consecutive columns (all rows)."""
    jx = geometry.coords[:, 0]
    lo = jx.min()
    ncell = (jx.max() - lo) // width + 1
    return [np.flatnonzero((jx - lo) // width == u) for u in range(ncell)]


def cell_m(snapshots, geometry: Geometry, cells: list[np.ndarray]) -> np.ndarray:
    """Per-cell normalized ``m`` for each snapshot, shape (M, n_cells)."""
    snaps = np.atleast_2d(np.asarray(snapshots, dtype=float))
    return np.stack([staggered_m(snaps, geometry, c) for c in cells], axis=-1)


@dataclass
class CorrelatorResult:
    r: np.ndarray
    value: np.ndarray
    stderr: np.ndarray | None
    estimator: str
    harmonic: int
    cells: tuple


def _cell_pairs(cell_ids, r):
    return [(u, u + r) for u in cell_ids if u + r in cell_ids]


def coarse_correlator_mps(mps: MPS, geometry: Geometry, separations, cell_ids=None, width: int = 3) -> CorrelatorResult:
    """``C_1(r) = <m(u + r) m(u)^*>`` averaged over cell pairs in ``cell_ids``.

    Exact contraction through ``<n_i n_j>``; only the first harmonic is
    available this way.
    """
    cells = unit_cells(geometry, width)
    cell_ids = list(range(len(cells))) if cell_ids is None else list(cell_ids)
    used = sorted(set(np.concatenate([cells[u] for u in cell_ids]).tolist()))
    env = Environments(mps)
    n = LOCAL_OPS["n"]
    nn = {}
    for i in used:
        nn[(i, i)] = env.local(n, i).real
        for j, val in env.row(n, i, n, used).items():
            nn[(i, j)] = nn[(j, i)] = val.real
    phase = {u: 3.0 / cells[u].size * site_phases(geometry, cells[u]) for u in cell_ids}
    out = []
    for r in separations:
        pairs = _cell_pairs(cell_ids, r)
        if not pairs:
            raise ValueError(f"separation {r} exceeds the available cells")
        acc = 0.0
        for u, v in pairs:
            block = np.array([[nn[(i, j)] for j in cells[u]] for i in cells[v]])
            acc += phase[v] @ block @ np.conj(phase[u])
        out.append(acc / len(pairs))
    return CorrelatorResult(np.asarray(separations), np.asarray(out), None, "mps", 1, tuple(cell_ids))


def coarse_correlator_snapshots(snapshots, geometry: Geometry, separations, n: int = 1, cell_ids=None, width: int = 3) -> CorrelatorResult:
    """``C_n(r) = <(m(u + r))^n (m(u)^*)^n>`` estimated from snapshots."""
    cells = unit_cells(geometry, width)
    cell_ids = list(range(len(cells))) if cell_ids is None else list(cell_ids)
    mc = cell_m(snapshots, geometry, cells) ** n
    vals, errs = [], []
    for r in separations:
        pairs = _cell_pairs(cell_ids, r)
        if not pairs:
            raise ValueError(f"separation {r} exceeds the available cells")
        per_shot = np.mean([mc[:, v] * np.conj(mc[:, u]) for u, v in pairs], axis=0)
        vals.append(per_shot.mean())
        errs.append(per_shot.real.std(ddof=1) / np.sqrt(per_shot.size) if per_shot.size > 1 else np.nan)
    return CorrelatorResult(np.asarray(separations), np.asarray(vals), np.asarray(errs), "snapshots", n, tuple(cell_ids))


# ------------------------------------------------------------------ marginals


@dataclass(frozen=True)
class HistogramSpec:
    phi_bins: int = 60
    rho_bin_width: float = 0.02
    grid2d: int = 61
    bandwidth: str | float = "scott"
    kde_points: int = 400

    def __post_init__(self):
        if self.phi_bins <= 0 or self.rho_bin_width <= 0 or self.grid2d <= 0:
            raise ValueError("histogram bins must be positive")


@dataclass
class Marginals:
    phi_centers: np.ndarray
    phi_density: np.ndarray
    phi_counts: np.ndarray
    phi_grid: np.ndarray
    phi_kde: np.ndarray
    rho_centers: np.ndarray
    rho_density: np.ndarray
    rho_counts: np.ndarray
    rho_grid: np.ndarray
    rho_kde: np.ndarray
    plane_edges: np.ndarray
    plane_density: np.ndarray
    n_samples: int
    bandwidth_phi: float
    bandwidth_rho: float


def periodic_kde(phi: np.ndarray, grid: np.ndarray, bandwidth="scott") -> tuple[np.ndarray, float]:
    """Gaussian KDE on the circle (wrapped kernel), normalized on [0, 2 pi)."""
    phi = np.mod(np.asarray(phi, dtype=float), 2 * np.pi)
    n = phi.size
    if isinstance(bandwidth, str):
        # Scott's factor times a circular spread estimate
        r = np.abs(np.mean(np.exp(1j * phi)))
        sd = np.sqrt(-2.0 * np.log(max(r, 1e-300))) if r > 0 else np.inf
        sd = min(sd, phi.std(ddof=1) if n > 1 else 1.0)
        h = max(sd, 1e-3) * n ** (-1.0 / 5.0)
    else:
        h = float(bandwidth)
    dens = np.zeros_like(grid, dtype=float)
    chunk = max(1, 2_000_000 // max(grid.size, 1))
    for start in range(0, n, chunk):
        d = grid[:, None] - phi[None, start : start + chunk]
        for shift in (-2 * np.pi, 0.0, 2 * np.pi):
            dens += np.exp(-0.5 * ((d + shift) / h) ** 2).sum(axis=1)
    dx = 2 * np.pi / grid.size
    dens /= dens.sum() * dx
    return dens, h


def marginals(m_samples, spec: HistogramSpec = HistogramSpec()) -> Marginals:
    """Angular/radial histograms, their KDEs and the 2D density of ``m``."""
    m = np.asarray(m_samples, dtype=complex).ravel()
    if m.size < 2:
        raise ValueError("need at least two samples")
    rho, phi = polar(m)
    edges = np.linspace(0, 2 * np.pi, spec.phi_bins + 1)
    counts, _ = np.histogram(phi, edges)
    width = edges[1] - edges[0]
    phi_density = counts / (counts.sum() * width)
    phi_grid = (np.arange(spec.kde_points) + 0.5) * 2 * np.pi / spec.kde_points
    phi_kde, h_phi = periodic_kde(phi, phi_grid, spec.bandwidth)

    rmax = max(rho.max(), spec.rho_bin_width)
    nb = int(np.ceil(rmax / spec.rho_bin_width))
    redges = np.arange(nb + 1) * spec.rho_bin_width
    rcounts, _ = np.histogram(rho, redges)
    rho_density = rcounts / (rcounts.sum() * spec.rho_bin_width)
    rho_grid = np.linspace(0, redges[-1], spec.kde_points)
    if np.ptp(rho) > 1e-9 * max(1.0, rho.max()):
        kde = gaussian_kde(rho, bw_method=spec.bandwidth)
        rho_kde = kde(rho_grid)
        h_rho = float(np.sqrt(kde.covariance[0, 0]))
        norm = np.trapezoid(rho_kde, rho_grid)
        rho_kde = rho_kde / norm
    else:
        rho_kde = np.zeros_like(rho_grid)
        k = int(np.argmin(np.abs(rho_grid - rho[0])))
        dx = rho_grid[1] - rho_grid[0]
        rho_kde[k] = 1.0 / (dx / 2 if k in (0, rho_grid.size - 1) else dx)
        h_rho = 0.0

    lim = max(1.0, np.abs(m.real).max(), np.abs(m.imag).max())
    pe = np.linspace(-lim, lim, spec.grid2d + 1)
    plane, _, _ = np.histogram2d(m.real, m.imag, bins=[pe, pe], density=True)
    return Marginals(
        phi_centers=(edges[:-1] + edges[1:]) / 2,
        phi_density=phi_density,
        phi_counts=counts,
        phi_grid=phi_grid,
        phi_kde=phi_kde,
        rho_centers=(redges[:-1] + redges[1:]) / 2,
        rho_density=rho_density,
        rho_counts=rcounts,
        rho_grid=rho_grid,
        rho_kde=rho_kde,
        plane_edges=pe,
        plane_density=plane,
        n_samples=m.size,
        bandwidth_phi=h_phi,
        bandwidth_rho=h_rho,
    )


def write_density_csv(path, centers, density) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_center", "density"])
        for c, d in zip(centers, density):
            w.writerow([repr(float(c)), repr(float(d))])


# ------------------------------------------------------------- snapshot files


def write_snapshots(path, snapshots, **header) -> None:
    """One ASCII 0/1 string per line after ``# key=value`` header lines."""
    snaps = np.asarray(snapshots, dtype=np.uint8)
    with open(path, "w") as fh:
        for k, v in header.items():
            fh.write(f"# {k}={v}\n")
        table = np.where(snaps == 1, ord("1"), ord("0")).astype(np.uint8)
        for row in table:
            fh.write(row.tobytes().decode("ascii"))
            fh.write("\n")


def read_snapshots(path) -> tuple[np.ndarray, dict]:
    header = {}
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            header[key.strip()] = val.strip()
        elif line.strip():
            rows.append(np.frombuffer(line.strip().encode("ascii"), dtype=np.uint8) - ord("0"))
    return np.array(rows, dtype=np.uint8), header
