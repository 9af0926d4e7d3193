"""Triangular-lattice geometries with truncated van der Waals couplings.

Sites live on integer coordinates ``(jx, jy)`` with real-space position
``jx * a_x + jy * a_y`` where ``a_x = (sqrt(3)/2, 1/2) a`` and ``a_y = (0, 1) a``.
Sites are always enumerated column by column (``jy`` fastest), which is also
the snake order used to map the lattice onto a matrix-product chain.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

A_X = np.array([np.sqrt(3.0) / 2.0, 0.5])
A_Y = np.array([0.0, 1.0])

#: squared distances (units of a^2) of the first five neighbour shells
SHELL_R2 = (1, 3, 4, 7, 9)

SHAPES = ("cylinder", "ladder", "custom")
BOUNDARIES = ("periodic", "open")


class GeometryError(ValueError):
    pass


def shell_of(dx: int, dy: int) -> int | None:
    """Shell index (1-based) of an integer displacement, or None."""
    r2 = dx * dx + dx * dy + dy * dy
    try:
        return SHELL_R2.index(r2) + 1
    except ValueError:
        return None


def sublattice_of(jx, jy):
    return (2 * np.asarray(jx) + np.asarray(jy)) % 3


@dataclass(frozen=True)
class LatticeSpec:
    """Description of a finite triangular array.

    ``l_x``/``l_y`` count 3x3 unit cells. ``n_x``/``n_y`` override the number
    of atoms directly (useful for lengths that are not a multiple of three).
    For ``shape="custom"`` the atoms are given by ``mask`` and both directions
    are open.
    """

    l_x: int = 1
    l_y: int = 1
    a: float = 1.0
    boundary_y: str = "periodic"
    shape: str = "cylinder"
    shell_max: int = 3
    n_x: int | None = None
    n_y: int | None = None
    mask: tuple[tuple[int, int], ...] | None = None

    @property
    def N_x(self) -> int:
        return self.n_x if self.n_x is not None else 3 * self.l_x

    @property
    def N_y(self) -> int:
        return self.n_y if self.n_y is not None else 3 * self.l_y

    @property
    def periodic_y(self) -> bool:
        return self.shape == "cylinder" and self.boundary_y == "periodic"

    def validate(self) -> None:
        if self.shape not in SHAPES:
            raise GeometryError(f"unknown shape {self.shape!r}")
        if self.boundary_y not in BOUNDARIES:
            raise GeometryError(f"unknown boundary_y {self.boundary_y!r}")
        if not 1 <= self.shell_max <= 5:
            raise GeometryError("shell_max must lie in 1..5")
        if self.a <= 0:
            raise GeometryError("lattice constant must be positive")
        if self.shape == "custom":
            if not self.mask:
                raise GeometryError("custom shape requires a non-empty mask")
            return
        if self.N_x < 1 or self.N_y < 1:
            raise GeometryError("N_x and N_y must be >= 1")
        if self.periodic_y and self.N_y % 3 != 0:
            raise GeometryError(
                f"periodic cylinder needs N_y divisible by 3 (got {self.N_y}); "
                "other circumferences frustrate the three sublattices"
            )


@dataclass(frozen=True)
class Site:
    index: int
    coords: tuple[int, int]
    position: tuple[float, float]
    sublattice: int
    is_bulk: bool = True


@dataclass(frozen=True)
class Coupling:
    i: int
    j: int
    displacement: tuple[int, int]
    shell: int
    strength: float


@dataclass(frozen=True)
class CouplingTable:
    """Pair interactions ``U_ij n_i n_j``, one entry per distinct displacement.

    Entries are stored once with ``i <= j``. On small periodic circumferences a
    pair can appear several times (one per periodic image inside the cutoff),
    and ``i == j`` entries describe a site interacting with its own image.
    """

    n_sites: int
    entries: tuple[Coupling, ...]
    u: float = 1.0

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Coupling]:
        return iter(self.entries)

    def directed(self) -> Iterator[Coupling]:
        """Both orientations of every entry (self-images once)."""
        for c in self.entries:
            yield c
            if c.i != c.j:
                yield Coupling(c.j, c.i, (-c.displacement[0], -c.displacement[1]), c.shell, c.strength)

    def pair_entries(self) -> list[Coupling]:
        return [c for c in self.entries if c.i != c.j]

    def self_entries(self) -> list[Coupling]:
        return [c for c in self.entries if c.i == c.j]

    def matrix(self) -> np.ndarray:
        """Symmetric matrix of summed pair strengths (diagonal holds self-images)."""
        out = np.zeros((self.n_sites, self.n_sites))
        for c in self.entries:
            if c.i == c.j:
                out[c.i, c.i] += c.strength
            else:
                out[c.i, c.j] += c.strength
                out[c.j, c.i] += c.strength
        return out

    def classical_energy(self, occupations: np.ndarray) -> np.ndarray:
        """Interaction energy sum_{entries} U n_i n_j for bit-string rows."""
        occ = np.atleast_2d(np.asarray(occupations, dtype=float))
        mat = self.matrix()
        diag = np.diag(mat).copy()
        off = mat - np.diag(diag)
        e = 0.5 * np.einsum("ki,ij,kj->k", occ, off, occ) + occ @ diag
        return e if np.ndim(occupations) > 1 else e[0]


@dataclass(frozen=True)
class Geometry:
    spec: LatticeSpec
    sites: tuple[Site, ...]
    _lookup: dict = field(default=None, repr=False, compare=False)

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def coords(self) -> np.ndarray:
        return np.array([s.coords for s in self.sites], dtype=int)

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.position for s in self.sites])

    @property
    def sublattices(self) -> np.ndarray:
        return np.array([s.sublattice for s in self.sites], dtype=int)

    def index_of(self, jx: int, jy: int) -> int | None:
        if self.spec.periodic_y:
            jy %= self.spec.N_y
        return self._lookup.get((jx, jy))

    def columns(self) -> np.ndarray:
        return np.unique(self.coords[:, 0])


def build_geometry(spec: LatticeSpec) -> Geometry:
    spec.validate()
    if spec.shape == "custom":
        pts = sorted(set((int(x), int(y)) for x, y in spec.mask))
        if len(pts) != len(spec.mask):
            raise GeometryError("mask contains duplicate coordinates")
        _check_connected(pts)
    else:
        pts = [(jx, jy) for jx in range(spec.N_x) for jy in range(spec.N_y)]
    sites = []
    lookup = {}
    for k, (jx, jy) in enumerate(pts):
        pos = spec.a * (jx * A_X + jy * A_Y)
        sites.append(Site(k, (jx, jy), (float(pos[0]), float(pos[1])), int(sublattice_of(jx, jy))))
        lookup[(jx, jy)] = k
    return Geometry(spec, tuple(sites), lookup)


def _shell1_neighbours(jx: int, jy: int) -> list[tuple[int, int]]:
    return [(jx + dx, jy + dy) for dx, dy in ((1, 0), (0, 1), (1, -1), (-1, 0), (0, -1), (-1, 1))]


def _check_connected(pts: Sequence[tuple[int, int]]) -> None:
    todo = set(pts)
    stack = [pts[0]]
    todo.discard(pts[0])
    while stack:
        p = stack.pop()
        for q in _shell1_neighbours(*p):
            if q in todo:
                todo.remove(q)
                stack.append(q)
    if todo:
        raise GeometryError("custom mask is not connected under nearest-neighbour bonds")


def _displacements(shell_max: int) -> list[tuple[int, int]]:
    r2max = SHELL_R2[shell_max - 1]
    span = int(np.ceil(np.sqrt(r2max))) + 1
    out = []
    for dx in range(-2 * span, 2 * span + 1):
        for dy in range(-2 * span, 2 * span + 1):
            if 0 < dx * dx + dx * dy + dy * dy <= r2max:
                out.append((dx, dy))
    return out


def pairwise_couplings(geometry: Geometry, shell_max: int | None = None, u: float = 1.0) -> CouplingTable:
    """Truncated ``U (a/r)^6`` couplings including every periodic image.

    For periodic y, each pair collects one entry per integer displacement (all
    images) whose length is inside the cutoff shell.
    """
    spec = geometry.spec
    shell_max = spec.shell_max if shell_max is None else shell_max
    if not 1 <= shell_max <= 5:
        raise GeometryError("shell_max must lie in 1..5")
    ny = spec.N_y
    entries = []
    for site in geometry.sites:
        jx, jy = site.coords
        for dx, dy in _displacements(shell_max):
            tx, ty = jx + dx, jy + dy
            if spec.periodic_y:
                ty %= ny
            j = geometry._lookup.get((tx, ty))
            if j is None:
                continue
            i = site.index
            # keep each displacement once: (i -> j, d) and (j -> i, -d) are the same bond
            if j < i or (j == i and (dx, dy) < (-dx, -dy)):
                continue
            sh = shell_of(dx, dy)
            r2 = dx * dx + dx * dy + dy * dy
            entries.append(Coupling(i, j, (dx, dy), sh, u / r2**3))
    entries.sort(key=lambda c: (c.i, c.j, c.displacement))
    return CouplingTable(geometry.n_sites, tuple(entries), u)


def blockade_radius(omega_over_u: float, a: float = 1.0) -> float:
    """Distance where ``U (a/r)^6`` equals the Rabi frequency."""
    return a * (1.0 / omega_over_u) ** (1.0 / 6.0)


def snake_order(geometry: Geometry) -> np.ndarray:
    """Chain position -> site index, columns left to right with y fastest."""
    c = geometry.coords
    return np.lexsort((c[:, 1], c[:, 0]))


def bulk_mask(geometry: Geometry, policy="all") -> np.ndarray:
    """Sorted site indices kept by a bulk policy.

    ``policy`` is ``"all"``, ``("rows", k)`` / ``"rows:k"`` (drop the first and
    last k columns along a_x) or ``("rings", k)`` / ``"rings:k"`` (peel k
    boundary layers; a site is on the boundary when it has fewer than six
    nearest neighbours in the remaining set).
    """
    kind, k = _parse_policy(policy)
    if kind == "all":
        keep = np.arange(geometry.n_sites)
    elif kind == "rows":
        jx = geometry.coords[:, 0]
        lo, hi = jx.min() + k, jx.max() - k
        keep = np.flatnonzero((jx >= lo) & (jx <= hi))
    else:
        current = set(range(geometry.n_sites))
        for _ in range(k):
            boundary = set()
            for i in current:
                jx, jy = geometry.sites[i].coords
                nn = 0
                for q in _shell1_neighbours(jx, jy):
                    idx = geometry.index_of(*q)
                    if idx is not None and idx in current:
                        nn += 1
                if nn < 6:
                    boundary.add(i)
            current -= boundary
        keep = np.array(sorted(current), dtype=int)
    if keep.size == 0:
        raise GeometryError(f"bulk policy {policy!r} removes every site")
    return keep


def _parse_policy(policy) -> tuple[str, int]:
    if isinstance(policy, str):
        if policy == "all":
            return "all", 0
        kind, _, k = policy.partition(":")
        policy = (kind, int(k))
    kind, k = policy
    if kind not in ("rows", "rings"):
        raise GeometryError(f"unknown bulk policy {kind!r}")
    if k < 0:
        raise GeometryError("bulk depth must be non-negative")
    return kind, int(k)


def read_mask_file(path) -> tuple[tuple[int, int], ...]:
    """Read ``jx,jy`` rows (``#`` comments and a header line are skipped)."""
    pts = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                pts.append((int(row[0]), int(row[1])))
            except ValueError:
                continue
    return tuple(pts)


def write_mask_file(path, points: Iterable[tuple[int, int]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["jx", "jy"])
        w.writerows(points)


def hexagonal_mask(radius: float) -> tuple[tuple[int, int], ...]:
    """Sites within ``radius`` (units of a) of an up-triangle centre.

    The centre of the triangle (0,0)-(1,0)-(0,1) is a threefold rotation
    point that cycles the three sublattices, so all three 1/3 crystals (and
    all three 2/3 crystals) on the patch are degenerate at Omega = 0.
    """
    centre = (A_X + A_Y) / 3.0
    n = int(np.ceil(radius)) + 3
    pts = []
    for jx in range(-n, n + 1):
        for jy in range(-2 * n, 2 * n + 1):
            p = jx * A_X + jy * A_Y
            if np.linalg.norm(p - centre) <= radius + 1e-9:
                pts.append((jx, jy))
    return tuple(sorted(pts))


def classical_degeneracy_point(shell_max: int = 3) -> float:
    """Detuning where the infinite-lattice 1/3 and 2/3 crystals are degenerate at Omega=0.

    Energy per site of a crystal occupying sublattice set ``S`` is
    ``-Delta |S|/3 + (1/3) sum_{s in S} sum_d U(d) [s + shift(d) in S] / 2``.
    """
    disp = _displacements(shell_max)

    def energy(occupied, delta):
        e = -delta * len(occupied) / 3.0
        for s in occupied:
            for dx, dy in disp:
                if (s + 2 * dx + dy) % 3 in occupied:
                    e += 0.5 / (dx * dx + dx * dy + dy * dy) ** 3 / 3.0
        return e

    v1 = energy({0}, 0.0)
    v2 = energy({1, 2}, 0.0)
    # -D/3 + v1 = -2D/3 + v2
    return 3.0 * (v2 - v1)

