"""Two-site DMRG with a subspace-expansion mixer and bond-dimension ramping."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .hamiltonian import MPO
from .mps import MPS, _entropy

logger = logging.getLogger(__name__)


class DMRGError(RuntimeError):
    pass


@dataclass
class DMRGConfig:
    chi_schedule: tuple = (16, 32, 64, 100)
    max_sweeps: int = 20
    min_sweeps: int = 2
    energy_tol: float = 1e-6
    svd_cutoff: float = 1e-10
    mixer_amplitude: float = 1e-3
    mixer_decay: float = 2.0
    mixer_sweeps: int = 6
    init: str = "crystal"
    seed: int = 0
    eig_tol: float = 1e-8
    eig_maxiter: int = 200

    def __post_init__(self):
        self.chi_schedule = tuple(int(c) for c in self.chi_schedule)
        if not self.chi_schedule:
            raise ValueError("chi schedule must be non-empty")
        if any(b < a for a, b in zip(self.chi_schedule, self.chi_schedule[1:])):
            raise ValueError("chi schedule must be non-decreasing")
        if self.energy_tol <= 0 or self.svd_cutoff < 0 or self.eig_tol <= 0:
            raise ValueError("tolerances must be positive")

    def mixer_at(self, sweep: int) -> float:
        if sweep >= self.mixer_sweeps:
            return 0.0
        return self.mixer_amplitude / self.mixer_decay**sweep


@dataclass
class SweepStats:
    sweep: int
    chi: int
    energy: float
    delta_energy: float
    max_truncation: float
    entropy_half: float
    mixer: float
    max_bond: int
    wall: float


@dataclass
class RunRecord:
    sweeps: list = field(default_factory=list)
    stage_energies: dict = field(default_factory=dict)
    status: str = "running"
    converged: bool = False
    wall: float = 0.0
    entropy_base: str = "e"

    @property
    def energy(self) -> float:
        return self.sweeps[-1].energy if self.sweeps else float("nan")

    def to_json(self) -> dict:
        d = asdict(self)
        d["stage_energies"] = {str(k): v for k, v in self.stage_energies.items()}
        return d

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)


# ----------------------------------------------------------------- local solver


def lanczos_ground(matvec, v0: np.ndarray, tol: float = 1e-8, maxiter: int = 200, krylov: int = 24):
    """Lowest eigenpair by restarted Lanczos with full reorthogonalization.

    Stops once ``||H v - E v|| <= tol * max(1, |E|)`` or after ``maxiter``
    matrix-vector products; returns ``(E, v, residual, n_matvec)``.
    """
    shape = v0.shape
    v = v0.reshape(-1).astype(float, copy=True)
    nrm = np.linalg.norm(v)
    if nrm == 0 or not np.isfinite(nrm):
        v = np.random.default_rng(0).standard_normal(v.size)
        nrm = np.linalg.norm(v)
    v /= nrm
    dim = v.size
    used = 0
    energy, resid = np.nan, np.inf
    while used < maxiter:
        m = min(krylov, dim, maxiter - used)
        basis = np.empty((m + 1, dim))
        basis[0] = v
        alpha = np.zeros(m)
        beta = np.zeros(m)
        k_eff = m
        w = None
        for k in range(m):
            w = matvec(basis[k].reshape(shape)).reshape(-1)
            used += 1
            alpha[k] = basis[k] @ w
            w -= basis[: k + 1].T @ (basis[: k + 1] @ w)
            w -= basis[: k + 1].T @ (basis[: k + 1] @ w)
            beta[k] = np.linalg.norm(w)
            if beta[k] < 1e-13 * max(1.0, abs(alpha[k])):
                k_eff = k + 1
                break
            basis[k + 1] = w / beta[k]
        t = np.diag(alpha[:k_eff]) + np.diag(beta[: k_eff - 1], 1) + np.diag(beta[: k_eff - 1], -1)
        evals, evecs = np.linalg.eigh(t)
        energy = evals[0]
        if not np.isfinite(energy):
            raise FloatingPointError("non-finite Ritz value")
        v = evecs[:, 0] @ basis[:k_eff]
        v /= np.linalg.norm(v)
        # residual of the Ritz pair from the Lanczos recurrence
        resid = abs(beta[k_eff - 1] * evecs[k_eff - 1, 0]) if k_eff < dim else 0.0
        if k_eff < m or resid <= tol * max(1.0, abs(energy)):
            break
    return energy, v.reshape(shape), resid, used


# --------------------------------------------------------------------- engine


def initial_state(n_sites: int, init: str = "crystal", sublattices=None, rng=None) -> MPS:
    """``crystal``: equal superposition of the three 1/3 crystals; ``crystal23``;
    ``random``: random product state; ``product:0101..``: explicit bits."""
    rng = np.random.default_rng(rng)
    if init in ("crystal", "crystal13", "crystal23") and sublattices is not None:
        sub = np.asarray(sublattices)
        if init == "crystal23":
            bits = [(sub != s).astype(int) for s in range(3)]
        else:
            bits = [(sub == s).astype(int) for s in range(3)]
        bits = np.unique(np.array(bits), axis=0)
        return MPS.superposition(bits)
    if init.startswith("product:"):
        return MPS.product_state([int(b) for b in init.split(":", 1)[1]])
    if init in ("random", "crystal", "crystal13", "crystal23"):
        return MPS.product_state([rng.standard_normal(2) for _ in range(n_sites)])
    raise ValueError(f"unknown initial state {init!r}")


class DMRGEngine:
    def __init__(self, mpo: MPO, psi: MPS, config: DMRGConfig):
        if len(mpo) != psi.n_sites:
            raise ValueError("MPO and MPS lengths differ")
        self.mpo = [np.asarray(w) for w in mpo.tensors]
        self.psi = psi
        self.config = config
        self.n = psi.n_sites
        self.record = RunRecord()
        self.sweep_count = 0
        psi.canonicalize(0)
        self.left = [None] * (self.n + 1)
        self.right = [None] * (self.n + 1)
        self.left[0] = np.ones((1, 1, 1))
        self.right[self.n] = np.ones((1, 1, 1))
        for k in range(self.n - 1, 0, -1):
            self._update_right(k)

    # env legs: (bra, mpo, ket)
    def _update_left(self, k: int) -> None:
        a = self.psi.tensors[k]
        x = np.tensordot(self.left[k], a, axes=(2, 0))
        x = np.tensordot(x, self.mpo[k], axes=([1, 2], [0, 3]))
        self.left[k + 1] = np.tensordot(a, x, axes=([0, 1], [0, 3])).transpose(0, 2, 1)

    def _update_right(self, k: int) -> None:
        a = self.psi.tensors[k]
        x = np.tensordot(a, self.right[k + 1], axes=(2, 2))  # a s b' w
        x = np.tensordot(x, self.mpo[k], axes=([1, 3], [3, 1]))  # a b' w s'
        self.right[k] = np.tensordot(a, x, axes=([1, 2], [3, 1])).transpose(0, 2, 1)

    def _matvec(self, k: int):
        lenv, renv = self.left[k], self.right[k + 2]
        w1, w2 = self.mpo[k], self.mpo[k + 1]

        def mv(theta):
            t = np.tensordot(lenv, theta, axes=(2, 0))  # b w s1 s2 c
            t = np.tensordot(t, w1, axes=([1, 2], [0, 3]))  # b s2 c w' s1'
            t = np.tensordot(t, w2, axes=([3, 1], [0, 3]))  # b c s1' w'' s2'
            t = np.tensordot(t, renv, axes=([1, 3], [2, 1]))  # b s1' s2' c'
            return t

        return mv

    def _split(self, k: int, theta: np.ndarray, direction: int, chi: int, mixer: float):
        dl, d1, d2, dr = theta.shape
        m = theta.reshape(dl * d1, d2 * dr)
        cut = self.config.svd_cutoff
        if mixer > 0:
            if direction > 0:
                p = np.tensordot(self.left[k], theta, axes=(2, 0))  # b w s1 s2 c
                p = np.tensordot(p, self.mpo[k], axes=([1, 2], [0, 3]))  # b s2 c w' s1'
                p = p.transpose(0, 4, 3, 1, 2).reshape(dl * d1, -1)
                aug = np.hstack([m, mixer * p / max(np.linalg.norm(p), 1e-300)])
            else:
                p = np.tensordot(theta, self.right[k + 2], axes=(3, 2))  # a s1 s2 b' w
                p = np.tensordot(p, self.mpo[k + 1], axes=([2, 4], [3, 1]))  # a s1 b' w' s2'
                p = p.transpose(0, 1, 3, 4, 2).reshape(-1, d2 * dr)
                aug = np.vstack([m, mixer * p / max(np.linalg.norm(p), 1e-300)])
            u, s, vh = np.linalg.svd(aug, full_matrices=False)
        else:
            u, s, vh = np.linalg.svd(m, full_matrices=False)
        keep = max(1, min(chi, int(np.sum(s > cut * s[0]))))
        if mixer > 0:
            if direction > 0:
                u = u[:, :keep]
                c = u.T @ m
            else:
                vh = vh[:keep]
                c = m @ vh.T
            kept = np.linalg.norm(c)
            trunc = max(0.0, 1.0 - kept**2)
            c = c / kept
            schmidt = None
        else:
            disc = s[keep:]
            s_k = s[:keep]
            trunc = float(np.sum(disc**2) / np.sum(s**2))
            s_k = s_k / np.linalg.norm(s_k)
            schmidt = s_k
            u, vh = u[:, :keep], vh[:keep]
            c = (u * s_k) if direction < 0 else (s_k[:, None] * vh)
        if direction > 0:
            self.psi.tensors[k] = u.reshape(dl, d1, keep)
            self.psi.tensors[k + 1] = c.reshape(keep, d2, dr)
            self.psi.center = k + 1
        else:
            self.psi.tensors[k] = c.reshape(dl, d1, keep)
            self.psi.tensors[k + 1] = vh.reshape(keep, d2, dr)
            self.psi.center = k
        if schmidt is None:
            centre = self.psi.tensors[self.psi.center]
            if direction > 0:
                schmidt = np.linalg.svd(centre.reshape(keep, -1), compute_uv=False)
            else:
                schmidt = np.linalg.svd(centre.reshape(-1, keep), compute_uv=False)
        return trunc, schmidt

    def _update(self, k: int, direction: int, chi: int, mixer: float):
        theta = np.tensordot(self.psi.tensors[k], self.psi.tensors[k + 1], axes=(2, 0))
        where = f"sweep {self.sweep_count}, bond {k}"
        try:
            if theta.size <= 4:
                h = np.array([self._matvec(k)(e.reshape(theta.shape)).reshape(-1) for e in np.eye(theta.size)]).T
                vals, vecs = np.linalg.eigh(0.5 * (h + h.T))
                energy, theta = vals[0], vecs[:, 0].reshape(theta.shape)
            else:
                energy, theta, resid, _ = lanczos_ground(
                    self._matvec(k), theta, tol=self.config.eig_tol, maxiter=self.config.eig_maxiter
                )
        except (np.linalg.LinAlgError, FloatingPointError) as exc:
            raise DMRGError(f"NaN in local eigensolve at {where}") from exc
        if not np.isfinite(energy) or not np.all(np.isfinite(theta)):
            raise DMRGError(f"NaN in local eigensolve at {where}")
        trunc, schmidt = self._split(k, theta, direction, chi, mixer)
        if direction > 0:
            self._update_left(k)
        else:
            self._update_right(k + 1)
        return energy, trunc, schmidt

    def sweep(self, chi: int) -> SweepStats:
        t0 = time.perf_counter()
        mixer = self.config.mixer_at(self.sweep_count)
        n = self.n
        max_trunc = 0.0
        s_half = 0.0
        energy = np.nan
        if n == 1:
            raise DMRGError("two-site DMRG needs at least two sites")
        # center sits at 0 (right-canonical rest)
        for k in range(n - 1):
            energy, tr, sch = self._update(k, +1, chi, mixer)
            max_trunc = max(max_trunc, tr)
        for k in range(n - 2, -1, -1):
            energy, tr, sch = self._update(k, -1, chi, mixer)
            max_trunc = max(max_trunc, tr)
            if k + 1 == n // 2:
                s_half = _entropy(sch)
        self.psi.truncation_error += max_trunc
        prev = self.record.sweeps[-1].energy if self.record.sweeps else np.nan
        stats = SweepStats(
            sweep=self.sweep_count,
            chi=chi,
            energy=float(energy),
            delta_energy=float(abs(energy - prev)) if np.isfinite(prev) else float("inf"),
            max_truncation=float(max_trunc),
            entropy_half=float(s_half),
            mixer=float(mixer),
            max_bond=max(self.psi.bond_dims),
            wall=time.perf_counter() - t0,
        )
        self.sweep_count += 1
        self.record.sweeps.append(stats)
        logger.info(
            "sweep %d chi=%d E=%.12f dE=%.2e trunc=%.1e S=%.4f bond=%d (%.1fs)",
            stats.sweep, chi, stats.energy, stats.delta_energy, max_trunc, s_half, stats.max_bond, stats.wall,
        )
        return stats

    def run(self) -> tuple[MPS, RunRecord]:
        cfg = self.config
        t0 = time.perf_counter()
        converged = False
        for stage, chi in enumerate(cfg.chi_schedule):
            final = stage == len(cfg.chi_schedule) - 1
            converged = False
            for it in range(cfg.max_sweeps):
                stats = self.sweep(chi)
                mixing = stats.mixer > 0
                if it + 1 >= cfg.min_sweeps and stats.delta_energy < cfg.energy_tol and not (final and mixing):
                    converged = True
                    break
            self.record.stage_energies[chi] = self.record.energy
        self.record.converged = converged
        self.record.status = "converged" if converged else "unconverged"
        self.record.wall = time.perf_counter() - t0
        self.psi.center = 0
        return self.psi, self.record


def dmrg_ground_state(mpo: MPO, config: DMRGConfig | None = None, init: MPS | None = None, sublattices=None):
    """Ground state by two-site DMRG over ``config.chi_schedule``.

    The converged state at each bond dimension seeds the next one. The
    returned state is right-canonical with its center on site 0.
    """
    config = config or DMRGConfig()
    if init is None:
        init = initial_state(len(mpo), config.init, sublattices, config.seed)
    else:
        init = init.copy()
    engine = DMRGEngine(mpo, init, config)
    return engine.run()
