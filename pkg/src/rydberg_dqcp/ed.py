"""Exact ground states for small systems (correctness oracle)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .hamiltonian import DIAGONAL_OPS, SpinOperator, basis_occupations

DEGENERACY_TOL = 1e-8
RESIDUAL_TOL = 1e-10


class EDConvergenceError(RuntimeError):
    def __init__(self, message, best_residual):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


@dataclass
class EDResult:
    energy: float
    vector: np.ndarray
    gap: float | None
    degeneracy: int
    residual: float
    levels: np.ndarray

    @property
    def n_sites(self) -> int:
        return int(np.log2(self.vector.size))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.vector) ** 2

    def occupations(self) -> np.ndarray:
        return self.probabilities() @ basis_occupations(self.n_sites)

    def to_json(self) -> dict:
        return {
            "energy": self.energy,
            "gap": self.gap,
            "degeneracy": self.degeneracy,
            "residual": self.residual,
            "occupations": self.occupations().tolist(),
        }


def _summarize(levels, vector, residual):
    levels = np.sort(np.asarray(levels, dtype=float))
    e0 = levels[0]
    degenerate = levels - e0 <= DEGENERACY_TOL * max(1.0, abs(e0))
    deg = int(degenerate.sum())
    gap = float(levels[deg] - e0) if deg < levels.size else None
    return EDResult(float(e0), vector, gap, deg, float(residual), levels)


def ground_state_ed(h, n_levels: int = 6, tol: float = RESIDUAL_TOL, maxiter: int = 20000, seed: int = 0) -> EDResult:
    """Lowest eigenpair of a dense matrix, sparse matrix or :class:`SpinOperator`.

    Diagonal operators are solved by sorting; dense input by full
    diagonalization; anything else with an implicitly restarted Lanczos
    solver. ``n_levels`` low-lying values are kept for the gap and the
    degeneracy count (a count equal to ``n_levels`` is a lower bound).
    """
    if isinstance(h, SpinOperator) and h.is_diagonal:
        diag = h.diagonal()
        order = np.argsort(diag, kind="stable")
        vec = np.zeros(diag.size)
        vec[order[0]] = 1.0
        e0 = diag[order[0]]
        deg = int(np.sum(diag - e0 <= DEGENERACY_TOL * max(1.0, abs(e0))))
        keep = max(n_levels, deg + 1)
        res = _summarize(diag[order[:keep]], vec, 0.0)
        res.degeneracy = deg
        return res
    if isinstance(h, SpinOperator) and h.n_sites <= 10:
        h = h.to_dense()
    if isinstance(h, np.ndarray):
        vals, vecs = np.linalg.eigh(h)
        v = vecs[:, 0]
        r = np.linalg.norm(h @ v - vals[0] * v)
        return _summarize(vals[: n_levels + 1], v, r)

    if isinstance(h, SpinOperator):
        op = h.as_linear_operator()
    elif sp.issparse(h) or isinstance(h, LinearOperator):
        op = h
    else:
        raise TypeError(f"unsupported operator type {type(h)!r}")
    dim = op.shape[0]
    k = min(n_levels, dim - 2)
    v0 = np.random.default_rng(seed).standard_normal(dim)
    try:
        vals, vecs = eigsh(op, k=k, which="SA", v0=v0, tol=tol * 1e-2, maxiter=maxiter)
    except ArpackNoConvergence as exc:
        best = np.inf
        for val, vec in zip(exc.eigenvalues, exc.eigenvectors.T):
            best = min(best, np.linalg.norm(op @ vec - val * vec))
        if not np.isfinite(best):
            # nothing converged: report the Rayleigh-quotient residual of the start vector
            u = v0 / np.linalg.norm(v0)
            hu = op @ u
            best = float(np.linalg.norm(hu - (u @ hu) * u))
        raise EDConvergenceError("Lanczos did not converge", best) from exc
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    v = vecs[:, 0] / np.linalg.norm(vecs[:, 0])
    r = float(np.linalg.norm(op @ v - vals[0] * v))
    if r > tol * max(1.0, abs(vals[0])):
        raise EDConvergenceError("ground state residual above tolerance", r)
    return _summarize(vals, v, r)


def expectation_ed(vector: np.ndarray, ops) -> float:
    """Expectation of a product of single-site operators.

    ``ops`` is a sequence of ``(site, op)`` with ``op`` in ``x, n, z, id`` on
    distinct sites, e.g. ``[(3, "n")]`` or ``[(0, "n"), (5, "n")]``.
    """
    vector = np.asarray(vector)
    n = int(np.log2(vector.size))
    states = np.arange(vector.size)
    mask = 0
    amp = np.ones(vector.size)
    for s, op in ops:
        if op == "x":
            mask |= 1 << (n - 1 - s)
        else:
            lo, hi = DIAGONAL_OPS[op]
            amp = amp * np.where((states >> (n - 1 - s)) & 1, hi, lo)
    val = np.vdot(vector[states ^ mask], amp * vector)
    return float(np.real(val))


def classical_minima(energies: np.ndarray, tol: float = DEGENERACY_TOL):
    """Indices of all bit-strings within ``tol`` of the minimum."""
    e0 = energies.min()
    return np.flatnonzero(energies - e0 <= tol * max(1.0, abs(e0)))
