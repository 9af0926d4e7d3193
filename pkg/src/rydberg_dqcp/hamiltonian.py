"""Rydberg Hamiltonian as a term list, an exact MPO and an exact-diagonalization operator.

Local basis is ``|0> = |g>``, ``|1> = |r>``; ``n = |r><r|`` and
``x = |r><g| + |g><r|``. Energies are in units of the nearest-neighbour
interaction U.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .lattice import CouplingTable, Geometry, pairwise_couplings, snake_order

LOCAL_OPS = {
    "id": np.eye(2),
    "x": np.array([[0.0, 1.0], [1.0, 0.0]]),
    "n": np.array([[0.0, 0.0], [0.0, 1.0]]),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]]),
}
DIAGONAL_OPS = {"id": (1.0, 1.0), "n": (0.0, 1.0), "z": (1.0, -1.0)}

DENSE_LIMIT = 14
SPARSE_LIMIT = 22
MATFREE_LIMIT = 26


class SizeLimitError(ValueError):
    pass


@dataclass(frozen=True)
class RydbergParams:
    omega: float
    delta: float
    u: float = 1.0

    def __post_init__(self):
        if not self.u > 0:
            raise ValueError("U must be positive")
        if self.omega < 0:
            raise ValueError("Omega must be non-negative")


@dataclass(frozen=True)
class TermList:
    """Generic spin-1/2 Hamiltonian: one-site and two-site product terms.

    ``onsite`` holds ``(site, op, coeff)``; ``pairs`` holds
    ``(i, op_i, j, op_j, coeff)`` with ``i != j``. Operators are keys of
    :data:`LOCAL_OPS`; all are Hermitian and coefficients are real.
    """

    n_sites: int
    onsite: tuple = ()
    pairs: tuple = ()
    constant: float = 0.0

    def __post_init__(self):
        for s, op, c in self.onsite:
            if not 0 <= s < self.n_sites or op not in LOCAL_OPS or not np.isfinite(c):
                raise ValueError(f"bad one-site term {(s, op, c)}")
        for i, oi, j, oj, c in self.pairs:
            if i == j or not (0 <= i < self.n_sites and 0 <= j < self.n_sites):
                raise ValueError(f"bad two-site term {(i, oi, j, oj, c)}")
            if oi not in LOCAL_OPS or oj not in LOCAL_OPS or not np.isfinite(c):
                raise ValueError(f"bad two-site term {(i, oi, j, oj, c)}")


def build_terms(geometry: Geometry, params: RydbergParams, couplings: CouplingTable | None = None) -> TermList:
    """Rydberg terms ``Omega/2 x_j - Delta n_j + sum U_ij n_i n_j``.

    Self-image couplings (a site meeting its own periodic image, possible for
    shell 5 on a three-site ring) reduce to ``U_ii n_i`` since ``n^2 = n``.
    """
    if couplings is None:
        couplings = pairwise_couplings(geometry, u=params.u)
    n = geometry.n_sites
    mu = np.full(n, -params.delta)
    for c in couplings.self_entries():
        mu[c.i] += c.strength
    onsite = []
    for s in range(n):
        onsite.append((s, "x", 0.5 * params.omega))
        onsite.append((s, "n", float(mu[s])))
    pairs = tuple((c.i, "n", c.j, "n", c.strength) for c in couplings.pair_entries())
    return TermList(n, tuple(onsite), pairs)


def transverse_ising_terms(length: int, j: float = 1.0, g: float = 1.0) -> TermList:
    """Open chain ``-J sum z_i z_{i+1} - g sum x_i`` (critical at g = J)."""
    onsite = tuple((s, "x", -g) for s in range(length))
    pairs = tuple((s, "z", s + 1, "z", -j) for s in range(length - 1))
    return TermList(length, onsite, pairs)


# --------------------------------------------------------------------------- MPO


@dataclass(frozen=True)
class MPO:
    """Tensors ``W[k]`` with legs ``(left, right, out, in)``."""

    tensors: tuple
    exact: bool = True

    def __len__(self):
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [self.tensors[0].shape[0]] + [w.shape[1] for w in self.tensors]

    def to_dense(self) -> np.ndarray:
        if len(self) > DENSE_LIMIT:
            raise SizeLimitError(f"dense MPO contraction limited to {DENSE_LIMIT} sites")
        acc = self.tensors[0][0]  # (right, out, in)
        acc = np.transpose(acc, (1, 2, 0))  # out, in, right
        for w in self.tensors[1:]:
            acc = np.tensordot(acc, w, axes=(2, 0))  # O I r o i
            o1, i1, r, o2, i2 = acc.shape
            acc = acc.transpose(0, 3, 1, 4, 2).reshape(o1 * o2, i1 * i2, r)
        return acc[:, :, 0]

    def apply(self, vector: np.ndarray) -> np.ndarray:
        """Matrix-free ``H @ vector`` by contracting the MPO leg by leg."""
        n = len(self)
        t = np.asarray(vector).reshape((1,) + (2,) * n)
        for k, w in enumerate(self.tensors):
            t = np.tensordot(w, t, axes=([0, 3], [0, 1 + k]))
            t = np.moveaxis(t, 1, 1 + k)
        return t[0].reshape(-1)


def terms_to_mpo(terms: TermList, order: Sequence[int] | None = None, max_range: int | None = None) -> MPO:
    """Exact finite-state-machine MPO over a chain ordering.

    ``order[k]`` is the site at chain position ``k``. State 0 on a bond means
    "nothing placed yet", state 1 "term completed"; each further state is an
    open strand ``(chain position p, operator)`` waiting for its partner.
    """
    n = terms.n_sites
    order = np.arange(n) if order is None else np.asarray(order)
    pos = np.empty(n, dtype=int)
    pos[order] = np.arange(n)
    max_range = n if max_range is None else max_range

    onsite = [np.zeros((2, 2)) for _ in range(n)]
    for s, op, c in terms.onsite:
        onsite[pos[s]] += c * LOCAL_OPS[op]

    # closing[q][(p, op_p)] -> accumulated right operator at chain position q
    closing = [dict() for _ in range(n)]
    reach = {}
    for i, oi, j, oj, c in terms.pairs:
        p, q, op_p, op_q = pos[i], pos[j], oi, oj
        if p > q:
            p, q, op_p, op_q = q, p, oj, oi
        if q - p > max_range:
            raise ValueError(f"term between chain positions {p} and {q} exceeds max_range={max_range}")
        key = (int(p), op_p)
        closing[q][key] = closing[q].get(key, 0.0) + c * LOCAL_OPS[op_q]
        reach[key] = max(reach.get(key, -1), int(q))

    # strands open on bond b (between positions b and b+1)
    bonds = []
    for b in range(n - 1):
        open_ = sorted(k for k, far in reach.items() if k[0] <= b < far)
        bonds.append({k: 2 + idx for idx, k in enumerate(open_)})

    eye = np.eye(2)
    tensors = []
    for k in range(n):
        left = bonds[k - 1] if k > 0 else {}
        right = bonds[k] if k < n - 1 else {}
        dl = 2 + len(left)
        dr = 2 + len(right)
        w = np.zeros((dl, dr, 2, 2))
        w[0, 0] = eye
        w[1, 1] = eye
        w[0, 1] = onsite[k]
        for key, idx in right.items():
            if key[0] == k:
                w[0, idx] = LOCAL_OPS[key[1]]
            else:
                w[left[key], idx] = eye
        for key, op in closing[k].items():
            w[left[key], 1] += op
        if k == 0:
            w = w[:1]
        if k == n - 1:
            w = w[:, 1:2]
        tensors.append(w)
    if terms.constant:
        tensors[0] = tensors[0].copy()
        tensors[0][0, -1 if n == 1 else 1] += terms.constant * eye
    return MPO(tuple(tensors))


def open_strands(terms: TermList, order: Sequence[int] | None = None) -> list[int]:
    """Brute-force count of (left position, operator) strands crossing each bond."""
    n = terms.n_sites
    order = np.arange(n) if order is None else np.asarray(order)
    pos = np.empty(n, dtype=int)
    pos[order] = np.arange(n)
    out = []
    for b in range(n - 1):
        keys = set()
        for i, oi, j, oj, _ in terms.pairs:
            p, q = sorted((pos[i], pos[j]))
            op = oi if pos[i] == p else oj
            if p <= b < q:
                keys.add((p, op))
        out.append(len(keys))
    return out


# ------------------------------------------------------------------ exact operator


def _bit(states: np.ndarray, site: int, n: int) -> np.ndarray:
    return (states >> (n - 1 - site)) & 1


def basis_occupations(n_sites: int) -> np.ndarray:
    """(2^N, N) occupation table; site 0 is the most significant bit."""
    states = np.arange(2**n_sites)
    return ((states[:, None] >> (n_sites - 1 - np.arange(n_sites))) & 1).astype(np.int8)


@dataclass
class SpinOperator:
    """Sum of Pauli-like products stored as ``{flip mask: amplitude vector}``.

    ``<s ^ mask | H | s> = amp[mask][s]``. Every term of a :class:`TermList`
    is a product of ``x`` (bit flip) and diagonal factors on distinct sites,
    so this representation is exact.
    """

    n_sites: int
    blocks: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return 2**self.n_sites

    @property
    def is_diagonal(self) -> bool:
        return all(m == 0 or not np.any(a) for m, a in self.blocks.items())

    def diagonal(self) -> np.ndarray:
        return self.blocks.get(0, np.zeros(self.dim))

    def matvec(self, v: np.ndarray) -> np.ndarray:
        idx = np.arange(self.dim)
        out = np.zeros(v.shape, dtype=np.result_type(v, float))
        for mask, amp in self.blocks.items():
            if mask == 0:
                out += (amp * v.T).T if v.ndim > 1 else amp * v
            else:
                w = (amp * v.T).T if v.ndim > 1 else amp * v
                out[idx ^ mask] += w
        return out

    def as_linear_operator(self) -> LinearOperator:
        return LinearOperator((self.dim, self.dim), matvec=self.matvec, matmat=self.matvec, dtype=float)

    def to_sparse(self) -> sp.csr_matrix:
        if self.n_sites > SPARSE_LIMIT:
            raise SizeLimitError(f"sparse Hamiltonian limited to N <= {SPARSE_LIMIT} sites")
        idx = np.arange(self.dim)
        rows, cols, vals = [], [], []
        for mask, amp in self.blocks.items():
            nz = amp != 0
            rows.append((idx ^ mask)[nz])
            cols.append(idx[nz])
            vals.append(amp[nz])
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.dim, self.dim))

    def to_dense(self) -> np.ndarray:
        if self.n_sites > DENSE_LIMIT:
            raise SizeLimitError(f"dense Hamiltonian limited to N <= {DENSE_LIMIT} sites; use to_sparse or matvec")
        out = np.zeros((self.dim, self.dim))
        idx = np.arange(self.dim)
        for mask, amp in self.blocks.items():
            out[idx ^ mask, idx] += amp
        return out


def spin_operator(terms: TermList) -> SpinOperator:
    n = terms.n_sites
    if n > MATFREE_LIMIT:
        raise SizeLimitError(f"exact operator limited to N <= {MATFREE_LIMIT} sites (got {n})")
    states = np.arange(2**n)
    bits = {}

    def bit(s):
        if s not in bits:
            bits[s] = _bit(states, s, n)
        return bits[s]

    blocks: dict[int, np.ndarray] = {}

    def add(factors, coeff):
        mask = 0
        amp = np.full(2**n, float(coeff))
        for s, op in factors:
            if op == "x":
                mask |= 1 << (n - 1 - s)
            else:
                lo, hi = DIAGONAL_OPS[op]
                amp *= np.where(bit(s) == 1, hi, lo)
        if mask in blocks:
            blocks[mask] += amp
        else:
            blocks[mask] = amp

    for s, op, c in terms.onsite:
        add([(s, op)], c)
    for i, oi, j, oj, c in terms.pairs:
        add([(i, oi), (j, oj)], c)
    if terms.constant or 0 not in blocks:
        blocks[0] = blocks.get(0, np.zeros(2**n)) + terms.constant
    return SpinOperator(n, blocks)


def dense_hamiltonian(terms: TermList) -> np.ndarray:
    """Dense ``2^N x 2^N`` matrix (N <= 14; see :func:`spin_operator` for larger)."""
    if terms.n_sites > DENSE_LIMIT:
        raise SizeLimitError(
            f"dense matrix limited to N <= {DENSE_LIMIT} sites (got {terms.n_sites}); "
            f"sparse form works to {SPARSE_LIMIT}, matrix-free to {MATFREE_LIMIT}"
        )
    return spin_operator(terms).to_dense()


def rydberg_model(geometry: Geometry, params: RydbergParams):
    """Convenience: term list and MPO over the snake order."""
    terms = build_terms(geometry, params)
    return terms, terms_to_mpo(terms, snake_order(geometry))
