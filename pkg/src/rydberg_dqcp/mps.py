"""Finite matrix-product states: canonical forms, measurements and sampling.

Tensors have legs ``(left, physical, right)``. Chain position ``k`` is the
``k``-th site of the snake order (for the geometries built here this is
just site ``k``).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

CHECKPOINT_MAGIC = b"RYDMPS\x00\x00"
CHECKPOINT_VERSION = 1


class CanonicalFormError(RuntimeError):
    pass


class MPS:
    def __init__(self, tensors: Sequence[np.ndarray], center: int | None = None, truncation_error: float = 0.0):
        self.tensors = [np.asarray(t) for t in tensors]
        self.center = center
        self.truncation_error = truncation_error

    # --- construction -----------------------------------------------------
    @classmethod
    def product_state(cls, local_states) -> "MPS":
        """From a bit-string or a list of local (unnormalized) vectors."""
        tensors = []
        for v in local_states:
            if np.ndim(v) == 0:
                vec = np.zeros(2)
                vec[int(v)] = 1.0
            else:
                vec = np.asarray(v, dtype=float)
                vec = vec / np.linalg.norm(vec)
            tensors.append(vec.reshape(1, -1, 1))
        return cls(tensors, center=0)

    @classmethod
    def superposition(cls, bitstrings, weights=None) -> "MPS":
        """Normalized sum of product basis states (bond dimension = #states)."""
        bits = np.atleast_2d(np.asarray(bitstrings, dtype=int))
        k, n = bits.shape
        w = np.ones(k) if weights is None else np.asarray(weights, dtype=float)
        if n == 1:
            vec = np.zeros(2)
            for b, c in zip(bits[:, 0], w):
                vec[b] += c
            return cls([vec.reshape(1, 2, 1) / np.linalg.norm(vec)], center=0)
        tensors = []
        for site in range(n):
            dl = 1 if site == 0 else k
            dr = 1 if site == n - 1 else k
            t = np.zeros((dl, 2, dr))
            for a in range(k):
                l = 0 if site == 0 else a
                r = 0 if site == n - 1 else a
                t[l, bits[a, site], r] = w[a] if site == 0 else 1.0
            tensors.append(t)
        psi = cls(tensors)
        psi.canonicalize(0)
        return psi

    @classmethod
    def random(cls, n_sites: int, chi: int, rng=None, d: int = 2) -> "MPS":
        rng = np.random.default_rng(rng)
        dims = [1]
        for k in range(1, n_sites):
            dims.append(min(chi, d**k, d ** (n_sites - k)))
        dims.append(1)
        tensors = [rng.standard_normal((dims[k], d, dims[k + 1])) for k in range(n_sites)]
        psi = cls(tensors)
        psi.canonicalize(0)
        return psi

    @classmethod
    def from_dense(cls, vector: np.ndarray, chi: int | None = None, d: int = 2) -> "MPS":
        vector = np.asarray(vector, dtype=float)
        n = int(round(np.log(vector.size) / np.log(d)))
        tensors = []
        rest = vector.reshape(1, -1)
        for k in range(n - 1):
            dl = rest.shape[0]
            m = rest.reshape(dl * d, -1)
            u, s, vh = np.linalg.svd(m, full_matrices=False)
            keep = s > 1e-14 * s[0]
            if chi is not None:
                keep[chi:] = False
            u, s, vh = u[:, keep], s[keep], vh[keep]
            tensors.append(u.reshape(dl, d, -1))
            rest = s[:, None] * vh
        tensors.append(rest.reshape(rest.shape[0], d, 1))
        psi = cls(tensors, center=n - 1)
        psi.canonicalize(0)
        return psi

    def copy(self) -> "MPS":
        return MPS([t.copy() for t in self.tensors], self.center, self.truncation_error)

    # --- basic properties -------------------------------------------------
    def __len__(self) -> int:
        return len(self.tensors)

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [self.tensors[0].shape[0]] + [t.shape[2] for t in self.tensors]

    @property
    def dtype(self):
        return np.result_type(*self.tensors)

    # --- canonical form ---------------------------------------------------
    def _left_qr(self, k: int) -> None:
        t = self.tensors[k]
        dl, d, dr = t.shape
        q, r = np.linalg.qr(t.reshape(dl * d, dr))
        self.tensors[k] = q.reshape(dl, d, -1)
        self.tensors[k + 1] = np.tensordot(r, self.tensors[k + 1], axes=(1, 0))

    def _right_qr(self, k: int) -> None:
        t = self.tensors[k]
        dl, d, dr = t.shape
        q, r = np.linalg.qr(t.reshape(dl, d * dr).T)
        self.tensors[k] = q.T.reshape(-1, d, dr)
        self.tensors[k - 1] = np.tensordot(self.tensors[k - 1], r.T, axes=(2, 0))

    def canonicalize(self, center: int = 0, normalize: bool = True) -> float:
        """Mixed canonical form around ``center``; returns the norm before normalization."""
        n = self.n_sites
        for k in range(center):
            self._left_qr(k)
        for k in range(n - 1, center, -1):
            self._right_qr(k)
        nrm = float(np.linalg.norm(self.tensors[center]))
        if normalize and nrm > 0:
            self.tensors[center] = self.tensors[center] / nrm
        self.center = center
        return nrm

    def move_center(self, to: int) -> None:
        if self.center is None:
            self.canonicalize(to)
            return
        while self.center < to:
            self._left_qr(self.center)
            self.center += 1
        while self.center > to:
            self._right_qr(self.center)
            self.center -= 1

    def isometry_error(self) -> float:
        """Max deviation of the canonical-form isometry conditions."""
        if self.center is None:
            raise CanonicalFormError("no canonical center recorded")
        err = 0.0
        for k, t in enumerate(self.tensors):
            dl, d, dr = t.shape
            if k < self.center:
                m = t.reshape(dl * d, dr)
                err = max(err, np.abs(m.conj().T @ m - np.eye(dr)).max())
            elif k > self.center:
                m = t.reshape(dl, d * dr)
                err = max(err, np.abs(m @ m.conj().T - np.eye(dl)).max())
        return float(err)

    def norm(self) -> float:
        env = np.ones((1, 1))
        for t in self.tensors:
            env = _transfer(env, t, None)
        return float(np.sqrt(abs(env[0, 0])))

    def overlap(self, other: "MPS") -> complex:
        env = np.ones((1, 1))
        for a, b in zip(self.tensors, other.tensors):
            env = np.einsum("ab,asc,bsd->cd", env, a.conj(), b, optimize=True)
        return env[0, 0]

    def to_dense(self) -> np.ndarray:
        if self.n_sites > 24:
            raise ValueError("dense expansion limited to 24 sites")
        acc = self.tensors[0].reshape(-1, self.tensors[0].shape[2])
        for t in self.tensors[1:]:
            acc = np.tensordot(acc, t, axes=(1, 0)).reshape(-1, t.shape[2])
        return acc[:, 0]

    # --- persistence ------------------------------------------------------
    def save(self, path) -> None:
        """Versioned binary checkpoint (little-endian float64 tensors)."""
        if np.iscomplexobj(self.dtype.type(0)):
            raise TypeError("checkpoints store real tensors only")
        n = self.n_sites
        d = self.tensors[0].shape[1]
        center = -1 if self.center is None else self.center
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<IIIid", CHECKPOINT_VERSION, n, d, center, self.truncation_error))
            fh.write(np.asarray(self.bond_dims, dtype="<u4").tobytes())
            for t in self.tensors:
                fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "MPS":
        data = Path(path).read_bytes()
        if data[:8] != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not an MPS checkpoint")
        version, n, d, center, trunc = struct.unpack_from("<IIIid", data, 8)
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        off = 8 + struct.calcsize("<IIIid")
        dims = np.frombuffer(data, dtype="<u4", count=n + 1, offset=off).astype(int)
        off += 4 * (n + 1)
        tensors = []
        for k in range(n):
            size = dims[k] * d * dims[k + 1]
            t = np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(dims[k], d, dims[k + 1])
            tensors.append(t.astype(float))
            off += 8 * size
        if off != len(data):
            raise ValueError(f"{path}: trailing bytes in checkpoint")
        return cls(tensors, None if center < 0 else center, trunc)


# ---------------------------------------------------------------- environments


def _transfer(env: np.ndarray, t: np.ndarray, op: np.ndarray | None) -> np.ndarray:
    """Left transfer ``env[a, a'] -> sum A^*[a,s,b] O[s,s'] A[a',s',c]``."""
    x = np.tensordot(env, t, axes=(1, 0))  # a s' c
    if op is not None:
        x = np.tensordot(x, op, axes=(1, 1))  # a c s
        x = x.transpose(0, 2, 1)
    return np.tensordot(t.conj(), x, axes=([0, 1], [0, 1]))


def _right_transfer(env: np.ndarray, t: np.ndarray) -> np.ndarray:
    x = np.tensordot(t, env, axes=(2, 1))  # a s c'
    return np.tensordot(t.conj(), x, axes=([1, 2], [1, 2]))


class Environments:
    """Cached identity environments for repeated local measurements."""

    def __init__(self, mps: MPS):
        n = mps.n_sites
        self.mps = mps
        self.left = [np.ones((1, 1))]
        for t in mps.tensors:
            self.left.append(_transfer(self.left[-1], t, None))
        self.right = [np.ones((1, 1))]
        for t in reversed(mps.tensors):
            self.right.append(_right_transfer(self.right[-1], t))
        self.right = self.right[::-1]
        self.norm2 = float(np.real(self.left[n][0, 0]))

    def local(self, op: np.ndarray, site: int) -> complex:
        x = _transfer(self.left[site], self.mps.tensors[site], op)
        return np.sum(x * self.right[site + 1]) / self.norm2

    def pair(self, op_i: np.ndarray, i: int, op_j: np.ndarray, j: int) -> complex:
        if i == j:
            return self.local(op_i @ op_j, i)
        if i > j:
            return np.conj(self.pair(op_j.conj().T, j, op_i.conj().T, i))
        env = _transfer(self.left[i], self.mps.tensors[i], op_i)
        for k in range(i + 1, j):
            env = _transfer(env, self.mps.tensors[k], None)
        x = _transfer(env, self.mps.tensors[j], op_j)
        return np.sum(x * self.right[j + 1]) / self.norm2

    def row(self, op_i: np.ndarray, i: int, op_j: np.ndarray, sites: Sequence[int]) -> dict:
        """``<O_i O'_j>`` for all ``j > i`` in ``sites`` with one sweep."""
        sites = sorted(s for s in sites if s > i)
        out = {}
        if not sites:
            return out
        env = _transfer(self.left[i], self.mps.tensors[i], op_i)
        for k in range(i + 1, sites[-1] + 1):
            if k in sites:
                x = _transfer(env, self.mps.tensors[k], op_j)
                out[k] = np.sum(x * self.right[k + 1]) / self.norm2
            env = _transfer(env, self.mps.tensors[k], None)
        return out


def _real_if_close(x):
    x = np.asarray(x)
    if np.iscomplexobj(x) and np.all(np.abs(x.imag) < 1e-12 * max(1.0, np.abs(x).max(initial=0.0))):
        return x.real
    return x


def expectation(mps: MPS, op: np.ndarray, site: int):
    return _real_if_close(Environments(mps).local(op, site))[()]


def expectation_all(mps: MPS, op: np.ndarray, sites: Sequence[int] | None = None) -> np.ndarray:
    env = Environments(mps)
    sites = range(mps.n_sites) if sites is None else sites
    return _real_if_close([env.local(op, s) for s in sites])


def correlator(mps: MPS, op_i: np.ndarray, i: int, op_j: np.ndarray, j: int):
    return _real_if_close(Environments(mps).pair(op_i, i, op_j, j))[()]


def correlation_matrix(mps: MPS, op_i: np.ndarray, op_j: np.ndarray, sites: Sequence[int] | None = None) -> np.ndarray:
    """``C[a, b] = <O_{s_a} O'_{s_b}>`` over ``sites`` (cost ~ N^2 chi^3)."""
    sites = list(range(mps.n_sites)) if sites is None else sorted(sites)
    env = Environments(mps)
    idx = {s: a for a, s in enumerate(sites)}
    same = np.array_equal(op_i, op_j)
    out = np.zeros((len(sites), len(sites)), dtype=complex)
    for a, i in enumerate(sites):
        out[a, a] = env.local(op_i @ op_j, i)
        for j, val in env.row(op_i, i, op_j, sites).items():
            out[a, idx[j]] = val
        # operators on distinct sites commute: C[b, a] = <O'_i O_j>
        lower = env.row(op_j, i, op_i, sites) if not same else {j: out[a, idx[j]] for j in sites if j > i}
        for j, val in lower.items():
            out[idx[j], a] = val
    return _real_if_close(out)


def mpo_expectation(mps: MPS, tensors) -> complex:
    """``<psi|W|psi> / <psi|psi>`` for an MPO with legs (left, right, out, in)."""
    env = np.ones((1, 1, 1))  # bra, w, ket
    for a, w in zip(mps.tensors, tensors):
        x = np.tensordot(env, a, axes=(2, 0))  # b w s c
        x = np.tensordot(x, w, axes=([1, 2], [0, 3]))  # b c w' s'
        env = np.tensordot(a.conj(), x, axes=([0, 1], [0, 3]))  # b' c w'
        env = env.transpose(0, 2, 1)
    nrm = mps.norm() ** 2
    return env[0, 0, 0] / nrm


# ------------------------------------------------------------------ entropies


def schmidt_values(mps: MPS, cut: int) -> np.ndarray:
    """Schmidt coefficients across the bond left of chain position ``cut``."""
    if not 0 < cut < mps.n_sites:
        raise ValueError("cut must lie strictly inside the chain")
    psi = mps.copy()
    psi.move_center(cut) if psi.center is not None else psi.canonicalize(cut)
    t = psi.tensors[cut]
    s = np.linalg.svd(t.reshape(t.shape[0], -1), compute_uv=False)
    return s / np.linalg.norm(s)


def _entropy(s: np.ndarray, base=np.e) -> float:
    p = s[s > 0] ** 2
    p = p / p.sum()
    return float(-np.sum(p * np.log(p)) / np.log(base))


def entanglement_entropy(mps: MPS, cut: int, base=np.e) -> float:
    """Von Neumann entropy ``-sum l^2 ln l^2`` (natural log unless ``base`` given)."""
    return _entropy(schmidt_values(mps, cut), base)


def entanglement_profile(mps: MPS, base=np.e) -> np.ndarray:
    """Entropies on every internal bond ``1..N-1`` in one canonical sweep."""
    psi = mps.copy()
    psi.canonicalize(0)
    out = []
    for k in range(psi.n_sites - 1):
        t = psi.tensors[k]
        dl, d, dr = t.shape
        u, s, vh = np.linalg.svd(t.reshape(dl * d, dr), full_matrices=False)
        out.append(_entropy(s, base))
        psi.tensors[k] = u.reshape(dl, d, -1)
        psi.tensors[k + 1] = np.tensordot(s[:, None] * vh, psi.tensors[k + 1], axes=(1, 0))
    return np.array(out)


# ------------------------------------------------------------------- sampling


def sample_snapshots(mps: MPS, n_samples: int, rng=None, batch: int = 4096, tol: float = 1e-10) -> np.ndarray:
    """Perfect sampling in the computational basis.

    Returns an ``(n_samples, N)`` uint8 array in chain order. Each row is an
    independent draw from ``|<s|psi>|^2`` via sequential conditional
    probabilities on a right-canonical copy of the state.
    """
    rng = np.random.default_rng(rng)
    psi = mps
    if psi.center != 0 or abs(np.linalg.norm(psi.tensors[0]) - 1.0) > 1e-10:
        psi = mps.copy()
        psi.canonicalize(0)
    n = psi.n_sites
    out = np.empty((n_samples, n), dtype=np.uint8)
    for start in range(0, n_samples, batch):
        b = min(batch, n_samples - start)
        v = np.ones((b, 1), dtype=psi.dtype)
        u = rng.random((b, n))
        for k, t in enumerate(psi.tensors):
            w = np.tensordot(v, t, axes=(1, 0))  # b s c
            p = np.einsum("bsc,bsc->bs", w.conj(), w).real
            if p.min() < -tol or p.sum(axis=1).max() > 1 + tol:
                raise CanonicalFormError(f"conditional probability out of range at site {k}")
            p = np.clip(p, 0.0, None)
            tot = p.sum(axis=1)
            cum = np.cumsum(p, axis=1) / tot[:, None]
            s = (u[:, k, None] > cum[:, :-1]).sum(axis=1)
            out[start : start + b, k] = s
            v = w[np.arange(b), s] / np.sqrt(p[np.arange(b), s])[:, None]
    return out


def sample_snapshot(mps: MPS, rng=None) -> np.ndarray:
    return sample_snapshots(mps, 1, rng)[0]


# --------------------------------------------------------- correlation length


@dataclass
class CorrelationLengthFit:
    xi: float
    r2: float
    usable: bool
    window: tuple[float, float]
    reason: str = ""


def correlation_length_estimate(r, c, window=None, zero_tol: float = 1e-10, sign_tol: float = 1e-3) -> CorrelationLengthFit:
    """``xi`` from a log-linear fit of ``|C(r)|`` against ``r``.

    Series that are identically ~0 give ``xi = 0``. Sign alternation or
    growth of ``|C|`` beyond ``sign_tol`` (relative to ``max |C|``) marks the
    estimate unusable; ``r2`` lets callers reject power-law-like series.
    """
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    if window is not None:
        sel = (r >= window[0]) & (r <= window[1])
        r, c = r[sel], c[sel]
    win = (float(r.min()), float(r.max())) if r.size else (0.0, 0.0)
    scale = np.abs(c).max(initial=0.0)
    if scale < zero_tol:
        return CorrelationLengthFit(0.0, 1.0, True, win, "vanishing correlator")
    if r.size < 3:
        return CorrelationLengthFit(float("nan"), 0.0, False, win, "fewer than three points")
    reason = ""
    dominant = np.sign(c[np.argmax(np.abs(c))])
    if np.any(c * dominant < -sign_tol * scale):
        reason = "sign-alternating series"
    elif np.any(np.diff(np.abs(c)) > sign_tol * scale):
        reason = "non-monotone series"
    keep = np.abs(c) > zero_tol
    if keep.sum() < 2:
        return CorrelationLengthFit(0.0, 1.0, not reason, win, reason or "decays below tolerance")
    y = np.log(np.abs(c[keep]))
    x = r[keep]
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    xi = -1.0 / slope if slope < 0 else float("inf")
    return CorrelationLengthFit(float(xi), float(r2), not reason and slope < 0, win, reason)
