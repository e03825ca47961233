"""Exact DD-domain input-output operator ``y = H x`` of an ODDM frame.

Vectors are ordered ``x = [x_0; ...; x_{M-1}]`` with ``x_m = X[m, :]`` so
entry ``m*N + n`` holds ``X[m, n]``. ``C`` denotes the ``N x N`` cyclic
permutation with ``(C v)[n] = v[n-1]``, so ``C**k`` moves subcarrier ``n`` to
``n + k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import DdChannel
from .params import GridParams

DENSE_LIMIT = 4096


def phase_term(m: int, l: int, k: int, M: int, N: int) -> complex:
    """Doppler rotation ``exp(j 2 pi k (m - l) / (MN))`` picked up by symbol ``m - l``."""
    return complex(np.exp(2j * np.pi * k * (m - l) / (M * N)))


def wrap_phase(N: int) -> np.ndarray:
    """Diagonal of ``D = diag(1, e^{-j2pi/N}, ..., e^{-j2pi(N-1)/N})``."""
    return np.exp(-2j * np.pi * np.arange(N) / N)


def cyclic_shift(N: int, k: int) -> np.ndarray:
    return np.roll(np.eye(N), k, axis=0)


@dataclass(frozen=True)
class SparseRows:
    """Row-sparse matrix: row ``d`` has entries ``coefs[d, j]`` in columns ``cols[d, j]``."""

    cols: np.ndarray
    coefs: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        n = self.cols.shape[0]
        return n, n

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[0] != self.cols.shape[0]:
            raise ValueError(f"vector length {x.shape[0]} does not match operator size {self.cols.shape[0]}")
        return np.sum(self.coefs * x[self.cols], axis=1)

    def to_dense(self) -> np.ndarray:
        n = self.cols.shape[0]
        H = np.zeros((n, n), dtype=complex)
        np.add.at(H, (np.repeat(np.arange(n), self.cols.shape[1]), self.cols.ravel()), self.coefs.ravel())
        return H

    def permuted(self, perm: np.ndarray) -> "SparseRows":
        """Operator of ``P H P^T`` where ``(P v)[i] = v[perm[i]]``."""
        perm = np.asarray(perm)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        return SparseRows(cols=inv[self.cols[perm]], coefs=self.coefs[perm])


@dataclass(frozen=True)
class DdChannelMatrix:
    """Block operator built from circulant blocks ``H_l^m`` and the wrap phase ``D``.

    Each block is stored through the spreading matrix ``G`` (Doppler ``k``
    coefficients per delay ``l``) rather than as a dense ``N x N`` array.
    """

    M: int
    N: int
    L: int
    K: int
    G: np.ndarray = field(repr=False)
    _rows: SparseRows = field(repr=False, compare=False, default=None)

    @property
    def size(self) -> int:
        return self.M * self.N

    @property
    def taps(self) -> list[tuple[int, int, complex]]:
        """Nonzero ``(l, k, g)`` cells of ``G``."""
        rows, cols = np.nonzero(self.G)
        return [(int(c), int(r) - self.K, complex(self.G[r, c])) for r, c in zip(rows, cols)]

    @property
    def P(self) -> int:
        return int(np.count_nonzero(self.G))

    def block(self, m: int, l: int) -> np.ndarray:
        """``H_l^m = sum_k g(k, l) exp(j2pi k (m-l)/(MN)) C**k`` as a dense ``N x N`` array."""
        H = np.zeros((self.N, self.N), dtype=complex)
        for r in range(2 * self.K + 1):
            g = self.G[r, l]
            if g != 0:
                k = r - self.K
                H += g * phase_term(m, l, k, self.M, self.N) * cyclic_shift(self.N, k)
        return H

    def rows(self) -> SparseRows:
        return self._rows

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self._rows.matvec(x)

    def to_dense(self) -> np.ndarray:
        """Assemble ``H`` block by block (independently of the sparse row view)."""
        if self.size > DENSE_LIMIT:
            raise ValueError(f"dense export is limited to MN <= {DENSE_LIMIT}")
        M, N = self.M, self.N
        H = np.zeros((M * N, M * N), dtype=complex)
        D = np.diag(wrap_phase(N))
        for m in range(M):
            for l in range(self.L):
                blk = self.block(m, l)
                if m - l < 0:
                    blk = blk @ D
                c = (m - l) % M
                H[m * N : (m + 1) * N, c * N : (c + 1) * N] += blk
        return H


def _sparse_rows(G: np.ndarray, M: int, N: int, K: int) -> SparseRows:
    r_idx, l_idx = np.nonzero(G)
    k_idx = r_idx - K
    g = G[r_idx, l_idx]
    m = np.arange(M)[:, None, None]
    n = np.arange(N)[None, :, None]
    l = l_idx[None, None, :]
    k = k_idx[None, None, :]
    src_m = (m - l) % M
    src_n = (n - k) % N
    coef = g * np.exp(2j * np.pi * k * (m - l) / (M * N))
    coef = np.where(m - l < 0, coef * np.exp(-2j * np.pi * src_n / N), coef)
    P = len(g)
    cols = (src_m * N + src_n).reshape(M * N, P)
    coefs = np.broadcast_to(coef, (M, N, P)).reshape(M * N, P).copy()
    # when N < 2K+1 two Doppler cells can hit the same symbol; fold them into one edge
    # and leave a zero-weight placeholder so every row keeps P slots
    for j in range(1, P):
        for i in range(j):
            dup = (cols[:, i] == cols[:, j]) & (coefs[:, j] != 0)
            coefs[dup, i] += coefs[dup, j]
            coefs[dup, j] = 0
    return SparseRows(cols=cols, coefs=coefs)


def build(ch: DdChannel, params: GridParams) -> DdChannelMatrix:
    """Channel matrix for an on-grid channel over the frame in ``params``."""
    if ch.L > params.M:
        raise ValueError("channel delay span exceeds the frame")
    G = ch.G
    return DdChannelMatrix(
        M=params.M, N=params.N, L=ch.L, K=ch.K, G=G,
        _rows=_sparse_rows(G, params.M, params.N, ch.K),
    )


def matvec(Hm: DdChannelMatrix, x: np.ndarray) -> np.ndarray:
    return Hm.matvec(x)
