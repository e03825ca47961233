"""Symbol detectors for ``y = H x + z`` on the DD grid.

``mp_detect`` is the message-passing detector that works on the sparse
graph of ``H``; ``mmse_detect`` and ``map_bruteforce`` are dense references
for small frames.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from .ddmatrix import DENSE_LIMIT, DdChannelMatrix, SparseRows
from .params import QamConstellation

NOISE_FLOOR = 1e-10
MMSE_COND_LIMIT = 1e13


@dataclass(frozen=True)
class MpConfig:
    max_iters: int = 30
    damping: float = 0.6
    convergence_eps: float = 1e-6
    early_stop: bool = True

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass
class DetectionResult:
    hard_indices: np.ndarray
    hard_symbols: np.ndarray
    symbol_posteriors: np.ndarray
    iterations_used: int = 1
    converged: bool = True


def _as_rows(H) -> SparseRows:
    if isinstance(H, DdChannelMatrix):
        return H.rows()
    if isinstance(H, SparseRows):
        return H
    raise TypeError(f"expected DdChannelMatrix or SparseRows, got {type(H).__name__}")


def _as_dense(H) -> np.ndarray:
    if isinstance(H, DdChannelMatrix):
        return H.to_dense()
    if isinstance(H, SparseRows):
        return H.to_dense()
    return np.asarray(H, dtype=complex)


def _result(post: np.ndarray, constellation: QamConstellation, shape, iters=1, converged=True):
    idx = np.argmax(post, axis=1)
    if shape is not None:
        idx = idx.reshape(shape)
        post = post.reshape(*shape, -1)
    return DetectionResult(
        hard_indices=idx,
        hard_symbols=constellation.points[idx],
        symbol_posteriors=post,
        iterations_used=iters,
        converged=converged,
    )


def mp_detect(
    y: np.ndarray,
    H,
    constellation: QamConstellation,
    noise_var: float,
    cfg: MpConfig = MpConfig(),
    shape: tuple[int, int] | None = None,
) -> DetectionResult:
    """Message passing with a Gaussian approximation of interference plus noise.

    Flooding schedule. Observation node ``d`` sends to each neighbour ``c``
    the mean and variance of ``y_d`` minus the term in ``x_c``; variable
    nodes combine the likelihoods from their other neighbours into a
    damped symbol distribution. Every array is ``(MN, P)`` or
    ``(MN, P, |A|)``, so one iteration costs ``O(MN P |A|)``.

    ``shape`` reshapes the hard decisions (e.g. ``(M, N)``).
    """
    if noise_var <= 0:
        warnings.warn(
            f"noise variance {noise_var} is not positive; clamping to {NOISE_FLOOR}",
            RuntimeWarning,
            stacklevel=2,
        )
        noise_var = NOISE_FLOOR
    rows = _as_rows(H)
    cols, h = rows.cols, rows.coefs
    n, P = cols.shape
    y = np.asarray(y).reshape(-1)
    pts = constellation.points
    Qc = len(pts)
    flat_cols = cols.ravel()
    abs_h2 = np.abs(h) ** 2

    # p[d, j, a]: message from variable cols[d, j] to observation d
    p = np.full((n, P, Qc), 1.0 / Qc)
    post = np.full((n, Qc), 1.0 / Qc)
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        mean = p @ pts
        var = p @ (np.abs(pts) ** 2) - np.abs(mean) ** 2
        tot_mean = np.sum(h * mean, axis=1, keepdims=True)
        tot_var = np.sum(abs_h2 * var, axis=1, keepdims=True) + noise_var
        mu = tot_mean - h * mean
        sig = np.maximum(tot_var - abs_h2 * var, noise_var)
        resid = (y[:, None] - mu)[..., None] - h[..., None] * pts
        ll = -(np.abs(resid) ** 2) / sig[..., None]  # (n, P, Qc)

        total = np.zeros((n, Qc))
        for a in range(Qc):
            total[:, a] = np.bincount(flat_cols, weights=ll[..., a].ravel(), minlength=n)
        new_post = softmax(total, axis=1)
        extrinsic = softmax(total[cols] - ll, axis=2)
        p = cfg.damping * extrinsic + (1.0 - cfg.damping) * p

        delta = np.max(np.abs(new_post - post))
        post = new_post
        if cfg.early_stop and delta < cfg.convergence_eps:
            converged = True
            break
    return _result(post, constellation, shape, iters=it, converged=converged)


def _gaussian_posteriors(est: np.ndarray, var: np.ndarray, pts: np.ndarray) -> np.ndarray:
    ll = -(np.abs(est[:, None] - pts) ** 2) / var[:, None]
    return softmax(ll, axis=1)


def mmse_detect(
    y: np.ndarray,
    H,
    constellation: QamConstellation,
    noise_var: float,
    shape: tuple[int, int] | None = None,
) -> DetectionResult:
    """Linear MMSE equalization, bias removal, then per-entry slicing."""
    Hd = _as_dense(H)
    n = Hd.shape[1]
    if n > DENSE_LIMIT:
        raise ValueError(f"MMSE reference is limited to MN <= {DENSE_LIMIT}")
    y = np.asarray(y).reshape(-1)
    gram = Hd.conj().T @ Hd + max(noise_var, 0.0) * np.eye(n)
    if np.linalg.cond(gram) > MMSE_COND_LIMIT:
        raise np.linalg.LinAlgError("MMSE system is singular; supply a positive noise variance")
    try:
        W = np.linalg.solve(gram, Hd.conj().T)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("MMSE system is singular; supply a positive noise variance") from exc
    bias = np.real(np.einsum("ij,ji->i", W, Hd))
    if np.any(bias <= 1e-12):
        raise np.linalg.LinAlgError("MMSE filter has no gain on some symbols")
    est = (W @ y) / bias
    # post-equalization error variance of the unbiased estimate
    err = np.maximum((1.0 - bias) / bias, 1e-12)
    post = _gaussian_posteriors(est, err, constellation.points)
    idx = constellation.slice(est)
    res = _result(post, constellation, shape)
    res.hard_indices = idx.reshape(shape) if shape is not None else idx
    res.hard_symbols = constellation.points[res.hard_indices]
    return res


def map_bruteforce(
    y: np.ndarray,
    H,
    constellation: QamConstellation,
    noise_var: float,
    shape: tuple[int, int] | None = None,
    chunk: int = 1 << 14,
) -> DetectionResult:
    """Exhaustive minimisation of ``||y - H x||**2`` over all symbol vectors.

    Posteriors are the exact marginals of ``exp(-||y - Hx||^2 / noise_var)``.
    The hard decision is the joint minimiser (first in enumeration order on ties).
    """
    Hd = _as_dense(H)
    n = Hd.shape[1]
    Qc = constellation.order
    if Qc**n > 1 << 20:
        raise ValueError(f"{Qc}^{n} candidates exceed the 2^20 enumeration limit")
    y = np.asarray(y).reshape(-1)
    pts = constellation.points
    nv = max(noise_var, NOISE_FLOOR)

    all_idx = np.array(list(itertools.product(range(Qc), repeat=n)), dtype=np.int64)
    metric = np.empty(len(all_idx))
    for s in range(0, len(all_idx), chunk):
        X = pts[all_idx[s : s + chunk]]
        metric[s : s + chunk] = np.sum(np.abs(y - X @ Hd.T) ** 2, axis=1)
    best = int(np.argmin(metric))
    logw = -metric / nv
    post = np.empty((n, Qc))
    for c in range(n):
        for a in range(Qc):
            post[c, a] = logsumexp(logw[all_idx[:, c] == a])
    post = softmax(post, axis=1)
    idx = all_idx[best]
    res = _result(post, constellation, shape)
    res.hard_indices = idx.reshape(shape) if shape is not None else idx
    res.hard_symbols = pts[res.hard_indices]
    return res
