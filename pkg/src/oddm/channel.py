"""On-grid delay-Doppler channels and their application to sampled waveforms."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .modem import Waveform
from .params import GridParams, max_doppler_hz

# 3GPP TS 36.101 Annex B.2 Extended Vehicular A: (excess delay [ns], relative power [dB])
EVA_PROFILE = (
    (0.0, 0.0),
    (30.0, -1.5),
    (150.0, -1.4),
    (310.0, -3.6),
    (370.0, -0.6),
    (710.0, -9.1),
    (1090.0, -7.0),
    (1730.0, -12.0),
    (2510.0, -16.9),
)


@dataclass(frozen=True)
class DdPath:
    """One path: gain ``h``, delay ``l * T/M`` and Doppler ``k / (NT)``."""

    h: complex
    l: int
    k: int

    def __post_init__(self):
        for name in ("l", "k"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v:
                raise ValueError(f"path {name} must be an integer grid index, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.l < 0:
            raise ValueError("path delay index must be non-negative")
        object.__setattr__(self, "h", complex(self.h))


@dataclass(frozen=True)
class DdChannel:
    """Path list with declared maxima: delays ``l <= L-1``, Dopplers ``|k| <= K``.

    ``G`` is the ``(2K+1) x L`` spreading matrix; its row ``r`` (0-based) holds
    Doppler ``k = r - K``, which is the 1-based convention ``k = row - K - 1``.
    """

    paths: tuple[DdPath, ...]
    L: int
    K: int

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        if self.L < 1 or self.K < 0:
            raise ValueError("need L >= 1 and K >= 0")
        for p in self.paths:
            if p.l > self.L - 1 or abs(p.k) > self.K:
                raise ValueError(f"path {p} lies outside L={self.L}, K={self.K}")

    @property
    def P(self) -> int:
        return len(self.paths)

    @property
    def G(self) -> np.ndarray:
        G = np.zeros((2 * self.K + 1, self.L), dtype=complex)
        for p in self.paths:
            G[p.k + self.K, p.l] += p.h
        return G

    @classmethod
    def from_G(cls, G: np.ndarray) -> "DdChannel":
        G = np.asarray(G, dtype=complex)
        K = (G.shape[0] - 1) // 2
        if G.shape[0] != 2 * K + 1:
            raise ValueError("G must have an odd number of rows")
        rows, cols = np.nonzero(G)
        paths = [DdPath(G[r, c], int(c), int(r) - K) for r, c in zip(rows, cols)]
        return cls(tuple(paths), L=G.shape[1], K=K)

    def merged(self) -> "DdChannel":
        """Equivalent channel with at most one path per ``(l, k)`` cell."""
        return DdChannel.from_G(self.G)

    def power(self) -> float:
        return float(sum(abs(p.h) ** 2 for p in self.paths))


@dataclass(frozen=True)
class NoiseSpec:
    """Complex AWGN at ``Es/N0 = snr_db`` with unit symbol energy; ``None`` means noiseless."""

    snr_db: float | None = None
    seed: int | np.random.SeedSequence | None = 0

    @property
    def n0(self) -> float:
        return 0.0 if self.snr_db is None else 10.0 ** (-self.snr_db / 10.0)


def apply(x_cp: Waveform, ch: DdChannel, noise: NoiseSpec, params: GridParams) -> Waveform:
    """``y(t) = sum_p h_p x_cp(t - tau_p) exp(j2 pi nu_p (t - tau_p)) + z(t)``.

    Delays are whole multiples of ``J`` samples. The output keeps the input
    start and extends the end by ``(L-1) T/M``. Noise samples have variance
    ``N0 / dt`` so the matched-filter output of a unit-energy pulse sees ``N0``.
    """
    max_l = max((p.l for p in ch.paths), default=0)
    if max_l > params.cp_len:
        raise ValueError(f"path delay {max_l} exceeds the cyclic prefix ({params.cp_len} symbols)")
    J = params.oversample
    ext = params.cp_len * J
    n_out = len(x_cp.samples) + ext
    out = np.zeros(n_out, dtype=complex)
    t_idx = x_cp.start + np.arange(n_out)
    period = params.N * params.samples_per_symbol
    for p in ch.paths:
        s = p.l * J
        ramp = np.exp(2j * np.pi * p.k * ((t_idx[s : s + len(x_cp.samples)] - s) % period) / period)
        out[s : s + len(x_cp.samples)] += p.h * x_cp.samples * ramp
    if noise.snr_db is not None:
        rng = np.random.default_rng(noise.seed)
        sigma = math.sqrt(noise.n0 / x_cp.dt / 2.0)
        out += sigma * (rng.standard_normal(n_out) + 1j * rng.standard_normal(n_out))
    return Waveform(out, x_cp.start, x_cp.dt)


def eva_jakes(
    params: GridParams,
    speed_kmh: float,
    fc_hz: float,
    seed: int | np.random.SeedSequence | None,
) -> DdChannel:
    """EVA power-delay profile with one Jakes Doppler per tap, quantized to the DD grid.

    Delays round to the nearest ``T/M`` and Dopplers ``nu_max cos(theta)``,
    ``theta ~ U[-pi, pi]``, to the nearest ``1/(NT)``. Taps that land in the
    same cell are merged. Gains are complex Gaussian with the EVA powers,
    normalized to unit total mean power.
    """
    if speed_kmh < 0:
        raise ValueError("speed must be non-negative")
    rng = np.random.default_rng(seed)
    delays = np.array([d for d, _ in EVA_PROFILE]) * 1e-9
    powers = 10.0 ** (np.array([p for _, p in EVA_PROFILE]) / 10.0)
    powers /= powers.sum()
    l = np.rint(delays / params.delay_resolution).astype(int)
    if l.max() > params.cp_len:
        raise ValueError(
            f"EVA delay spread needs {l.max()} delay bins but cp_len is {params.cp_len}"
        )
    nu_max = max_doppler_hz(speed_kmh, fc_hz)
    K = int(np.rint(nu_max / params.doppler_resolution))
    theta = rng.uniform(-np.pi, np.pi, size=len(delays))
    k = np.rint(nu_max * np.cos(theta) / params.doppler_resolution).astype(int)
    gains = np.sqrt(powers / 2) * (rng.standard_normal(len(delays)) + 1j * rng.standard_normal(len(delays)))
    paths = tuple(DdPath(g, li, ki) for g, li, ki in zip(gains, l, k))
    return DdChannel(paths, L=params.L, K=K).merged()


def random_channel(
    n_paths: int,
    L: int,
    K: int,
    rng: np.random.Generator,
) -> DdChannel:
    """``n_paths`` distinct random cells in the ``L x (2K+1)`` box, equal-power Rayleigh gains."""
    cells = rng.choice(L * (2 * K + 1), size=n_paths, replace=False)
    gains = (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)) / np.sqrt(2 * n_paths)
    paths = tuple(DdPath(g, int(c % L), int(c // L) - K) for g, c in zip(gains, cells))
    return DdChannel(paths, L=L, K=K)


def write_channel_csv(ch: DdChannel, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["l", "k", "re_h", "im_h"])
        for p in ch.paths:
            w.writerow([p.l, p.k, repr(p.h.real), repr(p.h.imag)])


def read_channel_csv(path: str | Path, L: int | None = None, K: int | None = None) -> DdChannel:
    """Rows ``l, k, re(h), im(h)``; a header row is optional."""
    paths = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                l, k, re, im = (float(v) for v in row[:4])
            except ValueError:
                continue  # header
            paths.append(DdPath(complex(re, im), l, k))
    L = L if L is not None else max((p.l for p in paths), default=0) + 1
    K = K if K is not None else max((abs(p.k) for p in paths), default=0)
    return DdChannel(tuple(paths), L=L, K=K)
