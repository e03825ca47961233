"""ODDM modulation and matched-filter demodulation, plus the OTFS baseline.

Sample index ``i`` of every waveform refers to ``t = i * dt`` with
``dt = T/(MJ)``; ``t = 0`` is the start of symbol ``m = 0`` so the cyclic
prefix occupies negative indices. Symbol grids are ``M x N`` arrays with row
``m`` (delay) and column ``n`` (Doppler / subcarrier).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import oaconvolve

from .params import GridParams
from .pulse import ProtoPulse, PulseTrain


@dataclass
class DdFrame:
    X: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=complex)
        if self.X.ndim != 2:
            raise ValueError("frame must be a 2-D M x N array")

    @property
    def M(self) -> int:
        return self.X.shape[0]

    @property
    def N(self) -> int:
        return self.X.shape[1]

    def vec(self) -> np.ndarray:
        """``x = [x_0; x_1; ...]`` with ``x_m = X[m, :]``."""
        return self.X.reshape(-1).copy()

    @classmethod
    def from_vec(cls, x: np.ndarray, M: int, N: int) -> "DdFrame":
        return cls(np.asarray(x).reshape(M, N))

    @classmethod
    def impulse(cls, M: int, N: int, m: int = 0, n: int = 0) -> "DdFrame":
        X = np.zeros((M, N), dtype=complex)
        X[m, n] = 1.0
        return cls(X)

    def check(self, params: GridParams) -> None:
        if self.X.shape != (params.M, params.N):
            raise ValueError(f"frame is {self.X.shape}, params expect {(params.M, params.N)}")


@dataclass
class Waveform:
    """Complex samples at ``t = (start + i) * dt``."""

    samples: np.ndarray = field(repr=False)
    start: int
    dt: float

    @property
    def stop(self) -> int:
        return self.start + len(self.samples)

    @property
    def t0(self) -> float:
        return self.start * self.dt

    @property
    def times(self) -> np.ndarray:
        return (self.start + np.arange(len(self.samples))) * self.dt

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) * self.dt)

    def window(self, start: int, stop: int) -> np.ndarray:
        """Samples on ``[start, stop)``; raises if not covered."""
        if start < self.start or stop > self.stop:
            raise ValueError(
                f"waveform covers samples [{self.start}, {self.stop}), need [{start}, {stop})"
            )
        return self.samples[start - self.start : stop - self.start]

    def __add__(self, other: "Waveform") -> "Waveform":
        lo, hi = min(self.start, other.start), max(self.stop, other.stop)
        out = np.zeros(hi - lo, dtype=complex)
        out[self.start - lo : self.stop - lo] += self.samples
        out[other.start - lo : other.stop - lo] += other.samples
        return Waveform(out, lo, self.dt)

    def scaled(self, c: complex) -> "Waveform":
        return Waveform(self.samples * c, self.start, self.dt)


def write_waveform_csv(wave: Waveform, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "re", "im"])
        for t, v in zip(wave.times, wave.samples):
            w.writerow([repr(float(t)), repr(float(v.real)), repr(float(v.imag))])


def digital_sequence(frame: DdFrame, params: GridParams) -> np.ndarray:
    """Time-domain sample sequence of length ``MN`` before pulse shaping.

    ``s[m + M*k] = N**-0.5 * sum_n X[m, n] exp(j 2 pi n k / N)``: each row is
    IDFT'd (unitary scaling), upsampled by ``M`` and delayed by ``m`` samples.
    """
    frame.check(params)
    per_symbol = np.fft.ifft(frame.X, axis=1, norm="ortho")  # [m, k]
    return per_symbol.T.reshape(-1)


def inverse_digital_sequence(s: np.ndarray, params: GridParams) -> DdFrame:
    grid = np.asarray(s).reshape(params.N, params.M).T
    return DdFrame(np.fft.fft(grid, axis=1, norm="ortho"))


def otfs_digital_sequence(frame: DdFrame, params: GridParams) -> np.ndarray:
    """ISFFT to the ``N x M`` TF grid followed by a per-symbol ``M``-point IDFT."""
    frame.check(params)
    # TF[k_sym, k_sub] = sum_{m,n} X[m,n] e^{j2pi(n k_sym/N - m k_sub/M)} / sqrt(MN)
    tf = np.fft.fft(np.fft.ifft(frame.X, axis=1, norm="ortho"), axis=0, norm="ortho").T
    return np.fft.ifft(tf, axis=1, norm="ortho").reshape(-1)


def _frame_extent(params: GridParams, cp: bool) -> tuple[int, int]:
    """Sample range ``[start, stop)`` of a frame with pulse tails (and CP)."""
    J = params.oversample
    lead = params.cp_len if cp else 0
    start = -(lead + params.Q) * J
    stop = (params.M * params.N + params.Q) * J
    return start, stop


def _tap_offsets(proto: ProtoPulse) -> np.ndarray:
    return np.arange(-proto.half, proto.half + 1)


def _synthesize(frame: DdFrame, proto: ProtoPulse, params: GridParams, cp: bool) -> Waveform:
    """``sum_q a(t - qT/M) * sum_n X[m,n] exp(j2 pi n (t - mT/M)/(NT))`` over pulse positions ``q = kM + m``.

    With ``cp`` the positions ``q = -(L-1) .. -1`` (the ``k = -1`` replicas of
    the last ``L-1`` symbols) are included, which is the CP at the digital
    level.
    """
    M, N, J = params.M, params.N, params.oversample
    MJ = params.samples_per_symbol
    start, stop = _frame_extent(params, cp)
    out = np.zeros(stop - start, dtype=complex)
    lead = params.cp_len if cp else 0
    n = np.arange(N)
    q_first = -lead
    n_pulses = M * N + lead
    for j, tap in zip(_tap_offsets(proto), proto.taps):
        # B[m, k] = sum_n X[m, n] exp(j2 pi n (k M J + j)/(N M J))
        B = np.fft.ifft(frame.X * np.exp(2j * np.pi * n * j / (N * MJ)), axis=1) * N
        vals = B.T.reshape(-1)
        if lead:
            vals = np.concatenate([vals[-lead:], vals])
        base = q_first * J + j - start
        out[base : base + J * n_pulses : J] += tap * vals
    return Waveform(out, start, params.dt)


def modulate(frame: DdFrame, train: PulseTrain, params: GridParams) -> Waveform:
    """ODDM waveform ``x(t)``, or ``x_cp(t)`` when ``train.cp`` is set.

    The train supplies the prototype; synthesis works pulse by pulse rather
    than through ``M`` shifted copies of ``u(t)``.
    """
    frame.check(params)
    if train.proto.J != params.oversample or train.proto.N != params.N:
        raise ValueError("pulse train was built for different grid parameters")
    return _synthesize(frame, train.proto, params, train.cp)


def modulate_filtered(frame: DdFrame, proto: ProtoPulse, params: GridParams, cp: bool = False) -> Waveform:
    """Digital sequence upsampled by ``J`` and filtered with ``a(t)``.

    Approximates :func:`modulate` by dropping the in-pulse phase
    ``exp(j2 pi n tau/(NT))``; scaled by ``sqrt(N)`` so a single symbol at
    ``(0, 0)`` yields ``u(t)``.
    """
    J = params.oversample
    s = digital_sequence(frame, params) * np.sqrt(params.N)
    if cp and params.cp_len:
        s = np.concatenate([s[-params.cp_len :], s])
    up = np.zeros(len(s) * J, dtype=complex)
    up[::J] = s
    conv = oaconvolve(up, proto.taps)
    start, stop = _frame_extent(params, cp)
    out = np.zeros(stop - start, dtype=complex)
    first = (-params.cp_len if cp else 0) * J - proto.half
    lo = first - start
    out[lo : lo + len(conv)] = conv[: len(out) - lo]
    return Waveform(out, start, params.dt)


def demodulate(y: Waveform, train: PulseTrain, params: GridParams) -> DdFrame:
    """Matched filter against ``u(t - mT/M) exp(j2 pi n (t - mT/M)/(NT))``.

    ``Y[m, n] = dt * sum_i y_i u_{i - mJ} exp(-j2 pi n (i - mJ)/(NMJ))``.
    Each ``u`` replica is a copy of ``a(t)``, so the sum runs over prototype
    taps with one ``M x N`` FFT per tap.
    """
    M, N, J = params.M, params.N, params.oversample
    MJ = params.samples_per_symbol
    proto = train.proto
    h = proto.half
    seg = y.window(-h, (M * N - 1) * J + h + 1)
    n = np.arange(N)
    Y = np.zeros((M, N), dtype=complex)
    for j, tap in zip(_tap_offsets(proto), proto.taps):
        base = j + h
        Z = seg[base : base + M * N * J : J].reshape(N, M).T  # [m, k]
        Y += tap * np.fft.fft(Z, axis=1) * np.exp(-2j * np.pi * n * j / (N * MJ))
    return DdFrame(Y * params.dt)


OTFS_SHAPINGS = ("zoh", "tf-rect")


def _otfs_subcarriers(M: int) -> np.ndarray:
    return np.arange(-(M // 2), M - M // 2)


def _check_shaping(shaping: str) -> None:
    if shaping not in OTFS_SHAPINGS:
        raise ValueError(f"unknown OTFS shaping {shaping!r}; choose from {OTFS_SHAPINGS}")


def otfs_modulate(frame: DdFrame, params: GridParams, cp: bool = True, shaping: str = "zoh") -> Waveform:
    """OTFS baseline carrying the same digital sequence with a frame-level CP.

    ``"zoh"`` holds each of the ``MN`` samples for ``T/M`` (rectangular chip
    of unit energy). ``"tf-rect"`` sends every length-``T`` block as
    rectangular-pulse OFDM over the centred subcarriers ``k/T``, i.e. the
    trigonometric polynomial through that block's ``M`` samples. Both carry
    unit energy per DD symbol.
    """
    _check_shaping(shaping)
    M, N, J = params.M, params.N, params.oversample
    MJ = params.samples_per_symbol
    s = digital_sequence(frame, params)
    if shaping == "zoh":
        body = np.repeat(s, J) * np.sqrt(M / params.T)
    else:
        coeffs = np.fft.fft(s.reshape(N, M), axis=1) / M
        k = _otfs_subcarriers(M)
        dense = np.zeros((N, MJ), dtype=complex)
        dense[:, k % MJ] = coeffs[:, k % M]
        body = np.fft.ifft(dense, axis=1).reshape(-1) * MJ * np.sqrt(M / params.T)
    lead = params.cp_len * J if cp else 0
    samples = np.concatenate([body[len(body) - lead :], body]) if lead else body
    return Waveform(samples, -lead, params.dt)


def otfs_demodulate(y: Waveform, params: GridParams, shaping: str = "zoh") -> DdFrame:
    """Matched receiver for :func:`otfs_modulate` followed by the SFFT.

    ``"zoh"`` integrates and dumps over every ``T/M`` chip; ``"tf-rect"``
    projects every length-``T`` block onto the ``M`` subcarriers.
    """
    _check_shaping(shaping)
    M, N, J = params.M, params.N, params.oversample
    MJ = params.samples_per_symbol
    seg = y.window(0, N * MJ)
    scale = np.sqrt(M / params.T)
    if shaping == "zoh":
        s = seg.reshape(M * N, J).sum(axis=1) * params.dt * scale
    else:
        k = _otfs_subcarriers(M)
        coeffs = np.fft.fft(seg.reshape(N, MJ), axis=1)[:, k % MJ] / MJ
        natural = np.zeros((N, M), dtype=complex)
        natural[:, k % M] = coeffs
        s = (np.fft.ifft(natural, axis=1) * M / scale).reshape(-1)
    return inverse_digital_sequence(s, params)
