"""Frame geometry, QAM alphabets and the plain-text config format."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class GridParams:
    """Geometry of one ODDM frame.

    Parameters
    ----------
    M : int
        Number of ODDM symbols, i.e. delay bins.
    N : int
        Subcarriers per symbol, i.e. Doppler bins.
    scs_hz : float
        Reference subcarrier spacing ``1/T`` in Hz.
    Q : int
        Half-length of the prototype pulse in units of ``T/M``.
    oversample : int
        Samples per ``T/M`` interval used to emulate analog waveforms (``J``).
    cp_len : int
        Cyclic prefix length ``L - 1`` in units of ``T/M``.
    """

    M: int
    N: int
    scs_hz: float = 15e3
    Q: int = 1
    oversample: int = 4
    cp_len: int = 0

    def __post_init__(self):
        for name in ("M", "N", "Q", "oversample"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if int(self.cp_len) != self.cp_len or self.cp_len < 0:
            raise ValueError(f"cp_len must be a non-negative integer, got {self.cp_len!r}")
        if not self.scs_hz > 0:
            raise ValueError(f"scs_hz must be positive, got {self.scs_hz!r}")
        if 2 * self.Q >= self.M:
            raise ValueError(f"pulse too long: need 2Q < M, got Q={self.Q}, M={self.M}")
        if self.cp_len >= self.M:
            raise ValueError("cp_len must be shorter than one period of M symbols")

    @property
    def T(self) -> float:
        return 1.0 / self.scs_hz

    @property
    def J(self) -> int:
        return self.oversample

    @property
    def L(self) -> int:
        """Number of delay taps the cyclic prefix can absorb."""
        return self.cp_len + 1

    @property
    def delay_resolution(self) -> float:
        return self.T / self.M

    @property
    def doppler_resolution(self) -> float:
        return 1.0 / (self.N * self.T)

    @property
    def bandwidth(self) -> float:
        return self.M / self.T

    @property
    def duration(self) -> float:
        return self.N * self.T

    @property
    def sample_rate(self) -> float:
        return self.M * self.oversample / self.T

    @property
    def dt(self) -> float:
        return self.T / (self.M * self.oversample)

    @property
    def samples_per_symbol(self) -> int:
        """Samples in one ``T`` period, ``M * J``."""
        return self.M * self.oversample

    @property
    def pulse_half_taps(self) -> int:
        """Largest tap index of the prototype: its support is the open interval ``(-QT/M, QT/M)``."""
        return self.Q * self.oversample - 1


@dataclass(frozen=True)
class ResolutionReport:
    delay_resolution: float
    doppler_resolution: float
    bandwidth: float
    duration: float
    sample_rate: float
    frame_samples: int
    frame_samples_with_tails: int
    frame_samples_with_cp: int


def derive(params: GridParams) -> ResolutionReport:
    """Resolutions and sample counts implied by ``params``.

    The CP-included count covers ``-(L+Q-1)T/M <= t < NT + QT/M``.
    """
    J = params.oversample
    MN = params.M * params.N
    return ResolutionReport(
        delay_resolution=params.T / params.M,
        doppler_resolution=1.0 / (params.N * params.T),
        bandwidth=params.M / params.T,
        duration=params.N * params.T,
        sample_rate=params.M * J / params.T,
        frame_samples=MN * J,
        frame_samples_with_tails=J * (MN + 2 * params.Q),
        frame_samples_with_cp=J * (MN + params.cp_len + 2 * params.Q),
    )


def _gray(n: int) -> int:
    return n ^ (n >> 1)


@dataclass(frozen=True)
class QamConstellation:
    """Square Gray-mapped QAM with unit average energy.

    ``points[i]`` carries the bit label given by the binary expansion of ``i``
    (most significant bit first), so index order is the Gray ordering used for
    tie-breaking in hard decisions.
    """

    order: int
    points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        side = math.isqrt(self.order)
        if self.order < 4 or side * side != self.order or side & (side - 1):
            raise ValueError(f"order must be a square power of two >= 4, got {self.order}")
        half = side.bit_length() - 1
        levels = np.arange(side) * 2 - (side - 1)
        # inverse Gray map: PAM level index for each label
        inv = np.empty(side, dtype=int)
        for lvl in range(side):
            inv[_gray(lvl)] = lvl
        labels = np.arange(self.order)
        re = levels[inv[labels >> half]]
        im = levels[inv[labels & (side - 1)]]
        pts = (re + 1j * im).astype(complex)
        pts /= np.sqrt(np.mean(np.abs(pts) ** 2))
        object.__setattr__(self, "points", pts)

    @property
    def bits_per_symbol(self) -> int:
        return self.order.bit_length() - 1

    def bits_to_indices(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64).reshape(-1, self.bits_per_symbol)
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1)
        return bits @ weights

    def indices_to_bits(self, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64).reshape(-1, 1)
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        return ((idx >> shifts) & 1).reshape(-1)

    def modulate(self, bits: np.ndarray) -> np.ndarray:
        return self.points[self.bits_to_indices(bits)]

    def slice(self, values: np.ndarray) -> np.ndarray:
        """Nearest-point indices; ties go to the lowest index."""
        values = np.asarray(values)
        dist = np.abs(values[..., None] - self.points) ** 2
        return np.argmin(dist, axis=-1)

    def random_indices(self, rng: np.random.Generator, shape) -> np.ndarray:
        return rng.integers(0, self.order, size=shape)


@dataclass(frozen=True)
class SimConfig:
    """Everything a config file can hold.

    ``params`` carries the frame geometry; the remaining fields configure the
    pulse, alphabet and experiments.
    """

    params: GridParams
    rolloff: float = 0.25
    qam_order: int = 4
    seed: int = 0
    speed_kmh: float = 120.0
    fc_hz: float = 5e9
    snr_db: tuple[float, ...] = (0.0, 4.0, 8.0, 12.0, 16.0)
    trials: int = 100
    mp_max_iters: int = 30
    mp_damping: float = 0.6
    mp_eps: float = 1e-6
    n_paths: int = 4
    max_doppler_bins: int = 2
    psd_frames: int = 100

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.n_paths < 1 or self.max_doppler_bins < 0:
            raise ValueError("need n_paths >= 1 and max_doppler_bins >= 0")

    def with_params(self, **kwargs) -> "SimConfig":
        return replace(self, params=replace(self.params, **kwargs))


_PARAM_KEYS = {"M": "M", "N": "N", "scs_hz": "scs_hz", "Q": "Q", "J": "oversample", "cp_len": "cp_len"}
_INT_KEYS = {
    "M", "N", "Q", "J", "cp_len", "qam_order", "seed", "trials", "mp_max_iters",
    "n_paths", "max_doppler_bins", "psd_frames",
}


def _parse_value(key: str, raw: str):
    if key in _INT_KEYS:
        return int(raw)
    if key == "snr_db":
        return tuple(float(v) for v in raw.split(",") if v.strip())
    return float(raw)


def parse_config(text: str) -> SimConfig:
    """Parse ``key = value`` lines. ``#`` starts a comment."""
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key == "scs_khz":
            key, raw = "scs_hz", repr(float(raw) * 1e3)
        values[key] = _parse_value(key, raw)

    known = {f.name for f in fields(SimConfig)} - {"params"}
    unknown = set(values) - known - set(_PARAM_KEYS)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "M" not in values or "N" not in values:
        raise ValueError("config must define M and N")
    params = GridParams(**{_PARAM_KEYS[k]: values[k] for k in _PARAM_KEYS if k in values})
    return SimConfig(params=params, **{k: v for k, v in values.items() if k in known})


def format_config(cfg: SimConfig) -> str:
    p = cfg.params
    lines = [
        f"M = {p.M}",
        f"N = {p.N}",
        f"scs_hz = {p.scs_hz!r}",
        f"Q = {p.Q}",
        f"J = {p.oversample}",
        f"cp_len = {p.cp_len}",
    ]
    for f in fields(SimConfig):
        if f.name == "params":
            continue
        value = getattr(cfg, f.name)
        if f.name == "snr_db":
            value = ", ".join(repr(float(v)) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def read_config(path: str | Path) -> SimConfig:
    return parse_config(Path(path).read_text())


def write_config(cfg: SimConfig, path: str | Path) -> None:
    Path(path).write_text(format_config(cfg))


def max_doppler_hz(speed_kmh: float, fc_hz: float) -> float:
    return speed_kmh / 3.6 * fc_hz / SPEED_OF_LIGHT
