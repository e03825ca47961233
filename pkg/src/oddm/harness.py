"""Experiment driver: orthogonality audit, PSD, BER sweeps, equivalence checks.

Every experiment takes an :class:`ExperimentSpec`, writes its CSV files into
``spec.out`` and returns an :class:`ExperimentResult` with scalar metrics and
a pass flag. :func:`run_all` runs a list of specs and writes a manifest.
Randomness is derived from ``SeedSequence(seed, spawn_key=...)`` keyed by
trial position, so results do not depend on how trials are scheduled.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import welch
from scipy.stats import binomtest, linregress

from . import ddmatrix
from .channel import DdChannel, NoiseSpec, apply, eva_jakes, random_channel
from .detector import NOISE_FLOOR, MpConfig, mp_detect, mmse_detect
from .ddmatrix import DENSE_LIMIT
from .modem import DdFrame, demodulate, modulate, otfs_demodulate, otfs_modulate, write_waveform_csv
from .params import GridParams, QamConstellation, SimConfig, format_config
from .pulse import build_train, design_srrc, orthogonality_audit

log = logging.getLogger(__name__)

KINDS = ("ortho", "psd", "ber", "matrix-check", "loopback")
FULL_GRID = dict(M=512, N=64, Q=16, cp_len=24)


@dataclass(frozen=True)
class Tolerances:
    origin: float = 1e-10
    exact_region: float = 1e-6
    wrap_region: float = 1e-3
    equivalence: float = 1e-3
    dense_sparse: float = 1e-12
    loopback_oddm: float = 1e-3
    loopback_otfs: float = 1e-10
    psd_gap_db: float = 15.0
    psd_offset: float = 1.2  # times the half-bandwidth (1 + rolloff) M / (2T)


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    config: SimConfig
    out: Path | None = None
    channel: DdChannel | None = None
    workers: int | None = None
    debug: bool = False
    tol: Tolerances = Tolerances()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment {self.kind!r}; choose from {KINDS}")
        if self.kind == "ber" and not self.config.snr_db:
            raise ValueError("a BER sweep needs at least one SNR point")
        if self.out is not None:
            object.__setattr__(self, "out", Path(self.out))

    @property
    def params(self) -> GridParams:
        return self.config.params

    def path(self, name: str) -> Path | None:
        if self.out is None:
            return None
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out / name


@dataclass
class ExperimentResult:
    kind: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    artifacts: list[Path] = field(default_factory=list)
    detail: object = field(default=None, repr=False)


@dataclass(frozen=True)
class BerPoint:
    scheme: str
    snr_db: float
    bit_errors: int
    bits: int
    ci_low: float
    ci_high: float

    def __post_init__(self):
        if self.bits < 1 or not 0 <= self.bit_errors <= self.bits:
            raise ValueError("need 0 <= bit_errors <= bits and bits >= 1")

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2

    def overlaps(self, other: "BerPoint") -> bool:
        return self.ci_low <= other.ci_high and other.ci_low <= self.ci_high


def wilson_point(scheme: str, snr_db: float, errors: int, bits: int, confidence: float = 0.95) -> BerPoint:
    ci = binomtest(int(errors), int(bits)).proportion_ci(confidence_level=confidence, method="wilson")
    return BerPoint(scheme, float(snr_db), int(errors), int(bits), float(ci.low), float(ci.high))


def _write_csv(path: Path | None, header: list[str], rows) -> list[Path]:
    if path is None:
        return []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return [path]


def _seed(cfg: SimConfig, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(cfg.seed, spawn_key=tuple(int(k) for k in key))


def _random_frame(qam: QamConstellation, params: GridParams, rng: np.random.Generator):
    bits = rng.integers(0, 2, size=params.M * params.N * qam.bits_per_symbol)
    X = qam.modulate(bits).reshape(params.M, params.N)
    return bits, DdFrame(X)


# -- orthogonality ---------------------------------------------------------


def run_ortho(spec: ExperimentSpec) -> ExperimentResult:
    p, tol = spec.params, spec.tol
    proto = design_srrc(p, spec.config.rolloff)
    report = orthogonality_audit(build_train(proto, p), p, workers=spec.workers)
    origin_err = abs(report.origin - 1.0)
    metrics = {
        "origin_error": origin_err,
        "exact_max": report.exact_max,
        "wrap_max": report.wrap_max,
        "off_origin_max": report.off_origin_max,
        "exact_worst": report.exact_worst,
        "wrap_worst": report.wrap_worst,
    }
    passed = (
        origin_err <= tol.origin
        and report.exact_max <= tol.exact_region
        and report.off_origin_max <= tol.wrap_region
    )
    rows = ((m, n, float(v.real), float(v.imag), float(abs(v)), reg) for m, n, v, reg in report.rows())
    arts = _write_csv(spec.path("ortho.csv"), ["m", "n", "re", "im", "|A|", "region"], rows)
    return ExperimentResult("ortho", passed, metrics, arts, report)


# -- power spectral density -----------------------------------------------


@dataclass
class PsdResult:
    freq_hz: np.ndarray
    oddm_db: np.ndarray
    otfs_db: np.ndarray
    otfs_tf_db: np.ndarray
    params: GridParams
    rolloff: float

    @property
    def half_bandwidth_hz(self) -> float:
        return (1 + self.rolloff) * self.params.bandwidth / 2

    def level_db(self, which: str, offset_hz: float, width_hz: float | None = None) -> float:
        """Mean PSD (linear average, in dB) over ``||f| - offset| <= width`` on both sides."""
        if width_hz is None:
            width_hz = 0.01 * self.params.bandwidth
        sel = np.abs(np.abs(self.freq_hz) - offset_hz) <= width_hz
        vals = getattr(self, f"{which}_db")[sel]
        return float(10 * np.log10(np.mean(10 ** (vals / 10))))

    def gap_db(self, offset_hz: float, reference: str = "otfs") -> float:
        return self.level_db(reference, offset_hz) - self.level_db("oddm", offset_hz)

    def min_gap_db(self, start_hz: float, reference: str = "otfs", step_hz: float | None = None) -> float:
        """Smallest gap over offsets from ``start_hz`` up to 95% of the Nyquist frequency."""
        step = step_hz or 0.05 * self.params.bandwidth
        stop = 0.95 * self.params.sample_rate / 2
        return min(self.gap_db(f, reference) for f in np.arange(start_hz, stop, step))


def psd_estimate(samples: np.ndarray, fs: float, nperseg: int, centre_hz: float = 0.0):
    """Two-sided Welch estimate (Hann, 50% overlap) with the band shifted down by ``centre_hz``."""
    x = np.asarray(samples)
    if centre_hz:
        x = x * np.exp(-2j * np.pi * centre_hz * np.arange(len(x)) / fs)
    f, P = welch(
        x, fs=fs, window="hann", nperseg=nperseg, noverlap=nperseg // 2,
        return_onesided=False, detrend=False, scaling="density",
    )
    order = np.argsort(f)
    return f[order], P[order]


def _frame_stream(waves, period: int) -> np.ndarray:
    """Overlap-add frames sent back to back every ``period`` samples."""
    first = waves[0].start
    span = max(w.stop for w in waves) - first + (len(waves) - 1) * period
    out = np.zeros(span, dtype=complex)
    for i, w in enumerate(waves):
        lo = w.start - first + i * period
        out[lo : lo + len(w.samples)] += w.samples
    return out


def run_psd(spec: ExperimentSpec, block: int = 10) -> ExperimentResult:
    """Welch PSD of ODDM and OTFS streams built from the same random frames.

    Frames are sent back to back (one frame plus CP per period, pulse tails
    overlapping) in blocks of ``block`` frames; each block gets a Welch
    estimate with one-frame segments and the blocks are averaged. Each curve
    is normalised to its own mean PSD over ``|f| < 0.375 M/T`` and shifted
    so its occupied band is centred on zero.
    """
    cfg, p, tol = spec.config, spec.params, spec.tol
    if p.oversample < 4:
        raise ValueError(f"PSD needs at least 4 samples per T/M to represent the out-of-band region, got J={p.oversample}")
    qam = QamConstellation(cfg.qam_order)
    train = build_train(design_srrc(p, cfg.rolloff), p, cp=True)
    period = (p.M * p.N + p.cp_len) * p.oversample
    fs = p.sample_rate
    centres = {"oddm": (p.N - 1) / (2 * p.N * p.T), "otfs": 0.0, "otfs_tf": -1 / (2 * p.T)}
    acc = {k: None for k in centres}
    n_frames = cfg.psd_frames
    done = 0
    while done < n_frames:
        count = min(block, n_frames - done)
        waves = {k: [] for k in centres}
        for i in range(done, done + count):
            rng = np.random.default_rng(_seed(cfg, 0, i))
            _, frame = _random_frame(qam, p, rng)
            waves["oddm"].append(modulate(frame, train, p))
            waves["otfs"].append(otfs_modulate(frame, p, shaping="zoh"))
            waves["otfs_tf"].append(otfs_modulate(frame, p, shaping="tf-rect"))
        for k, ws in waves.items():
            f, P = psd_estimate(_frame_stream(ws, period), fs, period, centres[k])
            acc[k] = P * count if acc[k] is None else acc[k] + P * count
        done += count
    inband = np.abs(f) < 0.375 * p.bandwidth
    db = {k: 10 * np.log10(np.maximum(P / np.mean(P[inband]), 1e-300)) for k, P in acc.items()}
    res = PsdResult(f, db["oddm"], db["otfs"], db["otfs_tf"], p, cfg.rolloff)
    offset = tol.psd_offset * res.half_bandwidth_hz
    metrics = {
        "frames": n_frames,
        "offset_hz": offset,
        "offset_over_bandwidth": offset / p.bandwidth,
        "gap_db": res.gap_db(offset),
        "min_gap_beyond_db": res.min_gap_db(offset),
        "gap_tf_rect_db": res.gap_db(offset, "otfs_tf"),
        "oddm_db_at_offset": res.level_db("oddm", offset),
        "otfs_db_at_offset": res.level_db("otfs", offset),
    }
    passed = metrics["gap_db"] >= tol.psd_gap_db
    rows = zip(f.tolist(), res.oddm_db.tolist(), res.otfs_db.tolist(), res.otfs_tf_db.tolist())
    arts = _write_csv(spec.path("psd.csv"), ["frequency_hz", "oddm_db", "otfs_db", "otfs_tf_rect_db"], rows)
    return ExperimentResult("psd", passed, metrics, arts, res)


# -- bit error rate --------------------------------------------------------

SCHEMES = ("oddm-mp", "otfs-mp", "oddm-mmse")


@dataclass
class BerSweep:
    points: list[BerPoint]

    def curve(self, scheme: str) -> list[BerPoint]:
        return sorted((pt for pt in self.points if pt.scheme == scheme), key=lambda pt: pt.snr_db)

    def significant_increases(self, scheme: str) -> list[tuple[float, float]]:
        """SNR steps where BER rises with disjoint Wilson intervals."""
        c = self.curve(scheme)
        return [(a.snr_db, b.snr_db) for a, b in zip(c, c[1:]) if b.ber > a.ber and b.ci_low > a.ci_high]

    def oddm_not_worse(self, snr_db: float | None = None) -> bool:
        oddm, otfs = self.curve("oddm-mp"), self.curve("otfs-mp")
        if snr_db is None:
            a, b = oddm[-1], otfs[-1]
        else:
            a = next(pt for pt in oddm if pt.snr_db == snr_db)
            b = next(pt for pt in otfs if pt.snr_db == snr_db)
        return a.ber <= b.ber or a.overlaps(b)


def _detector_noise_var(snr_db: float) -> float:
    return NOISE_FLOOR if not np.isfinite(snr_db) else max(10.0 ** (-snr_db / 10.0), NOISE_FLOOR)


def _noise(snr_db: float, seed) -> NoiseSpec:
    return NoiseSpec(None if not np.isfinite(snr_db) else snr_db, seed)


def ber_trial(
    cfg: SimConfig,
    snr_db: float,
    seed: np.random.SeedSequence,
    schemes=("oddm-mp", "otfs-mp"),
    channel: DdChannel | None = None,
    train_cp=None,
    train=None,
) -> dict[str, tuple[int, int]]:
    """One frame per scheme through the same channel and noise draw.

    Returns ``{scheme: (bit_errors, bits)}``.
    """
    p = cfg.params
    qam = QamConstellation(cfg.qam_order)
    data_ss, chan_ss, noise_ss = seed.spawn(3)
    bits, frame = _random_frame(qam, p, np.random.default_rng(data_ss))
    ch = channel if channel is not None else eva_jakes(p, cfg.speed_kmh, cfg.fc_hz, chan_ss)
    H = ddmatrix.build(ch, p)
    noise = _noise(snr_db, noise_ss)
    nv = _detector_noise_var(snr_db)
    mp_cfg = MpConfig(cfg.mp_max_iters, cfg.mp_damping, cfg.mp_eps)
    if train is None:
        proto = design_srrc(p, cfg.rolloff)
        train_cp, train = build_train(proto, p, cp=True), build_train(proto, p)

    received = {}
    out = {}
    for scheme in schemes:
        wave = "otfs" if scheme.startswith("otfs") else "oddm"
        if wave not in received:
            if wave == "oddm":
                y = apply(modulate(frame, train_cp, p), ch, noise, p)
                received[wave] = demodulate(y, train, p).vec()
            else:
                y = apply(otfs_modulate(frame, p), ch, noise, p)
                received[wave] = otfs_demodulate(y, p).vec()
        if scheme.endswith("mmse"):
            det = mmse_detect(received[wave], H, qam, nv)
        else:
            det = mp_detect(received[wave], H, qam, nv, mp_cfg)
        errors = int(np.count_nonzero(qam.indices_to_bits(det.hard_indices) != bits))
        out[scheme] = (errors, bits.size)
    return out


def run_ber(spec: ExperimentSpec, schemes=("oddm-mp", "otfs-mp")) -> ExperimentResult:
    """BER of each scheme over the configured SNR list and ``trials`` frames per point."""
    cfg, p = spec.config, spec.params
    if "oddm-mmse" in schemes and p.M * p.N > DENSE_LIMIT:
        raise ValueError(f"MMSE reference needs MN <= {DENSE_LIMIT}")
    proto = design_srrc(p, cfg.rolloff)
    trains = dict(train_cp=build_train(proto, p, cp=True), train=build_train(proto, p))

    def job(key):
        i, t = key
        return ber_trial(cfg, cfg.snr_db[i], _seed(cfg, 1, i, t), schemes, spec.channel, **trains)

    keys = [(i, t) for i in range(len(cfg.snr_db)) for t in range(cfg.trials)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(job, keys))

    points = []
    for i, snr in enumerate(cfg.snr_db):
        chunk = results[i * cfg.trials : (i + 1) * cfg.trials]
        for s in schemes:
            errors = sum(r[s][0] for r in chunk)
            bits = sum(r[s][1] for r in chunk)
            points.append(wilson_point(s, snr, errors, bits))
    sweep = BerSweep(points)

    metrics = {f"{pt.scheme}@{pt.snr_db:g}": pt.ber for pt in points}
    increases = {s: sweep.significant_increases(s) for s in schemes}
    metrics["significant_increases"] = sum(len(v) for v in increases.values())
    passed = metrics["significant_increases"] == 0
    if "oddm-mp" in schemes and "otfs-mp" in schemes:
        metrics["oddm_not_worse_at_top"] = sweep.oddm_not_worse()
        passed = passed and metrics["oddm_not_worse_at_top"]

    header = ["scheme", "snr_db", "bit_errors", "bits", "ber", "ci_low", "ci_high", "half_width"]
    rows = ((pt.scheme, pt.snr_db, pt.bit_errors, pt.bits, pt.ber, pt.ci_low, pt.ci_high, pt.half_width) for pt in points)
    arts = _write_csv(spec.path("ber.csv"), header, rows)
    if spec.debug:
        arts += _dump_posteriors(spec, trains)
    return ExperimentResult("ber", bool(passed), metrics, arts, sweep)


def _dump_posteriors(spec: ExperimentSpec, trains) -> list[Path]:
    """MP posteriors of the first trial at the highest SNR."""
    cfg, p = spec.config, spec.params
    qam = QamConstellation(cfg.qam_order)
    i = int(np.argmax(cfg.snr_db))
    data_ss, chan_ss, noise_ss = _seed(cfg, 1, i, 0).spawn(3)
    _, frame = _random_frame(qam, p, np.random.default_rng(data_ss))
    ch = spec.channel if spec.channel is not None else eva_jakes(p, cfg.speed_kmh, cfg.fc_hz, chan_ss)
    y = apply(modulate(frame, trains["train_cp"], p), ch, _noise(cfg.snr_db[i], noise_ss), p)
    Y = demodulate(y, trains["train"], p)
    det = mp_detect(Y.vec(), ddmatrix.build(ch, p), qam, _detector_noise_var(cfg.snr_db[i]),
                    MpConfig(cfg.mp_max_iters, cfg.mp_damping, cfg.mp_eps), shape=(p.M, p.N))
    rows = []
    for m in range(p.M):
        for n in range(p.N):
            rows.append([m, n, int(det.hard_indices[m, n])] + [float(v) for v in det.symbol_posteriors[m, n]])
    header = ["m", "n", "hard"] + [f"p{a}" for a in range(qam.order)]
    return _write_csv(spec.path("posteriors.csv"), header, rows)


# -- matrix vs waveform ----------------------------------------------------


def run_matrix_check(spec: ExperimentSpec) -> ExperimentResult:
    """Compare ``demodulate(apply(modulate(x)))`` with ``H x`` on ``trials`` seeded channels.

    Channels are random on-grid draws with ``n_paths`` paths, delays up to
    ``cp_len`` and Dopplers up to ``max_doppler_bins`` unless a fixed channel
    is supplied. The CSV holds the worst error of every block row ``m`` per
    trial.
    """
    cfg, p, tol = spec.config, spec.params, spec.tol
    qam = QamConstellation(cfg.qam_order)
    proto = design_srrc(p, cfg.rolloff)
    train_cp, train = build_train(proto, p, cp=True), build_train(proto, p)
    L = p.cp_len + 1
    worst, dense_err = 0.0, 0.0
    rows = []
    for t in range(cfg.trials):
        rng = np.random.default_rng(_seed(cfg, 2, t))
        if spec.channel is not None:
            ch = spec.channel
        else:
            n_paths = min(cfg.n_paths, L * (2 * cfg.max_doppler_bins + 1))
            ch = random_channel(n_paths, L, cfg.max_doppler_bins, rng)
        _, frame = _random_frame(qam, p, rng)
        H = ddmatrix.build(ch, p)
        x = frame.vec()
        Y = demodulate(apply(modulate(frame, train_cp, p), ch, NoiseSpec(), p), train, p)
        err = np.abs(Y.X - H.matvec(x).reshape(p.M, p.N))
        worst = max(worst, float(err.max()))
        rows.extend((t, m, float(e)) for m, e in enumerate(err.max(axis=1)))
        if H.size <= DENSE_LIMIT:
            dense_err = max(dense_err, float(np.max(np.abs(H.to_dense() @ x - H.matvec(x)))))
    metrics = {"max_abs_error": worst, "dense_vs_sparse": dense_err, "trials": cfg.trials}
    passed = worst <= tol.equivalence and dense_err <= tol.dense_sparse
    arts = _write_csv(spec.path("matrix_check.csv"), ["trial", "m", "max_abs_error"], rows)
    return ExperimentResult("matrix-check", passed, metrics, arts)


# -- loopback --------------------------------------------------------------


def run_loopback(spec: ExperimentSpec) -> ExperimentResult:
    cfg, p, tol = spec.config, spec.params, spec.tol
    qam = QamConstellation(cfg.qam_order)
    proto = design_srrc(p, cfg.rolloff)
    _, frame = _random_frame(qam, p, np.random.default_rng(_seed(cfg, 3)))
    x = modulate(frame, build_train(proto, p, cp=True), p)
    oddm_err = float(np.max(np.abs(demodulate(x, build_train(proto, p), p).X - frame.X)))
    otfs_err = float(np.max(np.abs(otfs_demodulate(otfs_modulate(frame, p), p).X - frame.X)))
    metrics = {"oddm_max_abs_error": oddm_err, "otfs_max_abs_error": otfs_err}
    passed = oddm_err <= tol.loopback_oddm and otfs_err <= tol.loopback_otfs
    arts = _write_csv(spec.path("loopback.csv"), ["scheme", "max_abs_error"], [("oddm", oddm_err), ("otfs", otfs_err)])
    wave_path = spec.path("waveform.csv")
    if wave_path is not None:
        write_waveform_csv(x, wave_path)
        arts.append(wave_path)
    return ExperimentResult("loopback", passed, metrics, arts)


# -- complexity ------------------------------------------------------------


def time_mp(
    M: int,
    N: int,
    path_counts=(2, 4, 8, 16),
    L: int = 4,
    K: int = 2,
    iters: int = 10,
    repeats: int = 5,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Best-of-``repeats`` MP runtime for channels with each path count, and the R^2 of a line fit.

    Early stopping is off so every call runs exactly ``iters`` iterations.
    """
    p = GridParams(M=M, N=N, Q=1, oversample=2, cp_len=L - 1)
    qam = QamConstellation(4)
    rng = np.random.default_rng(seed)
    cfg = MpConfig(max_iters=iters, early_stop=False)
    times = []
    for P in path_counts:
        ch = random_channel(P, L, K, rng)
        H = ddmatrix.build(ch, p)
        x = qam.points[qam.random_indices(rng, M * N)]
        y = H.matvec(x) + 0.1 * (rng.standard_normal(M * N) + 1j * rng.standard_normal(M * N))
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            mp_detect(y, H, qam, 0.02, cfg)
            best = min(best, time.perf_counter() - t0)
        times.append(best)
    Ps = np.asarray(path_counts, dtype=float)
    times = np.asarray(times)
    return Ps, times, float(linregress(Ps, times).rvalue ** 2)


# -- driver ----------------------------------------------------------------

RUNNERS = {
    "ortho": run_ortho,
    "psd": run_psd,
    "ber": run_ber,
    "matrix-check": run_matrix_check,
    "loopback": run_loopback,
}


def run(spec: ExperimentSpec) -> ExperimentResult:
    return RUNNERS[spec.kind](spec)


def full_scale(cfg: SimConfig) -> SimConfig:
    warnings.warn(
        "full-scale geometry (M=512, N=64) is slow; BER sweeps can take hours",
        RuntimeWarning,
        stacklevel=2,
    )
    return cfg.with_params(**FULL_GRID)


def git_blob_hash(data: bytes) -> str:
    """Content hash as computed by ``git hash-object``."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


@dataclass
class RunReport:
    status: int
    results: list[ExperimentResult]
    manifest: Path | None


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def run_all(specs, out: str | Path | None = None, inputs=()) -> RunReport:
    """Run ``specs`` in order and write ``manifest.txt`` into ``out``.

    A failing or crashing experiment makes the status nonzero but does not
    stop the rest; artifacts already written are kept. ``inputs`` are extra
    files (config, channel file) whose hashes go into the manifest.
    """
    specs = list(specs)
    results = []
    status = 0
    lines = ["# oddm run manifest", f"experiments = {' '.join(s.kind for s in specs)}"]
    for path in inputs:
        path = Path(path)
        lines.append(f"input {path.name} {git_blob_hash(path.read_bytes())}")
    for spec in specs:
        t0 = time.perf_counter()
        try:
            res = run(spec)
        except Exception as exc:  # keep going, report below
            log.exception("%s failed", spec.kind)
            res = ExperimentResult(spec.kind, False, {"error": f"{type(exc).__name__}: {exc}"})
        log.info("%s: %s in %.1fs", spec.kind, "pass" if res.passed else "FAIL", time.perf_counter() - t0)
        results.append(res)
        status |= 0 if res.passed else 1
        lines += ["", f"[{spec.kind}]", f"status = {'pass' if res.passed else 'fail'}", f"seed = {spec.config.seed}"]
        lines += [f"metric {k} = {_fmt(v)}" for k, v in res.metrics.items()]
        for art in res.artifacts:
            lines.append(f"artifact {art.name} {git_blob_hash(art.read_bytes())}")
        lines += ["config:"] + ["  " + ln for ln in format_config(spec.config).splitlines()]
    manifest = None
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        manifest = out / "manifest.txt"
        manifest.write_text("\n".join(lines) + "\n")
    return RunReport(status, results, manifest)


def with_seed(cfg: SimConfig, seed: int) -> SimConfig:
    return replace(cfg, seed=int(seed))
