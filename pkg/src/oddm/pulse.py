"""Prototype pulse design, the ``u(t)`` pulse train and its ambiguity function.

All waveforms are sampled at ``M*J/T``. A tap index ``i`` of the prototype
corresponds to ``t = i * dt`` and the prototype lives on the open interval
``(-QT/M, QT/M)``, i.e. indices ``|i| <= Q*J - 1``.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .params import GridParams


def srrc(x: np.ndarray, rolloff: float) -> np.ndarray:
    """Unit-interval square-root raised cosine evaluated at ``x`` (in symbol periods).

    Removable singularities at ``x = 0`` and ``|x| = 1/(4*rolloff)`` use their
    limits.
    """
    x = np.asarray(x, dtype=float)
    a = float(rolloff)
    out = np.empty_like(x)
    at_zero = np.isclose(x, 0.0, atol=1e-12)
    at_pole = (a > 0) & np.isclose(np.abs(x), 1.0 / (4 * a) if a > 0 else np.inf, atol=1e-10)
    regular = ~(at_zero | at_pole)
    t = x[regular]
    num = np.sin(np.pi * t * (1 - a)) + 4 * a * t * np.cos(np.pi * t * (1 + a))
    den = np.pi * t * (1 - (4 * a * t) ** 2)
    out[regular] = num / den
    out[at_zero] = 1 - a + 4 * a / np.pi
    if a > 0:
        out[at_pole] = a / np.sqrt(2) * (
            (1 + 2 / np.pi) * np.sin(np.pi / (4 * a)) + (1 - 2 / np.pi) * np.cos(np.pi / (4 * a))
        )
    return out


def symbol_lag_correlation(taps: np.ndarray, J: int, max_lag: int | None = None) -> np.ndarray:
    """``sum_i taps[i] taps[i + k*J]`` for ``k = 1 .. max_lag``."""
    n = len(taps)
    if max_lag is None:
        max_lag = (n - 1) // J
    return np.array([taps[: n - k * J] @ taps[k * J :] for k in range(1, max_lag + 1)])


def _symmetric_basis(n: int) -> np.ndarray:
    """``S`` with ``taps = S @ b`` and ``b[j] = taps[h + j]`` for symmetric taps."""
    h = (n - 1) // 2
    S = np.zeros((n, h + 1))
    S[h + np.arange(h + 1), np.arange(h + 1)] = 1.0
    S[h - np.arange(1, h + 1), np.arange(1, h + 1)] = 1.0
    return S


def _lag_jacobian(a: np.ndarray, J: int, n_lags: int) -> np.ndarray:
    n = len(a)
    jac = np.zeros((n_lags, n))
    for k in range(1, n_lags + 1):
        s = k * J
        jac[k - 1, : n - s] += a[s:]
        jac[k - 1, s:] += a[: n - s]
    return jac


def stopband_matrix(n: int, J: int, edge: float) -> np.ndarray:
    """Gram matrix of the energy a length-``n`` tap vector puts above ``edge``.

    ``edge`` is in cycles per symbol (units of ``M/T``); the band runs from
    there to the Nyquist frequency ``J/2`` on both sides.
    """
    d = np.subtract.outer(np.arange(n), np.arange(n)).astype(float)
    nu = edge / J
    R = np.empty_like(d)
    off = d != 0
    R[off] = (np.sin(np.pi * d[off]) - np.sin(2 * np.pi * nu * d[off])) / (np.pi * d[off])
    R[~off] = 1.0 - 2.0 * nu
    return R


def stopband_fraction(taps: np.ndarray, J: int, edge: float) -> float:
    """Share of the tap energy above ``edge`` (cycles per symbol)."""
    R = stopband_matrix(len(taps), J, edge)
    return float(taps @ R @ taps / (taps @ taps))


def _nyquist_refine(taps: np.ndarray, J: int, max_iter: int = 50, tol: float = 1e-16) -> tuple[np.ndarray, int]:
    """Smallest symmetric correction that zeroes the autocorrelation at every nonzero symbol lag.

    Gauss-Newton on the quadratic lag constraints with a minimum-norm step,
    keeping the support and the time symmetry fixed.
    """
    n = len(taps)
    n_lags = (n - 1) // J
    S = _symmetric_basis(n)
    a = taps / np.linalg.norm(taps)
    for it in range(max_iter):
        r = symbol_lag_correlation(a, J, n_lags)
        if np.max(np.abs(r), initial=0.0) <= tol:
            return a, it
        step, *_ = np.linalg.lstsq(_lag_jacobian(a, J, n_lags) @ S, -r, rcond=None)
        a = a + S @ step
        a /= np.linalg.norm(a)
    r = symbol_lag_correlation(a, J, n_lags)
    if np.max(np.abs(r), initial=0.0) > 1e-12:
        warnings.warn(
            f"Nyquist refinement stalled with residual {np.max(np.abs(r)):.2e}; "
            "increase the oversampling factor",
            RuntimeWarning,
            stacklevel=3,
        )
    return a, max_iter


def _stopband_refine(taps: np.ndarray, J: int, edge: float, mu: float = 1e-2, n_iter: int = 40) -> np.ndarray:
    """Nyquist taps that trade a small change for low out-of-band energy.

    Each step solves ``min (b + d)' R (b + d) + mu |d|^2`` subject to the
    linearised lag constraints ``A d = -r`` (an equality-constrained QP via
    its KKT system); a final pass of :func:`_nyquist_refine` removes what is
    left of the constraint residual.
    """
    n = len(taps)
    h = (n - 1) // 2
    n_lags = (n - 1) // J
    S = _symmetric_basis(n)
    R = S.T @ stopband_matrix(n, J, edge) @ S
    reg = R + mu * np.eye(h + 1)
    a = taps / np.linalg.norm(taps)
    for _ in range(n_iter):
        r = symbol_lag_correlation(a, J, n_lags)
        A = _lag_jacobian(a, J, n_lags) @ S
        kkt = np.block([[reg, A.T], [A, np.zeros((n_lags, n_lags))]])
        rhs = np.concatenate([-R @ a[h:], -r])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            sol = scipy.linalg.solve(kkt, rhs, assume_a="sym")
        a = a + S @ sol[: h + 1]
        a /= np.linalg.norm(a)
    a, _ = _nyquist_refine(a, J)
    return a


@dataclass(frozen=True)
class ProtoPulse:
    """Sampled real square-root Nyquist prototype ``a(t)``.

    ``taps`` has ``2*Q*J - 1`` entries centred on ``t = 0`` and satisfies
    ``sum(taps**2) * dt == 1/N``.
    """

    taps: np.ndarray = field(repr=False)
    rolloff: float
    Q: int
    J: int
    N: int
    dt: float
    refined: bool = False

    @property
    def half(self) -> int:
        return (len(self.taps) - 1) // 2

    @property
    def energy(self) -> float:
        return float(np.sum(self.taps**2) * self.dt)

    def lag_correlation(self) -> np.ndarray:
        """Normalised autocorrelation at symbol lags ``1 .. 2Q-1`` (1 at lag 0)."""
        return symbol_lag_correlation(self.taps, self.J) * self.dt * self.N


def _normalise(taps: np.ndarray, params: GridParams) -> np.ndarray:
    return taps / np.sqrt(np.sum(taps**2) * params.dt * params.N)


def stopband_edge(rolloff: float) -> float:
    """Start of the band penalised by the stopband design, in units of ``M/T``."""
    return (1.0 + rolloff) / 2.0 + rolloff / 10.0


def design_srrc(params: GridParams, rolloff: float, refine: bool = True, stopband: bool = False) -> ProtoPulse:
    """Truncated SRRC prototype with energy ``1/N``.

    The closed form is sampled at ``J`` points per ``T/M``, truncated to the
    open interval ``(-QT/M, QT/M)`` and rescaled. Truncation leaves a residual
    intersymbol correlation (about 3e-4 at ``Q = 16``, roll-off 0.25); with
    ``refine`` the taps are corrected so that every nonzero symbol-lag
    correlation vanishes.

    Two corrections are available. The default minimum-norm one stays closest
    to the SRRC but leaks a little energy into the stopband. With
    ``stopband`` a second design also minimises the energy above
    :func:`stopband_edge` and the candidate with less out-of-band energy is
    kept; it buys a lower spectral floor by moving energy towards the pulse
    edges, so it is opt-in.
    """
    if not 0.0 <= rolloff <= 1.0:
        raise ValueError(f"rolloff must lie in [0, 1], got {rolloff}")
    if params.Q < 1:
        raise ValueError("Q must be at least 1")
    J = params.oversample
    idx = np.arange(-params.pulse_half_taps, params.pulse_half_taps + 1)
    taps = srrc(idx / J, rolloff)
    if refine:
        if J < 3:
            raise ValueError("Nyquist refinement needs an oversampling factor of at least 3")
        plain, _ = _nyquist_refine(taps, J)
        if stopband and len(taps) > 1:
            edge = stopband_edge(rolloff)
            shaped = _stopband_refine(taps, J, edge)
            lag_ok = np.max(np.abs(symbol_lag_correlation(shaped, J)), initial=0.0) <= 1e-14
            if lag_ok and stopband_fraction(shaped, J, edge) < stopband_fraction(plain, J, edge):
                plain = shaped
        taps = plain
    return ProtoPulse(
        taps=_normalise(taps, params),
        rolloff=float(rolloff),
        Q=params.Q,
        J=J,
        N=params.N,
        dt=params.dt,
        refined=refine,
    )


def pulse_from_taps(taps: np.ndarray, params: GridParams, rolloff: float = float("nan")) -> ProtoPulse:
    """Wrap externally designed taps; they must be symmetric and span ``2QJ - 1`` samples."""
    taps = np.asarray(taps, dtype=float).ravel()
    expected = 2 * params.pulse_half_taps + 1
    if len(taps) != expected:
        raise ValueError(f"expected {expected} taps for Q={params.Q}, J={params.oversample}, got {len(taps)}")
    if not np.allclose(taps, taps[::-1], rtol=0, atol=1e-12 * np.max(np.abs(taps))):
        raise ValueError("prototype taps must be time-symmetric")
    return ProtoPulse(
        taps=_normalise(taps, params), rolloff=rolloff, Q=params.Q, J=params.oversample,
        N=params.N, dt=params.dt,
    )


def load_taps(path: str | Path, params: GridParams) -> ProtoPulse:
    return pulse_from_taps(np.loadtxt(path, ndmin=1), params)


@dataclass(frozen=True)
class PulseTrain:
    """Sampled ``u(t) = sum_{k=0}^{N-1} a(t - kT)``, or ``u_cp`` with the extra ``k = -1`` replica.

    ``taps[i]`` is the value at ``t = (start + i) * dt``.
    """

    taps: np.ndarray = field(repr=False)
    start: int
    proto: ProtoPulse = field(repr=False)
    cp: bool = False

    @property
    def dt(self) -> float:
        return self.proto.dt

    @property
    def stop(self) -> int:
        return self.start + len(self.taps)

    @property
    def times(self) -> np.ndarray:
        return (self.start + np.arange(len(self.taps))) * self.dt

    @property
    def energy(self) -> float:
        return float(np.sum(self.taps**2) * self.dt)

    def value_at(self, index: np.ndarray) -> np.ndarray:
        """Samples at absolute sample indices, zero outside the support."""
        index = np.asarray(index)
        rel = index - self.start
        ok = (rel >= 0) & (rel < len(self.taps))
        out = np.zeros(index.shape)
        out[ok] = self.taps[rel[ok]]
        return out


def build_train(proto: ProtoPulse, params: GridParams, cp: bool = False) -> PulseTrain:
    if proto.J != params.oversample or proto.Q != params.Q or proto.N != params.N:
        raise ValueError("prototype was designed for different grid parameters")
    period = params.samples_per_symbol
    h = proto.half
    first = -1 if cp else 0
    count = params.N - first
    taps = np.zeros((count - 1) * period + 2 * h + 1)
    for k in range(count):
        taps[k * period : k * period + 2 * h + 1] += proto.taps
    return PulseTrain(taps=taps, start=first * period - h, proto=proto, cp=cp)


def _shifted_product(train: PulseTrain, shift: int) -> tuple[np.ndarray, int]:
    """``u(t) u(t - shift*dt)`` on its support and the absolute index of its first sample."""
    u = train.taps
    n = len(u)
    if abs(shift) >= n:
        return np.zeros(0), train.start
    if shift >= 0:
        return u[shift:] * u[: n - shift], train.start + shift
    return u[: n + shift] * u[-shift:], train.start


def ambiguity_row(train: PulseTrain, params: GridParams, m: int, n_values=None) -> np.ndarray:
    """``A(mT/M, n/(NT))`` for every ``n`` in ``n_values`` (default ``-(N-1) .. N-1``).

    Uses ``A = dt * sum_i u_i u_{i-mJ} exp(-j2 pi n (i - mJ)/(NMJ))``; the
    exponential is ``NMJ``-periodic in ``i`` so the product is folded onto one
    period and transformed with a single FFT.
    """
    if n_values is None:
        n_values = np.arange(-(params.N - 1), params.N)
    n_values = np.asarray(n_values)
    J = params.oversample
    period = params.N * params.samples_per_symbol
    prod, first = _shifted_product(train, m * J)
    offset = (first - m * J) % period
    reps = -(-(offset + len(prod)) // period)
    buf = np.zeros(reps * period)
    buf[offset : offset + len(prod)] = prod
    spectrum = np.fft.fft(buf.reshape(reps, period).sum(axis=0))
    return spectrum[n_values % period] * train.dt


def ambiguity(train: PulseTrain, params: GridParams, m: int, n: int) -> complex:
    """Ambiguity function on the DD grid by direct summation."""
    J = params.oversample
    prod, first = _shifted_product(train, m * J)
    idx = first + np.arange(len(prod)) - m * J
    phase = np.exp(-2j * np.pi * n * idx / (params.N * params.samples_per_symbol))
    return complex(np.sum(prod * phase) * train.dt)


def ambiguity_at(train: PulseTrain, tau: float, nu: float) -> complex:
    """``A(tau, nu) = int u(t) u(t - tau) exp(-j2 pi nu (t - tau)) dt`` for arbitrary real arguments.

    Delays that are not whole samples are applied as a band-limited
    (FFT-domain) fractional shift of the sampled train.
    """
    dt = train.dt
    shift = tau / dt
    whole = int(np.round(shift))
    frac = shift - whole
    u = train.taps
    if abs(frac) < 1e-9:
        prod, first = _shifted_product(train, whole)
    else:
        pad = len(u) + abs(whole) + 64
        size = 1 << int(np.ceil(np.log2(2 * pad)))
        buf = np.zeros(size)
        buf[: len(u)] = u
        f = np.fft.fftfreq(size)
        moved = np.fft.ifft(np.fft.fft(buf) * np.exp(-2j * np.pi * f * shift)).real
        # moved[i] ~ u at absolute index start + i - shift
        prod = u * moved[: len(u)]
        first = train.start
    t = (first + np.arange(len(prod))) * dt - tau
    return complex(np.sum(prod * np.exp(-2j * np.pi * nu * t)) * dt)


@dataclass
class AuditReport:
    """Outcome of a full scan of ``A(mT/M, n/(NT))`` over ``|m| < M``, ``|n| < N``.

    ``grid[m + M - 1, n + N - 1]`` holds the value at ``(m, n)``. The exact
    region is ``|m| <= M - 2Q``; the wrap region is the rest.
    """

    origin: complex
    exact_max: float
    wrap_max: float
    exact_worst: tuple[int, int]
    wrap_worst: tuple[int, int]
    offenders: list[tuple[int, int, float, str]]
    grid: np.ndarray = field(repr=False)
    M: int = 0
    N: int = 0
    Q: int = 0
    J: int = 0

    @property
    def off_origin_max(self) -> float:
        return max(self.exact_max, self.wrap_max)

    def region(self, m: int) -> str:
        return "exact" if abs(m) <= self.M - 2 * self.Q else "wrap"

    def rows(self):
        """``(m, n, value, region)`` for every grid point."""
        for i, m in enumerate(range(-(self.M - 1), self.M)):
            reg = self.region(m)
            for j, n in enumerate(range(-(self.N - 1), self.N)):
                yield m, n, self.grid[i, j], reg


def orthogonality_audit(
    train: PulseTrain, params: GridParams, workers: int | None = None, n_offenders: int = 10
) -> AuditReport:
    """Scan the ambiguity function of ``train`` over the whole DD grid.

    Rows are independent and computed on a thread pool. Values are Riemann
    sums at the waveform rate, so their accuracy is set by ``J``.
    """
    M, N = params.M, params.N
    ms = np.arange(-(M - 1), M)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(lambda m: ambiguity_row(train, params, int(m)), ms))
    grid = np.vstack(rows)

    mag = np.abs(grid)
    origin = complex(grid[M - 1, N - 1])
    mag[M - 1, N - 1] = 0.0
    exact = np.abs(ms) <= M - 2 * params.Q

    def worst(mask):
        if not mask.any():
            return 0.0, (0, 0)
        sub = np.where(mask[:, None], mag, -1.0)
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        return float(mag[i, j]), (int(ms[i]), int(j - (N - 1)))

    exact_max, exact_worst = worst(exact)
    wrap_max, wrap_worst = worst(~exact)

    order = np.argsort(mag, axis=None)[::-1][:n_offenders]
    offenders = []
    for flat in order:
        i, j = np.unravel_index(flat, mag.shape)
        m = int(ms[i])
        offenders.append((m, int(j - (N - 1)), float(mag[i, j]), "exact" if exact[i] else "wrap"))

    return AuditReport(
        origin=origin,
        exact_max=exact_max,
        wrap_max=wrap_max,
        exact_worst=exact_worst,
        wrap_worst=wrap_worst,
        offenders=offenders,
        grid=grid,
        M=M,
        N=N,
        Q=params.Q,
        J=params.oversample,
    )
