import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oddm.modem import (
    DdFrame,
    Waveform,
    demodulate,
    digital_sequence,
    inverse_digital_sequence,
    modulate,
    modulate_filtered,
    otfs_demodulate,
    otfs_digital_sequence,
    otfs_modulate,
    write_waveform_csv,
)
from oddm.params import GridParams, QamConstellation
from oddm.pulse import build_train, design_srrc


def random_frame(rng, M, N, order=4):
    q = QamConstellation(order)
    return DdFrame(q.points[rng.integers(0, order, (M, N))])


def setup(M=8, N=4, Q=2, J=4, cp_len=2):
    p = GridParams(M=M, N=N, Q=Q, oversample=J, cp_len=cp_len)
    a = design_srrc(p, 0.25)
    return p, a, build_train(a, p), build_train(a, p, cp=True)


def test_frame_vectorisation_round_trip(rng):
    fr = random_frame(rng, 5, 3)
    x = fr.vec()
    # x = [x_0; x_1; ...] with x_m the m-th row of X
    np.testing.assert_array_equal(x[3:6], fr.X[1])
    np.testing.assert_array_equal(DdFrame.from_vec(x, 5, 3).X, fr.X)


def test_frame_shape_checked():
    with pytest.raises(ValueError):
        digital_sequence(DdFrame(np.zeros((4, 4))), GridParams(M=8, N=4))
    with pytest.raises(ValueError):
        DdFrame(np.zeros(4))


def test_digital_sequence_single_symbol():
    p = GridParams(M=8, N=4)
    s = digital_sequence(DdFrame.impulse(8, 4), p)
    expected = np.zeros(32, dtype=complex)
    expected[::8] = 0.5
    np.testing.assert_allclose(s, expected, atol=1e-15)


def test_digital_sequence_matches_double_sum(rng):
    M, N = 8, 4
    p = GridParams(M=M, N=N)
    X = random_frame(rng, M, N).X
    want = np.zeros(M * N, dtype=complex)
    for q in range(M * N):
        m, k = q % M, q // M
        for n in range(N):
            want[q] += X[m, n] * np.exp(2j * np.pi * n * k / N)
    want /= np.sqrt(N)
    np.testing.assert_allclose(digital_sequence(DdFrame(X), p), want, atol=1e-13)
    np.testing.assert_allclose(inverse_digital_sequence(want, p).X, X, atol=1e-13)


def test_digital_sequence_is_unitary(rng):
    p = GridParams(M=16, N=8)
    fr = random_frame(rng, 16, 8, 16)
    s = digital_sequence(fr, p)
    assert np.sum(np.abs(s) ** 2) == pytest.approx(np.sum(np.abs(fr.X) ** 2), rel=1e-12)


def test_otfs_route_gives_the_same_digital_sequence(rng):
    p = GridParams(M=32, N=8)
    fr = random_frame(rng, 32, 8)
    np.testing.assert_allclose(otfs_digital_sequence(fr, p), digital_sequence(fr, p), atol=1e-12)


def direct_waveform(X, proto, p, idx, cp):
    """Pulse-by-pulse sum of X[m, n] a(t - qT/M) exp(j2pi n (t - mT/M)/(NT)), q = kM + m.

    Replicas run over k = 0 .. N-1, plus k = -1 for the pulses that fall
    inside the cyclic prefix (q >= -cp_len).
    """
    J, MJ = p.oversample, p.samples_per_symbol
    h = proto.half
    first_k = -1 if cp else 0
    out = np.zeros(len(idx), dtype=complex)
    for m in range(p.M):
        for k in range(first_k, p.N):
            q = k * p.M + m
            if q < (-p.cp_len if cp else 0):
                continue
            rel = idx - q * J
            inside = np.abs(rel) <= h
            a = np.where(inside, proto.taps[np.clip(rel + h, 0, 2 * h)], 0.0)
            for n in range(p.N):
                out += X[m, n] * a * np.exp(2j * np.pi * n * (idx - m * J) / (p.N * MJ))
    return out


@pytest.mark.parametrize("cp", [False, True])
def test_modulate_matches_direct_evaluation(rng, cp):
    p, a, u, ucp = setup()
    fr = random_frame(rng, p.M, p.N)
    x = modulate(fr, ucp if cp else u, p)
    want = direct_waveform(fr.X, a, p, x.start + np.arange(len(x.samples)), cp)
    np.testing.assert_allclose(x.samples, want, atol=1e-12 * np.max(np.abs(want)))
    lead = p.cp_len if cp else 0
    assert x.start == -(lead + p.Q) * p.oversample
    assert x.stop == (p.M * p.N + p.Q) * p.oversample


def test_cp_waveform_is_cyclic_copy_of_frame_tail(rng):
    p, a, u, ucp = setup(M=16, N=4, Q=2, cp_len=3)
    fr = random_frame(rng, p.M, p.N)
    x, xcp = modulate(fr, u, p), modulate(fr, ucp, p)
    J, MN = p.oversample, p.M * p.N
    # away from the pulse tails the CP region repeats the end of the frame
    body = xcp.window(-p.cp_len * J + p.Q * J, -p.Q * J + 1)
    tail = x.window((MN - p.cp_len) * J + p.Q * J, (MN - p.Q) * J + 1)
    np.testing.assert_allclose(body, tail, atol=1e-12)


def test_single_symbol_waveforms():
    p, a, u, _ = setup()
    x = modulate(DdFrame.impulse(p.M, p.N), u, p)
    np.testing.assert_allclose(x.window(u.start, u.stop), u.taps, atol=1e-13 * np.max(u.taps))
    m0, n0 = 3, 2
    x = modulate(DdFrame.impulse(p.M, p.N, m0, n0), u, p)
    idx = x.start + np.arange(len(x.samples))
    rel = idx - m0 * p.oversample
    want = u.value_at(rel) * np.exp(2j * np.pi * n0 * rel / (p.N * p.samples_per_symbol))
    np.testing.assert_allclose(x.samples, want, atol=1e-15)


def test_waveform_energy_follows_symbol_energy(rng):
    p, a, u, _ = setup(M=16, N=8, Q=2)
    ratios = []
    for _ in range(10):
        fr = random_frame(rng, p.M, p.N)
        ratios.append(modulate(fr, u, p).energy / np.sum(np.abs(fr.X) ** 2))
    assert np.mean(ratios) == pytest.approx(1.0, rel=1e-2)


def test_waveform_parseval(rng):
    p, a, u, _ = setup()
    x = modulate(random_frame(rng, p.M, p.N), u, p)
    spectral = np.sum(np.abs(np.fft.fft(x.samples)) ** 2) / len(x.samples) * x.dt
    assert spectral == pytest.approx(x.energy, rel=1e-9)


@given(
    a=st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
    b=st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
    X1=arrays(np.complex128, (8, 4), elements=st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False)),
    X2=arrays(np.complex128, (8, 4), elements=st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False)),
)
def test_modulation_is_linear(a, b, X1, X2):
    p, _, _, ucp = _fixed()
    lhs = modulate(DdFrame(a * X1 + b * X2), ucp, p).samples
    rhs = a * modulate(DdFrame(X1), ucp, p).samples + b * modulate(DdFrame(X2), ucp, p).samples
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + np.max(np.abs(rhs))))


_FIXED = setup()


def _fixed():
    return _FIXED


def test_filtered_impulse_is_the_pulse_train():
    p, a, u, _ = setup()
    x = modulate_filtered(DdFrame.impulse(p.M, p.N), a, p)
    np.testing.assert_allclose(x.window(u.start, u.stop), u.taps, atol=1e-13 * np.max(u.taps))


def test_filtered_approximation_error_grows_with_pulse_length(rng):
    fr = random_frame(rng, 64, 8)
    errs = []
    for Q in (2, 8, 24):
        p, a, u, _ = setup(M=64, N=8, Q=Q)
        x = modulate(fr, u, p).samples
        errs.append(np.linalg.norm(x - modulate_filtered(fr, a, p).samples) / np.linalg.norm(x))
    assert errs[0] < errs[1] < errs[2]
    assert errs[0] < 5e-2


def brute_demod(y, train, p):
    J, MJ = p.oversample, p.samples_per_symbol
    idx = y.start + np.arange(len(y.samples))
    Y = np.zeros((p.M, p.N), dtype=complex)
    for m in range(p.M):
        rel = idx - m * J
        g = train.value_at(rel)
        for n in range(p.N):
            Y[m, n] = np.sum(y.samples * g * np.exp(-2j * np.pi * n * rel / (p.N * MJ))) * p.dt
    return Y


def test_demodulate_matches_brute_force(rng):
    p, a, u, ucp = setup()
    y = Waveform(rng.standard_normal(700) + 1j * rng.standard_normal(700), -300, p.dt)
    np.testing.assert_allclose(demodulate(y, u, p).X, brute_demod(y, u, p), atol=1e-12)


def test_demodulate_pulse_train_gives_unit_origin():
    p, a, u, _ = setup(M=32, N=4, Q=2)
    # zero-pad so the matched filters of the last symbols are covered
    span = Waveform(np.zeros(u.stop - u.start + p.M * p.oversample, dtype=complex), u.start, p.dt)
    Y = demodulate(span + Waveform(u.taps.astype(complex), u.start, p.dt), u, p).X
    assert abs(Y[0, 0] - 1) < 1e-10
    Y[0, 0] = 0
    assert np.max(np.abs(Y)) <= 1e-3


def test_demodulate_needs_the_whole_support():
    p, a, u, _ = setup()
    with pytest.raises(ValueError):
        demodulate(Waveform(np.zeros(10, dtype=complex), 0, p.dt), u, p)


@pytest.mark.parametrize("M,N,Q", [(16, 8, 1), (64, 16, 8), (128, 8, 16)])
def test_oddm_loopback(rng, M, N, Q):
    p, a, u, ucp = setup(M=M, N=N, Q=Q, cp_len=3)
    fr = random_frame(rng, M, N)
    Y = demodulate(modulate(fr, ucp, p), u, p)
    assert np.max(np.abs(Y.X - fr.X)) <= 1e-3


def test_delayed_symbol_lands_on_shifted_bin():
    p, a, u, ucp = setup(M=32, N=4, Q=2, cp_len=3)
    m0, n0, l = 5, 1, 3
    x = modulate(DdFrame.impulse(p.M, p.N, m0, n0), ucp, p)
    y = Waveform(np.concatenate([np.zeros(l * p.oversample), x.samples]), x.start, p.dt)
    Y = np.abs(demodulate(y, u, p).X)
    assert np.unravel_index(np.argmax(Y), Y.shape) == (m0 + l, n0)
    assert Y[m0 + l, n0] == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("shaping", ["zoh", "tf-rect"])
def test_otfs_loopback_is_exact(rng, shaping):
    p = GridParams(M=16, N=8, oversample=4, cp_len=3)
    fr = random_frame(rng, 16, 8, 16)
    x = otfs_modulate(fr, p, shaping=shaping)
    assert x.start == -3 * 4
    assert x.energy == pytest.approx(np.sum(np.abs(fr.X) ** 2) * (1 + 3 / 128), rel=0.05)
    np.testing.assert_allclose(otfs_demodulate(x, p, shaping=shaping).X, fr.X, atol=1e-10)


@pytest.mark.parametrize("shaping", ["zoh", "tf-rect"])
def test_otfs_samples_carry_the_digital_sequence(rng, shaping):
    p = GridParams(M=16, N=8, oversample=4)
    fr = random_frame(rng, 16, 8)
    x = otfs_modulate(fr, p, cp=False, shaping=shaping)
    chips = x.samples[:: p.oversample] / np.sqrt(p.M / p.T)
    np.testing.assert_allclose(chips, digital_sequence(fr, p), atol=1e-12)


def test_otfs_rejects_unknown_shaping():
    with pytest.raises(ValueError):
        otfs_modulate(DdFrame.impulse(8, 2), GridParams(M=8, N=2), shaping="gauss")


def test_waveform_csv(tmp_path):
    w = Waveform(np.array([1 + 2j, -0.5j]), -1, 0.25)
    write_waveform_csv(w, tmp_path / "w.csv")
    rows = (tmp_path / "w.csv").read_text().splitlines()
    assert rows[0] == "t,re,im"
    assert rows[1:] == ["-0.25,1.0,2.0", "0.0,-0.0,-0.5"]


def test_waveform_addition_aligns_times():
    a = Waveform(np.ones(3, dtype=complex), 0, 1.0)
    b = Waveform(np.ones(2, dtype=complex), 2, 1.0)
    c = a + b
    assert (c.start, c.stop) == (0, 4)
    np.testing.assert_array_equal(c.samples, [1, 1, 2, 1])
