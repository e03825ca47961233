import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oddm.channel import DdChannel, DdPath, random_channel
from oddm.ddmatrix import DENSE_LIMIT, build, cyclic_shift, phase_term, wrap_phase
from oddm.params import GridParams


def sampled_oracle(X, ch, M, N):
    """Independent model: DD grid -> digital sequence with a cyclic prefix -> taps -> back.

    Sample ``q = m + iM`` carries ``sum_n X[m, n] e^{j2pi n i / N} / sqrt(N)``. A path delays
    the sequence by ``l`` samples and rotates sample ``q`` by ``e^{j2pi k (q - l) / (MN)}``
    using the true (possibly negative) transmit index, which is what the prefix supplies.
    """
    S = np.fft.ifft(X, axis=1, norm="ortho")
    s = S.T.ravel()
    q = np.arange(M * N)
    r = np.zeros(M * N, dtype=complex)
    for path in ch.paths:
        src = q - path.l
        r += path.h * np.exp(2j * np.pi * path.k * src / (M * N)) * s[src % (M * N)]
    R = r.reshape(N, M).T
    return np.fft.fft(R, axis=1, norm="ortho")


def test_identity_channel_gives_identity_matrix():
    p = GridParams(M=8, N=4)
    H = build(DdChannel((DdPath(1.0, 0, 0),), L=1, K=0), p)
    np.testing.assert_array_equal(H.to_dense(), np.eye(32))
    np.testing.assert_array_equal(H.rows().to_dense(), np.eye(32))


def test_single_delay_hand_built():
    # M=4, N=2, one path at l=1: identity blocks below the diagonal, wrap phase in the corner
    p = GridParams(M=4, N=2)
    H = build(DdChannel((DdPath(1.0, 1, 0),), L=2, K=0), p).to_dense()
    want = np.zeros((8, 8), dtype=complex)
    I2 = np.eye(2)
    for m in (1, 2, 3):
        want[2 * m : 2 * m + 2, 2 * (m - 1) : 2 * m] = I2
    want[0:2, 6:8] = np.diag([1.0, -1.0])
    np.testing.assert_allclose(H, want, atol=1e-15)


def test_phase_term_value():
    assert phase_term(5, 2, 3, 16, 8) == pytest.approx(np.exp(2j * np.pi * 9 / 128), abs=1e-15)
    assert phase_term(2, 2, 7, 16, 8) == 1


def test_wrap_phase_and_shift():
    np.testing.assert_allclose(wrap_phase(4), [1, -1j, -1, 1j], atol=1e-15)
    v = np.arange(5.0)
    np.testing.assert_array_equal(cyclic_shift(5, 2) @ v, np.roll(v, 2))


def test_blocks_with_shared_delay_are_circulant():
    p = GridParams(M=8, N=6)
    ch = DdChannel((DdPath(0.7, 2, -1), DdPath(0.4j, 2, 2)), L=3, K=2)
    H = build(ch, p)
    for m in range(p.M):
        B = H.block(m, 2)
        # a circulant matrix is fixed by conjugation with the cyclic shift
        C = cyclic_shift(p.N, 1)
        np.testing.assert_allclose(C @ B @ C.T, B, atol=1e-14)
        np.testing.assert_allclose(
            B[:, 0],
            0.7 * phase_term(m, 2, -1, 8, 6) * np.eye(6)[:, 5] + 0.4j * phase_term(m, 2, 2, 8, 6) * np.eye(6)[:, 2],
            atol=1e-14,
        )


def test_dense_and_sparse_agree(rng):
    p = GridParams(M=8, N=4)
    for _ in range(20):
        ch = random_channel(3, 3, 1, rng)
        H = build(ch, p)
        x = rng.standard_normal(32) + 1j * rng.standard_normal(32)
        assert np.max(np.abs(H.to_dense() @ x - H.matvec(x))) <= 1e-12
        np.testing.assert_allclose(H.rows().to_dense(), H.to_dense(), atol=1e-14)


@pytest.mark.parametrize("l,k", [(0, 0), (1, 0), (3, 0), (2, 1), (1, -2), (3, 2)])
def test_single_path_matches_sampled_model(l, k, rng):
    M, N = 8, 4
    X = rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N))
    ch = DdChannel((DdPath(0.9 - 0.2j, l, k),), L=4, K=2)
    Y = build(ch, GridParams(M=M, N=N)).matvec(X.ravel()).reshape(M, N)
    np.testing.assert_allclose(Y, sampled_oracle(X, ch, M, N), atol=1e-12)


def test_random_channels_match_sampled_model(rng):
    M, N = 16, 8
    for _ in range(10):
        ch = random_channel(4, 4, 2, rng)
        X = rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N))
        Y = build(ch, GridParams(M=M, N=N)).matvec(X.ravel()).reshape(M, N)
        np.testing.assert_allclose(Y, sampled_oracle(X, ch, M, N), atol=1e-12)


def test_each_row_touches_p_symbols(rng):
    p = GridParams(M=16, N=8)
    ch = random_channel(5, 4, 2, rng)
    H = build(ch, p)
    assert H.P == 5
    assert H.rows().cols.shape == (128, 5)
    assert np.all(np.count_nonzero(H.to_dense(), axis=1) == 5)
    # distinct (l, k) cells reach distinct source symbols
    assert all(len(set(r)) == 5 for r in H.rows().cols.tolist())


def test_unitary_for_a_single_path():
    p = GridParams(M=8, N=4)
    H = build(DdChannel((DdPath(1j, 3, -1),), L=4, K=1), p).to_dense()
    np.testing.assert_allclose(H.conj().T @ H, np.eye(32), atol=1e-13)


def test_permuted_rows(rng):
    p = GridParams(M=8, N=4)
    H = build(random_channel(3, 3, 1, rng), p)
    perm = rng.permutation(32)
    Pm = np.eye(32)[perm]
    np.testing.assert_allclose(H.rows().permuted(perm).to_dense(), Pm @ H.to_dense() @ Pm.T, atol=1e-14)


def test_taps_listing():
    p = GridParams(M=8, N=4)
    ch = DdChannel((DdPath(0.5, 1, -1), DdPath(2.0, 0, 1)), L=2, K=1)
    assert sorted(build(ch, p).taps) == [(0, 1, 2.0), (1, -1, 0.5)]


def test_size_checks():
    p = GridParams(M=4, N=2)
    with pytest.raises(ValueError):
        build(DdChannel((DdPath(1.0, 0, 0),), L=5, K=0), p)
    H = build(DdChannel((DdPath(1.0, 0, 0),), L=1, K=0), p)
    with pytest.raises(ValueError):
        H.matvec(np.zeros(9))
    big = build(DdChannel((DdPath(1.0, 0, 0),), L=1, K=0), GridParams(M=128, N=64))
    assert big.size > DENSE_LIMIT
    with pytest.raises(ValueError):
        big.to_dense()


@given(
    seed=st.integers(0, 2**32 - 1),
    a=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
    b=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
)
def test_operator_is_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    H = build(random_channel(3, 3, 2, rng), GridParams(M=8, N=5))
    x1 = rng.standard_normal(40) + 1j * rng.standard_normal(40)
    x2 = rng.standard_normal(40) + 1j * rng.standard_normal(40)
    lhs = H.matvec(a * x1 + b * x2)
    rhs = a * H.matvec(x1) + b * H.matvec(x2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + abs(a) + abs(b)))


@given(seed=st.integers(0, 2**32 - 1))
def test_energy_is_preserved_for_one_path(seed):
    rng = np.random.default_rng(seed)
    l, k = int(rng.integers(0, 4)), int(rng.integers(-2, 3))
    H = build(DdChannel((DdPath(1.0, l, k),), L=4, K=2), GridParams(M=8, N=4))
    x = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    assert np.linalg.norm(H.matvec(x)) == pytest.approx(np.linalg.norm(x), rel=1e-12)
