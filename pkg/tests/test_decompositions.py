import numpy as np
import pytest
from hypothesis import given, strategies as st

from mimo_noma.decompositions import (bd_decompose, cancel_self_interference, format_matrix, generalized_eigen_gsv,
                                      gsvd_decompose, jzf_decompose, parse_matrix, uasd_decompose)
from mimo_noma.densities import ks_distance, wishart_marginal_pdf
from mimo_noma.errors import DimensionError, RankDeficient
from mimo_noma.system import SystemConfig, sample_channel
from mimo_noma.verify import gsvd_residuals, uasd_residuals

SHAPES = [(3, 3, 5), (2, 2, 4), (3, 3, 3), (1, 4, 4), (4, 2, 3), (5, 5, 4)]


def draw(M1, M2, N, seed=0, index=0):
    ch = sample_channel(SystemConfig(N=N, M1=M1, M2=M2), seed, index)
    return ch.H1, ch.H2


@given(st.sampled_from(SHAPES), st.integers(0, 2**32))
def test_uasd_invariants_hold_on_random_draws(shape, seed):
    H1, H2 = draw(*shape, seed=seed)
    res = uasd_residuals(H1, H2, uasd_decompose(H1, H2))
    assert res["structure"] < 1e-10
    assert res["unitarity"] < 1e-10
    assert res["cs_identity"] < 1e-10
    assert res["gsv"] < 1e-8
    assert res["d1_identity"] < 1e-10


@given(st.sampled_from(SHAPES), st.integers(0, 2**32))
def test_gsvd_invariants_hold_on_random_draws(shape, seed):
    H1, H2 = draw(*shape, seed=seed)
    res = gsvd_residuals(H1, H2, gsvd_decompose(H1, H2))
    assert max(res.values()) < 1e-10


def test_identity_channels_give_unit_gsvs():
    I = np.eye(3)
    dec = uasd_decompose(I, I)
    assert np.allclose(dec.gsv, 1.0, atol=1e-12)
    assert np.allclose(dec.Sigma1, 1 / np.sqrt(2)) and np.allclose(dec.Sigma2, 1 / np.sqrt(2))
    g = gsvd_decompose(I, I)
    assert np.allclose(g.c, 1 / np.sqrt(2)) and np.allclose(g.s, 1 / np.sqrt(2))


def test_d1_is_exact_identity_when_overloaded():
    for i in range(20):
        H1, H2 = draw(3, 3, 5, index=i)
        assert np.array_equal(uasd_decompose(H1, H2).D1, np.ones(2))


def test_uasd_reduces_to_block_diagonalization():
    H1, H2 = draw(2, 2, 4)
    dec = uasd_decompose(H1, H2)
    Q1, Q2, P, s1, s2 = bd_decompose(H1, H2)
    assert dec.dims.M == 0 and dec.T.shape == (2, 0)
    assert np.allclose(dec.Z, P) and np.allclose(dec.D1, s1) and np.allclose(dec.D2, s2)


def test_gsv_matches_generalized_eigenproblem():
    H1, H2 = draw(3, 3, 3, seed=5)
    dec = uasd_decompose(H1, H2)
    ref = generalized_eigen_gsv(H2, H1, 3, 0)
    assert np.allclose(np.sort(dec.lam), np.sort(ref), rtol=1e-8)


@pytest.mark.parametrize("shape", SHAPES)
def test_gsvs_are_reciprocal_between_factorizations(shape):
    for i in range(10):
        H1, H2 = draw(*shape, seed=3, index=i)
        u = np.sort(uasd_decompose(H1, H2).gsv)
        g = np.sort(1.0 / gsvd_decompose(H1, H2).gsv)
        assert np.allclose(u, g, rtol=1e-9)


def test_gsvs_equal_singular_values_of_channel_ratio():
    # with both users at least as large as the BS the shared gains are the
    # singular values of H2 H1^+
    for shape in [(3, 3, 3), (5, 5, 4), (4, 6, 3)]:
        H1, H2 = draw(*shape, seed=9)
        sv = np.linalg.svd(H2 @ np.linalg.pinv(H1), compute_uv=False)[: shape[2]]
        assert np.allclose(np.sort(uasd_decompose(H1, H2).gsv), np.sort(sv), rtol=1e-9)


def test_gsvd_of_equal_square_matrices():
    H, _ = draw(3, 3, 3, seed=2)
    g = gsvd_decompose(H, H)
    assert np.allclose(g.C1, np.eye(3) / np.sqrt(2)) and np.allclose(g.S1, np.eye(3) / np.sqrt(2))


def test_gsvd_private_blocks_are_identities():
    H1, H2 = draw(3, 3, 5, seed=4)
    g = gsvd_decompose(H1, H2)
    # columns: two user-2 streams, one shared, two user-1 streams
    assert np.allclose(g.S[:2, :2], np.eye(2)) and np.allclose(g.C[1:, 3:], np.eye(2))
    assert np.allclose(g.C[:, :2], 0) and np.allclose(g.S[:, 3:], 0)


def test_block_diagonalization():
    H1, H2 = draw(2, 2, 4, seed=1)
    Q1, Q2, P, s1, s2 = bd_decompose(H1, H2)
    assert np.allclose(Q1 @ H1 @ P, np.hstack([np.diag(s1), np.zeros((2, 2))]), atol=1e-10)
    assert np.allclose(Q2 @ H2 @ P, np.hstack([np.zeros((2, 2)), np.diag(s2)]), atol=1e-10)
    for block in (P[:, :2], P[:, 2:]):
        assert np.allclose(block.conj().T @ block * 2, np.eye(2), atol=1e-12)
    with pytest.raises(DimensionError):
        bd_decompose(*draw(3, 3, 5))


def test_bd_gains_follow_scaled_wishart_law():
    cfg = SystemConfig(N=4, M1=2, M2=2)
    lam = []
    for i in range(4000):
        ch = sample_channel(cfg, 21, i)
        lam.extend(bd_decompose(ch.H1, ch.H2)[3] ** 2)
    assert ks_distance(np.array(lam), wishart_marginal_pdf(2, 2).cdf) < 0.02


def test_joint_zero_forcing():
    H1, H2 = draw(2, 2, 4, seed=8)
    P = jzf_decompose(H1, H2)
    assert np.allclose(np.vstack([H1, H2]) @ P, np.eye(4), atol=1e-10)
    Q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((4, 4)))
    H = Q[:, :].T
    assert np.allclose(jzf_decompose(H[:2], H[2:]), H.T, atol=1e-12)
    with pytest.raises(DimensionError):
        jzf_decompose(*draw(3, 3, 5))


def test_self_interference_cancellation():
    H1, H2 = draw(3, 3, 5, seed=6)
    dec = uasd_decompose(H1, H2)
    Pi2 = 100.0
    rng = np.random.default_rng(1)
    s = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    y2 = dec.Q2 @ H2 @ dec.Z @ s / np.sqrt(Pi2)
    assert np.array_equal(cancel_self_interference(y2, dec, np.zeros(1), Pi2), y2)
    clean = cancel_self_interference(y2, dec, s[:1], Pi2)
    # the first Mbar2 outputs now see only the user-2 private symbols
    expected = dec.D2 * s[3:] / np.sqrt(Pi2)
    assert np.max(np.abs(clean[:2] - expected)) < 1e-10
    with pytest.raises(DimensionError):
        cancel_self_interference(y2[:2], dec, s[:1], Pi2)


def test_rank_deficient_channel_is_rejected():
    H1 = np.ones((3, 5), dtype=complex)
    _, H2 = draw(3, 3, 5)
    with pytest.raises(RankDeficient):
        uasd_decompose(H1, H2)
    with pytest.raises(DimensionError):
        uasd_decompose(np.ones((3, 4)), H2)


def test_matrix_text_round_trip():
    H1, _ = draw(3, 3, 5, seed=12)
    text = format_matrix(H1)
    assert "np." not in text
    assert np.array_equal(parse_matrix(text), H1)
