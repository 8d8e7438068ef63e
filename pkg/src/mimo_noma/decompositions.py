"""Simultaneous diagonalization of the two users' channels.

The UA-SD factorization gives unitary receive filters ``Q1``, ``Q2`` and a
precoder ``Z`` with

    Q1 H1 Z = [[Sigma1, 0, 0 ], [0, D1, 0]]
    Q2 H2 Z = [[T,      0, D2], [Sigma2, 0, 0]]

where the column blocks are the shared streams, the private streams of user 1
and the private streams of user 2. When a user has more antennas than the
pattern has rows, the extra rows are zero.

GSVD, block diagonalization and joint zero forcing are provided as baselines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, RankDeficient
from .system import RANK_RTOL, DerivedDims, derive_dims

COND_RTOL = 1e-10


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


def _check_pair(H1, H2):
    H1 = np.asarray(H1, dtype=complex)
    H2 = np.asarray(H2, dtype=complex)
    if H1.ndim != 2 or H2.ndim != 2 or H1.shape[1] != H2.shape[1]:
        raise DimensionError(f"channels must share a column count, got {H1.shape} and {H2.shape}")
    for H in (H1, H2):
        s = np.linalg.svd(H, compute_uv=False)
        if s[0] == 0 or s[-1] < COND_RTOL * s[0]:
            raise RankDeficient("channel matrix is numerically rank deficient")
    return H1, H2


def null_basis(H: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis of the null space of ``H``, rank decided at ``rtol * s_max``."""
    _, s, Vh = np.linalg.svd(H)
    rank = int(np.sum(s > rtol * s[0])) if s.size else 0
    return Vh[rank:].conj().T


def complement_basis(A: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``col(A)``."""
    n = A.shape[0]
    if A.shape[1] == 0:
        return np.eye(n, dtype=complex)
    U, s, _ = np.linalg.svd(A)
    rank = int(np.sum(s > rtol * s[0]))
    return U[:, rank:]


def _inverse_singular_values(s: np.ndarray) -> np.ndarray:
    if s.size and s[-1] < COND_RTOL * s[0]:
        raise RankDeficient("intermediate factor is ill-conditioned")
    return 1.0 / s


@dataclass(frozen=True)
class UasdDecomposition:
    """Factors of the UA-SD decomposition.

    ``Sigma1``, ``Sigma2``, ``D1`` and ``D2`` are stored as 1-D arrays of
    diagonal entries. ``gsv`` holds the singular values underlying
    ``Sigma2 / Sigma1`` (sorted descending) and ``lam`` their squares.
    """

    Q1: np.ndarray
    Q2: np.ndarray
    Z: np.ndarray
    Sigma1: np.ndarray
    Sigma2: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    T: np.ndarray
    dims: DerivedDims

    @property
    def gsv(self) -> np.ndarray:
        return self.Sigma2 / self.Sigma1

    @property
    def lam(self) -> np.ndarray:
        return (self.Sigma2 / self.Sigma1) ** 2

    def pattern1(self) -> np.ndarray:
        """Target matrix for ``Q1 H1 Z``."""
        d = self.dims
        out = np.zeros((self.Q1.shape[0], d.L), dtype=complex)
        out[np.arange(d.M), np.arange(d.M)] = self.Sigma1
        idx = np.arange(d.Mbar1)
        out[d.M + idx, d.M + idx] = self.D1
        return out

    def pattern2(self) -> np.ndarray:
        """Target matrix for ``Q2 H2 Z``."""
        d = self.dims
        out = np.zeros((self.Q2.shape[0], d.L), dtype=complex)
        out[: d.Mbar2, : d.M] = self.T
        idx = np.arange(d.Mbar2)
        out[idx, d.M + d.Mbar1 + idx] = self.D2
        out[d.Mbar2 + np.arange(d.M), np.arange(d.M)] = self.Sigma2
        return out


def _block_diag(*blocks):
    return sla.block_diag(*blocks).astype(complex)


def bd_decompose(H1, H2):
    """Block diagonalization for ``M1 + M2 <= N``.

    Returns ``(Q1, Q2, P, s1, s2)`` where ``Q1 H1 P = [diag(s1), 0]`` and
    ``Q2 H2 P = [0, diag(s2)]``. Each user's precoder block is an orthonormal
    basis of an ``Mk``-dimensional subspace of the other user's null space,
    scaled by ``1/sqrt(Mk)``.
    """
    H1, H2 = _check_pair(H1, H2)
    M1, N = H1.shape
    M2 = H2.shape[0]
    if M1 + M2 > N:
        raise DimensionError(f"block diagonalization needs M1 + M2 <= N, got {M1} + {M2} > {N}")
    null2 = null_basis(H2)[:, :M1]
    null1 = null_basis(H1)[:, :M2]
    U1, s1, V1h = np.linalg.svd(H1 @ null2 / np.sqrt(M1))
    U2, s2, V2h = np.linalg.svd(H2 @ null1 / np.sqrt(M2))
    P = np.hstack([null2 @ V1h.conj().T / np.sqrt(M1), null1 @ V2h.conj().T / np.sqrt(M2)])
    return U1.conj().T, U2.conj().T, P, s1, s2


def jzf_decompose(H1, H2) -> np.ndarray:
    """Joint zero-forcing precoder ``P = pinv([H1; H2])``."""
    H1, H2 = _check_pair(H1, H2)
    if H1.shape[0] + H2.shape[0] > H1.shape[1]:
        raise DimensionError("joint zero forcing needs M1 + M2 <= N")
    return np.linalg.pinv(np.vstack([H1, H2]))


def uasd_decompose(H1, H2, dims: DerivedDims | None = None) -> UasdDecomposition:
    """UA-SD decomposition of a channel pair.

    Parameters
    ----------
    H1, H2 : ndarray
        ``M1 x N`` and ``M2 x N`` full-rank channels (small-scale fading).
    dims : DerivedDims, optional
        Stream partition; derived from the shapes when omitted.

    Returns
    -------
    UasdDecomposition

    Raises
    ------
    RankDeficient
        If a channel or an intermediate factor is ill-conditioned beyond a
        relative tolerance of 1e-10.
    """
    H1, H2 = _check_pair(H1, H2)
    M1, N = H1.shape
    M2 = H2.shape[0]
    expected = derive_dims(N, M1, M2)
    if dims is not None and dims != expected:
        raise DimensionError(f"dims {dims} do not match channel shapes {expected}")
    dims = expected

    if M1 + M2 <= N:
        Q1, Q2, Z, s1, s2 = bd_decompose(H1, H2)
        empty = np.zeros(0)
        out = UasdDecomposition(Q1, Q2, Z, empty, empty.copy(), s1, s2, np.zeros((M2, 0), complex), dims)
        _freeze(Q1, Q2, Z, s1, s2)
        return out

    M, Mbar1, Mbar2 = dims.M, dims.Mbar1, dims.Mbar2
    null1 = null_basis(H1)  # N x Mbar2
    null2 = null_basis(H2)  # N x Mbar1
    if null1.shape[1] != Mbar2 or null2.shape[1] != Mbar1:
        raise RankDeficient("null-space dimensions do not match the stream partition")
    shared = complement_basis(np.hstack([null1, null2]))  # N x M
    if shared.shape[1] != M:
        raise RankDeficient("shared subspace has the wrong dimension")

    # Invert H1 on the span of [shared, null2]
    basis1 = np.hstack([shared, null2])
    U1, s1, V1h = np.linalg.svd(H1 @ basis1)
    W1 = basis1 @ V1h.conj().T * _inverse_singular_values(s1)
    r1 = basis1.shape[1]

    # User 2 private directions
    if Mbar2:
        U2, sig2, V2h = np.linalg.svd(H2 @ null1)
        _inverse_singular_values(sig2)
    else:
        U2, sig2, V2h = np.eye(M2, dtype=complex), np.zeros(0), np.zeros((0, 0), complex)

    Ht2 = U2.conj().T @ H2 @ W1  # M2 x r1, rank M
    _, sh, Vh = np.linalg.svd(Ht2)
    if M and sh[M - 1] < COND_RTOL * sh[0]:
        raise RankDeficient("coupled block of user 2 is ill-conditioned")
    Q = Vh.conj().T  # first M columns span the row space, the rest the null space
    Ht2Q = Ht2 @ Q
    A3 = Ht2Q[:Mbar2, :M]
    B3 = Ht2Q[Mbar2:, :M]
    U3, s, V3h = np.linalg.svd(B3)
    V3 = V3h.conj().T
    scale = 1.0 / np.sqrt(1.0 + s**2)

    Z_left = W1 @ Q @ _block_diag(V3 * scale, np.eye(Mbar1))
    Z_right = null1 @ V2h.conj().T / np.sqrt(Mbar2) if Mbar2 else np.zeros((N, 0), complex)
    Z = np.hstack([Z_left, Z_right])

    extra1 = M1 - r1
    Q1 = _block_diag(V3h, np.eye(Mbar1), np.eye(extra1)) @ _block_diag(Q.conj().T, np.eye(extra1)) @ U1.conj().T
    Q2 = _block_diag(np.eye(Mbar2), U3.conj().T) @ U2.conj().T

    T = A3 @ V3 * scale
    Sigma1 = scale
    Sigma2 = s * scale
    D1 = np.ones(Mbar1)
    D2 = sig2 / np.sqrt(Mbar2) if Mbar2 else np.zeros(0)
    _freeze(Q1, Q2, Z, Sigma1, Sigma2, D1, D2, T)
    return UasdDecomposition(Q1, Q2, Z, Sigma1, Sigma2, D1, D2, T, dims)


@dataclass(frozen=True)
class GsvdDecomposition:
    """GSVD factors with ``Q1 H1 Z = C`` and ``Q2 H2 Z = S``.

    Columns of ``Z`` are ordered as user-2-only streams, shared streams and
    user-1-only streams. ``c`` and ``s`` are the shared cosines and sines,
    with ``c / s`` sorted descending.
    """

    Q1: np.ndarray
    Q2: np.ndarray
    Z: np.ndarray
    C: np.ndarray
    S: np.ndarray
    c: np.ndarray
    s: np.ndarray
    dims: DerivedDims

    @property
    def C1(self) -> np.ndarray:
        return np.diag(self.c)

    @property
    def S1(self) -> np.ndarray:
        return np.diag(self.s)

    @property
    def gsv(self) -> np.ndarray:
        """Generalized singular values of ``(H1, H2)`` on the shared streams."""
        return self.c / self.s


def _fix_phases(Q: np.ndarray, R: np.ndarray):
    d = np.diag(R).copy()
    ph = np.where(np.abs(d) > 0, d / np.abs(np.where(d == 0, 1, d)), 1.0)
    return Q * ph, R * ph.conj()[:, None]


def _orthonormal_completion(U: np.ndarray, n: int) -> np.ndarray:
    """Extend orthonormal columns ``U`` (n x k) to an n x n unitary."""
    return np.hstack([U, complement_basis(U)])


def gsvd_decompose(H1, H2) -> GsvdDecomposition:
    """Generalized singular value decomposition of ``(H1, H2)``.

    Computed from a QR factorization of the stacked channel followed by a
    cosine-sine split of its orthonormal factor (SVD of the top block, sines
    read off the bottom block, and a QR re-orthonormalization of the bottom
    left factor).
    """
    H1, H2 = _check_pair(H1, H2)
    M1, N = H1.shape
    M2 = H2.shape[0]
    dims = derive_dims(N, M1, M2)
    M, Mbar1, Mbar2 = dims.M, dims.Mbar1, dims.Mbar2
    L = dims.L

    if M1 + M2 < N:
        P = np.linalg.pinv(np.vstack([H1, H2]))
        Z = np.hstack([P[:, M1:], P[:, :M1]])
        C = np.hstack([np.zeros((M1, M2)), np.eye(M1)])
        S = np.hstack([np.eye(M2), np.zeros((M2, M1))])
        Q1, Q2 = np.eye(M1, dtype=complex), np.eye(M2, dtype=complex)
        out = GsvdDecomposition(Q1, Q2, Z, C, S, np.zeros(0), np.zeros(0), dims)
        _freeze(Q1, Q2, Z, C, S)
        return out

    Qh, R = np.linalg.qr(np.vstack([H1, H2]))  # R is N x N
    rs = np.abs(np.diag(R))
    if rs.min() < COND_RTOL * rs.max():
        raise RankDeficient("stacked channel is ill-conditioned")
    Qa, Qb = Qh[:M1], Qh[M1:]
    Ua, c_all, Vh = np.linalg.svd(Qa)  # c_all has min(M1, N) entries, descending
    c_full = np.concatenate([c_all, np.zeros(N - c_all.size)])
    c_full = np.clip(c_full, 0.0, 1.0)
    V = Vh.conj().T
    # descending c: [c = 1 (Mbar1), shared (M), c = 0 (Mbar2)]
    ones = np.arange(Mbar1)
    mid = np.arange(Mbar1, Mbar1 + M)
    zeros = np.arange(Mbar1 + M, N)
    order = np.concatenate([zeros, mid, ones])
    Vo = V[:, order]
    Z = sla.solve_triangular(R, Vo)

    QbV = Qb @ Vo
    s_cols = np.linalg.norm(QbV, axis=0)
    keep = Mbar2 + M  # columns with nonzero sine
    U2_part = QbV[:, :keep] / s_cols[:keep]
    # orthogonality correction
    Qc, Rc = np.linalg.qr(U2_part)
    Qc, _ = _fix_phases(Qc, Rc)
    U2 = _orthonormal_completion(Qc, M2)

    # U1 columns: shared then ones, then the rest of the left basis
    U1_cols = np.hstack([Ua[:, mid], Ua[:, ones]]) if (M + Mbar1) else np.zeros((M1, 0), complex)
    U1 = np.hstack([U1_cols, Ua[:, [i for i in range(M1) if i not in set(mid) | set(ones)]]])
    Q1 = U1.conj().T
    Q2 = U2.conj().T

    c = c_full[mid]
    s = s_cols[Mbar2:keep]
    C = np.zeros((M1, L))
    C[np.arange(M), Mbar2 + np.arange(M)] = c
    C[M + np.arange(Mbar1), Mbar2 + M + np.arange(Mbar1)] = 1.0
    S = np.zeros((M2, L))
    S[np.arange(Mbar2), np.arange(Mbar2)] = 1.0
    S[Mbar2 + np.arange(M), Mbar2 + np.arange(M)] = s
    _freeze(Q1, Q2, Z, C, S, c, s)
    return GsvdDecomposition(Q1, Q2, Z, C, S, c, s, dims)


def cancel_self_interference(y2, decomp: UasdDecomposition, shat, Pi2: float) -> np.ndarray:
    """Remove the shared-stream leakage from the first ``Mbar2`` outputs of user 2.

    ``shat`` holds the decoded composite shared symbols.
    """
    d = decomp.dims
    y2 = np.asarray(y2, dtype=complex)
    shat = np.asarray(shat, dtype=complex)
    if y2.shape != (decomp.Q2.shape[0],) or shat.shape != (d.M,):
        raise DimensionError(f"expected y2 of length {decomp.Q2.shape[0]} and shat of length {d.M}")
    out = y2.copy()
    out[: d.Mbar2] -= decomp.T @ shat / np.sqrt(Pi2)
    return out


def generalized_eigen_gsv(H2, H1, M: int, Mbar1: int) -> np.ndarray:
    """Squared GSVs of ``(H2, H1)`` from the pencil ``(H2^H H2, H1^H H1 + H2^H H2)``.

    The pencil eigenvalues ``theta = mu^2 / (1 + mu^2)`` lie in [0, 1]; the
    ``Mbar1`` zeros and the trailing ones belong to null spaces, the ``M``
    in between are returned as ``mu^2`` sorted descending.
    """
    A = H2.conj().T @ H2
    B = H1.conj().T @ H1 + A
    theta = sla.eigh(A, B, eigvals_only=True)
    inner = np.sort(theta)[Mbar1: Mbar1 + M]
    return np.sort(inner / (1.0 - inner))[::-1]


def format_matrix(A: np.ndarray) -> str:
    """Row-major plain-text dump with ``re+imj`` tokens."""
    rows = []
    for row in np.atleast_2d(A):
        rows.append(" ".join(f"{float(z.real)!r}{float(z.imag):+}j" for z in row.astype(complex)))
    return "\n".join(rows) + "\n"


def parse_matrix(text: str) -> np.ndarray:
    rows = [line.split() for line in text.strip().splitlines() if line.strip()]
    return np.array([[complex(tok) for tok in row] for row in rows])
