"""Dense complex matrix primitives and the GSVD of a channel pair.

The generalized SVD is returned in the block form used throughout the
package::

    A = U_ba @ Sigma_ba @ [inv(Omega), 0] @ U_a^H
    B = U_ea @ Sigma_ea @ [inv(Omega), 0] @ U_a^H

with ``Sigma_ba`` carrying ``(0 | D_b | I_r)`` column blocks stacked under a
zero block of height ``N_r - r - s`` and ``Sigma_ea`` carrying
``(I_{k-r-s} | D_e | 0)`` above a zero block of height ``N_e - k + r``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

__all__ = [
    "GsvdError",
    "GsvdFactorization",
    "default_tol",
    "numerical_rank",
    "gsvd_pair",
    "invariant_report",
    "null_space_basis",
    "subspace_dims",
    "matrix_sqrt_factor",
    "hermitian_sqrt",
    "closest_unitary",
    "unitarity_error",
    "read_matrix",
    "write_matrix",
]

SQRT_HALF = np.sqrt(0.5)


class GsvdError(np.linalg.LinAlgError):
    """Raised when a factorization fails its reconstruction or rank checks."""


def default_tol(shape) -> float:
    return 1e-10 * max(max(shape), 1)


def _singular_values(A):
    if A.size == 0:
        return np.zeros(0)
    return np.linalg.svd(A, compute_uv=False)


def numerical_rank(A, tol=None) -> int:
    """Number of singular values above ``tol * sigma_max``."""
    A = np.asarray(A)
    if tol is None:
        tol = default_tol(A.shape)
    sv = _singular_values(A)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def _as_complex_matrix(A, name):
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains NaN or Inf")
    return A


def unitarity_error(U) -> float:
    """Operator-norm deviation of ``U^H U`` from the identity."""
    U = np.asarray(U)
    if U.size == 0:
        return 0.0
    return float(np.linalg.norm(U.conj().T @ U - np.eye(U.shape[1]), 2))


def closest_unitary(M):
    """Polar factor of ``M`` (the nearest matrix with orthonormal columns)."""
    if M.size == 0:
        return M.copy()
    W, _, Vh = np.linalg.svd(M, full_matrices=False)
    return W @ Vh


def _orthonormal_complement(Q, n):
    """Columns completing the orthonormal set ``Q`` (n x c) to a basis of C^n."""
    c = Q.shape[1]
    if c == n:
        return np.zeros((n, 0), dtype=complex)
    if c == 0:
        return np.eye(n, dtype=complex)
    W, _, _ = np.linalg.svd(Q, full_matrices=True)
    return W[:, c:]


def null_space_basis(A, tol=None):
    """Orthonormal basis of ``null(A)`` as an ``N_t x d`` matrix.

    ``d = N_t - numerical_rank(A, tol)``; the basis may have zero columns.
    """
    A = _as_complex_matrix(A, "A")
    n = A.shape[1]
    if tol is None:
        tol = default_tol(A.shape)
    if A.shape[0] == 0:
        return np.eye(n, dtype=complex)
    _, sv, Vh = np.linalg.svd(A, full_matrices=True)
    rank = 0 if sv.size == 0 or sv[0] == 0 else int(np.sum(sv > tol * sv[0]))
    return Vh[rank:].conj().T


def _intersection_dim(U, W, tol):
    # dim(U ∩ W) = dim U + dim W - dim(U + W)
    if U.shape[1] == 0 or W.shape[1] == 0:
        return 0
    span = np.hstack([U, W])
    return U.shape[1] + W.shape[1] - numerical_rank(span, tol)


def subspace_dims(A, B, tol=None):
    """Dimensions ``(k, r, s, dim_S_ea, dim_S_n)`` of the channel subspaces.

    ``S_n = null(A) ∩ null(B)`` is measured directly from orthonormal bases.
    The private subspaces are taken modulo ``S_n``: ``r`` counts directions
    of ``null(B)`` that ``A`` still sees, ``dim_S_ea`` those of ``null(A)``
    that ``B`` still sees, and ``s`` is the remainder of ``k``. The result is
    cross-checked against ``r + s == rank(A)``, ``r == k - rank(B)`` and
    ``dim_S_n == N_t - k``.
    """
    A = _as_complex_matrix(A, "A")
    B = _as_complex_matrix(B, "B")
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"column counts differ: {A.shape[1]} vs {B.shape[1]}")
    n = A.shape[1]
    if tol is None:
        tol = default_tol((A.shape[0] + B.shape[0], n))

    null_a = null_space_basis(A, tol)
    null_b = null_space_basis(B, tol)
    dim_n = _intersection_dim(null_a, null_b, tol)
    r = null_b.shape[1] - dim_n
    dim_ea = null_a.shape[1] - dim_n
    k = numerical_rank(np.vstack([A, B]), tol)
    s = k - r - dim_ea

    rank_a, rank_b = n - null_a.shape[1], n - null_b.shape[1]
    checks = {
        "r + s == rank(A)": r + s == rank_a,
        "r == k - rank(B)": r == k - rank_b,
        "dim_S_n == N_t - k": dim_n == n - k,
        "s >= 0": s >= 0,
    }
    failed = [name for name, ok in checks.items() if not ok]
    if failed:
        raise GsvdError(
            f"subspace dimensions inconsistent ({', '.join(failed)}); "
            f"k={k}, r={r}, s={s}, dim_S_ea={dim_ea}, dim_S_n={dim_n}, "
            f"rank(A)={rank_a}, rank(B)={rank_b} at tol={tol:g}"
        )
    return k, r, s, dim_ea, dim_n


@dataclass(frozen=True)
class GsvdFactorization:
    """Factors of the GSVD of ``(A, B)`` plus the subspace dimensions.

    ``Omega`` is upper triangular with a real positive diagonal. ``b`` and
    ``e`` hold the generalized singular value pairs (``b`` ascending).
    """

    U_ba: np.ndarray
    U_ea: np.ndarray
    U_a: np.ndarray
    Omega: np.ndarray
    Sigma_ba: np.ndarray
    Sigma_ea: np.ndarray
    k: int
    r: int
    s: int

    @property
    def n_t(self) -> int:
        return self.U_a.shape[0]

    @property
    def n_r(self) -> int:
        return self.U_ba.shape[0]

    @property
    def n_e(self) -> int:
        return self.U_ea.shape[0]

    @property
    def b(self):
        k, r, s = self.k, self.r, self.s
        rows = self.n_r - r - s
        return np.array([self.Sigma_ba[rows + p, k - r - s + p].real for p in range(s)])

    @property
    def e(self):
        k, r, s = self.k, self.r, self.s
        return np.array([self.Sigma_ea[k - r - s + p, k - r - s + p].real for p in range(s)])

    @property
    def omega(self):
        """Diagonal of ``Omega`` (real, positive)."""
        return np.diag(self.Omega).real.copy()

    @property
    def A(self):
        """The ``N_t x N_t`` matrix ``[[Omega, 0], [0, 0]]``."""
        out = np.zeros((self.n_t, self.n_t), dtype=complex)
        out[: self.k, : self.k] = self.Omega
        return out

    @property
    def column_weights(self):
        """``||A e_i||^2``: transmit power spent per unit of ``p_i``."""
        return np.sum(np.abs(self.A) ** 2, axis=0)

    def bob_columns(self):
        """``Sigma_ba @ [I_k, 0]``: Bob's exact per-subchannel response."""
        out = np.zeros((self.n_r, self.n_t), dtype=complex)
        out[:, : self.k] = self.Sigma_ba
        return out

    def eve_columns(self):
        """``Sigma_ea @ [I_k, 0]``: Eve's exact per-subchannel response."""
        out = np.zeros((self.n_e, self.n_t), dtype=complex)
        out[:, : self.k] = self.Sigma_ea
        return out

    def reconstruct(self):
        """Return ``(A, B)`` rebuilt from the factors."""
        inner = np.zeros((self.k, self.n_t), dtype=complex)
        if self.k:
            inner[:, : self.k] = scipy.linalg.solve_triangular(self.Omega, np.eye(self.k))
        right = inner @ self.U_a.conj().T
        return self.U_ba @ self.Sigma_ba @ right, self.U_ea @ self.Sigma_ea @ right

    def residuals(self, A, B):
        """Relative Frobenius reconstruction residuals for ``A`` and ``B``."""
        A_hat, B_hat = self.reconstruct()
        return _rel_residual(A, A_hat), _rel_residual(B, B_hat)


def _rel_residual(X, X_hat):
    X = np.asarray(X)
    scale = np.linalg.norm(X)
    err = np.linalg.norm(X - X_hat)
    return float(err / scale) if scale > 0 else float(err)


def gsvd_pair(A, B, tol=None, *, check=True) -> GsvdFactorization:
    """GSVD of the pair ``(A, B)`` sharing ``N_t`` columns.

    Route: SVD of the stacked matrix ``[A; B]`` fixes ``k`` and an orthonormal
    basis of its row space; a cosine-sine decomposition of the two row blocks
    of the left factor splits the subspaces; an RQ factorization extracts the
    shared right factor so that ``inv(Omega)`` is upper triangular.

    Parameters
    ----------
    A, B : array_like, shapes (N_r, N_t) and (N_e, N_t)
    tol : float, optional
        Relative singular-value threshold for rank decisions. Defaults to
        ``1e-10 * max(N_r + N_e, N_t)``.
    check : bool
        Verify the reconstruction to ``1e-9`` relative and raise
        :class:`GsvdError` otherwise.
    """
    A = _as_complex_matrix(A, "A")
    B = _as_complex_matrix(B, "B")
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"column counts differ: {A.shape[1]} vs {B.shape[1]}")
    m, n = A.shape
    p = B.shape[0]
    if tol is None:
        tol = default_tol((m + p, n))

    C = np.vstack([A, B])
    W, sv, Vh = np.linalg.svd(C, full_matrices=True)
    k = 0 if sv.size == 0 or sv[0] == 0 else int(np.sum(sv > tol * sv[0]))
    rank_a = numerical_rank(A, tol)
    rank_b = numerical_rank(B, tol)
    r = k - rank_b
    s = rank_a - r
    if r < 0 or s < 0 or k - r - s < 0:
        raise GsvdError(f"inconsistent ranks: k={k}, rank(A)={rank_a}, rank(B)={rank_b}")

    Q = Vh.conj().T
    Qk, Q_perp = Q[:, :k], Q[:, k:]
    Pa, Pb = W[:m, :k], W[m:, :k]
    n_eo = k - r - s

    Z, c_vals, e_vals, Ua_cols, Ue_cols = _cs_split(Pa, Pb, n_eo, s, r)

    # Sigma blocks
    Sigma_ba = np.zeros((m, k), dtype=complex)
    Sigma_ea = np.zeros((p, k), dtype=complex)
    rb0 = m - r - s
    for j in range(s + r):
        Sigma_ba[rb0 + j, n_eo + j] = c_vals[n_eo + j]
    for j in range(n_eo + s):
        Sigma_ea[j, j] = e_vals[j]

    U_ba = _complete_left(Ua_cols, m, lead=True)
    U_ea = _complete_left(Ue_cols, p, lead=False)

    # shared factor: Z^H Sigma_k = R W  (RQ), R -> inv(Omega)
    X = Z.conj().T * sv[:k][None, :]
    if k:
        R, Wq = scipy.linalg.rq(X)
        phase = np.diag(R) / np.abs(np.diag(R))
        R = R * phase.conj()[None, :]
        Wq = phase[:, None] * Wq
        Omega = scipy.linalg.solve_triangular(R, np.eye(k, dtype=complex))
        Omega = np.triu(Omega)
        Omega[np.diag_indices(k)] = np.diag(Omega).real
        U_a = np.hstack([Qk @ Wq.conj().T, Q_perp])
    else:
        Omega = np.zeros((0, 0), dtype=complex)
        U_a = Q

    fac = GsvdFactorization(
        U_ba=U_ba, U_ea=U_ea, U_a=U_a, Omega=Omega,
        Sigma_ba=Sigma_ba, Sigma_ea=Sigma_ea, k=k, r=r, s=s,
    )
    if check:
        res_a, res_b = fac.residuals(A, B)
        if max(res_a, res_b) > 1e-9:
            raise GsvdError(
                f"GSVD reconstruction residual {max(res_a, res_b):.3e} exceeds 1e-9; "
                f"rank decisions at tol={tol:g} are unstable for this pair"
            )
    return fac


def invariant_report(A, B, fac: GsvdFactorization | None = None, tol=None) -> dict:
    """Check a factorization of ``(A, B)`` against its defining invariants.

    Returns a JSON-ready dict with the measured quantities and an ``ok``
    flag. Thresholds: reconstruction ``1e-9`` relative, unitarity and
    ``b^2 + e^2 = 1`` to ``1e-10`` (scaled by dimension for unitarity).
    """
    A = _as_complex_matrix(A, "A")
    B = _as_complex_matrix(B, "B")
    if fac is None:
        fac = gsvd_pair(A, B, tol, check=False)
    res_a, res_b = fac.residuals(A, B)
    uerr = max(unitarity_error(fac.U_ba), unitarity_error(fac.U_ea), unitarity_error(fac.U_a))
    b, e = fac.b, fac.e
    pyth = float(np.max(np.abs(b**2 + e**2 - 1.0))) if b.size else 0.0
    ordered = bool(np.all(np.diff(b) >= -1e-12) and np.all(np.diff(e) <= 1e-12))
    rank_a = numerical_rank(A, tol)
    rank_b = numerical_rank(B, tol)
    identities = (fac.r + fac.s == rank_a) and (fac.r == fac.k - rank_b)
    n = max(A.shape[1], A.shape[0], B.shape[0])
    checks = {
        "reconstruction": max(res_a, res_b) <= 1e-9,
        "unitarity": uerr <= 1e-10 * n,
        "pythagorean": pyth <= 1e-10,
        "ordering": ordered,
        "dimension_identities": bool(identities),
    }
    return {
        "dims": [int(A.shape[1]), int(A.shape[0]), int(B.shape[0])],
        "k": fac.k,
        "r": fac.r,
        "s": fac.s,
        "rank_H_ba": rank_a,
        "rank_H_ea": rank_b,
        "residual_H_ba": res_a,
        "residual_H_ea": res_b,
        "unitarity_error": uerr,
        "pythagorean_error": pyth,
        "checks": checks,
        "ok": all(checks.values()),
    }


def _cs_split(Pa, Pb, n_eo, s, r):
    """Cosine-sine split of stacked orthonormal blocks ``Pa``, ``Pb``.

    Returns the right factor ``Z`` (columns ordered Eve-only, shared with
    ascending cosine, Bob-only), cosines, sines and the left columns for each
    side (shared + Bob-only for ``Pa``; Eve-only + shared for ``Pb``).
    """
    m, k = Pa.shape
    if k == 0:
        empty = np.zeros((0,))
        return (np.zeros((0, 0), dtype=complex), empty, empty,
                np.zeros((m, 0), dtype=complex), np.zeros((Pb.shape[0], 0), dtype=complex))

    U1, c_raw, Vh1 = np.linalg.svd(Pa, full_matrices=True)
    c_full = np.zeros(k)
    c_full[: c_raw.size] = np.clip(c_raw, 0.0, 1.0)
    order = np.argsort(c_full, kind="stable")
    Z = Vh1.conj().T[:, order]
    c = c_full[order]
    left_a = np.zeros((m, k), dtype=complex)
    n_u1 = min(m, k)
    for new, old in enumerate(order):
        if old < n_u1:
            left_a[:, new] = U1[:, old]

    lo = np.flatnonzero(c <= SQRT_HALF)
    hi = np.flatnonzero(c > SQRT_HALF)
    e = np.zeros(k)
    left_b = np.zeros((Pb.shape[0], k), dtype=complex)

    if lo.size:
        PbZ = Pb @ Z[:, lo]
        norms = np.linalg.norm(PbZ, axis=0)
        e[lo] = norms
        left_b[:, lo] = PbZ / norms[None, :]
    if hi.size:
        PbZ = Pb @ Z[:, hi]
        U2, e_raw, Yh = np.linalg.svd(PbZ, full_matrices=True)
        h = hi.size
        e_hi = np.zeros(h)
        e_hi[: e_raw.size] = e_raw
        Z[:, hi] = Z[:, hi] @ Yh.conj().T
        n_u2 = min(Pb.shape[0], h)
        for j in range(n_u2):
            left_b[:, hi[j]] = U2[:, j]
        e[hi] = e_hi
        PaZ = Pa @ Z[:, hi]
        c_hi = np.linalg.norm(PaZ, axis=0)
        c[hi] = c_hi
        left_a[:, hi] = PaZ / c_hi[None, :]

    # snap to the structural pattern fixed by the rank decisions
    c_out = np.empty(k)
    e_out = np.empty(k)
    c_out[:n_eo], e_out[:n_eo] = 0.0, 1.0
    c_out[n_eo + s:], e_out[n_eo + s:] = 1.0, 0.0
    for j in range(n_eo, n_eo + s):
        if c[j] <= SQRT_HALF:
            c_out[j] = c[j]
            e_out[j] = np.sqrt(1.0 - c[j] ** 2)
        else:
            e_out[j] = e[j]
            c_out[j] = np.sqrt(1.0 - e[j] ** 2)

    Ua_cols = closest_unitary(left_a[:, n_eo:])
    Ue_cols = closest_unitary(left_b[:, : n_eo + s])
    return Z, c_out, e_out, Ua_cols, Ue_cols


def _complete_left(cols, n, lead):
    """Embed orthonormal ``cols`` into an ``n x n`` unitary.

    ``lead=True`` puts the complement first (Bob side), otherwise last.
    """
    comp = _orthonormal_complement(cols, n)
    return np.hstack([comp, cols]) if lead else np.hstack([cols, comp])


def hermitian_sqrt(R):
    """PSD square root of a Hermitian matrix (negative eigenvalues clipped)."""
    R = np.asarray(R, dtype=complex)
    lam, V = np.linalg.eigh(0.5 * (R + R.conj().T))
    lam = np.clip(lam, 0.0, None)
    return (V * np.sqrt(lam)[None, :]) @ V.conj().T


def _check_hermitian(R, name="R"):
    R = _as_complex_matrix(R, name)
    if R.shape[0] != R.shape[1]:
        raise ValueError(f"{name} must be square, got {R.shape}")
    scale = max(1.0, float(np.linalg.norm(R)))
    if np.linalg.norm(R - R.conj().T) > 1e-10 * scale:
        raise ValueError(f"{name} is not Hermitian")
    return 0.5 * (R + R.conj().T)


def matrix_sqrt_factor(R, tol=None):
    """Factor a Hermitian PSD ``R`` as ``T^H T`` with ``rank(R)`` rows.

    Eigenvalues above ``-1e-10 * max|lambda|`` are clipped to zero; those
    below are rejected as not PSD.
    """
    R = _check_hermitian(R)
    lam, V = np.linalg.eigh(R)
    top = float(np.max(np.abs(lam))) if lam.size else 0.0
    if lam.size and lam[0] < -1e-10 * max(top, 1.0):
        raise ValueError(f"R is not positive semidefinite (min eigenvalue {lam[0]:.3e})")
    if tol is None:
        tol = default_tol(R.shape)
    keep = lam > tol * top if top > 0 else np.zeros_like(lam, dtype=bool)
    lam, V = lam[keep][::-1], V[:, keep][:, ::-1]
    return np.sqrt(lam)[:, None] * V.conj().T


def write_matrix(path, M):
    """Write ``M`` as ``rows cols`` followed by one ``re im`` line per entry."""
    M = np.asarray(M, dtype=complex)
    lines = [f"{M.shape[0]} {M.shape[1]}"]
    lines += [f"{float(z.real)!r} {float(z.imag)!r}" for z in M.ravel()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path):
    """Inverse of :func:`write_matrix`."""
    text = Path(path).read_text().split("\n")
    rows, cols = (int(t) for t in text[0].split())
    vals = [line.split() for line in text[1:] if line.strip()]
    if len(vals) != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} entries, found {len(vals)}")
    data = np.array([complex(float(re), float(im)) for re, im in vals])
    M = data.reshape(rows, cols)
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{path}: non-finite entries")
    return M
