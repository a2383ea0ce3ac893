"""Mutual information, MMSE matrices and gradients for finite-alphabet inputs.

Every estimator here averages over complex Gaussian noise with a seeded
sample set that is shared by all transmit hypotheses ``p`` (common random
numbers). Given ``(seed, stream)`` the noise is fixed, so the estimate is a
deterministic, differentiable function of the channel.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp, softmax

from .constellation import Constellation

__all__ = [
    "MonteCarlo",
    "MiEstimate",
    "MiCapError",
    "DEFAULT_CAP",
    "noise_samples",
    "mutual_info",
    "mmse_matrix",
    "mi_and_grad",
    "grad_mi_wrt_group_params",
    "scalar_mutual_info",
    "scalar_mmse",
]

DEFAULT_CAP = 8
LN2 = math.log(2.0)
_CHUNK_ELEMS = 2_000_000


class MiCapError(ValueError):
    """The requested joint dimension would cost too many operations."""


@dataclass(frozen=True)
class MonteCarlo:
    """Noise-sampling settings. ``stream`` separates independent estimators."""

    n_samples: int = 500
    seed: int = 0
    stream: int = 0
    threads: int = 1
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("n_samples must be at least 2")

    def with_stream(self, stream: int) -> "MonteCarlo":
        return MonteCarlo(self.n_samples, self.seed, stream, self.threads, self.cap)


@dataclass(frozen=True)
class MiEstimate:
    value: float
    std_error: float
    n_noise_samples: int
    seed: int

    def __float__(self):
        return self.value


def noise_samples(mc: MonteCarlo, m: int, sigma: float) -> np.ndarray:
    """``n_samples x m`` array of CN(0, sigma^2) draws for ``(seed, stream)``."""
    rng = np.random.default_rng([int(mc.seed), int(mc.stream), int(m)])
    z = rng.standard_normal((mc.n_samples, m)) + 1j * rng.standard_normal((mc.n_samples, m))
    return z * (sigma / math.sqrt(2.0))


def _prepare(H, c, sigma, mc):
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2:
        raise ValueError("effective channel must be 2-D")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    N = H.shape[1]
    if N > mc.cap:
        raise MiCapError(
            f"joint dimension N={N} exceeds cap {mc.cap}: exact enumeration costs "
            f"M^(2N) = {c.M}^{2 * N} = {c.M ** (2 * N):.3e} terms per noise sample"
        )
    return H, c.symbol_matrix(N)


def _chunks(Q, K):
    step = max(1, _CHUNK_ELEMS // max(1, Q * K))
    return [(i, min(Q, i + step)) for i in range(0, Q, step)]


def _map_chunks(fn, chunks, threads):
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, chunks))
    return [fn(ch) for ch in chunks]


class _Kernel:
    """Shared pieces of the log-sum-exp estimator for one channel."""

    def __init__(self, H, X, noise, sigma):
        self.X = X
        self.noise = noise
        self.s2 = sigma**2
        U = X @ H.T  # Q x m, rows H x_p
        self.U = U
        self.energy = np.sum(np.abs(U) ** 2, axis=1)
        self.A = (U.conj() @ noise.T).real  # Q x K, Re(u_p^H n_k)

    def z(self, lo, hi):
        # exponent -(||u_p - u_q||^2 + 2 Re((u_p - u_q)^H n)) / sigma^2, shape (p, q, K)
        U = self.U
        gram = (U[lo:hi].conj() @ U.T).real
        d2 = self.energy[lo:hi, None] + self.energy[None, :] - 2.0 * gram
        d2 = np.maximum(d2, 0.0)
        cross = self.A[lo:hi, None, :] - self.A[None, :, :]
        return -(d2[:, :, None] + 2.0 * cross) / self.s2


def _lse_q(z):
    """Log-sum-exp over axis 1 plus the shifted exponentials."""
    m = np.max(z, axis=1, keepdims=True)
    ez = np.exp(z - m)
    tot = np.sum(ez, axis=1, keepdims=True)
    return (m + np.log(tot))[:, 0, :], ez, tot


def _summarize(per_sample, mc):
    K = per_sample.size
    return MiEstimate(
        value=float(np.mean(per_sample)),
        std_error=float(np.std(per_sample, ddof=1) / math.sqrt(K)),
        n_noise_samples=K,
        seed=mc.seed,
    )


def mutual_info(H, c: Constellation, sigma: float, mc: MonteCarlo | None = None) -> MiEstimate:
    """``I(y; x)`` in bits for ``y = H x + n`` with ``x`` uniform on the joint constellation."""
    mc = mc or MonteCarlo()
    H, X = _prepare(H, c, sigma, mc)
    if not np.any(H):
        return MiEstimate(0.0, 0.0, mc.n_samples, mc.seed)
    Q = X.shape[0]
    kern = _Kernel(H, X, noise_samples(mc, H.shape[0], sigma), sigma)

    def work(ch):
        lo, hi = ch
        return np.sum(_lse_q(kern.z(lo, hi))[0], axis=0)

    parts = _map_chunks(work, _chunks(Q, mc.n_samples), mc.threads)
    total = np.sum(parts, axis=0)
    per_sample = -(total / Q - math.log(Q)) / LN2
    return _summarize(per_sample, mc)


def _posterior_pass(H, X, noise, sigma, threads, want_grad):
    """Per-sample MI values plus the MMSE and gradient moments."""
    Q, N = X.shape
    K = noise.shape[0]
    kern = _Kernel(H, X, noise, sigma)
    chunks = _chunks(Q, K)

    def work(ch):
        lo, hi = ch
        z = kern.z(lo, hi)
        lse, ez, tot = _lse_q(z)  # lse: (p, K)
        w = ez / tot  # posterior weights, (p, q, K)
        xhat = np.matmul(w.transpose(0, 2, 1), X)
        err = X[lo:hi, None, :] - xhat  # (p, K, N)
        flat = err.reshape(-1, N)
        E = flat.T @ flat.conj()
        out = {"lse": np.sum(lse, axis=0), "E": E}
        if want_grad:
            # sum_q w b b^H with b = x_p - x_q, expanded to avoid a (p,q,K,N,N) tensor
            wpq = np.sum(w, axis=2)
            wx = wpq @ X
            wq = np.sum(wpq, axis=0)
            wxx = (X * wq[:, None]).T @ X.conj()
            xp = X[lo:hi]
            wsum = np.sum(wpq, axis=1)  # == K for every p
            Psi = (
                (xp * wsum[:, None]).T @ xp.conj()
                - xp.T @ wx.conj()
                - wx.T @ xp.conj()
                + wxx
            )
            Phi = noise.T @ np.sum(err, axis=0).conj()
            out["Psi"], out["Phi"] = Psi, Phi
        return out

    parts = _map_chunks(work, chunks, threads)
    acc = {key: sum(p[key] for p in parts) for key in parts[0]}
    per_sample = -(acc["lse"] / Q - math.log(Q)) / LN2
    denom = Q * K
    acc["E"] = acc["E"] / denom
    acc["E"] = 0.5 * (acc["E"] + acc["E"].conj().T)
    if want_grad:
        acc["Psi"] = acc["Psi"] / denom
        acc["Phi"] = acc["Phi"] / denom
    return per_sample, acc


def mmse_matrix(H, c: Constellation, sigma: float, mc: MonteCarlo | None = None) -> np.ndarray:
    """``E[(x - E[x|y])(x - E[x|y])^H]``, Hermitian-symmetrized."""
    mc = mc or MonteCarlo()
    H, X = _prepare(H, c, sigma, mc)
    noise = noise_samples(mc, H.shape[0], sigma)
    _, acc = _posterior_pass(H, X, noise, sigma, mc.threads, want_grad=False)
    return acc["E"]


def mi_and_grad(H, c: Constellation, sigma: float, mc: MonteCarlo | None = None):
    """MI estimate and its exact gradient ``g`` with ``dI = Re tr(g^H dH)``.

    The gradient is that of the seeded estimator itself, so it agrees with
    finite differences taken under the same ``mc`` settings. Also returns the
    MMSE matrix.
    """
    mc = mc or MonteCarlo()
    H, X = _prepare(H, c, sigma, mc)
    noise = noise_samples(mc, H.shape[0], sigma)
    per_sample, acc = _posterior_pass(H, X, noise, sigma, mc.threads, want_grad=True)
    est = _summarize(per_sample, mc)
    if not np.any(H):
        est = MiEstimate(0.0, 0.0, mc.n_samples, mc.seed)
    g = (2.0 / (sigma**2 * LN2)) * (H @ acc["Psi"] + acc["Phi"])
    return est, g, acc["E"]


def grad_mi_wrt_group_params(K, P_s, V_s, c: Constellation, sigma: float,
                             mc: MonteCarlo | None = None):
    """Gradients of ``I(K P^{1/2} V)`` with respect to the diagonal of ``P`` and to ``V``.

    ``K`` holds the group's per-subchannel gains (a diagonal matrix or, more
    generally, a matrix with orthogonal columns). Returns
    ``(estimate, grad_P, grad_V)`` where ``grad_V`` follows the
    ``Re tr(g^H dV)`` convention.

    At ``p_i = 0`` the derivative is the one-sided limit
    ``(K^H K)_ii (V E V^H)_ii / (sigma^2 ln 2)`` which is never negative.
    """
    K = np.atleast_2d(np.asarray(K, dtype=complex))
    p = np.asarray(P_s, dtype=float).ravel()
    V = np.asarray(V_s, dtype=complex)
    if np.any(p < 0):
        raise ValueError("powers must be nonnegative")
    sq = np.sqrt(p)
    F = K @ (sq[:, None] * V)
    est, gF, E = mi_and_grad(F, c, sigma, mc)
    KgF = K.conj().T @ gF
    grad_V = sq[:, None] * KgF
    M = KgF @ V.conj().T
    grad_P = np.empty_like(p)
    pos = p > 0
    grad_P[pos] = np.real(np.diag(M))[pos] / (2.0 * sq[pos])
    if np.any(~pos):
        KK = np.real(np.sum(np.abs(K) ** 2, axis=0))
        VEV = np.real(np.diag(V @ E @ V.conj().T))
        grad_P[~pos] = (KK * VEV)[~pos] / (sigma**2 * LN2)
    return est, grad_P, grad_V


@lru_cache(maxsize=64)
def _hermite(n):
    t, w = np.polynomial.hermite.hermgauss(n)
    T1, T2 = np.meshgrid(t, t, indexing="ij")
    W = np.outer(w, w) / np.pi
    return (T1 + 1j * T2).ravel(), W.ravel()


def _scalar_terms(c, gamma, nodes):
    n, w = _hermite(nodes)
    x = c.points
    a = math.sqrt(max(gamma, 0.0))
    # y = a x_p + n with n ~ CN(0, 1); exponent over candidates q
    d = a * (x[:, None] - x[None, :])  # (p, q)
    z = -(np.abs(d[:, :, None] + n[None, None, :]) ** 2) + np.abs(n)[None, None, :] ** 2
    return z, w


def scalar_mutual_info(c: Constellation, gamma: float, nodes: int = 160) -> float:
    """``I(x; sqrt(gamma) x + n)`` in bits, ``n ~ CN(0, 1)``, by Gauss-Hermite quadrature."""
    if gamma <= 0:
        return 0.0
    z, w = _scalar_terms(c, gamma, nodes)
    lse = logsumexp(z, axis=1)  # (p, nodes)
    val = c.bits - float(np.mean(lse @ w)) / LN2
    return min(max(val, 0.0), c.bits)


def scalar_mmse(c: Constellation, gamma: float, nodes: int = 160) -> float:
    """MMSE of ``x`` from ``sqrt(gamma) x + n``; equals ``ln 2 * dI/dgamma``."""
    if gamma <= 0:
        return 1.0
    z, w = _scalar_terms(c, gamma, nodes)
    post = softmax(z, axis=1)
    xhat = np.einsum("pqn,q->pn", post, c.points)
    err = np.abs(c.points[:, None] - xhat) ** 2
    return float(np.mean(err @ w))
