"""Per-group GSVD precoding when only Eve's channel statistics are known.

Bob's channel is known exactly; Eve's follows a Kronecker model with
transmit correlation ``R_Nt = T^H T`` and receive correlation ``R_Ne``. The
GSVD is taken of ``(H_ba, T)`` and Eve's average rate is replaced by the
closed-form Jensen upper bound

    R_eve,u = sum_s [ N_s log2 M - (1/M^N_s) sum_p log2 sum_q exp(-alpha ||F_s b_pq||^2) ]

with ``alpha = tr(R_Ne) / sigma_e^2`` and ``F_s = U_ea^H T G`` restricted to
group ``s``. With artificial noise, ``alpha`` becomes ``tr(R_Ne W^{-1})``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .channel import sample_kronecker, derive_seed
from .constellation import Constellation
from .matcore import GsvdFactorization, gsvd_pair, matrix_sqrt_factor, null_space_basis, numerical_rank
from .miengine import LN2, MonteCarlo, mutual_info
from .pg_inst import (
    OptimizeResult,
    OptimizerConfig,
    PgPrecoder,
    _GroupObjective,
    _exact_group_channels,
    _structural_blocks,
    assemble_precoder,
    group_slices,
    high_snr_pairing,
    make_starts,
    run_restarts,
)

__all__ = [
    "StatInstance",
    "ErgodicBound",
    "AnConfig",
    "gsvd_stat",
    "r_eve_upper",
    "group_bound_and_grads",
    "grad_reve_wrt_P",
    "grad_reve_wrt_V",
    "secrecy_lower_bound",
    "ergodic_secrecy_mc",
    "algorithm2",
    "theorem_precoder",
    "an_inject",
    "an_whitened_eve_bound",
    "an_alpha",
    "bob_rate_with_an",
    "an_covariance_deviation",
    "an_split_sweep",
    "best_an_split",
]


@dataclass
class StatInstance:
    """Bob's realization plus Eve's second-order statistics."""

    H_ba: np.ndarray
    R_Nt: np.ndarray
    R_Ne: np.ndarray
    P: float
    sigma_b: float = 1.0
    sigma_e: float = 1.0

    def __post_init__(self):
        self.H_ba = np.asarray(self.H_ba, dtype=complex)
        self.R_Nt = np.asarray(self.R_Nt, dtype=complex)
        self.R_Ne = np.asarray(self.R_Ne, dtype=complex)
        if self.R_Nt.shape != (self.n_t, self.n_t):
            raise ValueError(f"R_Nt must be {self.n_t}x{self.n_t}, got {self.R_Nt.shape}")
        if self.R_Ne.ndim != 2 or self.R_Ne.shape[0] != self.R_Ne.shape[1]:
            raise ValueError("R_Ne must be square")
        if self.P <= 0 or self.sigma_b <= 0 or self.sigma_e <= 0:
            raise ValueError("P, sigma_b and sigma_e must be positive")

    @property
    def n_t(self):
        return self.H_ba.shape[1]

    @property
    def n_r(self):
        return self.H_ba.shape[0]

    @property
    def n_e(self):
        return self.R_Ne.shape[0]

    @cached_property
    def T(self):
        return matrix_sqrt_factor(self.R_Nt)

    @property
    def alpha(self) -> float:
        return float(np.trace(self.R_Ne).real) / self.sigma_e**2

    def sample_eve(self, seed) -> np.ndarray:
        return sample_kronecker(self.R_Ne, self.R_Nt, seed)


def gsvd_stat(H_ba, R_Nt, tol=None) -> GsvdFactorization:
    """GSVD of ``(H_ba, T)`` where ``T^H T = R_Nt``."""
    T = matrix_sqrt_factor(R_Nt)
    if T.shape[0] == 0:
        T = np.zeros((1, np.shape(R_Nt)[0]), dtype=complex)
    return gsvd_pair(H_ba, T, tol)


@dataclass(frozen=True)
class ErgodicBound:
    bob_rate: float
    eve_upper: float
    lower_bound: float
    std_error: float = 0.0


def _eve_T(inst: StatInstance):
    T = inst.T
    return T if T.shape[0] else np.zeros((1, inst.n_t), dtype=complex)


def group_bound_and_grads(K, p, V, c: Constellation, alpha: float, want_grad=True):
    """One group's bound term with gradients in ``p`` and ``V``.

    ``K`` must have orthogonal columns (true for the structural GSVD blocks),
    so that ``K^H K = diag(lambda)``.
    """
    K = np.atleast_2d(np.asarray(K, dtype=complex))
    p = np.asarray(p, dtype=float)
    n = V.shape[0]
    X = c.symbol_matrix(n)
    Q = X.shape[0]
    bits = n * c.bits
    lam = np.real(np.sum(np.abs(K) ** 2, axis=0))
    if alpha == 0 or not np.any(lam * p):
        zero = np.zeros(n)
        return 0.0, zero, np.zeros_like(V)
    Y = X @ V.T  # rows V x_p
    s = np.sqrt(lam * p)
    U = Y * s[None, :]
    en = np.sum(np.abs(U) ** 2, axis=1)
    d2 = np.maximum(en[:, None] + en[None, :] - 2.0 * (U.conj() @ U.T).real, 0.0)
    z = -alpha * d2  # (p, q)
    m = np.max(z, axis=1, keepdims=True)
    ez = np.exp(z - m)
    tot = np.sum(ez, axis=1, keepdims=True)
    lme = (m + np.log(tot))[:, 0] - math.log(Q)
    value = -float(np.mean(lme)) / LN2
    value = min(max(value, 0.0), bits)
    if not want_grad:
        return value, None, None
    w = ez / tot
    # Psi = (1/Q) sum_p sum_q w_pq b b^H with b = x_p - x_q
    wx = w @ X
    wq = np.sum(w, axis=0)
    Psi = (X.T @ X.conj() - X.T @ wx.conj() - wx.T @ X.conj() + (X * wq[:, None]).T @ X.conj()) / Q
    coef = alpha / LN2
    VPsiVh = V @ Psi @ V.conj().T
    grad_p = coef * lam * np.real(np.diag(VPsiVh))
    grad_V = 2.0 * coef * ((lam * p)[:, None] * (V @ Psi))
    return value, grad_p, grad_V


def _prec_groups(prec: PgPrecoder, inst: StatInstance):
    """Structural Eve blocks (physical powers already in ``prec``)."""
    groups = prec.groups()
    K_e = _structural_blocks(prec.gsvd.eve_columns(), groups, 1.0)
    return groups, K_e


def r_eve_upper(prec: PgPrecoder, inst: StatInstance, c: Constellation, alpha: float | None = None) -> float:
    """Closed-form upper bound on Eve's ergodic rate, in bits.

    Evaluated on the exact group channels ``U_ea^H T G``; ``alpha`` defaults
    to ``tr(R_Ne) / sigma_e^2``.
    """
    if alpha is None:
        alpha = inst.alpha
    fac = prec.gsvd
    chans = _exact_group_channels(prec, fac.U_ea, _eve_T(inst), fac.eve_columns())
    total = 0.0
    for F in chans:
        total += _bound_from_channel(F, c, alpha)
    return total


def _bound_from_channel(F, c, alpha):
    n = F.shape[1]
    if alpha == 0 or not np.any(F):
        return 0.0
    X = c.symbol_matrix(n)
    U = X @ F.T
    en = np.sum(np.abs(U) ** 2, axis=1)
    d2 = np.maximum(en[:, None] + en[None, :] - 2.0 * (U.conj() @ U.T).real, 0.0)
    z = -alpha * d2
    m = np.max(z, axis=1, keepdims=True)
    lme = (m[:, 0] + np.log(np.sum(np.exp(z - m), axis=1))) - math.log(X.shape[0])
    return min(max(-float(np.mean(lme)) / LN2, 0.0), n * c.bits)


def grad_reve_wrt_P(prec: PgPrecoder, inst: StatInstance, c: Constellation, alpha=None):
    """Per-group gradients of :func:`r_eve_upper` with respect to physical powers."""
    alpha = inst.alpha if alpha is None else alpha
    groups, K_e = _prec_groups(prec, inst)
    out = []
    for idx, K, V in zip(groups, K_e, prec.V_s):
        _, gp, _ = group_bound_and_grads(K, prec.powers[idx], V, c, alpha)
        out.append(gp)
    return out


def grad_reve_wrt_V(prec: PgPrecoder, inst: StatInstance, c: Constellation, alpha=None):
    """Per-group gradients of :func:`r_eve_upper` with respect to ``V_s``."""
    alpha = inst.alpha if alpha is None else alpha
    groups, K_e = _prec_groups(prec, inst)
    out = []
    for idx, K, V in zip(groups, K_e, prec.V_s):
        _, _, gV = group_bound_and_grads(K, prec.powers[idx], V, c, alpha)
        out.append(gV)
    return out


def _bob_rate(prec, H_ba, sigma_b, c, mc):
    fac = prec.gsvd
    chans = _exact_group_channels(prec, fac.U_ba, H_ba, fac.bob_columns())
    rate, var = 0.0, 0.0
    for g, F in enumerate(chans):
        est = mutual_info(F, c, sigma_b, mc.with_stream(2 * g))
        rate += est.value
        var += est.std_error**2
    return rate, math.sqrt(var)


def secrecy_lower_bound(prec: PgPrecoder, inst: StatInstance, c: Constellation,
                        mc: MonteCarlo | None = None, alpha: float | None = None) -> ErgodicBound:
    """Bob's exact group rates minus the closed-form Eve bound."""
    mc = mc or MonteCarlo()
    bob, se = _bob_rate(prec, inst.H_ba, inst.sigma_b, c, mc)
    eve = r_eve_upper(prec, inst, c, alpha)
    return ErgodicBound(bob, eve, bob - eve, se)


def ergodic_secrecy_mc(prec: PgPrecoder, inst: StatInstance, c: Constellation, n_draws: int = 200,
                       seed: int = 0, mc: MonteCarlo | None = None):
    """Monte-Carlo ergodic secrecy rate: Bob's rate minus ``E_H[I(y_e; x)]``.

    Eve's channels are Kronecker draws; her rate is evaluated on the joint
    (ungrouped) channel. Returns ``(value, std_error)``.
    """
    mc = mc or MonteCarlo()
    bob, se_b = _bob_rate(prec, inst.H_ba, inst.sigma_b, c, mc)
    G = prec.G
    vals = np.empty(n_draws)
    for i in range(n_draws):
        H = inst.sample_eve(derive_seed(seed, i + 1))
        vals[i] = mutual_info(H @ G, c, inst.sigma_e, mc.with_stream(10_000 + i)).value
    eve = float(np.mean(vals))
    se_e = float(np.std(vals, ddof=1) / math.sqrt(n_draws))
    return bob - eve, math.sqrt(se_b**2 + se_e**2)


def _stat_objective(fac, inst, c, perm, n_s, mc, alpha):
    n = fac.n_t
    scale = math.sqrt(inst.P / n)
    groups = [perm[a:b] for a, b in group_slices(n, n_s)]
    K_b = _structural_blocks(fac.bob_columns(), groups, scale)
    K_e = _structural_blocks(fac.eve_columns(), groups, scale)

    def eve_terms(g, p, V, want_grad):
        return group_bound_and_grads(K_e[g], p, V, c, alpha, want_grad)

    return _GroupObjective(K_b, eve_terms, c, inst.sigma_b, mc), groups


def algorithm2(inst: StatInstance, n_s: int, c: Constellation,
               cfg: OptimizerConfig | None = None, mc: MonteCarlo | None = None,
               gsvd: GsvdFactorization | None = None, alpha: float | None = None) -> OptimizeResult:
    """Maximize the ergodic secrecy lower bound over powers and group unitaries."""
    cfg = cfg or OptimizerConfig()
    mc = mc or MonteCarlo()
    fac = gsvd or gsvd_stat(inst.H_ba, inst.R_Nt)
    alpha = inst.alpha if alpha is None else alpha
    starts = make_starts(fac, n_s, cfg, c)
    return run_restarts(
        lambda perm: _stat_objective(fac, inst, c, perm, n_s, mc, alpha),
        fac, n_s, inst.P, cfg, starts,
    )


def theorem_precoder(fac: GsvdFactorization, n_s: int, c: Constellation, P: float) -> PgPrecoder:
    """High-SNR construction that puts every symbol on Eve-invisible subchannels."""
    perm, powers, V_s = high_snr_pairing(fac, n_s, c)
    return assemble_precoder(fac, perm, powers, V_s, P, n_s=n_s)


# ------------------------------------------------------------ artificial noise


@dataclass(frozen=True)
class AnConfig:
    """Artificial noise ``sqrt(P_AN / d) V_b u`` with ``u ~ CN(0, I_d)``."""

    P_AN: float
    V_b: np.ndarray
    enabled: bool

    @property
    def d(self) -> int:
        return self.V_b.shape[1]

    @property
    def amplitude(self) -> float:
        return math.sqrt(self.P_AN / self.d) if self.d else 0.0


def an_inject(prec: PgPrecoder, H_ba, P_total: float) -> AnConfig:
    """Spend the power left over by ``prec`` on noise in ``null(H_ba)``."""
    H_ba = np.asarray(H_ba, dtype=complex)
    V_b = null_space_basis(H_ba)
    used = float(np.real(np.trace(prec.G @ prec.G.conj().T)))
    P_AN = max(0.0, P_total - used)
    if V_b.shape[1] == 0:
        warnings.warn("H_ba has no null space; artificial noise disabled", RuntimeWarning)
        return AnConfig(0.0, V_b, False)
    if P_AN <= P_total * 1e-12:
        P_AN = 0.0
    return AnConfig(P_AN, V_b, P_AN > 0)


def an_alpha(an: AnConfig, R_Nt, R_Ne, sigma_e: float) -> float:
    """``tr(R_Ne W^{-1})`` with ``W`` the asymptotic AN-plus-noise covariance at Eve."""
    R_Nt = np.asarray(R_Nt, dtype=complex)
    R_Ne = np.asarray(R_Ne, dtype=complex)
    if not an.enabled or an.P_AN == 0:
        return float(np.trace(R_Ne).real) / sigma_e**2
    t = float(np.real(np.trace(an.V_b @ an.V_b.conj().T @ R_Nt)))
    W = (an.P_AN / an.d) * t * R_Ne + sigma_e**2 * np.eye(R_Ne.shape[0])
    if numerical_rank(W) < W.shape[0]:
        raise np.linalg.LinAlgError("AN whitening matrix W is singular")
    return float(np.real(np.trace(np.linalg.solve(W, R_Ne))))


def an_whitened_eve_bound(prec: PgPrecoder, an: AnConfig, inst: StatInstance, c: Constellation) -> float:
    """Eve bound after whitening the AN-plus-noise covariance."""
    return r_eve_upper(prec, inst, c, an_alpha(an, inst.R_Nt, inst.R_Ne, inst.sigma_e))


def bob_rate_with_an(prec: PgPrecoder, an: AnConfig, H_ba, sigma_b: float, c: Constellation,
                     mc: MonteCarlo | None = None):
    """Bob's joint-channel rate with the AN term treated as colored noise."""
    mc = mc or MonteCarlo()
    H_ba = np.asarray(H_ba, dtype=complex)
    C = sigma_b**2 * np.eye(H_ba.shape[0], dtype=complex)
    if an.enabled:
        J = H_ba @ an.V_b * an.amplitude
        C = C + J @ J.conj().T
    L = np.linalg.cholesky(C)
    Hw = np.linalg.solve(L, H_ba @ prec.G)
    return mutual_info(Hw, c, 1.0, mc)


def an_covariance_deviation(inst_dims, R_Nt, R_Ne, n_draws=500, seed=0, H_ba=None):
    """Mean relative deviation of ``H V_b V_b^H H^H`` from ``tr(V_b V_b^H R_Nt) R_Ne``.

    ``inst_dims = (N_t, N_r)``; Bob's channel is drawn i.i.d. unless given.
    """
    from .channel import sample_iid

    n_t, n_r = inst_dims
    if H_ba is None:
        H_ba = sample_iid(n_r, n_t, seed)
    V_b = null_space_basis(H_ba)
    B = V_b @ V_b.conj().T
    target = float(np.real(np.trace(B @ R_Nt))) * np.asarray(R_Ne)
    norm = np.linalg.norm(target)
    devs = np.empty(n_draws)
    for i in range(n_draws):
        H = sample_kronecker(R_Ne, R_Nt, derive_seed(seed, i + 1))
        devs[i] = np.linalg.norm(H @ B @ H.conj().T - target) / norm
    return float(np.mean(devs)), float(np.std(devs, ddof=1) / math.sqrt(n_draws))


def an_split_sweep(prec: PgPrecoder, inst: StatInstance, c: Constellation,
                   rhos=(1.0, 0.9, 0.75, 0.5), mc: MonteCarlo | None = None):
    """Scale the signal power by ``rho`` and give the rest to AN.

    Not part of the residual-power rule; exposed for exploring the split.
    Returns one dict per ``rho``.
    """
    mc = mc or MonteCarlo()
    rows = []
    for rho in rhos:
        if not 0.0 < rho <= 1.0:
            raise ValueError("rho must lie in (0, 1]")
        scaled = PgPrecoder(prec.gsvd, prec.perm, prec.n_s, prec.powers * rho, prec.V_s)
        an = an_inject(scaled, inst.H_ba, inst.P)
        bob, se = _bob_rate(scaled, inst.H_ba, inst.sigma_b, c, mc)
        eve = an_whitened_eve_bound(scaled, an, inst, c) if an.enabled else r_eve_upper(scaled, inst, c)
        rows.append({"rho": rho, "P_AN": an.P_AN, "bob_rate": bob, "eve_upper": eve,
                     "lower_bound": bob - eve, "std_error": se})
    return rows


def best_an_split(prec: PgPrecoder, inst: StatInstance, c: Constellation,
                  rhos=(1.0, 0.9, 0.75, 0.5), mc: MonteCarlo | None = None):
    """Pick the signal fraction with the largest whitened lower bound.

    Returns ``(row, scaled_precoder, an_config)``; ``rho = 1`` means no AN.
    """
    rows = an_split_sweep(prec, inst, c, rhos, mc)
    best = max(range(len(rows)), key=lambda i: (rows[i]["lower_bound"], -i))
    rho = rows[best]["rho"]
    scaled = PgPrecoder(prec.gsvd, prec.perm, prec.n_s, prec.powers * rho, prec.V_s)
    return rows[best], scaled, an_inject(scaled, inst.H_ba, inst.P)
