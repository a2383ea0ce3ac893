"""Per-group GSVD precoding with instantaneous CSI.

Subchannel ``i`` of the GSVD carries power ``p_i``; with ``A = [[Omega, 0],
[0, 0]]`` the transmit power spent on it is ``p_i * w_i`` where
``w_i = ||A e_i||^2``. A permutation ``perm`` splits the ``N_t`` subchannels
into groups of ``N_s`` consecutive entries; each group mixes its symbols with
a small unitary ``V_s``. The precoder is ``G = U_a A P^{1/2} V``.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .channel import WiretapInstance
from .constellation import Constellation
from .matcore import GsvdFactorization, closest_unitary, gsvd_pair
from .miengine import (
    MonteCarlo,
    grad_mi_wrt_group_params,
    mutual_info,
    scalar_mmse,
    scalar_mutual_info,
)

__all__ = [
    "PgPrecoder",
    "SecrecyRates",
    "OptimizerConfig",
    "OptimizeResult",
    "ConditionError",
    "DecouplingError",
    "group_slices",
    "build_hat_sigmas",
    "default_pairing",
    "high_snr_pairing",
    "superposition_vector",
    "assemble_precoder",
    "secrecy_rate",
    "gsvd_baseline",
    "algorithm1",
    "complexity_count",
    "random_unitary",
]

SNAP = 1e-12
RESIDUAL_TOL = 1e-8


class ConditionError(ValueError):
    """A construction's feasibility condition does not hold."""


class DecouplingError(RuntimeError):
    """Effective channels leak energy outside their group coordinates."""


def group_slices(n_t: int, n_s: int):
    """Consecutive ``(start, stop)`` ranges; the last group absorbs the remainder."""
    if n_s < 1:
        raise ValueError("N_s must be positive")
    n_s = min(n_s, n_t)
    return [(a, min(a + n_s, n_t)) for a in range(0, n_t, n_s)]


def random_unitary(n: int, rng) -> np.ndarray:
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))[None, :]


@dataclass
class PgPrecoder:
    """Assembled per-group precoder.

    ``powers`` are physical (already include the budget scaling) and indexed
    by subchannel. ``perm[j]`` is the subchannel feeding slot ``j``; group
    ``g`` owns slots ``group_slices(N_t, N_s)[g]``.
    """

    gsvd: GsvdFactorization
    perm: np.ndarray
    n_s: int
    powers: np.ndarray
    V_s: list
    zero_power: bool = False

    def __post_init__(self):
        self.perm = np.asarray(self.perm, dtype=int)
        self.powers = np.asarray(self.powers, dtype=float)
        n = self.gsvd.n_t
        if sorted(self.perm.tolist()) != list(range(n)):
            raise ValueError("perm must be a permutation of range(N_t)")
        if len(self.V_s) != len(self.slices):
            raise ValueError(f"expected {len(self.slices)} V blocks, got {len(self.V_s)}")
        for (a, b), V in zip(self.slices, self.V_s):
            if np.shape(V) != (b - a, b - a):
                raise ValueError(f"V block for slots {a}:{b} has shape {np.shape(V)}")
        if np.any(self.powers < 0):
            raise ValueError("powers must be nonnegative")

    @property
    def n_t(self):
        return self.gsvd.n_t

    @property
    def slices(self):
        return group_slices(self.n_t, self.n_s)

    @property
    def n_groups(self):
        return len(self.slices)

    def groups(self):
        """Subchannel indices of each group, in slot order."""
        return [self.perm[a:b] for a, b in self.slices]

    def group_powers(self):
        return [self.powers[idx] for idx in self.groups()]

    def V(self) -> np.ndarray:
        """The ``N_t x N_t`` block-permuted unitary."""
        n = self.n_t
        out = np.zeros((n, n), dtype=complex)
        for idx, Vs in zip(self.groups(), self.V_s):
            out[np.ix_(idx, idx)] = Vs
        return out

    @property
    def G(self) -> np.ndarray:
        sq = np.sqrt(self.powers)
        return self.gsvd.U_a @ self.gsvd.A @ (sq[:, None] * self.V())

    def transmit_power(self) -> float:
        return float(np.sum(self.powers * self.gsvd.column_weights))


def build_hat_sigmas(gsvd: GsvdFactorization):
    """Per-subchannel Bob and Eve gains divided by ``sqrt(omega_i)``.

    These are bookkeeping quantities used for ranking and structure only;
    rates are always computed from the exact effective matrices.
    """
    n, k = gsvd.n_t, gsvd.k
    bob = np.zeros(n)
    eve = np.zeros(n)
    if k:
        omega = gsvd.omega
        bob[:k] = np.abs(gsvd.Sigma_ba).max(axis=0) / np.sqrt(omega)
        eve[:k] = np.abs(gsvd.Sigma_ea).max(axis=0) / np.sqrt(omega)
    return bob, eve


def _bob_only(gsvd):
    return list(range(gsvd.k - gsvd.r, gsvd.k))


def default_pairing(gsvd: GsvdFactorization, n_s: int) -> np.ndarray:
    """One Bob-only subchannel per group where supply allows, the rest round-robin.

    Leftover subchannels are dealt to groups with free slots in order of
    decreasing Bob gain (ties by index).
    """
    n = gsvd.n_t
    slices = group_slices(n, n_s)
    members = [[] for _ in slices]
    capacity = [b - a for a, b in slices]
    bob_only = _bob_only(gsvd)
    for g, idx in enumerate(bob_only[: len(slices)]):
        members[g].append(idx)
    taken = set(bob_only[: len(slices)])
    bob, _ = build_hat_sigmas(gsvd)
    rest = sorted((i for i in range(n) if i not in taken), key=lambda i: (-bob[i], i))
    g = 0
    for idx in rest:
        while len(members[g]) >= capacity[g]:
            g = (g + 1) % len(slices)
        members[g].append(idx)
        g = (g + 1) % len(slices)
    return np.array([i for grp in members for i in grp], dtype=int)


def superposition_vector(c: Constellation, n_s: int, seed: int = 0) -> np.ndarray:
    """Unit-norm ``v`` such that ``x -> v^T x`` is injective on ``c^{n_s}``.

    BPSK splits powers of two over the real and imaginary axes, square QAM
    uses powers of ``sqrt(M)``; other sets fall back to a seeded search that
    maximizes the minimum distance of the superposed points.
    """
    if c.kind == "BPSK":
        half = (n_s + 1) // 2
        re = [2.0 ** (half - 1 - j) for j in range(half)]
        im = [1j * 2.0 ** (n_s - half - 1 - j) for j in range(n_s - half)]
        v = np.array(re + im, dtype=complex)
    elif c.kind in ("QPSK", "QAM-16", "QAM-M"):
        base = math.sqrt(c.M)
        v = np.array([base ** (n_s - 1 - j) for j in range(n_s)], dtype=complex)
    else:
        v = _search_superposition(c, n_s, seed)
    return v / np.linalg.norm(v)


def _search_superposition(c, n_s, seed, tries=400):
    if n_s == 1:
        return np.ones(1, dtype=complex)
    rng = np.random.default_rng(seed)
    X = c.symbol_matrix(n_s)
    best, best_d = None, -1.0
    for _ in range(tries):
        v = rng.standard_normal(n_s) + 1j * rng.standard_normal(n_s)
        v /= np.linalg.norm(v)
        pts = X @ v
        d = np.abs(pts[:, None] - pts[None, :])
        d = float(np.min(d[~np.eye(len(pts), dtype=bool)]))
        if d > best_d:
            best, best_d = v, d
    return best


def _unitary_with_row(v, row):
    """Unitary whose ``row``-th row is ``v`` (unit norm)."""
    n = v.size
    M = np.eye(n, dtype=complex)
    M[:, 0] = v.conj()
    Q, _ = np.linalg.qr(M)
    Q[:, 0] = v.conj()  # remove the phase QR may introduce
    U = Q.conj().T  # first row is v
    order = list(range(1, n))
    order.insert(row, 0)
    return U[order]


def high_snr_pairing(gsvd: GsvdFactorization, n_s: int, c: Constellation | None = None):
    """Pairing, normalized powers and unitaries that keep all power off Eve.

    Requires ``(k - rank(H_ea)) * N_s >= N_t``. Each group ends with a
    Bob-only subchannel carrying the group's entire power, and the last row of
    ``V_s`` superposes the group's symbols onto it. Powers are normalized so
    that ``sum(p_i w_i) == N_t``.

    Returns ``(perm, powers, V_s)``.
    """
    n, r = gsvd.n_t, gsvd.r
    if r * n_s < n:
        raise ConditionError(
            f"high-SNR pairing needs (k - rank(H_ea)) * N_s >= N_t, got {r} * {n_s} < {n}"
        )
    slices = group_slices(n, n_s)
    S = len(slices)
    bob_only = _bob_only(gsvd)
    leads = bob_only[:S]
    rest = [i for i in range(n) if i not in leads]
    members, pos = [], 0
    for (a, b), lead in zip(slices, leads):
        fill = rest[pos: pos + (b - a - 1)]
        pos += b - a - 1
        members.append(fill + [lead])
    perm = np.array([i for grp in members for i in grp], dtype=int)

    w = gsvd.column_weights
    powers = np.zeros(n)
    for lead in leads:
        powers[lead] = (n / S) / w[lead]
    V_s = []
    for (a, b) in slices:
        size = b - a
        if c is None:
            v = np.ones(size, dtype=complex) / math.sqrt(size)
        else:
            v = superposition_vector(c, size)
        V_s.append(_unitary_with_row(v, size - 1))
    return perm, powers, V_s


def assemble_precoder(gsvd: GsvdFactorization, perm, powers, V_s, P_budget: float,
                      n_s: int | None = None, normalize: bool = True) -> PgPrecoder:
    """Build a :class:`PgPrecoder`.

    With ``normalize`` the powers are rescaled so ``tr(G G^H) == P_budget``;
    otherwise they are taken as physical and must fit the budget.
    """
    powers = np.asarray(powers, dtype=float).copy()
    if n_s is None:
        n_s = len(V_s[0])
    used = float(np.sum(powers * gsvd.column_weights))
    zero = used <= 0.0
    if zero:
        warnings.warn("all subchannel powers are zero; precoder is identically zero", RuntimeWarning)
        powers[:] = 0.0
    elif normalize:
        powers *= P_budget / used
    elif used > P_budget * (1 + 1e-9):
        raise ValueError(f"transmit power {used:.6g} exceeds budget {P_budget:.6g}")
    return PgPrecoder(gsvd=gsvd, perm=perm, n_s=n_s, powers=powers,
                      V_s=[np.asarray(V, dtype=complex) for V in V_s], zero_power=zero)


@dataclass(frozen=True)
class SecrecyRates:
    rate_bob: float
    rate_eve: float
    secrecy: float
    signed: float
    std_error: float
    per_group: tuple = ()


def _group_rows(cols, idx):
    block = cols[:, idx]
    return np.flatnonzero(np.any(block != 0, axis=1))


def _exact_group_channels(prec, U, H, structural):
    """Slice ``U^H H G`` into group channels and check the decoupling."""
    G = prec.G
    F = U.conj().T @ H @ G
    # entries at rounding level of ||H|| ||G|| are structural zeros
    scale = float(np.linalg.norm(H) * np.linalg.norm(G))
    F[np.abs(F) < SNAP * scale] = 0.0
    total = np.linalg.norm(F)
    out, covered = [], np.zeros_like(F, dtype=bool)
    for idx in prec.groups():
        rows = _group_rows(structural, idx)
        out.append(F[np.ix_(rows, idx)])
        covered[np.ix_(rows, idx)] = True
    leak = np.linalg.norm(F[~covered])
    if total > 0 and leak > RESIDUAL_TOL * total:
        raise DecouplingError(
            f"off-group residual {leak / total:.2e} exceeds {RESIDUAL_TOL:g}; "
            "permutation or V assembly is malformed"
        )
    return out


def _rates(groups_b, groups_e, c, sigma_b, sigma_e, mc):
    per, rb, re, var = [], 0.0, 0.0, 0.0
    for g, (Fb, Fe) in enumerate(zip(groups_b, groups_e)):
        ib = mutual_info(Fb, c, sigma_b, mc.with_stream(2 * g))
        ie = (
            mutual_info(Fe, c, sigma_e, mc.with_stream(2 * g + 1))
            if Fe is not None else None
        )
        eve = ie.value if ie is not None else 0.0
        rb += ib.value
        re += eve
        var += ib.std_error**2 + (ie.std_error**2 if ie is not None else 0.0)
        per.append((ib.value, eve))
    return rb, re, math.sqrt(var), tuple(per)


def secrecy_rate(prec: PgPrecoder, inst: WiretapInstance, c: Constellation,
                 mc: MonteCarlo | None = None) -> SecrecyRates:
    """Sum of per-group ``I_b - I_e`` from the exact effective channels."""
    mc = mc or MonteCarlo()
    if inst.H_ea is None:
        raise ValueError("instantaneous secrecy rate needs H_ea")
    fac = prec.gsvd
    gb = _exact_group_channels(prec, fac.U_ba, inst.H_ba, fac.bob_columns())
    ge = _exact_group_channels(prec, fac.U_ea, inst.H_ea, fac.eve_columns())
    rb, re, se, per = _rates(gb, ge, c, inst.sigma_b, inst.sigma_e, mc)
    diff = rb - re
    return SecrecyRates(rb, re, max(0.0, diff), diff, se, per)


def complexity_count(n_t: int, n_s: int | None, M: int, scheme: str) -> int:
    """Additions needed to evaluate the rate once, per the ``S M^(2 N_s)`` model."""
    if scheme == "complete_search":
        return M ** (2 * n_t)
    if scheme in ("pg_gsvd", "pg_gsvd_an", "theorem_oracle"):
        if not n_s:
            raise ValueError("pg_gsvd needs N_s")
        return math.ceil(n_t / n_s) * M ** (2 * n_s)
    if scheme == "gsvd_baseline":
        return n_t * M**2
    raise ValueError(f"unknown scheme {scheme!r}")


# ---------------------------------------------------------------- baseline


@dataclass
class BaselineResult:
    precoder: PgPrecoder
    rates: SecrecyRates
    active: np.ndarray


def gsvd_baseline(gsvd: GsvdFactorization, inst: WiretapInstance, c: Constellation,
                  mc: MonteCarlo | None = None) -> BaselineResult:
    """Diagonal GSVD precoder with power only where Bob's gain beats Eve's.

    Powers maximize ``sum_i I(beta_i q_i) - I(epsilon_i q_i)`` subject to
    ``sum_i q_i <= P`` with quadrature-exact scalar rates.
    """
    mc = mc or MonteCarlo()
    n, k = gsvd.n_t, gsvd.k
    w = gsvd.column_weights
    bob_cols, eve_cols = gsvd.bob_columns(), gsvd.eve_columns()
    bob = np.linalg.norm(bob_cols, axis=0)
    eve = np.linalg.norm(eve_cols, axis=0)
    active = np.flatnonzero((np.arange(n) < k) & (bob > eve))
    perm = np.arange(n)
    V_s = [np.eye(1, dtype=complex) for _ in range(n)]
    if active.size == 0:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            prec = assemble_precoder(gsvd, perm, np.zeros(n), V_s, inst.P, n_s=1)
        zero = SecrecyRates(0.0, 0.0, 0.0, 0.0, 0.0)
        return BaselineResult(prec, zero, active)

    beta = bob[active] ** 2 / (w[active] * inst.sigma_b**2)
    eps = eve[active] ** 2 / (w[active] * inst.sigma_e**2)
    q = _allocate_scalar(beta, eps, inst.P, c)
    powers = np.zeros(n)
    powers[active] = q / w[active]
    prec = assemble_precoder(gsvd, perm, powers, V_s, inst.P, n_s=1, normalize=False)
    return BaselineResult(prec, secrecy_rate(prec, inst, c, mc), active)


def _solo_peak(b, e, P, c, grid=64):
    """Power in ``[0, P]`` maximizing ``I(b q) - I(e q)`` for one subchannel."""
    # locate the peak with a cheap quadrature, then score candidates exactly
    rough = lambda q: scalar_mutual_info(c, b * q, 48) - scalar_mutual_info(c, e * q, 48)
    exact = lambda q: scalar_mutual_info(c, b * q) - scalar_mutual_info(c, e * q)
    qs = np.concatenate([[0.0], P * np.logspace(-6, 0, grid)])
    j = int(np.argmax([rough(q) for q in qs]))
    lo, hi = qs[max(j - 1, 0)], qs[min(j + 1, grid)]
    best = float(qs[j])
    if hi > lo:
        res = minimize_scalar(lambda q: -rough(q), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-8 * hi})
        if exact(res.x) > exact(best):
            best = float(res.x)
    return best


def _allocate_scalar(beta, eps, P, c):
    m = beta.size

    def f(q, nodes=48):
        return -sum(scalar_mutual_info(c, b * x, nodes) - scalar_mutual_info(c, e * x, nodes)
                    for b, e, x in zip(beta, eps, q))

    def g(q):
        return -np.array([(b * scalar_mmse(c, b * x, 48) - e * scalar_mmse(c, e * x, 48)) / math.log(2)
                          for b, e, x in zip(beta, eps, q)])

    # each term alone peaks at a finite power once Eve's rate starts to catch up
    solo = np.array([_solo_peak(b, e, P, c) for b, e in zip(beta, eps)])
    if solo.sum() <= P:
        return solo
    starts = [np.full(m, P / m), solo * (P / solo.sum())]
    for j in np.argsort(-(beta - eps))[: min(m, 3)]:
        x0 = np.full(m, 0.05 * P / m)
        x0[j] += 0.95 * P
        starts.append(x0)
    cons = [{"type": "ineq", "fun": lambda q: P - np.sum(q), "jac": lambda q: -np.ones(m)}]
    best_q, best_f = starts[0], f(starts[0], 160)
    for x0 in starts:
        res = minimize(f, x0, jac=g, method="SLSQP", bounds=[(0.0, P)] * m,
                       constraints=cons, options={"maxiter": 200, "ftol": 1e-10})
        q = np.clip(res.x, 0.0, None)
        if q.sum() > P:
            q *= P / q.sum()
        fq = f(q, 160)
        if fq < best_f:
            best_q, best_f = q, fq
    return best_q


# -------------------------------------------------------------- optimizer


@dataclass(frozen=True)
class OptimizerConfig:
    n_iter: int = 100
    eps: float = 1e-4
    restarts: int = 5
    max_halvings: int = 20
    seed: int = 0
    threads: int = 1
    high_snr_start: bool = True


@dataclass
class OptimizeResult:
    precoder: PgPrecoder
    objective: float
    trace: list
    converged: bool
    iterations: int
    restart: int
    traces: list = field(default_factory=list)


class _GroupObjective:
    """Secrecy objective over normalized powers and group unitaries.

    ``bob(g, F)`` and ``eve(g, p, V)`` return ``(value, grad_p, grad_V)``.
    """

    def __init__(self, K_b, eve_terms, c, sigma_b, mc):
        self.K_b = K_b
        self.eve_terms = eve_terms
        self.c = c
        self.sigma_b = sigma_b
        self.mc = mc

    def value_and_grad(self, P_groups, V_groups, want_grad=True):
        total, gP, gV = 0.0, [], []
        for g, (p, V) in enumerate(zip(P_groups, V_groups)):
            mc_b = self.mc.with_stream(2 * g)
            if want_grad:
                est, dp, dV = grad_mi_wrt_group_params(self.K_b[g], p, V, self.c, self.sigma_b, mc_b)
            else:
                est = mutual_info(self.K_b[g] @ (np.sqrt(p)[:, None] * V), self.c, self.sigma_b, mc_b)
                dp = dV = None
            ev, edp, edV = self.eve_terms(g, p, V, want_grad)
            total += est.value - ev
            if want_grad:
                gP.append(dp - edp)
                gV.append(dV - edV)
        return total, gP, gV


def _instant_eve(K_e, c, sigma_e, mc):
    def terms(g, p, V, want_grad):
        mc_e = mc.with_stream(2 * g + 1)
        if want_grad:
            est, dp, dV = grad_mi_wrt_group_params(K_e[g], p, V, c, sigma_e, mc_e)
            return est.value, dp, dV
        F = K_e[g] @ (np.sqrt(p)[:, None] * V)
        return mutual_info(F, c, sigma_e, mc_e).value, None, None
    return terms


def _structural_blocks(cols, groups, scale):
    out = []
    for idx in groups:
        rows = _group_rows(cols, idx)
        out.append(cols[np.ix_(rows, idx)] * scale)
    return out


def _split(p, groups):
    return [p[idx].copy() for idx in groups]


def _normalize(p, w, n):
    used = float(np.sum(p * w))
    return p * (n / used) if used > 0 else p


def _tangent_direction(d, p, w, active):
    """Project ``d`` onto ``sum(p w) = const`` over the coordinates free to move.

    Coordinates at zero power that would go negative are pinned and the
    projection is recomputed until the pinned set settles.
    """
    free = active.copy()
    for _ in range(w.size + 1):
        wf = np.where(free, w, 0.0)
        if not np.any(wf):
            return np.zeros_like(d)
        out = np.where(free, d - wf * (np.dot(d, wf) / np.dot(wf, wf)), 0.0)
        stuck = free & (p <= 0) & (out < 0)
        if not np.any(stuck):
            return out
        free &= ~stuck
    return out


def optimize_groups(objective, groups, w, active, p0, V0, cfg: OptimizerConfig):
    """Alternating projected-gradient ascent on powers then unitaries.

    A step is taken only when it raises the objective, so the returned trace
    never decreases.
    """
    n = w.size
    p = _normalize(p0.copy(), w, n)
    V = [v.copy() for v in V0]
    f, gP, gV = objective.value_and_grad(_split(p, groups), V)
    trace = [f]
    converged = False
    tP, tV = 1.0, 0.5
    base = n / max(float(np.sum(w[active])), 1e-300)
    it = 0
    for it in range(1, cfg.n_iter + 1):
        start = f
        # power step
        d = np.zeros(n)
        for idx, gp in zip(groups, gP):
            d[idx] = gp
        d[~active] = 0.0
        d = _tangent_direction(d, p, w, active)
        dmax = float(np.max(np.abs(d))) if d.size else 0.0
        if dmax > 0:
            t = min(1.0, 2.0 * tP)
            for _ in range(cfg.max_halvings):
                cand = np.clip(p + t * base * d / dmax, 0.0, None)
                cand[~active] = 0.0
                if np.sum(cand * w) > 0:
                    cand = _normalize(cand, w, n)
                    fc, _, _ = objective.value_and_grad(_split(cand, groups), V, want_grad=False)
                    if fc > f:
                        p, f, tP = cand, fc, t
                        break
                t *= 0.5
            f, gP, gV = objective.value_and_grad(_split(p, groups), V)
        # unitary step
        gnorm = math.sqrt(sum(float(np.sum(np.abs(g) ** 2)) for g in gV))
        if gnorm > 0:
            t = min(1.0, 2.0 * tV)
            for _ in range(cfg.max_halvings):
                cand = [closest_unitary(v + t * g / gnorm) for v, g in zip(V, gV)]
                fc, _, _ = objective.value_and_grad(_split(p, groups), cand, want_grad=False)
                if fc > f:
                    V, f, tV = cand, fc, t
                    break
                t *= 0.5
            f, gP, gV = objective.value_and_grad(_split(p, groups), V)
        trace.append(f)
        if f - start < cfg.eps:
            converged = True
            break
    return p, V, trace, converged, it


def _inst_objective(gsvd, inst, c, perm, n_s, mc):
    n = gsvd.n_t
    scale = math.sqrt(inst.P / n)
    groups = [perm[a:b] for a, b in group_slices(n, n_s)]
    K_b = _structural_blocks(gsvd.bob_columns(), groups, scale)
    K_e = _structural_blocks(gsvd.eve_columns(), groups, scale)
    obj = _GroupObjective(K_b, _instant_eve(K_e, c, inst.sigma_e, mc), c, inst.sigma_b, mc)
    return obj, groups


def _initial_powers(gsvd):
    n = gsvd.n_t
    active = (np.arange(n) < gsvd.k) & np.any(gsvd.bob_columns() != 0, axis=0)
    p = np.where(active, 1.0, 0.0)
    return p, (np.arange(n) < gsvd.k)


def run_restarts(make_objective, gsvd, n_s, P_budget, cfg, starts):
    """Optimize from each ``(perm, p0, V0)`` start and keep the best."""
    w = gsvd.column_weights
    _, active = _initial_powers(gsvd)

    def one(item):
        perm, p0, V0 = item
        obj, groups = make_objective(perm)
        return perm, optimize_groups(obj, groups, w, active, p0, V0, cfg)

    if cfg.threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            outs = list(pool.map(one, starts))
    else:
        outs = [one(s) for s in starts]
    best = max(range(len(outs)), key=lambda i: (outs[i][1][2][-1], -i))
    perm, (p, V, trace, conv, iters) = outs[best]
    prec = assemble_precoder(gsvd, perm, p, V, P_budget, n_s=n_s)
    return OptimizeResult(prec, trace[-1], trace, conv, iters, best,
                          traces=[o[1][2] for o in outs])


def make_starts(gsvd, n_s, cfg, c):
    n = gsvd.n_t
    perm = default_pairing(gsvd, n_s)
    p0, _ = _initial_powers(gsvd)
    sizes = [b - a for a, b in group_slices(n, n_s)]
    starts = []
    for j in range(max(1, cfg.restarts)):
        rng = np.random.default_rng([cfg.seed, j])
        V0 = [np.eye(m, dtype=complex) if j == 0 else random_unitary(m, rng) for m in sizes]
        starts.append((perm, p0, V0))
    if cfg.high_snr_start and gsvd.r * min(n_s, n) >= n:
        hp, hpow, hV = high_snr_pairing(gsvd, n_s, c)
        starts.append((hp, hpow, hV))
    return starts


def algorithm1(inst: WiretapInstance, n_s: int, c: Constellation,
               cfg: OptimizerConfig | None = None, mc: MonteCarlo | None = None,
               gsvd: GsvdFactorization | None = None) -> OptimizeResult:
    """Maximize the per-group secrecy rate over powers and group unitaries."""
    cfg = cfg or OptimizerConfig()
    mc = mc or MonteCarlo()
    if inst.H_ea is None:
        raise ValueError("algorithm1 needs Eve's instantaneous channel")
    gsvd = gsvd or gsvd_pair(inst.H_ba, inst.H_ea)
    starts = make_starts(gsvd, n_s, cfg, c)
    return run_restarts(
        lambda perm: _inst_objective(gsvd, inst, c, perm, n_s, mc),
        gsvd, n_s, inst.P, cfg, starts,
    )
