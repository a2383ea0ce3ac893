import math

import numpy as np
import pytest

from pggsvd.channel import laplacian_correlation, sample_iid, truncate_rank
from pggsvd.constellation import make_constellation
from pggsvd.matcore import numerical_rank
from pggsvd.miengine import MonteCarlo, mutual_info
from pggsvd.pg_inst import OptimizerConfig, PgPrecoder, default_pairing, group_slices, random_unitary
from pggsvd.pg_stat import (
    AnConfig,
    StatInstance,
    algorithm2,
    an_covariance_deviation,
    an_inject,
    an_whitened_eve_bound,
    best_an_split,
    bob_rate_with_an,
    ergodic_secrecy_mc,
    grad_reve_wrt_P,
    grad_reve_wrt_V,
    group_bound_and_grads,
    gsvd_stat,
    r_eve_upper,
    secrecy_lower_bound,
    theorem_precoder,
)

from oracles import rank_dims, ungrouped_eve_bound

BPSK = make_constellation("BPSK")
QPSK = make_constellation("QPSK")
MC = MonteCarlo(n_samples=200, seed=0)


def stat_instance(seed, n_t=4, n_r=2, n_e=2, P=4.0, rank=None, spread=0.6):
    g = np.random.default_rng(seed)
    R_Nt = laplacian_correlation(n_t, g.uniform(-0.5, 0.5), spread)
    if rank is not None:
        R_Nt = truncate_rank(R_Nt, rank)
    return StatInstance(sample_iid(n_r, n_t, seed), R_Nt, np.eye(n_e), P)


def random_precoder(inst, n_s, seed, scale=1.0):
    fac = gsvd_stat(inst.H_ba, inst.R_Nt)
    rng = np.random.default_rng(seed)
    perm = default_pairing(fac, n_s)
    sizes = [b - a for a, b in group_slices(fac.n_t, n_s)]
    p = rng.uniform(0.2, 1.0, fac.n_t) * scale
    return PgPrecoder(fac, perm, n_s, p, [random_unitary(m, rng) for m in sizes])


class TestGsvdStat:
    def test_identity_correlation(self):
        H = sample_iid(2, 4, 0)
        f = gsvd_stat(H, np.eye(4))
        assert f.k == 4

    def test_rank_deficient_correlation(self):
        H = sample_iid(2, 4, 1)
        R = np.diag([1.0, 1.0, 0.0, 0.0])
        f = gsvd_stat(H, R)
        T = np.eye(4)[:2]
        assert numerical_rank(R) == 2
        assert (f.k, f.r, f.s) == rank_dims(H, T)
        assert f.r == f.k - 2

    def test_large_low_rank_correlation(self):
        R = truncate_rank(laplacian_correlation(64, 0.1, 0.8), 48)
        f = gsvd_stat(sample_iid(48, 64, 2), R)
        assert f.k - 48 == 16


class TestEveBound:
    def test_zero_power_is_exactly_zero(self):
        inst = stat_instance(0)
        prec = random_precoder(inst, 2, 0, scale=0.0)
        assert r_eve_upper(prec, inst, QPSK) == 0.0

    def test_large_power_saturates_group(self):
        K = np.diag([0.8, 0.5])
        v, _, _ = group_bound_and_grads(K, np.array([1e6, 1e6]), np.eye(2), QPSK, 1.0)
        assert v == pytest.approx(2 * QPSK.bits, abs=1e-9)

    @pytest.mark.parametrize("n_t,n_s", [(2, 1), (3, 2), (4, 2), (4, 4)])
    def test_grouped_equals_ungrouped_form(self, n_t, n_s):
        inst = stat_instance(n_t + 10 * n_s, n_t=n_t, n_r=2)
        prec = random_precoder(inst, n_s, 1)
        want = ungrouped_eve_bound(prec.G, inst.R_Nt, 2.0, 1.0, BPSK.points)
        assert r_eve_upper(prec, inst, BPSK) == pytest.approx(want, abs=1e-10)

    def test_jensen_upper_bounds_mc(self):
        inst = stat_instance(3, n_t=2, n_r=2, P=2.0)
        prec = random_precoder(inst, 1, 2)
        bound = r_eve_upper(prec, inst, BPSK)
        vals = [mutual_info(inst.sample_eve(i + 1) @ prec.G, BPSK, 1.0, MC.with_stream(i)).value
                for i in range(200)]
        se = np.std(vals, ddof=1) / math.sqrt(len(vals))
        assert bound >= np.mean(vals) - 3 * se


class TestBoundGradients:
    def test_power_gradient_matches_fd(self):
        inst = stat_instance(4)
        prec = random_precoder(inst, 2, 3, scale=0.5)
        grads = grad_reve_wrt_P(prec, inst, QPSK)
        h = 1e-6
        for idx, gp in zip(prec.groups(), grads):
            for j, i in enumerate(idx):
                up, dn = prec.powers.copy(), prec.powers.copy()
                up[i] += h
                dn[i] -= h
                f = lambda p: r_eve_upper(PgPrecoder(prec.gsvd, prec.perm, 2, p, prec.V_s), inst, QPSK)
                fd = (f(up) - f(dn)) / (2 * h)
                assert gp[j] == pytest.approx(fd, rel=1e-6, abs=1e-12)

    def test_unitary_gradient_matches_fd(self):
        inst = stat_instance(5)
        prec = random_precoder(inst, 2, 4, scale=0.5)
        grads = grad_reve_wrt_V(prec, inst, QPSK)
        rng = np.random.default_rng(0)
        for g, gV in enumerate(grads):
            A = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            S = A - A.conj().T  # skew direction
            D = S @ prec.V_s[g]
            h = 1e-6

            def f(t):
                V = [v.copy() for v in prec.V_s]
                V[g] = V[g] + t * D
                return r_eve_upper(PgPrecoder(prec.gsvd, prec.perm, 2, prec.powers, V), inst, QPSK)

            fd = (f(h) - f(-h)) / (2 * h)
            assert np.real(np.vdot(gV, D)) == pytest.approx(fd, rel=1e-6, abs=1e-12)

    def test_zero_power_gradient_is_nonnegative(self):
        K = np.diag([0.9, 0.4])
        V = random_unitary(2, np.random.default_rng(1))
        _, gp, gV = group_bound_and_grads(K, np.array([0.0, 0.0]), V, QPSK, 1.0)
        assert np.all(np.isfinite(gp)) and np.all(gp >= 0)
        assert not np.any(gV)
        # one-sided difference from zero
        h = 1e-5
        for i in range(2):
            p = np.zeros(2)
            p[i] = h
            v, _, _ = group_bound_and_grads(K, p, V, QPSK, 1.0, want_grad=False)
            assert v / h >= 0

    def test_blind_group_has_zero_gradient(self):
        _, gp, gV = group_bound_and_grads(np.zeros((2, 2)), np.ones(2), np.eye(2), QPSK, 1.0)
        assert not np.any(gp) and not np.any(gV)

    def test_scalar_phase_direction(self):
        K = np.array([[0.7]])
        V = np.array([[np.exp(0.3j)]])
        _, _, gV = group_bound_and_grads(K, np.array([2.0]), V, QPSK, 1.0)
        h = 1e-6
        f = lambda t: group_bound_and_grads(K, np.array([2.0]), V * np.exp(1j * t), QPSK, 1.0, False)[0]
        fd = (f(h) - f(-h)) / (2 * h)
        assert np.real(np.vdot(gV, 1j * V)) == pytest.approx(fd, abs=1e-8)


class TestLowerBound:
    def test_zero_precoder(self):
        inst = stat_instance(6)
        b = secrecy_lower_bound(random_precoder(inst, 2, 0, scale=0.0), inst, QPSK, MC)
        assert (b.bob_rate, b.eve_upper, b.lower_bound) == (0.0, 0.0, 0.0)

    def test_theorem_configuration(self):
        inst = stat_instance(7, n_t=8, n_r=4, n_e=4, rank=2, P=4 * 10**4)
        fac = gsvd_stat(inst.H_ba, inst.R_Nt)
        assert fac.r * 4 >= 8
        prec = theorem_precoder(fac, 4, BPSK, inst.P)
        b = secrecy_lower_bound(prec, inst, BPSK, MC)
        assert b.eve_upper == 0.0
        assert b.bob_rate == pytest.approx(8.0, abs=0.05)

    def test_bound_below_mc_ergodic_rate(self):
        inst = stat_instance(8, n_t=2, n_r=2, P=1.0)
        prec = random_precoder(inst, 1, 5)
        b = secrecy_lower_bound(prec, inst, BPSK, MC)
        mc_val, se = ergodic_secrecy_mc(prec, inst, BPSK, n_draws=200, mc=MC)
        assert b.lower_bound <= mc_val + 3 * se


class TestAlgorithm2:
    @pytest.mark.parametrize("seed", range(2))
    def test_trace_monotone(self, seed):
        inst = stat_instance(seed, n_t=4, n_r=4, n_e=4, P=4.0)
        res = algorithm2(inst, 2, BPSK, OptimizerConfig(n_iter=6, restarts=2), MC)
        for tr in res.traces:
            assert all(b >= a for a, b in zip(tr, tr[1:]))

    def test_low_snr_concentrates_power(self):
        inst = stat_instance(9, n_t=4, n_r=4, n_e=4, P=4 * 10**-1)
        res = algorithm2(inst, 2, QPSK, OptimizerConfig(n_iter=30, restarts=2), MC)
        w = res.precoder.gsvd.column_weights
        share = res.precoder.powers * w / np.sum(res.precoder.powers * w)
        assert share.max() >= 0.9


class TestArtificialNoise:
    def test_full_budget_leaves_no_noise_power(self):
        inst = stat_instance(10, n_t=4, n_r=3)
        prec = theorem_precoder(gsvd_stat(inst.H_ba, np.diag([1.0, 0, 0, 0])), 4, BPSK, inst.P)
        an = an_inject(prec, inst.H_ba, inst.P)
        assert an.P_AN == 0.0 and not an.enabled

    def test_null_space_direction(self):
        H = sample_iid(3, 4, 11)
        inst = StatInstance(H, np.eye(4), np.eye(2), 4.0)
        prec = random_precoder(inst, 2, 0, scale=0.1)
        an = an_inject(PgPrecoder(prec.gsvd, prec.perm, 2, prec.powers * 0.01, prec.V_s), H, inst.P)
        assert an.V_b.shape == (4, 1)
        assert np.max(np.abs(H @ an.V_b)) < 1e-10
        assert an.enabled and an.P_AN > 0

    def test_bob_rate_unchanged(self):
        inst = stat_instance(12, n_t=4, n_r=2)
        prec = random_precoder(inst, 2, 1)
        scaled = PgPrecoder(prec.gsvd, prec.perm, 2, prec.powers * 0.5, prec.V_s)
        an = an_inject(scaled, inst.H_ba, inst.P * 2)
        off = AnConfig(0.0, an.V_b, False)
        a = bob_rate_with_an(scaled, an, inst.H_ba, 1.0, QPSK, MC)
        b = bob_rate_with_an(scaled, off, inst.H_ba, 1.0, QPSK, MC)
        assert abs(a.value - b.value) <= 3 * math.hypot(a.std_error, b.std_error)

    def test_whitened_bound_limits(self):
        inst = stat_instance(13, n_t=4, n_r=2)
        prec = random_precoder(inst, 2, 2)
        base = r_eve_upper(prec, inst, QPSK)
        V_b = an_inject(prec, inst.H_ba, inst.P).V_b
        assert an_whitened_eve_bound(prec, AnConfig(0.0, V_b, False), inst, QPSK) == base
        weak = an_whitened_eve_bound(prec, AnConfig(1.0, V_b, True), inst, QPSK)
        huge = an_whitened_eve_bound(prec, AnConfig(1e12, V_b, True), inst, QPSK)
        assert weak < base
        assert huge < 1e-6

    def test_best_split_never_worse_than_no_noise(self):
        inst = stat_instance(14, n_t=4, n_r=2, P=8.0)
        prec = random_precoder(inst, 2, 3)
        prec = PgPrecoder(prec.gsvd, prec.perm, 2,
                          prec.powers * inst.P / prec.transmit_power(), prec.V_s)
        row, _, _ = best_an_split(prec, inst, QPSK, mc=MC)
        plain = secrecy_lower_bound(prec, inst, QPSK, MC).lower_bound
        assert row["lower_bound"] >= plain - 1e-12

    def test_covariance_deviation_shrinks_with_antennas(self):
        devs = []
        for n_t in (8, 16, 32):
            R = laplacian_correlation(n_t, 0.2, 1.0)
            devs.append(an_covariance_deviation((n_t, 2), R, np.eye(2), n_draws=500, seed=1)[0])
        assert devs[0] > devs[1] > devs[2]
