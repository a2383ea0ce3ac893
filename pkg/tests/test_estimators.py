import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from pggsvd import GSVDPrecoder, KroneckerModel, PGGSVDPrecoder, StatisticalPGGSVDPrecoder
from pggsvd.channel import laplacian_correlation, sample_iid, sample_kronecker

FAST = dict(n_iter=10, restarts=1, n_samples=100)


@pytest.fixture(scope="module")
def pair():
    return sample_iid(3, 4, 11), sample_iid(2, 4, 12)


@pytest.fixture(scope="module")
def stats():
    R_tx = laplacian_correlation(4, 0.3, np.pi / 2, 0.5)
    return sample_iid(2, 4, 13), KroneckerModel(R_tx, np.eye(2, dtype=complex))


class TestInstantaneous:
    def test_fit_returns_self_and_sets_attributes(self, pair):
        est = PGGSVDPrecoder(**FAST)
        assert est.fit(*pair) is est
        assert est.G_.shape == (4, 4)
        assert 0 <= est.n_iter_ <= FAST["n_iter"]
        assert est.trace_[-1] >= est.trace_[0]

    def test_transform_is_linear_precoding(self, pair):
        est = GSVDPrecoder(n_samples=100).fit(*pair)
        X = np.array([[1, -1, 1j, -1j], [1, 1, 1, 1]], dtype=complex)
        np.testing.assert_allclose(est.transform(X), X @ est.G_.T)
        np.testing.assert_allclose(est.transform(X[0]), est.transform(X[:1]))

    def test_power_constraint(self, pair):
        est = PGGSVDPrecoder(snr_db=5.0, **FAST).fit(*pair)
        P = 3 * 10 ** 0.5
        assert np.trace(est.G_ @ est.G_.conj().T).real <= P * (1 + 1e-9)

    def test_score_matches_fit_rates(self, pair):
        est = GSVDPrecoder(n_samples=100).fit(*pair)
        assert est.score(*pair) == pytest.approx(est.rates_.secrecy)

    def test_score_refuses_other_channel(self, pair):
        est = GSVDPrecoder(n_samples=100).fit(*pair)
        with pytest.raises(ValueError, match="fitted"):
            est.score(sample_iid(3, 4, 99), pair[1])

    def test_pg_beats_baseline(self, pair):
        base = GSVDPrecoder(snr_db=20.0, n_samples=100).fit(*pair).score(*pair)
        pg = PGGSVDPrecoder(snr_db=20.0, **FAST).fit(*pair).score(*pair)
        assert pg >= base - 0.1

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            PGGSVDPrecoder().transform(np.ones((1, 4)))

    def test_params_and_clone(self):
        est = PGGSVDPrecoder(n_s=1, snr_db=3.0)
        assert est.get_params()["n_s"] == 1
        twin = clone(est)
        assert twin.get_params() == est.get_params()
        assert twin.set_params(snr_db=7.0).snr_db == 7.0
        assert est.snr_db == 3.0

    def test_bad_symbol_width(self, pair):
        est = GSVDPrecoder(n_samples=100).fit(*pair)
        with pytest.raises(ValueError, match="length 4"):
            est.transform(np.ones((2, 3)))

    def test_deterministic_refit(self, pair):
        a = PGGSVDPrecoder(**FAST).fit(*pair).G_
        b = PGGSVDPrecoder(**FAST).fit(*pair).G_
        np.testing.assert_array_equal(a, b)


class TestStatistical:
    def test_fit_from_model(self, stats):
        H_ba, model = stats
        est = StatisticalPGGSVDPrecoder(constellation="BPSK", **FAST).fit(H_ba, model)
        assert est.G_.shape == (4, 4)
        assert np.isfinite(est.score())

    def test_fit_from_realizations(self, stats):
        H_ba, model = stats
        draws = [sample_kronecker(model.R_Ne, model.R_Nt, s) for s in range(300)]
        est = StatisticalPGGSVDPrecoder(constellation="BPSK", **FAST).fit(H_ba, draws)
        # the normalized estimate puts trace(R_Ne) at N_e
        assert np.trace(est.stat_.R_Ne).real == pytest.approx(2.0)
        exact = StatisticalPGGSVDPrecoder(constellation="BPSK", **FAST).fit(H_ba, model)
        assert abs(est.score() - exact.score(H_ba, model)) < 0.5

    def test_artificial_noise_does_not_hurt(self, stats):
        H_ba, model = stats
        plain = StatisticalPGGSVDPrecoder(constellation="BPSK", snr_db=10.0, **FAST).fit(H_ba, model)
        an = StatisticalPGGSVDPrecoder(constellation="BPSK", snr_db=10.0, artificial_noise=True,
                                       **FAST).fit(H_ba, model)
        assert an.an_ is not None
        assert an.score() >= plain.score() - 1e-9

    def test_rejects_non_psd_model(self, stats):
        H_ba, _ = stats
        with pytest.raises(ValueError):
            StatisticalPGGSVDPrecoder().fit(H_ba, KroneckerModel(-np.eye(4), np.eye(2)))
