"""scikit-learn style wrappers around the precoder designs.

``fit`` receives Bob's channel and Eve's channel (or her statistics),
``transform`` maps symbol blocks (rows) to transmit vectors, and ``score``
reports the achieved secrecy rate (or its ergodic lower bound) in bits.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .channel import KroneckerModel, WiretapInstance, estimate_correlations, snr_to_power
from .constellation import make_constellation
from .matcore import gsvd_pair
from .miengine import MonteCarlo
from .pg_inst import OptimizerConfig, algorithm1, gsvd_baseline, secrecy_rate
from .pg_stat import StatInstance, algorithm2, an_whitened_eve_bound, best_an_split, secrecy_lower_bound
from .validation import check_channel, check_hermitian_psd, check_pair, check_symbols

__all__ = ["GSVDPrecoder", "PGGSVDPrecoder", "StatisticalPGGSVDPrecoder"]


class _PrecoderMixin(TransformerMixin):
    def transform(self, X):
        """Precode symbol rows: ``X @ G^T``."""
        check_is_fitted(self, "G_")
        return check_symbols(X, self.G_.shape[1]) @ self.G_.T

    def _mc(self):
        return MonteCarlo(n_samples=self.n_samples, seed=self.seed)

    def _score_pair(self, H_ba, H_ea):
        check_is_fitted(self, "G_")
        H_ba, H_ea = check_pair(H_ba, H_ea)
        if H_ba.shape != self.H_ba_.shape or H_ea.shape != self.H_ea_.shape or not (
            np.allclose(H_ba, self.H_ba_) and np.allclose(H_ea, self.H_ea_)
        ):
            raise ValueError("the precoder is channel specific; score it on the pair it was fitted on")
        inst = self._instance(H_ba, H_ea)
        return secrecy_rate(self.precoder_, inst, self.constellation_, self._mc()).secrecy

    def _instance(self, H_ba, H_ea):
        P = snr_to_power(self.snr_db, H_ba.shape[0], self.sigma)
        return WiretapInstance(H_ba, H_ea, P, self.sigma, self.sigma)


class GSVDPrecoder(_PrecoderMixin, BaseEstimator):
    """Diagonal GSVD precoder with power only on Bob-advantaged subchannels."""

    def __init__(self, constellation="QPSK", snr_db=10.0, sigma=1.0, n_samples=500, seed=0):
        self.constellation = constellation
        self.snr_db = snr_db
        self.sigma = sigma
        self.n_samples = n_samples
        self.seed = seed

    def fit(self, H_ba, H_ea):
        H_ba, H_ea = check_pair(H_ba, H_ea)
        self.constellation_ = make_constellation(self.constellation)
        inst = self._instance(H_ba, H_ea)
        self.gsvd_ = gsvd_pair(H_ba, H_ea)
        self.H_ba_, self.H_ea_ = H_ba, H_ea
        res = gsvd_baseline(self.gsvd_, inst, self.constellation_, self._mc())
        self.precoder_ = res.precoder
        self.rates_ = res.rates
        self.G_ = res.precoder.G
        return self

    def score(self, H_ba, H_ea):
        """Secrecy rate of the fitted precoder on the fitted channel pair."""
        return self._score_pair(H_ba, H_ea)


class PGGSVDPrecoder(_PrecoderMixin, BaseEstimator):
    """Per-group GSVD precoder optimized with instantaneous CSI of both receivers."""

    def __init__(self, n_s=2, constellation="QPSK", snr_db=10.0, sigma=1.0, n_iter=100,
                 eps=1e-4, restarts=5, n_samples=500, seed=0, threads=1):
        self.n_s = n_s
        self.constellation = constellation
        self.snr_db = snr_db
        self.sigma = sigma
        self.n_iter = n_iter
        self.eps = eps
        self.restarts = restarts
        self.n_samples = n_samples
        self.seed = seed
        self.threads = threads

    def _cfg(self):
        return OptimizerConfig(n_iter=self.n_iter, eps=self.eps, restarts=self.restarts,
                               seed=self.seed, threads=self.threads)

    def fit(self, H_ba, H_ea):
        H_ba, H_ea = check_pair(H_ba, H_ea)
        self.constellation_ = make_constellation(self.constellation)
        inst = self._instance(H_ba, H_ea)
        self.gsvd_ = gsvd_pair(H_ba, H_ea)
        self.H_ba_, self.H_ea_ = H_ba, H_ea
        res = algorithm1(inst, self.n_s, self.constellation_, self._cfg(), self._mc(), self.gsvd_)
        self.result_ = res
        self.precoder_ = res.precoder
        self.trace_ = list(res.trace)
        self.n_iter_ = res.iterations
        self.G_ = res.precoder.G
        return self

    def score(self, H_ba, H_ea):
        """Secrecy rate on the fitted channel pair."""
        return self._score_pair(H_ba, H_ea)


class StatisticalPGGSVDPrecoder(_PrecoderMixin, BaseEstimator):
    """Per-group GSVD precoder from Bob's channel and Eve's correlation statistics.

    ``fit(H_ba, eve)`` accepts either a :class:`KroneckerModel` or a sequence
    of Eve channel realizations from which the correlations are estimated.
    With ``artificial_noise`` the signal power is scaled back by the best
    fraction from a small grid, the remainder is sent as noise in
    ``null(H_ba)``, and ``score`` uses the whitened Eve bound.
    """

    def __init__(self, n_s=2, constellation="QPSK", snr_db=10.0, sigma=1.0, n_iter=100,
                 eps=1e-4, restarts=5, n_samples=500, seed=0, threads=1,
                 artificial_noise=False):
        self.n_s = n_s
        self.constellation = constellation
        self.snr_db = snr_db
        self.sigma = sigma
        self.n_iter = n_iter
        self.eps = eps
        self.restarts = restarts
        self.n_samples = n_samples
        self.seed = seed
        self.threads = threads
        self.artificial_noise = artificial_noise

    def _stat(self, H_ba, eve):
        if not isinstance(eve, KroneckerModel):
            eve = estimate_correlations([check_channel(H, "eve realization") for H in eve]).normalized()
        R_Nt = check_hermitian_psd(eve.R_Nt, "R_Nt")
        R_Ne = check_hermitian_psd(eve.R_Ne, "R_Ne")
        P = snr_to_power(self.snr_db, H_ba.shape[0], self.sigma)
        return StatInstance(H_ba, R_Nt, R_Ne, P, self.sigma, self.sigma)

    def fit(self, H_ba, eve):
        H_ba = check_channel(H_ba, "H_ba")
        self.constellation_ = make_constellation(self.constellation)
        stat = self._stat(H_ba, eve)
        cfg = OptimizerConfig(n_iter=self.n_iter, eps=self.eps, restarts=self.restarts,
                              seed=self.seed, threads=self.threads)
        res = algorithm2(stat, self.n_s, self.constellation_, cfg, self._mc())
        self.stat_ = stat
        self.result_ = res
        self.precoder_ = res.precoder
        self.trace_ = list(res.trace)
        self.n_iter_ = res.iterations
        self.an_ = None
        if self.artificial_noise:
            _, self.precoder_, self.an_ = best_an_split(res.precoder, stat, self.constellation_,
                                                        mc=self._mc())
        self.G_ = self.precoder_.G
        return self

    def score(self, H_ba=None, eve=None):
        """Ergodic secrecy lower bound in bits (whitened when AN is on)."""
        check_is_fitted(self, "G_")
        stat = self.stat_ if H_ba is None else self._stat(check_channel(H_ba, "H_ba"), eve)
        bound = secrecy_lower_bound(self.precoder_, stat, self.constellation_, self._mc())
        if self.an_ is not None and self.an_.enabled:
            eve_u = an_whitened_eve_bound(self.precoder_, self.an_, stat, self.constellation_)
            return bound.bob_rate - eve_u
        return bound.lower_bound
