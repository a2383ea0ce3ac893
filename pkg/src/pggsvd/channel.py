"""Wiretap channel instances, Kronecker fading and correlation estimation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .matcore import hermitian_sqrt, read_matrix, write_matrix

__all__ = [
    "WiretapInstance",
    "KroneckerModel",
    "derive_seed",
    "sample_iid",
    "sample_kronecker",
    "laplacian_correlation",
    "estimate_correlations",
    "truncate_rank",
    "snr_to_power",
    "save_fixture",
    "load_fixture",
]


def derive_seed(seed: int, index: int) -> int:
    """Per-task seed used for parallel generation."""
    return int(seed) ^ int(index)


def snr_to_power(snr_db: float, n_r: int, sigma_b: float = 1.0) -> float:
    """Budget ``P`` such that ``P / (N_r sigma_b^2)`` equals the given SNR."""
    return n_r * sigma_b**2 * 10.0 ** (snr_db / 10.0)


@dataclass
class WiretapInstance:
    """One channel realization plus noise levels and power budget."""

    H_ba: np.ndarray
    H_ea: np.ndarray | None
    P: float
    sigma_b: float = 1.0
    sigma_e: float = 1.0

    def __post_init__(self):
        self.H_ba = np.asarray(self.H_ba, dtype=complex)
        if self.H_ea is not None:
            self.H_ea = np.asarray(self.H_ea, dtype=complex)
            if self.H_ea.shape[1] != self.H_ba.shape[1]:
                raise ValueError(
                    f"H_ba and H_ea disagree on N_t: {self.H_ba.shape[1]} vs {self.H_ea.shape[1]}"
                )
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
        return None if self.H_ea is None else self.H_ea.shape[0]

    @property
    def snr(self):
        return self.P / (self.n_r * self.sigma_b**2)

    @property
    def snr_db(self):
        return 10.0 * np.log10(self.snr)

    @classmethod
    def random(cls, n_t, n_r, n_e, snr_db, seed, sigma=1.0):
        H_ba = sample_iid(n_r, n_t, derive_seed(seed, 0))
        H_ea = sample_iid(n_e, n_t, derive_seed(seed, 1))
        return cls(H_ba, H_ea, snr_to_power(snr_db, n_r, sigma), sigma, sigma)


def _check_corr(R, n, name):
    R = np.asarray(R, dtype=complex)
    if R.shape != (n, n):
        raise ValueError(f"{name} must be {n}x{n}, got {R.shape}")
    if np.linalg.norm(R - R.conj().T) > 1e-10 * max(1.0, np.linalg.norm(R)):
        raise ValueError(f"{name} is not Hermitian")
    lam = np.linalg.eigvalsh(0.5 * (R + R.conj().T))
    if lam[0] < -1e-10 * max(1.0, abs(lam[-1])):
        raise ValueError(f"{name} is not PSD (min eigenvalue {lam[0]:.3e})")
    return 0.5 * (R + R.conj().T)


@dataclass
class KroneckerModel:
    """Transmit/receive correlations of Eve's (and optionally Bob's) channel."""

    R_Nt: np.ndarray
    R_Ne: np.ndarray
    R_Nt_bob: np.ndarray | None = None
    R_Nb: np.ndarray | None = None

    def __post_init__(self):
        self.R_Nt = _check_corr(self.R_Nt, np.shape(self.R_Nt)[0], "R_Nt")
        self.R_Ne = _check_corr(self.R_Ne, np.shape(self.R_Ne)[0], "R_Ne")
        if self.R_Nt_bob is not None:
            self.R_Nt_bob = _check_corr(self.R_Nt_bob, self.R_Nt.shape[0], "R_Nt_bob")
        if self.R_Nb is not None:
            self.R_Nb = _check_corr(self.R_Nb, np.shape(self.R_Nb)[0], "R_Nb")

    @property
    def n_t(self):
        return self.R_Nt.shape[0]

    @property
    def n_e(self):
        return self.R_Ne.shape[0]

    def normalized(self) -> "KroneckerModel":
        """Fix the Kronecker scale ambiguity for raw sample averages.

        Raw averages satisfy ``R_Nt ~ tr(R_Ne) R_tx`` and ``R_Ne ~ tr(R_tx) R_rx``.
        The returned pair has ``trace(R_Ne) == N_e`` and keeps
        ``trace(R_Ne) * R_Nt`` equal to the estimated ``E[H^H H]``.
        """
        tr = float(np.trace(self.R_Ne).real)
        if tr <= 0:
            raise ValueError("R_Ne has zero trace")
        R_Ne = self.R_Ne * (self.n_e / tr)
        return KroneckerModel(self.R_Nt / self.n_e, R_Ne, self.R_Nt_bob, self.R_Nb)


def truncate_rank(R, rank: int) -> np.ndarray:
    """Keep the ``rank`` dominant eigenpairs of ``R``, preserving its trace."""
    R = _check_corr(R, np.shape(R)[0], "R")
    lam, V = np.linalg.eigh(R)
    keep = np.zeros_like(lam)
    keep[-rank:] = np.clip(lam[-rank:], 0.0, None)
    if keep.sum() <= 0:
        raise ValueError("R has no positive eigenvalues")
    keep *= lam.clip(0.0).sum() / keep.sum()
    out = (V * keep[None, :]) @ V.conj().T
    return 0.5 * (out + out.conj().T)


def sample_iid(n_rows: int, n_cols: int, seed) -> np.ndarray:
    """``n_rows x n_cols`` matrix of i.i.d. CN(0, 1) entries."""
    if n_rows < 1 or n_cols < 1:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    re = rng.standard_normal((n_rows, n_cols))
    im = rng.standard_normal((n_rows, n_cols))
    return (re + 1j * im) / np.sqrt(2.0)


def sample_kronecker(R_rx, R_tx, seed) -> np.ndarray:
    """``R_rx^{1/2} W R_tx^{1/2}`` with ``W`` from :func:`sample_iid` (same seed)."""
    R_rx = _check_corr(R_rx, np.shape(R_rx)[0], "R_rx")
    R_tx = _check_corr(R_tx, np.shape(R_tx)[0], "R_tx")
    W = sample_iid(R_rx.shape[0], R_tx.shape[0], seed)
    return hermitian_sqrt(R_rx) @ W @ hermitian_sqrt(R_tx)


def laplacian_correlation(n: int, mean_aoa: float, angle_spread: float,
                          spacing: float = 0.5, nodes: int | None = None) -> np.ndarray:
    """Transmit correlation of a uniform linear array under a truncated Laplacian PAS.

    The power angle spectrum is ``exp(-sqrt(2) |theta - mean| / spread)``
    on ``[mean - pi, mean + pi]``, normalized to unit mass. Entry ``(m, n)``
    is the PAS-average of ``exp(i 2 pi spacing (m - n) sin theta)``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if angle_spread <= 0:
        raise ValueError("angle_spread must be positive")
    if nodes is None:
        nodes = max(200, 8 * n)
    x, w = np.polynomial.legendre.leggauss(nodes)
    # split the interval at the cusp so each half is smooth
    half = 0.5 * np.pi * (x + 1.0)  # [0, pi]
    wh = 0.5 * np.pi * w
    theta = np.concatenate([mean_aoa - half, mean_aoa + half])
    weight = np.concatenate([wh, wh]) * np.exp(-np.sqrt(2.0) * np.concatenate([half, half]) / angle_spread)
    weight /= weight.sum()
    lags = np.arange(n)
    r = np.exp(2j * np.pi * spacing * np.outer(lags, np.sin(theta))) @ weight
    r[0] = 1.0
    R = scipy.linalg.toeplitz(r)  # first column r, first row conj(r)
    return R


def estimate_correlations(realizations) -> KroneckerModel:
    """Sample averages ``mean(H^H H)`` and ``mean(H H^H)`` (no rescaling)."""
    Hs = [np.asarray(H, dtype=complex) for H in realizations]
    if not Hs:
        raise ValueError("need at least one realization")
    shape = Hs[0].shape
    if any(H.shape != shape for H in Hs):
        raise ValueError("realizations must share one shape")
    stack = np.stack(Hs)
    R_t = np.einsum("lij,lik->jk", stack.conj(), stack) / len(Hs)
    R_r = np.einsum("lij,lkj->ik", stack, stack.conj()) / len(Hs)
    return KroneckerModel(R_Nt=R_t, R_Ne=R_r)


def save_fixture(directory, H_ba, H_ea, **meta):
    """Write a channel pair plus a JSON manifest into ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_matrix(d / "H_ba.txt", H_ba)
    write_matrix(d / "H_ea.txt", H_ea)
    manifest = {
        "H_ba": "H_ba.txt",
        "H_ea": "H_ea.txt",
        "N_t": int(np.shape(H_ba)[1]),
        "N_r": int(np.shape(H_ba)[0]),
        "N_e": int(np.shape(H_ea)[0]),
        **meta,
    }
    path = d / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_fixture(path):
    """Read ``(H_ba, H_ea, manifest)`` from a fixture directory or manifest file."""
    p = Path(path)
    if p.is_dir():
        p = p / "manifest.json"
    manifest = json.loads(p.read_text())
    H_ba = read_matrix(p.parent / manifest.get("H_ba", "H_ba.txt"))
    H_ea = read_matrix(p.parent / manifest.get("H_ea", "H_ea.txt"))
    for key, got in (("N_r", H_ba.shape[0]), ("N_e", H_ea.shape[0]), ("N_t", H_ba.shape[1])):
        if key in manifest and manifest[key] != got:
            raise ValueError(f"{p}: manifest {key}={manifest[key]} but matrix has {got}")
    if H_ba.shape[1] != H_ea.shape[1]:
        raise ValueError(f"{p}: H_ba and H_ea disagree on N_t")
    return H_ba, H_ea, manifest
