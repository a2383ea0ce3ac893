"""Input checks shared by the estimators and the CLI."""
from __future__ import annotations

import numpy as np

__all__ = ["check_channel", "check_pair", "check_hermitian_psd", "check_symbols"]


def check_channel(H, name="H") -> np.ndarray:
    """Return ``H`` as a finite complex 2-D array with no empty axis."""
    H = np.asarray(H)
    if H.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got {H.ndim}-D")
    if 0 in H.shape:
        raise ValueError(f"{name} has an empty dimension: {H.shape}")
    H = H.astype(complex, copy=False)
    if not np.all(np.isfinite(H)):
        raise ValueError(f"{name} contains NaN or Inf")
    return H


def check_pair(H_ba, H_ea):
    H_ba = check_channel(H_ba, "H_ba")
    H_ea = check_channel(H_ea, "H_ea")
    if H_ba.shape[1] != H_ea.shape[1]:
        raise ValueError(
            f"H_ba and H_ea must share N_t columns, got {H_ba.shape[1]} and {H_ea.shape[1]}"
        )
    return H_ba, H_ea


def check_hermitian_psd(R, name="R", tol=1e-10) -> np.ndarray:
    R = check_channel(R, name)
    if R.shape[0] != R.shape[1]:
        raise ValueError(f"{name} must be square, got {R.shape}")
    scale = max(1.0, float(np.linalg.norm(R)))
    if np.linalg.norm(R - R.conj().T) > tol * scale:
        raise ValueError(f"{name} is not Hermitian")
    R = 0.5 * (R + R.conj().T)
    lam = np.linalg.eigvalsh(R)
    if lam[0] < -tol * max(1.0, abs(lam[-1])):
        raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {lam[0]:.3e})")
    return R


def check_symbols(X, n_t) -> np.ndarray:
    """Symbol blocks as rows: ``(n_blocks, N_t)``; a single vector is promoted."""
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n_t:
        raise ValueError(f"expected symbol rows of length {n_t}, got shape {X.shape}")
    return X.astype(complex, copy=False)
