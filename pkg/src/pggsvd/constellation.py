"""Finite signal sets and joint symbol-vector enumeration."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Constellation",
    "make_constellation",
    "symbol_vector",
    "difference_vector",
    "iter_indices",
    "n_vectors",
]

_FIXED_SIZES = {"BPSK": 2, "QPSK": 4, "PSK-8": 8, "QAM-16": 16}
KINDS = ("BPSK", "QPSK", "PSK-8", "QAM-16", "QAM-M")


def _gray(n: int) -> int:
    return n ^ (n >> 1)


def _gray_pam(m: int) -> np.ndarray:
    """Odd-integer PAM levels indexed by their Gray label."""
    levels = np.empty(m)
    for pos in range(m):
        levels[_gray(pos)] = 2 * pos - m + 1
    return levels


@dataclass(frozen=True)
class Constellation:
    """``M`` equiprobable points with unit average energy.

    ``points[i]`` is the symbol carrying label ``i`` (Gray labeled).
    """

    kind: str
    M: int
    points: np.ndarray = field(repr=False)

    @property
    def bits(self) -> float:
        return math.log2(self.M)

    def symbol_matrix(self, N: int) -> np.ndarray:
        """All ``M**N`` joint vectors as rows, ordered as :func:`iter_indices`."""
        grids = np.meshgrid(*([np.arange(self.M)] * N), indexing="ij")
        digits = np.stack([g.ravel() for g in grids], axis=1) if N else np.zeros((1, 0), int)
        return self.points[digits]

    def min_distance_sq(self) -> float:
        d = np.abs(self.points[:, None] - self.points[None, :]) ** 2
        return float(np.min(d[~np.eye(self.M, dtype=bool)]))


def make_constellation(kind: str, M: int | None = None) -> Constellation:
    """Build a unit-energy constellation.

    ``kind`` is one of ``BPSK``, ``QPSK``, ``PSK-8``, ``QAM-16`` or ``QAM-M``
    (square QAM of any even power-of-two-squared order). ``M`` may be omitted
    for the fixed-size kinds.
    """
    kind = kind.upper()
    if kind not in KINDS:
        raise ValueError(f"unknown constellation kind {kind!r}; expected one of {KINDS}")
    if kind in _FIXED_SIZES:
        want = _FIXED_SIZES[kind]
        if M is None:
            M = want
        if M != want:
            raise ValueError(f"{kind} has {want} points, got M={M}")
    elif M is None:
        raise ValueError("QAM-M requires M")

    if kind == "BPSK":
        pts = np.array([1.0, -1.0], dtype=complex)
    elif kind == "PSK-8":
        pts = np.empty(8, dtype=complex)
        for pos in range(8):
            pts[_gray(pos)] = np.exp(2j * np.pi * pos / 8)
    else:
        side = math.isqrt(M)
        if side * side != M or side < 2 or side & (side - 1):
            raise ValueError(f"square QAM needs M = 4^j, got M={M}")
        pam = _gray_pam(side)
        bits_axis = side.bit_length() - 1
        pts = np.empty(M, dtype=complex)
        for label in range(M):
            i_lab, q_lab = label >> bits_axis, label & (side - 1)
            pts[label] = -pam[i_lab] - 1j * pam[q_lab]
        pts /= math.sqrt(2 * (M - 1) / 3)
    return Constellation(kind=kind, M=M, points=pts)


def n_vectors(c: Constellation, N: int) -> int:
    return c.M**N


def iter_indices(c: Constellation, N: int):
    """Lazily yield every base-``M`` digit tuple of length ``N`` (big-endian)."""
    return itertools.product(range(c.M), repeat=N)


def _digits(c, idx):
    idx = np.asarray(idx, dtype=int)
    if np.any(idx < 0) or np.any(idx >= c.M):
        raise ValueError(f"digits must lie in [0, {c.M})")
    return idx


def symbol_vector(c: Constellation, idx) -> np.ndarray:
    """Joint symbol vector whose ``j``-th entry is ``points[idx[j]]``."""
    return c.points[_digits(c, idx)]


def difference_vector(c: Constellation, p, q) -> np.ndarray:
    """``x_p - x_q`` for two digit tuples of equal length."""
    p, q = _digits(c, p), _digits(c, q)
    if p.shape != q.shape:
        raise ValueError("index lengths differ")
    return c.points[p] - c.points[q]
