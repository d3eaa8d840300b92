"""Mode grids, DFT matrices and the small amount of dense linear algebra
shared by the rest of the package.

Matrices are plain ``numpy`` ``complex128`` arrays throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModeGrid",
    "dft_matrix",
    "unitarity_defect",
    "extract_submatrix",
    "embed_submatrix",
]


@dataclass(frozen=True)
class ModeGrid:
    """Discretization geometry of the frequency-bin space.

    Parameters
    ----------
    m_total : int
        Number of time samples, equal to the number of frequency bins.
    n_channels : int
        Number of network channels.
    channel_offset : int
        Index of the first channel bin inside the ``m_total`` bins.
    shaper_support : int
        Number of bins each pulse shaper may address. The support window is
        placed around the channel window (see :attr:`support_offset`).
    """

    m_total: int
    n_channels: int
    channel_offset: int
    shaper_support: int

    def __post_init__(self):
        m, n, n0, s = self.m_total, self.n_channels, self.channel_offset, self.shaper_support
        for name in ("m_total", "n_channels", "channel_offset", "shaper_support"):
            if not isinstance(getattr(self, name), (int, np.integer)):
                raise TypeError(f"{name} must be an integer")
        if m < 1 or n < 1 or s < 1:
            raise ValueError("m_total, n_channels and shaper_support must be positive")
        if not n <= s <= m / 4:
            raise ValueError(
                f"need n_channels <= shaper_support <= m_total/4, got N={n}, support={s}, M={m}"
            )
        if n0 < 0 or n0 + n > m:
            raise ValueError(f"channel window [{n0}, {n0 + n}) does not fit in {m} bins")

    @classmethod
    def centered(cls, n_channels: int, m_total: int = 128, shaper_support: int = 32) -> "ModeGrid":
        """Default grid with the channel window centered in the bin space."""
        return cls(m_total, n_channels, (m_total - n_channels) // 2, shaper_support)

    @property
    def support_offset(self) -> int:
        # centered on the channel window, clipped into [0, M - S]
        start = self.channel_offset - (self.shaper_support - self.n_channels) // 2
        return int(min(max(start, 0), self.m_total - self.shaper_support))

    @property
    def channel_slice(self) -> slice:
        return slice(self.channel_offset, self.channel_offset + self.n_channels)

    @property
    def support_slice(self) -> slice:
        return slice(self.support_offset, self.support_offset + self.shaper_support)

    def to_dict(self) -> dict:
        return {
            "m_total": int(self.m_total),
            "n_channels": int(self.n_channels),
            "channel_offset": int(self.channel_offset),
            "shaper_support": int(self.shaper_support),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModeGrid":
        return cls(int(d["m_total"]), int(d["n_channels"]), int(d["channel_offset"]),
                   int(d["shaper_support"]))


def dft_matrix(dim: int) -> np.ndarray:
    """Unitary DFT with entries ``dim**-0.5 * exp(+2j*pi*m*n/dim)``.

    The product ``m*n`` is reduced modulo ``dim`` before exponentiation so
    that the result is exactly symmetric and accurate for large ``dim``.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    idx = np.arange(dim)
    mn = np.outer(idx, idx) % dim
    return np.exp(2j * np.pi * mn / dim) / np.sqrt(dim)


def unitarity_defect(v) -> float:
    """Largest absolute entry of ``V^H V - I``."""
    v = np.asarray(v)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {v.shape}")
    gram = v.conj().T @ v
    return float(np.max(np.abs(gram - np.eye(v.shape[0]))))


def extract_submatrix(v, grid: ModeGrid) -> np.ndarray:
    """Channel-window block of a full-space operator (no renormalization)."""
    v = np.asarray(v)
    m = grid.m_total
    if v.shape != (m, m):
        raise ValueError(f"matrix shape {v.shape} does not match grid size {m}")
    s = grid.channel_slice
    return v[s, s].copy()


def embed_submatrix(w, grid: ModeGrid) -> np.ndarray:
    """Inverse of :func:`extract_submatrix`: place ``w`` in an M x M zero matrix."""
    w = np.asarray(w)
    n = grid.n_channels
    if w.shape != (n, n):
        raise ValueError(f"matrix shape {w.shape} does not match {n} channels")
    out = np.zeros((grid.m_total, grid.m_total), dtype=complex)
    s = grid.channel_slice
    out[s, s] = w
    return out
