"""Goal transformations on the N-channel window: cyclic hops and DFT broadcasts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .spectral_core import dft_matrix, unitarity_defect

__all__ = [
    "TargetTransform",
    "permutation_power",
    "dft_target",
    "roots_diagonal",
    "unique_hop_powers",
    "custom_target",
]

HOP = "hop"
BROADCAST = "broadcast"


@dataclass(frozen=True, eq=False)
class TargetTransform:
    """An N x N unitary goal plus the (output k, input l) pairs scored for MI.

    ``scenario`` is ``"hop"`` (pairs ``(k, f(k))`` for a one-to-one map ``f``)
    or ``"broadcast"`` (all N^2 pairs).
    """

    n_channels: int
    matrix: np.ndarray
    scenario: str
    pairs: Tuple[Tuple[int, int], ...]
    label: str = field(default="custom")

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        n = self.n_channels
        if m.shape != (n, n):
            raise ValueError(f"target matrix shape {m.shape} does not match N={n}")
        if unitarity_defect(m) > 1e-12:
            raise ValueError("target matrix must be unitary")
        pairs = tuple((int(k), int(l)) for k, l in self.pairs)
        if not pairs:
            raise ValueError("target needs at least one scored pair")
        for k, l in pairs:
            if not (0 <= k < n and 0 <= l < n):
                raise ValueError(f"pair {(k, l)} out of range for N={n}")
        if self.scenario == HOP:
            ks = sorted(k for k, _ in pairs)
            ls = sorted(l for _, l in pairs)
            if ks != list(range(n)) or ls != list(range(n)):
                raise ValueError("hop connection map must be a bijection on the channels")
        elif self.scenario != BROADCAST:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        object.__setattr__(self, "pairs", pairs)

    def connection(self, k: int) -> int:
        """Input channel feeding output ``k`` (hop scenario)."""
        for kk, l in self.pairs:
            if kk == k:
                return l
        raise KeyError(k)

    def __eq__(self, other):
        if not isinstance(other, TargetTransform):
            return NotImplemented
        return (self.n_channels == other.n_channels and self.scenario == other.scenario
                and self.pairs == other.pairs and self.label == other.label
                and np.array_equal(self.matrix, other.matrix))

    __hash__ = None


def permutation_power(n_channels: int, power: int) -> TargetTransform:
    """Cyclic hop ``S_N^n``: ``(S_N^n)[m, k] = 1`` iff ``(m - k - n) % N == 0``."""
    n = int(n_channels)
    if n < 2:
        raise ValueError("hops need at least 2 channels")
    if not 1 <= power <= n - 1:
        raise ValueError(f"hop power must be in [1, {n - 1}], got {power}")
    idx = np.arange(n)
    s = ((idx[:, None] - idx[None, :] - power) % n == 0).astype(complex)
    pairs = tuple((k, (k - power) % n) for k in range(n))
    return TargetTransform(n, s, HOP, pairs, label=f"S{n}^{power}")


def dft_target(n_channels: int) -> TargetTransform:
    n = int(n_channels)
    if n < 2:
        raise ValueError("broadcast needs at least 2 channels")
    pairs = tuple((k, l) for k in range(n) for l in range(n))
    return TargetTransform(n, dft_matrix(n), BROADCAST, pairs, label=f"F{n}")


def roots_diagonal(n_channels: int, power: int) -> np.ndarray:
    """``diag(exp(2j*pi*m*power/N))``."""
    n = int(n_channels)
    if n < 2 or power < 0:
        raise ValueError("need N >= 2 and power >= 0")
    m = np.arange(n)
    return np.diag(np.exp(2j * np.pi * ((m * power) % n) / n))


def unique_hop_powers(n_channels: int):
    """Powers 1..floor(N/2); the others follow from the dual construction."""
    if n_channels < 2:
        raise ValueError("need N >= 2")
    return list(range(1, n_channels // 2 + 1))


def custom_target(matrix, pairs, scenario: str = HOP, label: str = "custom") -> TargetTransform:
    m = np.asarray(matrix, dtype=complex)
    return TargetTransform(m.shape[0], m, scenario, tuple(map(tuple, pairs)), label=label)
