"""Monte Carlo check of the analytic mutual-information model.

Symbols are circular complex Gaussian with per-quadrature variance ``mu/2``;
detection adds per-quadrature noise of variance ``(1 + D)/2`` (vacuum plus
electronic noise, LO gain normalized to one). The empirical MI of a
connection comes from a least-squares regression of the received samples on
the sent ones.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .metrics import NoiseModel, mi_broadcast, mi_hop
from .targets import HOP, TargetTransform

__all__ = [
    "SymbolBlock",
    "ReceivedBlock",
    "ValidationRow",
    "ValidationTable",
    "generate_symbols",
    "transmit",
    "estimate_mi",
    "empirical_snr",
    "validate_model",
]

MIN_RELIABLE_SYMBOLS = 10_000


@dataclass(frozen=True, eq=False)
class SymbolBlock:
    symbols: np.ndarray  # (N, n_symbols)
    mu: float
    seed: Optional[int]

    @property
    def n_channels(self) -> int:
        return self.symbols.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.symbols.shape[1]


@dataclass(frozen=True, eq=False)
class ReceivedBlock:
    samples: np.ndarray  # (N, n_symbols)
    seed: Optional[int]


def generate_symbols(n_channels: int, n_symbols: int, noise: NoiseModel, seed=None,
                     active=None) -> SymbolBlock:
    """I.i.d. Gaussian symbols; channels not listed in ``active`` stay dark."""
    if n_symbols < 1:
        raise ValueError("n_symbols must be >= 1")
    rng = np.random.default_rng(seed)
    sigma = np.sqrt(noise.mu / 2)
    x = sigma * (rng.standard_normal((n_channels, n_symbols))
                 + 1j * rng.standard_normal((n_channels, n_symbols)))
    if active is not None:
        mask = np.zeros(n_channels, dtype=bool)
        mask[list(active)] = True
        x[~mask] = 0
    return SymbolBlock(x, float(noise.mu), seed)


def transmit(block: SymbolBlock, w, noise: NoiseModel, seed=None) -> ReceivedBlock:
    """``y_k = sqrt(eta) * sum_n W[k, n] x_n + noise_k``."""
    w = np.asarray(w)
    if w.shape != (block.n_channels, block.n_channels):
        raise ValueError(f"W shape {w.shape} does not match {block.n_channels} channels")
    rng = np.random.default_rng(seed)
    s = np.sqrt((1 + noise.d_elec) / 2)
    shape = block.symbols.shape
    y = np.sqrt(noise.eta) * (w @ block.symbols)
    y = y + s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return ReceivedBlock(y, seed)


def _regress(block: SymbolBlock, received: ReceivedBlock, k: int, l: int):
    x = block.symbols[l]
    y = received.samples[k]
    px = np.vdot(x, x).real
    if px <= 0:
        raise ValueError(f"input channel {l} carries no signal; regression is degenerate")
    gain = np.vdot(x, y) / px
    resid = y - gain * x
    var = np.vdot(resid, resid).real / (2 * len(y))  # per quadrature
    return gain, var


def empirical_snr(block: SymbolBlock, received: ReceivedBlock, k: int, l: int) -> float:
    gain, var = _regress(block, received, k, l)
    return float(abs(gain) ** 2 * (block.mu / 2) / var)


def estimate_mi(block: SymbolBlock, received: ReceivedBlock, k: int, l: int) -> float:
    """Gaussian-channel MI estimate (bits) of output ``k`` given input ``l``."""
    return float(np.log2(1 + empirical_snr(block, received, k, l)))


@dataclass(frozen=True)
class ValidationRow:
    k: int
    l: int
    analytic: float
    empirical: float

    @property
    def deviation(self) -> float:
        if self.analytic == 0:
            return abs(self.empirical)
        return abs(self.empirical - self.analytic) / abs(self.analytic)


@dataclass(frozen=True)
class ValidationTable:
    rows: Tuple[ValidationRow, ...]
    n_symbols: int
    seed: int

    @property
    def max_deviation(self) -> float:
        return max(r.deviation for r in self.rows)

    def format(self) -> str:
        lines = ["k\tl\tanalytic_bits\tempirical_bits\trel_dev"]
        for r in self.rows:
            lines.append(f"{r.k}\t{r.l}\t{r.analytic:.6f}\t{r.empirical:.6f}\t{r.deviation:.3e}")
        return "\n".join(lines)


def validate_model(w, t: TargetTransform, noise: NoiseModel, n_symbols: int = 100_000,
                   seed: int = 0) -> ValidationTable:
    """Compare analytic and simulated MI for every scored pair of ``t``.

    Hop targets run one trial with every channel transmitting. Broadcast
    targets run one trial per input with only that input transmitting.
    """
    w = np.asarray(w)
    if n_symbols < MIN_RELIABLE_SYMBOLS:
        warnings.warn(
            f"{n_symbols} symbols is below {MIN_RELIABLE_SYMBOLS}; estimator variance is large",
            stacklevel=2,
        )
    n = t.n_channels
    rows: List[ValidationRow] = []
    if t.scenario == HOP:
        sym_ss, noise_ss = np.random.SeedSequence(seed).spawn(2)
        block = generate_symbols(n, n_symbols, noise, sym_ss)
        rx = transmit(block, w, noise, noise_ss)
        for k, l in t.pairs:
            rows.append(ValidationRow(k, l, mi_hop(w, k, l, noise), estimate_mi(block, rx, k, l)))
    else:
        trials = np.random.SeedSequence(seed).spawn(n)
        by_input = {}
        for l in range(n):
            sym_ss, noise_ss = trials[l].spawn(2)
            block = generate_symbols(n, n_symbols, noise, sym_ss, active=[l])
            by_input[l] = (block, transmit(block, w, noise, noise_ss))
        for k, l in t.pairs:
            block, rx = by_input[l]
            rows.append(ValidationRow(k, l, mi_broadcast(w, k, l, noise), estimate_mi(block, rx, k, l)))
    return ValidationTable(tuple(rows), int(n_symbols), int(seed))
