"""Operator-level and information-theoretic scores for a channel matrix W.

All mutual information values are in bits. Every quantity except the
fidelity depends on W only through ``|W|**2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np

from .targets import BROADCAST, HOP, TargetTransform

__all__ = [
    "NoiseModel",
    "MetricReport",
    "MiSummary",
    "DeadChannelError",
    "fidelity",
    "success_probability",
    "channel_probability",
    "selectivity",
    "snr",
    "mi_hop",
    "mi_broadcast",
    "mi_pair",
    "mi_aggregate",
    "mu_sweep",
    "evaluate",
]


class DeadChannelError(ValueError):
    """Selectivity requested for an output channel that receives no power."""


@dataclass(frozen=True)
class NoiseModel:
    """Photon number per complex symbol, extrinsic efficiency and electronic noise.

    The detector gain and LO photon number cancel in every SNR and are not
    represented.
    """

    mu: float
    eta: float = 1.0
    d_elec: float = 0.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if not self.d_elec >= 0:
            raise ValueError("d_elec must be nonnegative")

    @cached_property
    def mu_eff(self) -> float:
        return self.eta * self.mu / (1.0 + self.d_elec)

    @classmethod
    def from_mu_eff(cls, mu_eff: float) -> "NoiseModel":
        return cls(float(mu_eff))

    def to_dict(self) -> dict:
        return {"mu": self.mu, "eta": self.eta, "d_elec": self.d_elec}


def _check(w, t: Optional[TargetTransform] = None) -> np.ndarray:
    w = np.asarray(w)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"W must be square, got {w.shape}")
    if t is not None and w.shape != t.matrix.shape:
        raise ValueError(f"W shape {w.shape} does not match target {t.matrix.shape}")
    return w


def fidelity(w, t: TargetTransform) -> float:
    w = _check(w, t)
    norm_w = np.vdot(w, w).real
    if norm_w <= 0:
        raise ValueError("fidelity is undefined for W = 0")
    overlap = np.vdot(w, t.matrix)
    return float(abs(overlap) ** 2 / (norm_w * np.vdot(t.matrix, t.matrix).real))


def success_probability(w, t: TargetTransform) -> float:
    w = _check(w, t)
    return float(np.vdot(w, w).real / np.vdot(t.matrix, t.matrix).real)


def channel_probability(w, k: int) -> float:
    w = _check(w)
    if not 0 <= k < w.shape[0]:
        raise IndexError(f"channel {k} out of range")
    return float(np.sum(np.abs(w[k]) ** 2))


def selectivity(w, k: int, l: int) -> float:
    w = _check(w)
    p = channel_probability(w, k)
    if p <= 0:
        raise DeadChannelError(f"output channel {k} receives no power; selectivity undefined")
    return float(abs(w[k, l]) ** 2 / p)


def _mu_eff(noise) -> float:
    return noise.mu_eff if isinstance(noise, NoiseModel) else float(noise)


def snr(w, k: int, l: int, noise: NoiseModel) -> float:
    """Per-quadrature SNR of the (output k, input l) connection with crosstalk."""
    w = _check(w)
    a = np.abs(w[k]) ** 2
    if isinstance(noise, NoiseModel):
        em = noise.eta * noise.mu
        return float(em * a[l] / (1 + noise.d_elec + em * (a.sum() - a[l])))
    mu = float(noise)
    return float(mu * a[l] / (1 + mu * (a.sum() - a[l])))


def mi_hop(w, k: int, l: int, noise) -> float:
    """Mutual information with all channels transmitting (crosstalk counted as noise).

    ``noise`` is a :class:`NoiseModel` or a bare effective photon number.
    """
    w = _check(w)
    mu = _mu_eff(noise)
    p = channel_probability(w, k)
    c = selectivity(w, k, l)
    return float(np.log2((1 + mu * p) / (1 + mu * p * (1 - c))))


def mi_broadcast(w, k: int, l: int, noise) -> float:
    """Mutual information when input ``l`` transmits alone."""
    w = _check(w)
    return float(np.log2(1 + _mu_eff(noise) * abs(w[k, l]) ** 2))


def mi_pair(w, k: int, l: int, noise, scenario: str) -> float:
    if scenario == HOP:
        return mi_hop(w, k, l, noise)
    if scenario == BROADCAST:
        return mi_broadcast(w, k, l, noise)
    raise ValueError(f"unknown scenario {scenario!r}")


@dataclass(frozen=True)
class MiSummary:
    mi_min: float
    mi_mean: float
    values: Tuple[Tuple[int, int, float], ...]


def mi_aggregate(w, t: TargetTransform, noise) -> MiSummary:
    w = _check(w, t)
    if not t.pairs:
        raise ValueError("target has no scored pairs")
    vals = tuple((k, l, mi_pair(w, k, l, noise, t.scenario)) for k, l in t.pairs)
    bits = np.array([v for _, _, v in vals])
    return MiSummary(float(bits.min()), float(bits.mean()), vals)


def mu_sweep(w, t: TargetTransform, mu_eff_grid) -> Tuple[np.ndarray, np.ndarray, list]:
    """MI of every scored pair on a grid of effective photon numbers.

    Returns ``(grid, table, pairs)`` with ``table[i, j]`` the MI of pair
    ``pairs[j]`` at ``grid[i]``.
    """
    grid = np.asarray(mu_eff_grid, dtype=float).ravel()
    if grid.size == 0:
        raise ValueError("empty photon-number grid")
    if np.any(~(grid > 0)):
        raise ValueError("photon numbers must be positive")
    w = _check(w, t)
    pairs = list(t.pairs)
    table = np.array([[mi_pair(w, k, l, mu, t.scenario) for k, l in pairs] for mu in grid])
    return grid, table, pairs


@dataclass(frozen=True)
class MetricReport:
    fidelity: float
    success: float
    channel_probs: Tuple[float, ...]
    selectivities: Tuple[Tuple[float, ...], ...]
    mi_values: Tuple[Tuple[int, int, float], ...] = ()
    mi_min: Optional[float] = None
    mi_mean: Optional[float] = None
    mu_eff: Optional[float] = None

    def mean_pair_selectivity(self, pairs) -> float:
        return float(np.mean([self.selectivities[k][l] for k, l in pairs]))

    def to_dict(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "success": self.success,
            "channel_probs": list(self.channel_probs),
            "selectivities": [list(r) for r in self.selectivities],
            "mi_values": [list(v) for v in self.mi_values],
            "mi_min": self.mi_min,
            "mi_mean": self.mi_mean,
            "mu_eff": self.mu_eff,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(
            d["fidelity"], d["success"], tuple(d["channel_probs"]),
            tuple(tuple(r) for r in d["selectivities"]),
            tuple((int(k), int(l), float(v)) for k, l, v in d.get("mi_values", [])),
            d.get("mi_min"), d.get("mi_mean"), d.get("mu_eff"),
        )


def evaluate(w, t: TargetTransform, noise=None) -> MetricReport:
    """Full metric report. Dead output channels get ``nan`` selectivities.

    A zero matrix has fidelity reported as 0.
    """
    w = _check(w, t)
    n = w.shape[0]
    a = np.abs(w) ** 2
    probs = a.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        sel = np.where(probs[:, None] > 0, a / probs[:, None], np.nan)
    fid = fidelity(w, t) if probs.sum() > 0 else 0.0
    mi_vals, mi_min, mi_mean, mu = (), None, None, None
    if noise is not None:
        mu = _mu_eff(noise)
        vals = []
        for k, l in t.pairs:
            if t.scenario == HOP and probs[k] <= 0:
                vals.append((k, l, 0.0))
            else:
                vals.append((k, l, mi_pair(w, k, l, mu, t.scenario)))
        mi_vals = tuple(vals)
        bits = np.array([v for _, _, v in vals])
        mi_min, mi_mean = float(bits.min()), float(bits.mean())
    return MetricReport(
        fid, success_probability(w, t), tuple(float(p) for p in probs),
        tuple(tuple(float(x) for x in row) for row in sel), mi_vals, mi_min, mi_mean, mu,
    )
