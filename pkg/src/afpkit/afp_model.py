"""EOM / pulse-shaper elements and their composition into cascade operators.

Element order convention: the first element of ``AfpDesign.elements`` is the
first one the light passes through, i.e. the right-most factor of the matrix
product.

An EOM with temporal phase pattern ``phi_j`` acts in the frequency domain as
``F_M diag(exp(1j*phi)) F_M^H``; a pulse shaper is ``diag(exp(1j*theta))``
over frequency bins, with nonzero phases only inside the grid's shaper
support window.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from . import kernels
from .spectral_core import ModeGrid, dft_matrix

__all__ = [
    "Arbitrary",
    "Tone",
    "Tonal",
    "Eom",
    "Shaper",
    "AfpDesign",
    "wrap_phase",
    "eom_operator",
    "shaper_operator",
    "element_operator",
    "cascade_operator",
    "channel_matrix",
    "dual_design",
    "zero_design",
    "design_phases",
]


def wrap_phase(x):
    """Map phases into (-pi, pi]. Values already in range are returned unchanged."""
    x = np.asarray(x, dtype=float)
    out = np.where((x > -np.pi) & (x <= np.pi), x, np.pi - np.mod(np.pi - x, 2 * np.pi))
    return out


def _as_phase_tuple(values) -> Tuple[float, ...]:
    arr = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(arr)):
        raise ValueError("phases must be finite")
    return tuple(float(v) for v in wrap_phase(arr))


@dataclass(frozen=True)
class Arbitrary:
    """One freely chosen temporal phase per time sample."""

    phases: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "phases", _as_phase_tuple(self.phases))

    def temporal_phases(self, m_total: int) -> np.ndarray:
        if len(self.phases) != m_total:
            raise ValueError(f"arbitrary modulation has {len(self.phases)} phases, grid needs {m_total}")
        return np.array(self.phases)


@dataclass(frozen=True)
class Tone:
    """One RF harmonic: ``amplitude * sin(2*pi*harmonic*j/M + phase)``.

    The amplitude is signed so that negating a drive is exact; a negative
    amplitude is the same as a pi shift of ``phase``.
    """

    harmonic: int
    amplitude: float
    phase: float

    def __post_init__(self):
        if int(self.harmonic) < 1:
            raise ValueError("harmonic must be a positive integer")
        if not (np.isfinite(self.amplitude) and np.isfinite(self.phase)):
            raise ValueError("tone amplitude and phase must be finite")
        object.__setattr__(self, "harmonic", int(self.harmonic))
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "phase", float(wrap_phase(self.phase)))


@dataclass(frozen=True)
class Tonal:
    """Sum of sinusoidal RF tones at distinct harmonics of the channel spacing."""

    tones: Tuple[Tone, ...]

    def __post_init__(self):
        tones = tuple(t if isinstance(t, Tone) else Tone(*t) for t in self.tones)
        harmonics = [t.harmonic for t in tones]
        if len(set(harmonics)) != len(harmonics):
            raise ValueError("tonal harmonics must be distinct")
        object.__setattr__(self, "tones", tones)

    @classmethod
    def single(cls, amplitude: float, phase: float = 0.0) -> "Tonal":
        return cls((Tone(1, amplitude, phase),))

    def temporal_phases(self, m_total: int) -> np.ndarray:
        j = np.arange(m_total)
        phi = np.zeros(m_total)
        for t in self.tones:
            phi += t.amplitude * np.sin(2 * np.pi * t.harmonic * j / m_total + t.phase)
        return phi


Modulation = Union[Arbitrary, Tonal]


@dataclass(frozen=True)
class Eom:
    modulation: Modulation


@dataclass(frozen=True)
class Shaper:
    """Line-by-line phases over the shaper support window only."""

    phases: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "phases", _as_phase_tuple(self.phases))

    def bin_phases(self, grid: ModeGrid) -> np.ndarray:
        if len(self.phases) != grid.shaper_support:
            raise ValueError(
                f"shaper has {len(self.phases)} phases, support window has {grid.shaper_support}"
            )
        out = np.zeros(grid.m_total)
        out[grid.support_slice] = self.phases
        return out


Element = Union[Eom, Shaper]


@dataclass(frozen=True)
class AfpDesign:
    """Ordered cascade of alternating EOMs and shapers on a grid.

    Unless ``allow_even`` is set the cascade must start and end with an EOM
    (hence odd length).
    """

    elements: Tuple[Element, ...]
    grid: ModeGrid
    allow_even: bool = False

    def __post_init__(self):
        elements = tuple(self.elements)
        object.__setattr__(self, "elements", elements)
        if not elements:
            raise ValueError("a design needs at least one element")
        for e in elements:
            if not isinstance(e, (Eom, Shaper)):
                raise TypeError(f"unknown element {e!r}")
        for a, b in zip(elements, elements[1:]):
            if type(a) is type(b):
                raise ValueError("elements must alternate between EOM and shaper")
        if not self.allow_even and not (isinstance(elements[0], Eom) and isinstance(elements[-1], Eom)):
            raise ValueError("cascade must start and end with an EOM (set allow_even to relax)")

    @property
    def n_elements(self) -> int:
        return len(self.elements)


def eom_operator(e: Eom, grid: ModeGrid) -> np.ndarray:
    if not isinstance(e, Eom):
        raise TypeError("expected an Eom element")
    phi = e.modulation.temporal_phases(grid.m_total)
    f = dft_matrix(grid.m_total)
    return (f * np.exp(1j * phi)) @ f.conj().T


def shaper_operator(e: Shaper, grid: ModeGrid) -> np.ndarray:
    if not isinstance(e, Shaper):
        raise TypeError("expected a Shaper element")
    return np.diag(np.exp(1j * e.bin_phases(grid)))


def element_operator(e: Element, grid: ModeGrid) -> np.ndarray:
    return eom_operator(e, grid) if isinstance(e, Eom) else shaper_operator(e, grid)


def cascade_operator(d: AfpDesign) -> np.ndarray:
    """Full M x M operator; element ``0`` acts first."""
    v = np.eye(d.grid.m_total, dtype=complex)
    for e in d.elements:
        v = element_operator(e, d.grid) @ v
    return v


def design_phases(d: AfpDesign):
    """Per-element diagonal phases ``(Q, M)`` and the EOM mask used by the kernels."""
    grid = d.grid
    rows = []
    for e in d.elements:
        if isinstance(e, Eom):
            rows.append(e.modulation.temporal_phases(grid.m_total))
        else:
            rows.append(e.bin_phases(grid))
    is_eom = np.array([isinstance(e, Eom) for e in d.elements], dtype=np.uint8)
    return np.array(rows), is_eom


def channel_matrix(d: AfpDesign) -> np.ndarray:
    """Channel-window block ``W`` of the cascade operator."""
    phases, is_eom = design_phases(d)
    w, _ = kernels.forward(phases, is_eom, d.grid.channel_offset, d.grid.n_channels)
    return w


def _negate(e: Element) -> Element:
    if isinstance(e, Shaper):
        return Shaper(tuple(-p for p in e.phases))
    mod = e.modulation
    if isinstance(mod, Arbitrary):
        return Eom(Arbitrary(tuple(-p for p in mod.phases)))
    return Eom(Tonal(tuple(Tone(t.harmonic, -t.amplitude, t.phase) for t in mod.tones)))


def dual_design(d: AfpDesign) -> AfpDesign:
    """Reverse the element order and negate every applied phase.

    The result's cascade operator is the adjoint of the original's.
    """
    return AfpDesign(tuple(_negate(e) for e in reversed(d.elements)), d.grid, d.allow_even)


def zero_design(grid: ModeGrid, n_elements: int, regime: str = "arbitrary", tones: int = 1,
                eom_first: bool = True, allow_even: bool = False) -> AfpDesign:
    """Identity-valued design with the requested structure."""
    elements = []
    for i in range(n_elements):
        is_eom = (i % 2 == 0) == eom_first
        if is_eom:
            if regime == "arbitrary":
                mod = Arbitrary(np.zeros(grid.m_total))
            else:
                mod = Tonal(tuple(Tone(h, 0.0, 0.0) for h in range(1, tones + 1)))
            elements.append(Eom(mod))
        else:
            elements.append(Shaper(np.zeros(grid.shaper_support)))
    return AfpDesign(tuple(elements), grid, allow_even)
