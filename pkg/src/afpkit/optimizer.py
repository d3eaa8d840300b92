"""Multi-start synthesis of AFP designs.

Two objectives are supported:

* :class:`FidelityConstrained` -- maximize success probability subject to
  ``fidelity >= f_min``. The constraint is enforced by a quadratic penalty
  whose weight is escalated over stages, each stage warm-started from the
  previous one.
* :class:`MaxMinMutualInfo` -- maximize the worst scored mutual information,
  smoothed by a log-sum-exp soft minimum whose sharpness is annealed.

Local search is L-BFGS-B on analytic gradients obtained by back-propagating
through the diagonal phase factors (see :mod:`afpkit.kernels`).
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple, Union

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from . import kernels
from .afp_model import AfpDesign, Arbitrary, Eom, Shaper, Tonal, Tone, channel_matrix
from .metrics import MetricReport, NoiseModel, evaluate
from .spectral_core import ModeGrid
from .targets import HOP, TargetTransform

log = logging.getLogger(__name__)

__all__ = [
    "Structure",
    "FidelityConstrained",
    "MaxMinMutualInfo",
    "Budget",
    "DesignProblem",
    "Solution",
    "ParameterLayout",
    "pack_parameters",
    "unpack_parameters",
    "soft_min",
    "objective_fp",
    "objective_mi",
    "gradient",
    "optimize",
    "warm_start",
    "minimum_elements",
]

PENALTY_STAGES = (10.0, 1e2, 1e3, 1e4, 1e5, 1e6)
BETA_STAGES = (1.0, 10.0, 100.0)
MAX_AMPLITUDE = 3 * np.pi
# even restarts start from weak drives, odd ones from the full amplitude range
INIT_AMPLITUDES = (np.pi, MAX_AMPLITUDE)
FEASIBILITY_SLACK = 1e-4


@dataclass(frozen=True)
class Structure:
    """Element count and EOM drive regime (``"arbitrary"`` or ``"tonal"``)."""

    n_elements: int
    regime: str = "arbitrary"
    tones: int = 1
    allow_even: bool = False
    eom_first: bool = True

    def __post_init__(self):
        if self.n_elements < 1:
            raise ValueError("structure.Q must be >= 1")
        if self.regime not in ("arbitrary", "tonal"):
            raise ValueError(f"unknown modulation regime {self.regime!r}")
        if self.regime == "tonal" and self.tones < 1:
            raise ValueError("tonal regime needs at least one tone")
        if not self.allow_even and (self.n_elements % 2 == 0 or not self.eom_first):
            raise ValueError("odd Q with EOMs first and last is required unless allow_even is set")


@dataclass(frozen=True)
class FidelityConstrained:
    f_min: float = 0.99

    def __post_init__(self):
        if not 0 < self.f_min < 1:
            raise ValueError("f_min must lie in (0, 1)")


@dataclass(frozen=True)
class MaxMinMutualInfo:
    noise: NoiseModel


Objective = Union[FidelityConstrained, MaxMinMutualInfo]


@dataclass(frozen=True)
class Budget:
    restarts: int = 32
    max_iter: int = 2000
    seed: int = 0
    workers: int = 1
    polish: bool = False

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("budget.restarts must be >= 1")
        if self.max_iter < 1:
            raise ValueError("budget.max_iter must be >= 1")


@dataclass(frozen=True)
class DesignProblem:
    target: TargetTransform
    grid: ModeGrid
    structure: Structure
    objective: Objective = FidelityConstrained()
    budget: Budget = Budget()

    def __post_init__(self):
        if self.target.n_channels != self.grid.n_channels:
            raise ValueError("target and grid disagree on the channel count")


@dataclass(frozen=True)
class Solution:
    design: AfpDesign
    report: MetricReport
    problem: DesignProblem
    feasible: bool
    objective_value: float
    seed: int
    restart_index: int
    trace_length: int
    restart_scores: Tuple[float, ...] = ()
    wall_time: float = field(default=0.0, compare=False)


class ParameterLayout:
    """Flat real parameter vector <-> per-element diagonal phases.

    Per-element parameter counts: ``M`` for an arbitrary EOM, two per tone
    (amplitude, phase) for a tonal EOM, ``shaper_support`` for a shaper.
    """

    def __init__(self, grid: ModeGrid, structure: Structure):
        self.grid = grid
        self.structure = structure
        m, s = grid.m_total, grid.shaper_support
        self.is_eom = np.array(
            [(i % 2 == 0) == structure.eom_first for i in range(structure.n_elements)], dtype=np.uint8
        )
        self.slices = []
        start = 0
        for eom in self.is_eom:
            if not eom:
                size = s
            elif structure.regime == "arbitrary":
                size = m
            else:
                size = 2 * structure.tones
            self.slices.append(slice(start, start + size))
            start += size
        self.size = start
        j = np.arange(m)
        self._harm = np.arange(1, structure.tones + 1)
        self._arg = 2 * np.pi * np.outer(self._harm, j) / m  # (tones, M)

    def phases(self, x) -> np.ndarray:
        g = self.grid
        out = np.zeros((len(self.slices), g.m_total))
        for q, sl in enumerate(self.slices):
            p = x[sl]
            if not self.is_eom[q]:
                out[q, g.support_slice] = p
            elif self.structure.regime == "arbitrary":
                out[q] = p
            else:
                amp, ph = p[0::2], p[1::2]
                out[q] = amp @ np.sin(self._arg + ph[:, None])
        return out

    def chain(self, x, gphases) -> np.ndarray:
        """Pull a gradient w.r.t. diagonal phases back to the parameters."""
        g = self.grid
        out = np.empty(self.size)
        for q, sl in enumerate(self.slices):
            if not self.is_eom[q]:
                out[sl] = gphases[q, g.support_slice]
            elif self.structure.regime == "arbitrary":
                out[sl] = gphases[q]
            else:
                p = x[sl]
                amp, ph = p[0::2], p[1::2]
                arg = self._arg + ph[:, None]
                out[sl.start:sl.stop:2] = np.sin(arg) @ gphases[q]
                out[sl.start + 1:sl.stop:2] = amp * (np.cos(arg) @ gphases[q])
        return out

    def bounds(self):
        b = [(None, None)] * self.size
        if self.structure.regime == "tonal":
            for q, sl in enumerate(self.slices):
                if self.is_eom[q]:
                    for i in range(sl.start, sl.stop, 2):
                        b[i] = (0.0, MAX_AMPLITUDE)
        return b

    def random_start(self, rng: np.random.Generator, amplitude_max: float = MAX_AMPLITUDE) -> np.ndarray:
        x = rng.uniform(-np.pi, np.pi, self.size)
        if self.structure.regime == "tonal":
            for q, sl in enumerate(self.slices):
                if self.is_eom[q]:
                    x[sl.start:sl.stop:2] = rng.uniform(0, amplitude_max, (sl.stop - sl.start) // 2)
        return x

    def to_design(self, x) -> AfpDesign:
        elements = []
        for q, sl in enumerate(self.slices):
            p = np.asarray(x[sl], dtype=float)
            if not self.is_eom[q]:
                elements.append(Shaper(p))
            elif self.structure.regime == "arbitrary":
                elements.append(Eom(Arbitrary(p)))
            else:
                tones = tuple(Tone(int(h), p[2 * i], p[2 * i + 1]) for i, h in enumerate(self._harm))
                elements.append(Eom(Tonal(tones)))
        return AfpDesign(tuple(elements), self.grid, self.structure.allow_even)

    def from_design(self, d: AfpDesign) -> np.ndarray:
        if d.n_elements != len(self.slices) or d.grid != self.grid:
            raise ValueError("design does not match the parameter layout")
        x = np.zeros(self.size)
        for q, (e, sl) in enumerate(zip(d.elements, self.slices)):
            if isinstance(e, Eom) != bool(self.is_eom[q]):
                raise ValueError("design element kinds do not match the layout")
            if isinstance(e, Shaper):
                x[sl] = e.phases
            elif isinstance(e.modulation, Arbitrary):
                if self.structure.regime != "arbitrary":
                    raise ValueError("arbitrary EOM in a tonal layout")
                x[sl] = e.modulation.phases
            else:
                if self.structure.regime != "tonal":
                    raise ValueError("tonal EOM in an arbitrary layout")
                by_h = {t.harmonic: t for t in e.modulation.tones}
                if any(h > self.structure.tones for h in by_h):
                    raise ValueError("design has more tones than the layout")
                for i, h in enumerate(self._harm):
                    t = by_h.get(int(h))
                    if t is not None:
                        x[sl.start + 2 * i] = t.amplitude
                        x[sl.start + 2 * i + 1] = t.phase
        return x


def _structure_of(d: AfpDesign) -> Structure:
    eoms = [e for e in d.elements if isinstance(e, Eom)]
    regime = "arbitrary"
    tones = 1
    if eoms and isinstance(eoms[0].modulation, Tonal):
        regime = "tonal"
        tones = max(t.harmonic for e in eoms for t in e.modulation.tones)
    return Structure(d.n_elements, regime, tones, d.allow_even, isinstance(d.elements[0], Eom))


def pack_parameters(d: AfpDesign) -> np.ndarray:
    return ParameterLayout(d.grid, _structure_of(d)).from_design(d)


def unpack_parameters(x, grid: ModeGrid, structure: Structure) -> AfpDesign:
    layout = ParameterLayout(grid, structure)
    x = np.asarray(x, dtype=float)
    if x.shape != (layout.size,):
        raise ValueError(f"expected {layout.size} parameters, got {x.shape}")
    return layout.to_design(x)


# -- objectives on W --------------------------------------------------------


def _fp_terms(w, target: TargetTransform, f_min: float, lam: float):
    """Penalized objective ``P - lam * max(0, f_min - F)**2`` and its W-gradient.

    Gradients are returned as ``dJ/dRe(W) + 1j * dJ/dIm(W)``.
    """
    t = target.matrix
    norm_t = np.vdot(t, t).real
    norm_w = np.vdot(w, w).real
    p = norm_w / norm_t
    g_p = 2 * w / norm_t
    if norm_w <= 0:
        return -lam * f_min ** 2, g_p, 0.0, 0.0
    s = np.vdot(w, t)
    f = abs(s) ** 2 / (norm_w * norm_t)
    viol = max(0.0, f_min - f)
    val = p - lam * viol ** 2
    g = g_p
    if viol > 0:
        g_f = 2 * np.conj(s) * t / (norm_w * norm_t) - 2 * f * w / norm_w
        g = g + 2 * lam * viol * g_f
    return val, g, f, p


def soft_min(values, beta: float) -> float:
    """``-(1/beta) * log(sum(exp(-beta * v)))``; never above ``min(values)``."""
    v = np.asarray(values, dtype=float)
    return float(-logsumexp(-beta * v) / beta)


def _pair_mi(w, target: TargetTransform, mu: float):
    """Per-pair MI (bits) and d(MI)/d|W|^2 for every pair, as a list of (k, l)."""
    a = np.abs(w) ** 2
    ln2 = np.log(2.0)
    vals = []
    grads = []
    if target.scenario == HOP:
        probs = a.sum(axis=1)
        for k, l in target.pairs:
            pk, akl = probs[k], a[k, l]
            rest = max(pk - akl, 0.0)
            vals.append((np.log1p(mu * pk) - np.log1p(mu * rest)) / ln2)
            dg = np.zeros_like(a)
            dg[k, :] = mu / (1 + mu * pk) - mu / (1 + mu * rest)
            dg[k, l] = mu / (1 + mu * pk)
            grads.append(dg / ln2)
    else:
        for k, l in target.pairs:
            vals.append(np.log1p(mu * a[k, l]) / ln2)
            dg = np.zeros_like(a)
            dg[k, l] = mu / ((1 + mu * a[k, l]) * ln2)
            grads.append(dg)
    return np.array(vals), grads


def _mi_terms(w, target: TargetTransform, mu: float, beta: float):
    vals, grads = _pair_mi(w, target, mu)
    if not np.all(np.isfinite(vals)):
        return -1e3, np.zeros_like(w), vals
    weights = np.exp(-beta * vals - logsumexp(-beta * vals))
    dg = sum(wt * g for wt, g in zip(weights, grads))
    return soft_min(vals, beta), 2 * dg * w, vals


# -- objectives on parameters -------------------------------------------------


def _stage_value(x, layout: ParameterLayout, problem: DesignProblem, stage: float, want_grad: bool):
    phases = layout.phases(x)
    grid = layout.grid
    w, tape = kernels.forward(phases, layout.is_eom, grid.channel_offset, grid.n_channels)
    obj = problem.objective
    if isinstance(obj, FidelityConstrained):
        val, g = _fp_terms(w, problem.target, obj.f_min, stage)[:2]
    else:
        val, g = _mi_terms(w, problem.target, obj.noise.mu_eff, stage)[:2]
    if not want_grad:
        return val, None
    gph = kernels.backward(phases, layout.is_eom, grid.channel_offset, tape, g)
    return val, layout.chain(x, gph)


def _layout(problem: DesignProblem) -> ParameterLayout:
    return ParameterLayout(problem.grid, problem.structure)


def _default_stage(problem: DesignProblem) -> float:
    if isinstance(problem.objective, FidelityConstrained):
        return PENALTY_STAGES[-1]
    return BETA_STAGES[-1]


def objective_fp(x, problem: DesignProblem, penalty: Optional[float] = None) -> float:
    """Penalized success probability (to maximize); equals P when F >= f_min."""
    if not isinstance(problem.objective, FidelityConstrained):
        raise TypeError("problem does not carry a fidelity-constrained objective")
    lam = PENALTY_STAGES[-1] if penalty is None else penalty
    return _stage_value(np.asarray(x, float), _layout(problem), problem, lam, False)[0]


def objective_mi(x, problem: DesignProblem, beta: Optional[float] = None) -> float:
    """Soft minimum of the scored mutual informations (bits, to maximize)."""
    if not isinstance(problem.objective, MaxMinMutualInfo):
        raise TypeError("problem does not carry a mutual-information objective")
    b = BETA_STAGES[-1] if beta is None else beta
    return _stage_value(np.asarray(x, float), _layout(problem), problem, b, False)[0]


def gradient(x, problem: DesignProblem, stage: Optional[float] = None) -> np.ndarray:
    """Analytic gradient of :func:`objective_fp` / :func:`objective_mi`.

    ``stage`` is the penalty weight or soft-min sharpness (defaults to the
    final stage).
    """
    st = _default_stage(problem) if stage is None else stage
    return _stage_value(np.asarray(x, float), _layout(problem), problem, st, True)[1]


# -- search -----------------------------------------------------------------------


def _local_search(x0, layout, problem):
    obj = problem.objective
    stages = PENALTY_STAGES if isinstance(obj, FidelityConstrained) else BETA_STAGES
    bounds = layout.bounds()
    x = np.array(x0, dtype=float)
    n_eval = 0

    for st in stages:
        def fun(z):
            v, g = _stage_value(z, layout, problem, st, True)
            return -v, -g

        res = minimize(fun, x, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": problem.budget.max_iter, "ftol": 1e-12, "gtol": 1e-9})
        x = res.x
        n_eval += res.nfev

    if problem.budget.polish and layout.size <= 64:
        res = minimize(lambda z: -_stage_value(z, layout, problem, stages[-1], False)[0], x,
                       method="Nelder-Mead",
                       options={"maxiter": 200 * layout.size, "xatol": 1e-10, "fatol": 1e-14})
        x = res.x
        n_eval += res.nfev
    return x, n_eval


def _score(x, layout, problem):
    """Hard (unsmoothed) objective, feasibility and report recomputed from the design."""
    design = layout.to_design(x)
    w = channel_matrix(design)
    obj = problem.objective
    if isinstance(obj, FidelityConstrained):
        report = evaluate(w, problem.target)
        feasible = report.fidelity >= obj.f_min - FEASIBILITY_SLACK
        if feasible:
            value = report.success
        else:
            value = report.success - PENALTY_STAGES[-1] * (obj.f_min - report.fidelity) ** 2
    else:
        report = evaluate(w, problem.target, obj.noise)
        feasible = all(p > 0 for p in report.channel_probs)
        value = report.mi_min
    return design, report, feasible, float(value)


def _run_restart(args):
    problem, index, seed_seq, x0 = args
    layout = _layout(problem)
    if x0 is None:
        amax = INIT_AMPLITUDES[index % len(INIT_AMPLITUDES)]
        x0 = layout.random_start(np.random.default_rng(seed_seq), amax)
    x, n_eval = _local_search(x0, layout, problem)
    design, report, feasible, value = _score(x, layout, problem)
    return index, design, report, feasible, value, n_eval


def _reduce(problem, results, t0):
    best = max(results, key=lambda r: (r[3], r[4], -r[0]))
    index, design, report, feasible, value, n_eval = best
    scores = tuple(r[4] for r in sorted(results, key=lambda r: r[0]))
    return Solution(design, report, problem, bool(feasible), value, problem.budget.seed, index,
                    int(n_eval), scores, time.perf_counter() - t0)


def _map(jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_restart, jobs))
    return [_run_restart(j) for j in jobs]


def optimize(problem: DesignProblem) -> Solution:
    """Run ``budget.restarts`` independent local searches and keep the best.

    Feasible restarts always win over infeasible ones; among equals the
    highest hard objective wins. Infeasibility is reported through
    ``Solution.feasible``, never raised.
    """
    t0 = time.perf_counter()
    b = problem.budget
    seeds = np.random.SeedSequence(b.seed).spawn(b.restarts)
    jobs = [(problem, i, s, None) for i, s in enumerate(seeds)]
    results = _map(jobs, b.workers)
    sol = _reduce(problem, results, t0)
    log.info("%s Q=%d: feasible=%s value=%.6f (restart %d)", problem.target.label,
             problem.structure.n_elements, sol.feasible, sol.objective_value, sol.restart_index)
    return sol


def _pad(prior: AfpDesign, layout: ParameterLayout) -> np.ndarray:
    """Embed a shorter (or tone-poorer) design into ``layout`` with identity elements appended."""
    src = ParameterLayout(prior.grid, _structure_of(prior)).from_design(prior)
    src_layout = ParameterLayout(prior.grid, _structure_of(prior))
    if prior.n_elements > len(layout.slices):
        raise ValueError("prior design has more elements than the problem structure")
    x = np.zeros(layout.size)
    for q, sl in enumerate(src_layout.slices):
        if bool(src_layout.is_eom[q]) != bool(layout.is_eom[q]):
            raise ValueError("prior design element kinds do not match the problem structure")
        dst = layout.slices[q]
        x[dst.start:dst.start + (sl.stop - sl.start)] = src[sl]
    return x


def warm_start(problem: DesignProblem, prior: Solution) -> Solution:
    """Continue optimizing from a previous solution.

    The prior design may be shorter than ``problem.structure`` (identity
    elements are appended) or carry fewer tones. The returned objective is
    never below the prior's, evaluated on ``problem``.
    """
    t0 = time.perf_counter()
    layout = _layout(problem)
    if prior.design.grid != problem.grid:
        raise ValueError("prior solution lives on a different grid")
    if _structure_of(prior.design).regime != problem.structure.regime:
        raise ValueError("prior solution uses a different modulation regime")
    x0 = _pad(prior.design, layout)
    start = (-1,) + _score(x0, layout, problem) + (0,)
    result = _run_restart((problem, 0, None, x0))
    return _reduce(problem, [start, result], t0)


def minimum_elements(problem: DesignProblem, q_values=(1, 3, 5, 7, 9), p_min: float = 0.99):
    """Smallest element count whose optimized solution is feasible with P >= p_min.

    Returns ``(q, solution)`` or ``(None, last_solution)``. Each larger Q is
    seeded both randomly and from the previous Q's best design.
    """
    prev = None
    sol = None
    for q in q_values:
        prob = replace(problem, structure=replace(problem.structure, n_elements=q))
        sol = optimize(prob)
        if prev is not None and prev.design.n_elements < q:
            ws = warm_start(prob, prev)
            if (ws.feasible, ws.objective_value) > (sol.feasible, sol.objective_value):
                sol = ws
        if sol.feasible and sol.report.success >= p_min:
            return q, sol
        prev = sol
    return None, sol
