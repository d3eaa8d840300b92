"""JSON persistence for problem configs, solutions and raw matrix files.

Complex matrices are nested lists of ``[re, im]`` pairs. Floats are written
with Python's shortest round-trip repr, so a load/save cycle is bit-exact.
"""

from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .afp_model import AfpDesign, Arbitrary, Eom, Shaper, Tonal, Tone, channel_matrix
from .metrics import MetricReport, NoiseModel, evaluate
from .optimizer import (Budget, DesignProblem, FidelityConstrained, MaxMinMutualInfo, Solution,
                        Structure)
from .spectral_core import ModeGrid
from .targets import TargetTransform, custom_target, dft_target, permutation_power

SCHEMA_VERSION = 1
METRIC_TOLERANCE = 1e-9

__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "IntegrityError",
    "Subject",
    "matrix_to_json",
    "matrix_from_json",
    "parse_problem",
    "problem_to_config",
    "solution_to_dict",
    "solution_from_dict",
    "save_solution",
    "load_solution",
    "load_subject",
    "read_json",
]


class ConfigError(ValueError):
    """Malformed config; ``field`` names the offending entry (dotted path)."""

    def __init__(self, field: str, message: str):
        super().__init__(message if message.startswith(field) else f"{field}: {message}")
        self.field = field


class IntegrityError(ValueError):
    """Stored metrics disagree with metrics recomputed from the stored design."""


def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError("matrix must be a 2-D array of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def read_json(path) -> Any:
    with open(path) as fh:
        return json.load(fh)


def _write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


# -- pieces ---------------------------------------------------------------------


def _get(d: dict, key: str, path: str, default=Ellipsis):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    if key not in d:
        if default is Ellipsis:
            raise ConfigError(f"{path}.{key}" if path else key, "missing")
        return default
    return d[key]


def _int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return int(value)


def _float(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def target_to_dict(t: TargetTransform) -> dict:
    if t.label.startswith("S") and t.scenario == "hop" and "^" in t.label:
        return {"kind": "hop", "n_channels": t.n_channels, "power": int(t.label.split("^")[1])}
    if t.label == f"F{t.n_channels}" and t.scenario == "broadcast":
        return {"kind": "dft", "n_channels": t.n_channels}
    return {"kind": "custom", "matrix": matrix_to_json(t.matrix), "pairs": [list(p) for p in t.pairs],
            "scenario": t.scenario, "label": t.label}


def parse_target(d, path="target") -> TargetTransform:
    kind = _get(d, "kind", path)
    try:
        if kind == "hop":
            return permutation_power(_int(_get(d, "n_channels", path), f"{path}.n_channels"),
                                     _int(_get(d, "power", path), f"{path}.power"))
        if kind == "dft":
            return dft_target(_int(_get(d, "n_channels", path), f"{path}.n_channels"))
        if kind == "custom":
            m = matrix_from_json(_get(d, "matrix", path))
            return custom_target(m, _get(d, "pairs", path), _get(d, "scenario", path, "hop"),
                                 _get(d, "label", path, "custom"))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.kind", f"unknown target kind {kind!r}")


def parse_grid(d, n_channels: int, path="grid") -> ModeGrid:
    d = {} if d is None else d
    m = _int(_get(d, "m_total", path, 128), f"{path}.m_total")
    s = _int(_get(d, "shaper_support", path, 32), f"{path}.shaper_support")
    offset = _get(d, "offset", path, "center")
    if offset == "center":
        offset = (m - n_channels) // 2
    else:
        offset = _int(offset, f"{path}.offset")
    try:
        return ModeGrid(m, n_channels, offset, s)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def parse_structure(d, path="structure") -> Structure:
    q = _int(_get(d, "Q", path), f"{path}.Q")
    if q < 1:
        raise ConfigError(f"{path}.Q", "structure.Q must be >= 1")
    regime = _get(d, "regime", path, "arbitrary")
    if regime not in ("arbitrary", "tonal"):
        raise ConfigError(f"{path}.regime", f"unknown regime {regime!r}")
    tones = _int(_get(d, "tones", path, 1), f"{path}.tones")
    allow_even = bool(_get(d, "allow_even", path, False))
    try:
        return Structure(q, regime, tones, allow_even)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def parse_noise(d, path) -> NoiseModel:
    try:
        return NoiseModel(_float(_get(d, "mu", path), f"{path}.mu"),
                          _float(_get(d, "eta", path, 1.0), f"{path}.eta"),
                          _float(_get(d, "d_elec", path, 0.0), f"{path}.d_elec"))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def parse_objective(d, path="objective"):
    kind = _get(d, "kind", path)
    if kind == "fp":
        f_min = _float(_get(d, "f_min", path, 0.99), f"{path}.f_min")
        if not 0 < f_min < 1:
            raise ConfigError(f"{path}.f_min", "must lie in (0, 1)")
        return FidelityConstrained(f_min)
    if kind == "mi":
        return MaxMinMutualInfo(parse_noise(d, path))
    raise ConfigError(f"{path}.kind", f"unknown objective kind {kind!r}")


def parse_budget(d, path="budget") -> Budget:
    d = {} if d is None else d
    restarts = _int(_get(d, "restarts", path, 32), f"{path}.restarts")
    iterations = _int(_get(d, "iterations", path, 2000), f"{path}.iterations")
    seed = _int(_get(d, "seed", path, 0), f"{path}.seed")
    workers = _int(_get(d, "workers", path, 1), f"{path}.workers")
    if restarts < 1:
        raise ConfigError(f"{path}.restarts", "must be >= 1")
    if iterations < 1:
        raise ConfigError(f"{path}.iterations", "must be >= 1")
    return Budget(restarts, iterations, seed, max(1, workers), bool(_get(d, "polish", path, False)))


def parse_problem(config: dict) -> DesignProblem:
    if not isinstance(config, dict):
        raise ConfigError("", "config must be a JSON object")
    version = config.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version!r}")
    target = parse_target(_get(config, "target", ""))
    grid = parse_grid(config.get("grid"), target.n_channels)
    structure = parse_structure(_get(config, "structure", ""))
    objective = parse_objective(_get(config, "objective", ""))
    budget = parse_budget(config.get("budget"))
    return DesignProblem(target, grid, structure, objective, budget)


def problem_to_config(p: DesignProblem) -> dict:
    obj = p.objective
    if isinstance(obj, FidelityConstrained):
        objective = {"kind": "fp", "f_min": obj.f_min}
    else:
        objective = {"kind": "mi", **obj.noise.to_dict()}
    s, b = p.structure, p.budget
    return {
        "schema_version": SCHEMA_VERSION,
        "target": target_to_dict(p.target),
        "grid": {"m_total": p.grid.m_total, "shaper_support": p.grid.shaper_support,
                 "offset": p.grid.channel_offset},
        "structure": {"Q": s.n_elements, "regime": s.regime, "tones": s.tones,
                      "allow_even": s.allow_even},
        "objective": objective,
        "budget": {"restarts": b.restarts, "iterations": b.max_iter, "seed": b.seed,
                   "workers": b.workers, "polish": b.polish},
    }


def design_to_dict(d: AfpDesign) -> dict:
    elements = []
    for e in d.elements:
        if isinstance(e, Shaper):
            elements.append({"kind": "shaper", "phases": list(e.phases)})
        elif isinstance(e.modulation, Arbitrary):
            elements.append({"kind": "eom", "modulation": "arbitrary", "phases": list(e.modulation.phases)})
        else:
            elements.append({"kind": "eom", "modulation": "tonal",
                             "tones": [[t.harmonic, t.amplitude, t.phase] for t in e.modulation.tones]})
    return {"grid": d.grid.to_dict(), "allow_even": d.allow_even, "elements": elements}


def design_from_dict(d: dict) -> AfpDesign:
    elements = []
    for e in d["elements"]:
        if e["kind"] == "shaper":
            elements.append(Shaper(e["phases"]))
        elif e["modulation"] == "arbitrary":
            elements.append(Eom(Arbitrary(e["phases"])))
        else:
            elements.append(Eom(Tonal(tuple(Tone(int(h), a, p) for h, a, p in e["tones"]))))
    return AfpDesign(tuple(elements), ModeGrid.from_dict(d["grid"]), bool(d.get("allow_even", False)))


# -- solutions ------------------------------------------------------------------------


def solution_to_dict(sol: Solution) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "solution",
        "created": {"utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
                    "afpkit": __version__},
        "problem": problem_to_config(sol.problem),
        "design": design_to_dict(sol.design),
        "matrix": matrix_to_json(channel_matrix(sol.design)),
        "report": sol.report.to_dict(),
        "feasible": sol.feasible,
        "objective_value": sol.objective_value,
        "provenance": {"seed": sol.seed, "restart_index": sol.restart_index,
                       "trace_length": sol.trace_length,
                       "restart_scores": list(sol.restart_scores), "wall_time": sol.wall_time},
    }


def _report_for(design: AfpDesign, problem: DesignProblem) -> MetricReport:
    w = channel_matrix(design)
    noise = problem.objective.noise if isinstance(problem.objective, MaxMinMutualInfo) else None
    return evaluate(w, problem.target, noise)


def _compare_reports(stored: MetricReport, fresh: MetricReport, tol: float = METRIC_TOLERANCE):
    a, b = stored.to_dict(), fresh.to_dict()

    def walk(x, y, key):
        if isinstance(x, list) and isinstance(y, list):
            if len(x) != len(y):
                raise IntegrityError(f"{key}: length mismatch")
            for i, (u, v) in enumerate(zip(x, y)):
                walk(u, v, f"{key}[{i}]")
        elif x is None or y is None:
            if x is not y:
                raise IntegrityError(f"{key}: stored {x!r}, recomputed {y!r}")
        else:
            if np.isnan(x) and np.isnan(y):
                return
            if not abs(x - y) <= tol:
                raise IntegrityError(f"{key}: stored {x!r}, recomputed {y!r}")

    for key in a:
        walk(a[key], b[key], key)


def solution_from_dict(d: dict, verify: bool = True) -> Solution:
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {d.get('schema_version')!r}")
    if d.get("kind") != "solution":
        raise ValueError("not a solution file")
    problem = parse_problem(d["problem"])
    design = design_from_dict(d["design"])
    stored = MetricReport.from_dict(d["report"])
    if verify:
        _compare_reports(stored, _report_for(design, problem))
    prov = d.get("provenance", {})
    return Solution(design, stored, problem, bool(d["feasible"]), float(d["objective_value"]),
                    int(prov.get("seed", 0)), int(prov.get("restart_index", 0)),
                    int(prov.get("trace_length", 0)), tuple(prov.get("restart_scores", ())),
                    float(prov.get("wall_time", 0.0)))


def save_solution(sol: Solution, path) -> None:
    _write_json(solution_to_dict(sol), path)


def load_solution(path, verify: bool = True) -> Solution:
    return solution_from_dict(read_json(path), verify)


@dataclass
class Subject:
    """Something to evaluate: a channel matrix, its target, and optional defaults."""

    w: np.ndarray
    target: TargetTransform
    noise: Optional[NoiseModel] = None
    solution: Optional[Solution] = None


def load_subject(path, verify: bool = True) -> Subject:
    """Read either a solution file or a raw matrix file.

    A raw matrix file holds ``"target"`` plus either ``"matrix"`` (``[re, im]``
    pairs) or ``"abs2"`` (squared moduli, taken with zero phase), and
    optionally ``"noise"``.
    """
    d = read_json(path)
    if not isinstance(d, dict):
        raise ValueError("expected a JSON object")
    if d.get("kind") == "solution":
        sol = solution_from_dict(d, verify)
        obj = sol.problem.objective
        noise = obj.noise if isinstance(obj, MaxMinMutualInfo) else None
        return Subject(channel_matrix(sol.design), sol.problem.target, noise, sol)
    if d.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {d.get('schema_version')!r}")
    target = parse_target(d.get("target"))
    if "matrix" in d:
        w = matrix_from_json(d["matrix"])
    elif "abs2" in d:
        w = np.sqrt(np.asarray(d["abs2"], dtype=float)).astype(complex)
    else:
        raise ValueError("matrix file needs 'matrix' or 'abs2'")
    if w.shape != target.matrix.shape:
        raise ValueError(f"matrix shape {w.shape} does not match target {target.matrix.shape}")
    noise = parse_noise(d["noise"], "noise") if "noise" in d else None
    return Subject(w, target, noise)


def reference_path(name: str = "reference_hop3_mu200.json") -> Path:
    """Path of a bundled reference matrix file."""
    path = Path(__file__).parent / "data" / name
    if not path.exists():
        raise FileNotFoundError(f"no bundled reference {name!r}")
    return path
