"""Command-line interface: ``afpkit {design,evaluate,sweep,simulate,reproduce}``.

Exit codes: 0 success (feasible design / all checks passed), 2 infeasible
design saved or reproduction thresholds missed, 3 Monte Carlo deviation above
tolerance, 1 any error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .channel_sim import MIN_RELIABLE_SYMBOLS, validate_model
from .metrics import NoiseModel, evaluate
from .optimizer import optimize
from .reproduce import DEFAULT_MAX_N, DRIVERS, FIGURES, sweep_table
from .serialize import (ConfigError, IntegrityError, load_subject, parse_problem, read_json,
                        save_solution)

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_DEVIATION = 0, 1, 2, 3
WORKERS_ENV = "AFPKIT_WORKERS"

log = logging.getLogger("afpkit")


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def parse_mu_grid(spec: str) -> np.ndarray:
    """``log:start:stop:count``, ``lin:start:stop:count`` or a comma list."""
    spec = spec.strip()
    if not spec:
        raise ValueError("empty photon-number grid")
    if spec.startswith(("log:", "lin:")):
        kind, a, b, n = spec.split(":")
        a, b, n = float(a), float(b), int(n)
        if n < 1:
            raise ValueError("grid needs at least one point")
        if kind == "log":
            if a <= 0 or b <= 0:
                raise ValueError("photon numbers must be positive")
            grid = np.logspace(np.log10(a), np.log10(b), n)
        else:
            grid = np.linspace(a, b, n)
    else:
        grid = np.array([float(v) for v in spec.split(",") if v.strip()])
    if grid.size == 0:
        raise ValueError("empty photon-number grid")
    if np.any(grid <= 0):
        raise ValueError("photon numbers must be positive")
    return grid


def _noise(args, default):
    if getattr(args, "mu_eff", None) is not None:
        return NoiseModel.from_mu_eff(args.mu_eff)
    if getattr(args, "mu", None) is not None:
        return NoiseModel(args.mu, args.eta if args.eta is not None else 1.0,
                          args.d_elec if args.d_elec is not None else 0.0)
    if default is not None and (args.eta is not None or args.d_elec is not None):
        return NoiseModel(default.mu, args.eta if args.eta is not None else default.eta,
                          args.d_elec if args.d_elec is not None else default.d_elec)
    return default


def _format_report(report, target) -> str:
    n = target.n_channels
    out = [f"target        {target.label} ({target.scenario})",
           f"fidelity      {report.fidelity:.6f}",
           f"success       {report.success:.6f}",
           "channel_probs " + " ".join(f"{p:.5f}" for p in report.channel_probs),
           "selectivity"]
    for k in range(n):
        out.append("  " + " ".join(f"{c:.5f}" for c in report.selectivities[k]))
    if target.scenario == "hop":
        sel = [report.selectivities[k][l] for k, l in target.pairs]
        out.append(f"mean_pair_selectivity {np.nanmean(sel):.6f}")
    if report.fidelity == 0.0:
        out.append("note: fidelity is 0; W has no overlap with the target")
    if report.mi_values:
        out.append(f"mutual information at mu_eff = {report.mu_eff:g}")
        out.append("  k\tl\tbits")
        for k, l, v in report.mi_values:
            out.append(f"  {k}\t{l}\t{v:.6f}")
        out.append(f"mi_min  {report.mi_min:.6f}")
        out.append(f"mi_mean {report.mi_mean:.6f}")
    return "\n".join(out) + "\n"


def cmd_design(args) -> int:
    problem = parse_problem(read_json(args.config))
    b = problem.budget
    if args.seed is not None:
        b = replace(b, seed=args.seed)
    if args.workers is not None:
        b = replace(b, workers=args.workers)
    elif b.workers == 1:
        b = replace(b, workers=_default_workers())
    if args.restarts is not None:
        b = replace(b, restarts=args.restarts)
    problem = replace(problem, budget=b)
    sol = optimize(problem)
    save_solution(sol, args.out)
    print(_format_report(sol.report, problem.target), end="")
    if not sol.feasible:
        print(f"infeasible: no restart reached fidelity >= {problem.objective.f_min}; best saved to {args.out}")
        return EXIT_INFEASIBLE
    print(f"saved {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    subject = load_subject(args.input)
    noise = _noise(args, subject.noise)
    report = evaluate(subject.w, subject.target, noise)
    text = _format_report(report, subject.target)
    print(text, end="")
    if args.out:
        Path(args.out).write_text(text)
    return EXIT_OK


def cmd_sweep(args) -> int:
    subject = load_subject(args.input)
    grid = parse_mu_grid(args.mu_grid)
    table = sweep_table(subject.w, subject.target, grid)
    text = table.to_tsv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    return EXIT_OK


def cmd_simulate(args) -> int:
    subject = load_subject(args.input)
    noise = _noise(args, subject.noise) or NoiseModel.from_mu_eff(200.0)
    tol = args.tolerance
    if args.symbols < MIN_RELIABLE_SYMBOLS:
        tol = tol * np.sqrt(MIN_RELIABLE_SYMBOLS / args.symbols)
        print(f"warning: {args.symbols} symbols gives a noisy estimate; tolerance relaxed to {tol:.3g}",
              file=sys.stderr)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        table = validate_model(subject.w, subject.target, noise, args.symbols, args.seed)
    text = table.format() + f"\nmax_rel_dev\t{table.max_deviation:.3e}\n"
    print(text, end="")
    if args.out:
        Path(args.out).write_text(text)
    if table.max_deviation > tol:
        print(f"deviation {table.max_deviation:.3e} exceeds tolerance {tol:.3g}", file=sys.stderr)
        return EXIT_DEVIATION
    return EXIT_OK


def cmd_reproduce(args) -> int:
    if args.figure not in FIGURES:
        raise ValueError(f"unknown figure id {args.figure!r}; choose from {', '.join(FIGURES)}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    max_n = args.max_n or DEFAULT_MAX_N[args.figure]
    workers = args.workers if args.workers is not None else _default_workers()
    kw = {"max_n": max_n, "workers": workers, "seed": args.seed or 0}
    if args.figure == "fig5":
        kw["sweep_out"] = lambda tg, tab: (out / f"fig5_sweep_{tg.label.replace('^', 'p')}.tsv").write_text(tab.to_tsv())
    table = DRIVERS[args.figure](**kw)
    path = out / f"{args.figure}.tsv"
    path.write_text(table.to_tsv())
    print(table.to_tsv(), end="")
    print(f"wrote {path}")
    return EXIT_OK if table.passed else EXIT_INFEASIBLE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="afpkit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"afpkit {__version__} ({kernels.BACKEND} kernels)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", help="optimize a design from a problem config")
    d.add_argument("--config", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--seed", type=int)
    d.add_argument("--workers", type=int)
    d.add_argument("--restarts", type=int)
    d.set_defaults(func=cmd_design)

    def noise_flags(sp):
        sp.add_argument("--mu-eff", type=float)
        sp.add_argument("--mu", type=float)
        sp.add_argument("--eta", type=float)
        sp.add_argument("--d-elec", type=float)

    e = sub.add_parser("evaluate", help="print metrics for a solution or matrix file")
    e.add_argument("input")
    e.add_argument("--out")
    noise_flags(e)
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", help="tabulate MI against effective photon number")
    s.add_argument("input")
    s.add_argument("--mu-grid", default="log:1:1e5:51")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("simulate", help="Monte Carlo check of the analytic MI")
    m.add_argument("input")
    m.add_argument("--symbols", type=int, default=100_000)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--tolerance", type=float, default=0.02)
    m.add_argument("--out")
    noise_flags(m)
    m.set_defaults(func=cmd_simulate)

    r = sub.add_parser("reproduce", help="regenerate a figure's result table")
    r.add_argument("figure")
    r.add_argument("--out", default="reproduce_out")
    r.add_argument("--max-n", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
    except IntegrityError as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
