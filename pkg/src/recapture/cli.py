"""Command-line interface: fit, grid, compare, simulate."""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import count_summary
from .em import EmConfig, fit
from .errors import RecaptureError
from .io import (
    IngestConfig,
    ingest,
    load_config,
    read_counts,
    write_dataset,
    write_report,
)
from .model import BehaviorSpec, ModelSpec
from .population import population_estimate
from .selection import chao_estimate, grid_search, m0_estimate, restricted_spec
from .simulate import ConstantRate, SimulationConfig, SinusoidRate, simulate

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOCONV = 2


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("RECAPTURE_THREADS")
    return max(1, int(env)) if env else 1


def _behavior_from_args(args) -> BehaviorSpec | None:
    onset = args.c1[0] if args.c1 else 1
    expiry = args.c2[0] if args.c2 else None
    window = args.delta_b[0] if args.delta_b else None
    return BehaviorSpec(onset=onset, expiry_count=expiry, memory_window=window)


def _base_report(command: str, seed=None) -> dict:
    return {
        "schema": 1,
        "command": command,
        "timestamp": _dt.datetime.now().isoformat(),
        "seed": seed,
        "warnings": [],
    }


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _model_block(spec: ModelSpec, conditioning: str) -> dict:
    behavior = None
    if spec.behavior is not None:
        behavior = {
            "onset": spec.behavior.onset,
            "expiry_count": spec.behavior.expiry_count,
            "memory_window": spec.behavior.memory_window,
        }
    return {
        "effects": spec.flags,
        "tau": spec.tau,
        "conditioning": conditioning,
        "covariates": list(spec.covariates),
        "behavior": behavior,
    }


def _data_block(histories) -> dict:
    counts = count_summary(histories)
    return {
        "n_observed": counts.n_observed,
        "total_captures": counts.total_captures,
        "count_distribution": {str(j + 1): f for j, f in enumerate(counts.freq) if f},
    }


def _fit_block(result) -> dict:
    try:
        se = result.standard_errors()
    except Exception:
        se = {}
    params = []
    names = list(result.free_names)
    values = list(result.free_values())
    if result.spec.frailty:
        names.append("frailty_shape")
        values.append(result.params.frailty_shape)
    for name, value in zip(names, values):
        s = se.get(name)
        z = value / s if s else None
        from scipy.stats import norm

        params.append(
            {
                "name": name,
                "estimate": _num(value),
                "se": _num(s),
                "z": _num(z),
                "p": _num(2.0 * norm.sf(abs(z))) if z is not None else None,
            }
        )
    return {
        "loglik": _num(result.loglik),
        "converged": bool(result.converged),
        "n_iter": int(result.n_iter),
        "parameters": params,
    }


def _baseline_block(result) -> dict:
    if result.spec.time_varying:
        times = [float(t) for t in result.context.event_times]
        jumps = [float(j) for j in result.params.jumps]
        return {
            "type": "step",
            "times": times,
            "jumps": jumps,
            "cumulative": list(np.cumsum(jumps)),
        }
    return {
        "type": "constant",
        "level": _num(result.params.total_hazard / result.spec.tau),
        "total": _num(result.params.total_hazard),
    }


def _population_block(pop) -> dict:
    return {
        "n_observed": pop.n_observed,
        "estimate": _num(pop.estimate),
        "se": _num(pop.se),
        "var_binomial": _num(pop.var_binomial),
        "var_param": _num(pop.var_param),
        "ci_level": pop.ci_level,
        "ci_low": _num(pop.ci_low),
        "ci_high": _num(pop.ci_high),
        "catchable_fraction": pop.catchable_fraction,
        "scaled_estimate": _num(pop.scaled),
    }


def _provenance(events_path) -> dict | None:
    truth = Path(events_path).parent / "truth.json"
    if truth.exists():
        with open(truth) as fh:
            return {"simulation": json.load(fh)}
    return None


def _summary_fit(report: dict) -> str:
    lines = [f"recapture {report['command']} (schema {report['schema']})"]
    m = report["model"]
    lines.append(
        f"model effects={m['effects']} tau={m['tau']} conditioning={m['conditioning']}"
    )
    d = report["data"]
    lines.append(f"data: n={d['n_observed']} captures={d['total_captures']}")
    f = report.get("fit")
    if f:
        lines.append(
            f"loglik={f['loglik']:.6f} converged={f['converged']} sweeps={f['n_iter']}"
        )
        lines.append(f"{'parameter':<22}{'estimate':>14}{'se':>12}{'z':>10}{'p':>12}")
        for row in f["parameters"]:
            se = f"{row['se']:.4g}" if row["se"] is not None else "-"
            z = f"{row['z']:.3f}" if row["z"] is not None else "-"
            p = f"{row['p']:.3g}" if row["p"] is not None else "-"
            lines.append(
                f"{row['name']:<22}{row['estimate']:>14.6g}{se:>12}{z:>10}{p:>12}"
            )
    pop = report.get("population")
    if pop:
        lines.append(
            f"population estimate {pop['estimate']:.1f} (se {pop['se']:.1f}), "
            f"{int(pop['ci_level'] * 100)}% CI [{pop['ci_low']:.1f}, {pop['ci_high']:.1f}]"
        )
        if pop.get("scaled_estimate"):
            lines.append(
                f"scaled by catchable fraction {pop['catchable_fraction']}: "
                f"{pop['scaled_estimate']:.1f}"
            )
    grid = report.get("grid")
    if grid:
        lines.append(f"{'c1':>4}{'c2':>6}{'delta_b':>10}{'loglik':>14}{'dloglik':>12}{'N_hat':>12}")
        for row in grid:
            c2 = row["expiry_count"] if row["expiry_count"] is not None else "inf"
            db = row["memory_window"] if row["memory_window"] is not None else "inf"
            ll = f"{row['loglik']:.2f}" if row["loglik"] is not None else "-"
            dl = f"{row['delta_loglik']:.2f}" if row["delta_loglik"] is not None else "-"
            nh = f"{row['n_hat']:.0f}" if row["n_hat"] is not None else "-"
            lines.append(f"{row['onset']:>4}{c2:>6}{db:>10}{ll:>14}{dl:>12}{nh:>12}")
    cmp_ = report.get("compare")
    if cmp_:
        for name, row in sorted(cmp_.items()):
            se = f" (se {row['se']:.1f})" if row.get("se") is not None else ""
            lines.append(f"{name}: N_hat={row['estimate']:.1f}{se}")
    for w in report["warnings"]:
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"


def _load_dataset(args):
    config = load_config(args.config) if args.config else IngestConfig(tau=args.tau)
    if config.covariates and not args.subjects:
        raise RecaptureError("config declares covariates but --subjects was not given")
    histories, names, tau, warnings = ingest(
        args.events, args.subjects, config, truncate_at=args.truncate_at
    )
    return histories, names, tau, warnings


def cmd_fit(args) -> int:
    histories, names, tau, warnings = _load_dataset(args)
    base = ModelSpec(
        tau=tau,
        frailty=True,
        covariates=names,
        time_varying=True,
        behavior=_behavior_from_args(args),
    )
    spec = restricted_spec(base, args.model)
    cfg = EmConfig(
        conditioning=args.conditioning.replace("-", "_"), max_iter=args.max_iter
    )
    result = fit(histories, spec, cfg)
    report = _base_report("fit", args.seed)
    report["model"] = _model_block(spec, cfg.conditioning)
    report["data"] = _data_block(histories)
    report["fit"] = _fit_block(result)
    report["baseline"] = _baseline_block(result)
    try:
        pop = population_estimate(result, catchable_fraction=args.catchable_fraction)
        report["population"] = _population_block(pop)
    except RecaptureError as exc:
        report["population"] = None
        warnings = list(warnings) + [f"population variance unavailable: {exc}"]
    report["provenance"] = _provenance(args.events)
    report["warnings"] = list(warnings) + list(result.warnings)
    write_report(args.out, report, _summary_fit(report))
    return EXIT_OK if result.converged else EXIT_NOCONV


def cmd_grid(args) -> int:
    histories, names, tau, warnings = _load_dataset(args)
    base = ModelSpec(
        tau=tau,
        frailty=True,
        covariates=names,
        time_varying=True,
        behavior=BehaviorSpec(),
    )
    spec = restricted_spec(base, args.model)
    if spec.behavior is None:
        raise RecaptureError("grid search needs a model with the behavioral effect")
    cfg = EmConfig(
        conditioning=args.conditioning.replace("-", "_"),
        compute_information=False,
        max_iter=args.max_iter,
    )
    onsets = args.c1 or [1]
    expiries = args.c2 or [None]
    windows = args.delta_b or [None]
    result = grid_search(
        histories, spec, onsets, expiries, windows, cfg, threads=_threads(args)
    )
    report = _base_report("grid", args.seed)
    report["model"] = _model_block(spec, cfg.conditioning)
    report["data"] = _data_block(histories)
    report["grid"] = [
        {
            "onset": c.onset,
            "expiry_count": c.expiry_count,
            "memory_window": c.memory_window,
            "loglik": _num(c.loglik),
            "delta_loglik": _num(c.delta_loglik),
            "n_hat": _num(c.n_hat),
            "converged": bool(c.converged),
            "message": c.message,
        }
        for c in result.cells
    ]
    report["provenance"] = _provenance(args.events)
    report["warnings"] = list(warnings)
    write_report(args.out, report, _summary_fit(report))
    any_converged = any(c.converged for c in result.cells if c.fitted)
    return EXIT_OK if any_converged else EXIT_NOCONV


def cmd_compare(args) -> int:
    report = _base_report("compare", None)
    if args.counts:
        counts = read_counts(args.counts)
        warnings: list[str] = []
    else:
        if not args.events:
            raise RecaptureError("compare needs --counts or --events")
        config = load_config(args.config) if args.config else IngestConfig(tau=args.tau)
        bare = IngestConfig(tau=config.tau, window_start=config.window_start)
        histories, _, _, warnings = ingest(
            args.events, None, bare, truncate_at=args.truncate_at
        )
        counts = count_summary(histories)
    chao, chao_se = chao_estimate(counts)
    compare = {
        "chao_lower_bound": {"estimate": _num(chao), "se": _num(chao_se)},
    }
    try:
        m0, mu = m0_estimate(counts)
        compare["homogeneous_poisson"] = {
            "estimate": _num(m0),
            "se": None,
            "mean_captures": _num(mu),
        }
    except RecaptureError as exc:
        report["warnings"].append(f"homogeneous estimate unavailable: {exc}")
    report["compare"] = compare
    report["data"] = {
        "n_observed": counts.n_observed,
        "total_captures": counts.total_captures,
        "count_distribution": {str(j + 1): f for j, f in enumerate(counts.freq) if f},
    }
    report["warnings"] = list(report["warnings"]) + list(warnings)
    write_report(args.out, report, _summary_fit({**report, "model": {"effects": "-", "tau": 0, "conditioning": "-"}, "fit": None}))
    return EXIT_OK


def cmd_simulate(args) -> int:
    covariates = []
    coef = []
    for item in args.covariate or []:
        parts = item.split(":")
        if len(parts) < 3:
            raise RecaptureError(
                f"covariate spec {item!r}; expected name:kind:params:coef, e.g. sex:bernoulli:0.5:0.7"
            )
        name, kind, *rest = parts
        coef_val = float(rest[-1])
        params = tuple(float(x) for x in rest[:-1])
        covariates.append((name, kind, *params))
        coef.append(coef_val)
    if args.baseline_shape == "constant":
        baseline = ConstantRate(args.baseline_level)
    else:
        baseline = SinusoidRate(args.baseline_level, depth=0.5)
    behavior = None
    if args.behavior_factor != 1.0:
        behavior = _behavior_from_args(args)
    config = SimulationConfig(
        n_population=args.n_population,
        tau=args.tau,
        baseline=baseline,
        frailty_shape=args.frailty_shape,
        coef=tuple(coef),
        covariates=tuple(covariates),
        behavior_factor=args.behavior_factor,
        behavior=behavior,
        seed=args.seed if args.seed is not None else 0,
    )
    _, observed = simulate(config)
    if not observed:
        raise RecaptureError("simulation produced no captured subjects")
    names = tuple(name for name, *_ in covariates)
    out = Path(args.out)
    write_dataset(out, observed, names)
    truth = {
        "n_population": config.n_population,
        "tau": config.tau,
        "seed": config.seed,
        "frailty_shape": config.frailty_shape,
        "behavior_factor": config.behavior_factor,
        "behavior": None
        if behavior is None
        else {
            "onset": behavior.onset,
            "expiry_count": behavior.expiry_count,
            "memory_window": behavior.memory_window,
        },
        "coef": list(config.coef),
        "covariates": [list(map(str, c)) for c in config.covariates],
        "baseline": {
            "shape": args.baseline_shape,
            "level": args.baseline_level,
        },
        "n_observed": len(observed),
    }
    (out / "truth.json").write_text(json.dumps(truth, sort_keys=True, indent=2) + "\n")
    report = _base_report("simulate", config.seed)
    report["model"] = {
        "effects": config.model_spec().flags,
        "tau": config.tau,
        "conditioning": "-",
        "covariates": list(names),
        "behavior": truth["behavior"],
    }
    report["data"] = _data_block(observed)
    report["provenance"] = {"simulation": truth}
    write_report(args.out, report, _summary_fit({**report, "fit": None}))
    return EXIT_OK


def _add_common(p, with_subjects=True):
    p.add_argument("--events", required=True, help="events CSV (subject_id,time)")
    if with_subjects:
        p.add_argument("--subjects", help="subjects CSV (subject_id + covariate columns)")
    p.add_argument("--config", help="JSON config (tau, covariate transforms)")
    p.add_argument("--tau", type=float, default=1.0,
                   help="window length when no config is given")
    p.add_argument("--truncate-at", type=float, default=None,
                   help="shorten the window and drop later events")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default RECAPTURE_THREADS or 1)")
    p.add_argument("--conditioning", choices=["marginal", "per-draw", "per_draw"],
                   default="marginal")
    p.add_argument("--max-iter", type=int, default=500, help="EM sweep limit")


def _add_behavior(p):
    p.add_argument("--c1", type=int, action="append",
                   help="behavioral onset capture count (repeatable for grids)")
    p.add_argument("--c2", type=int, action="append",
                   help="behavioral expiry capture count (repeatable)")
    p.add_argument("--delta-b", type=float, action="append",
                   help="behavioral memory window (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="recapture",
        description="Continuous-time capture-recapture model fitting and "
        "population-size estimation",
    )
    parser.add_argument("--version", action="version", version=f"recapture {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit one model and estimate the population size")
    _add_common(p_fit)
    _add_behavior(p_fit)
    p_fit.add_argument("--model", default="hotb", help="effect letters (h/o/t/b) or 0")
    p_fit.add_argument("--catchable-fraction", type=float, default=None)
    p_fit.set_defaults(func=cmd_fit)

    p_grid = sub.add_parser("grid", help="fit a grid of behavioral configurations")
    _add_common(p_grid)
    _add_behavior(p_grid)
    p_grid.add_argument("--model", default="hotb")
    p_grid.set_defaults(func=cmd_grid)

    p_cmp = sub.add_parser("compare", help="count-only comparison estimators")
    p_cmp.add_argument("--counts", help="frequency table CSV (captures,frequency)")
    p_cmp.add_argument("--events", help="events CSV (alternative to --counts)")
    p_cmp.add_argument("--config", help="JSON config (tau)")
    p_cmp.add_argument("--tau", type=float, default=1.0)
    p_cmp.add_argument("--truncate-at", type=float, default=None)
    p_cmp.add_argument("--out", required=True)
    p_cmp.set_defaults(func=cmd_compare)

    p_sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--n-population", type=int, required=True)
    p_sim.add_argument("--tau", type=float, default=1.0)
    p_sim.add_argument("--baseline-shape", choices=["constant", "sinusoid"],
                       default="constant")
    p_sim.add_argument("--baseline-level", type=float, default=1.0)
    p_sim.add_argument("--frailty-shape", type=float, default=None)
    p_sim.add_argument("--behavior-factor", type=float, default=1.0)
    _add_behavior(p_sim)
    p_sim.add_argument("--covariate", action="append",
                       help="name:kind:params...:coef, e.g. sex:bernoulli:0.5:0.7")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RecaptureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
