"""Command-line front end.

Subcommands: ``estimate``, ``strength``, ``outliers``, ``simulate``.  Machine
output is JSON or TSV; ``--format table`` renders aligned text for humans.
Every file the tool writes is accompanied by ``<file>.manifest.json``
recording the command line, input digests, seed, and tool version, enough to
re-run the step bit-identically.

Exit status: 0 on success, 2 on bad usage or invalid input, 1 on internal
error.  ``SRIVW_WORKERS`` overrides the simulation worker count.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time

import numpy as np

from . import __version__
from .diagnostics import remove_outliers
from .estimators import mv_ivw, srivw, srivw_overlap, srivw_pleiotropy
from .exceptions import SrivwError, ValidationError
from .simulate import (
    CAUSAL_PRESETS,
    SimConfig,
    individual_config,
    load_template,
    monte_carlo,
    overlap_correlation_matrix,
    summary_template,
)
from .strength import STRENGTH_THRESHOLD, strength_report
from .summary_data import TrueModel, load_correlation, load_dataset, write_dataset
from .tuning import select_phi

logger = logging.getLogger(__name__)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_path, args, inputs, config_snapshot, seed, wall_time):
    manifest = {
        "command": args.command,
        "argv": sys.argv[1:],
        "inputs": {str(p): _sha256(p) for p in inputs},
        "config": config_snapshot,
        "seed": seed,
        "tool_version": __version__,
        "wall_time_s": round(wall_time, 3),
        "output": str(out_path),
    }
    with open(f"{out_path}.manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _emit(text: str, out_path, args, inputs, config_snapshot=None, seed=None, wall=0.0):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
        _write_manifest(out_path, args, inputs, config_snapshot, seed, wall)
    else:
        sys.stdout.write(text)


def _load(args):
    data = load_dataset(args.input, args.exposures, args.correlation)
    return data


def _warn_weak(lam: float) -> None:
    if lam < STRENGTH_THRESHOLD:
        print(
            f"warning: lambda_min/sqrt(p) = {lam:.3f} is below {STRENGTH_THRESHOLD:.0f}; "
            "weak-instrument guarantees may not hold",
            file=sys.stderr,
        )


def _estimate_json(est, lam) -> str:
    payload = {
        "method": est.method,
        "beta": est.beta.tolist(),
        "se": est.se.tolist(),
        "cov": est.covariance.tolist(),
        "phi": est.phi,
        "tau2": est.tau2,
        "ci95": est.ci95().tolist(),
        "p_used": est.p_used,
        "lambda_min_over_sqrt_p": lam,
    }
    return json.dumps(payload, indent=2) + "\n"


def _estimate_table(est, lam) -> str:
    lines = [
        f"method: {est.method}    phi: {est.phi:.6g}    SNPs: {est.p_used}    "
        f"lambda_min/sqrt(p): {lam:.3f}"
    ]
    if est.tau2 is not None:
        lines.append(f"tau2: {est.tau2:.6g}")
    lines.append(f"{'exposure':>8} {'beta':>14} {'se':>14} {'ci95_low':>14} {'ci95_high':>14}")
    ci = est.ci95()
    for j in range(est.beta.shape[0]):
        lines.append(
            f"{j + 1:>8} {est.beta[j]:>14.6g} {est.se[j]:>14.6g} "
            f"{ci[j, 0]:>14.6g} {ci[j, 1]:>14.6g}"
        )
    return "\n".join(lines) + "\n"


def _cmd_estimate(args) -> int:
    t0 = time.time()
    data = _load(args)
    report = strength_report(data)
    lam = report.lambda_min_over_sqrt_p
    _warn_weak(lam)
    q_trace = None
    if args.method == "ivw":
        est = mv_ivw(data)
    else:
        mode = "plain"
        if args.pleiotropy and args.overlap:
            raise ValidationError("--pleiotropy and --overlap are mutually exclusive")
        if args.pleiotropy:
            mode = "pleiotropy"
        elif args.overlap:
            mode = "overlap"
        if args.phi is not None:
            fit = {"plain": srivw, "pleiotropy": srivw_pleiotropy, "overlap": srivw_overlap}[mode]
            est = fit(data, args.phi)
        else:
            result = select_phi(data, mode)
            est = result.selected_estimate
            q_trace = result.q_values
    if args.dump_q:
        if q_trace is None:
            raise ValidationError("--dump-q requires --tune (srivw with tuning)")
        text = "phi\tq\n" + "".join(f"{phi:.17g}\t{q:.17g}\n" for phi, q in q_trace)
        with open(args.dump_q, "w", encoding="utf-8") as fh:
            fh.write(text)
        _write_manifest(args.dump_q, args, [args.input], None, None, time.time() - t0)
    render = _estimate_json if args.format == "json" else _estimate_table
    _emit(render(est, lam), args.output, args, [args.input], wall=time.time() - t0)
    return 0


def _strength_tsv(report) -> str:
    lines = ["metric\tvalue"]
    k = report.strength_matrix.shape[0]
    for i in range(k):
        for j in range(k):
            lines.append(f"strength_matrix_{i + 1}{j + 1}\t{report.strength_matrix[i, j]:.12g}")
    lines.append(f"lambda_min\t{report.lambda_min:.12g}")
    lines.append(f"lambda_min_over_sqrt_p\t{report.lambda_min_over_sqrt_p:.12g}")
    for j, f in enumerate(report.conditional_f, start=1):
        lines.append(f"conditional_f_{j}\t{f:.12g}")
    lines.append(f"p\t{report.p}")
    return "\n".join(lines) + "\n"


def _cmd_strength(args) -> int:
    t0 = time.time()
    data = _load(args)
    report = strength_report(data)
    _warn_weak(report.lambda_min_over_sqrt_p)
    if args.format == "json":
        text = json.dumps(
            {
                "strength_matrix": report.strength_matrix.tolist(),
                "lambda_min": report.lambda_min,
                "lambda_min_over_sqrt_p": report.lambda_min_over_sqrt_p,
                "conditional_f": report.conditional_f.tolist(),
                "p": report.p,
            },
            indent=2,
        ) + "\n"
    else:
        text = _strength_tsv(report)
    _emit(text, args.output, args, [args.input], wall=time.time() - t0)
    return 0


def _cmd_outliers(args) -> int:
    t0 = time.time()
    data = _load(args)
    report0 = strength_report(data)
    _warn_weak(report0.lambda_min_over_sqrt_p)
    pruned, report = remove_outliers(data, alpha=args.alpha, max_iter=args.max_iter)
    payload = {
        "excluded_ids": report.excluded_ids,
        "threshold": report.threshold,
        "iterations": report.iterations,
        "contributions": dict(zip(data.ids, report.contributions.tolist())),
        "p_before": data.p,
        "p_after": pruned.p,
    }
    _emit(json.dumps(payload, indent=2) + "\n", args.report, args, [args.input],
          wall=time.time() - t0)
    if args.pruned:
        write_dataset(pruned, args.pruned)
        _write_manifest(args.pruned, args, [args.input], None, None, time.time() - t0)
    return 0


def _read_sim_config(args) -> tuple:
    try:
        import tomllib
    except ModuleNotFoundError:  # Python 3.10
        import tomli as tomllib
    with open(args.config, "rb") as fh:
        raw = tomllib.load(fh)
    mode = raw.get("mode", "summary")
    reps = args.reps if args.reps is not None else raw.get("reps")
    if reps is None:
        raise ValidationError("reps must be given (--reps or config)")
    estimator_tags = raw.get("estimators", ["mv_ivw", "srivw"])
    if mode == "individual":
        config = individual_config(
            reps=reps,
            seed=args.seed,
            beta0=raw.get("beta0", (1.0, -0.5, 0.5)),
            n=raw.get("n", 10_000),
            n_snps=raw.get("n_snps", 2_000),
            n_nonnull=raw.get("n_nonnull", 1_000),
            h2=raw.get("h2", 0.1),
            eta_x=raw.get("eta_x", 1.0),
            eta_y=raw.get("eta_y", 1.0),
        )
        return config, estimator_tags, raw
    preset = raw.get("causal_preset", "beta_a")
    if preset == "custom":
        beta0 = raw.get("beta0")
        if beta0 is None:
            raise ValidationError("custom causal_preset requires beta0 in the config")
    else:
        if preset not in CAUSAL_PRESETS:
            raise ValidationError(f"unknown causal_preset '{preset}'")
        beta0 = CAUSAL_PRESETS[preset]
    tau0 = float(raw.get("tau0", 0.0))
    overlap = bool(raw.get("overlap", False))
    if "template" in raw:
        k = len(beta0)
        gammas, se_x, se_y = load_template(raw["template"], k)
        if "correlation" in raw:
            corr = load_correlation(raw["correlation"], k)
        else:
            corr = np.eye(k)
        if "tau0_se_y_multiple" in raw:
            tau0 = float(raw["tau0_se_y_multiple"]) * float(np.mean(se_y))
        truth = TrueModel(
            gammas=gammas,
            se_x=se_x,
            se_y=se_y,
            beta0=np.asarray(beta0, dtype=float),
            tau0=tau0,
            shared_correlation=corr,
            overlap_correlation=(
                overlap_correlation_matrix(
                    raw.get("outcome_correlations", (-0.2, 0.5, 0.4)), corr
                ) if overlap else None
            ),
        )
    else:
        truth = summary_template(beta0, tau0=0.0, overlap=overlap)
        if "tau0_se_y_multiple" in raw:
            tau0 = float(raw["tau0_se_y_multiple"]) * float(np.mean(truth.se_y))
        if tau0:
            from dataclasses import replace
            truth = replace(truth, tau0=tau0)
    config = SimConfig(
        truth=truth,
        reps=reps,
        seed=args.seed,
        causal_preset=preset,
        strength_preset=raw.get("strength_preset", "first_weak"),
        divisor=float(raw.get("divisor", 1.0)),
        mode="summary",
    )
    return config, estimator_tags, raw


def _cmd_simulate(args) -> int:
    t0 = time.time()
    config, estimator_tags, raw = _read_sim_config(args)
    table = monte_carlo(config, estimator_tags, workers=args.workers)
    table.write(args.out)
    inputs = [args.config]
    for key in ("template", "correlation"):
        if key in raw:
            inputs.append(raw[key])
    _write_manifest(args.out, args, inputs, raw, args.seed, time.time() - t0)
    return 0


def _add_io_args(sub):
    sub.add_argument("-i", "--input", required=True, help="summary-statistics TSV")
    sub.add_argument("-k", "--exposures", required=True, type=int, help="exposure count K")
    sub.add_argument(
        "--correlation",
        help="K x K shared correlation matrix file (identity if omitted)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srivw",
        description="Multivariable MR estimation with spectral regularization",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="fit a causal-effect estimate")
    _add_io_args(est)
    est.add_argument("--method", choices=["ivw", "srivw"], required=True)
    group = est.add_mutually_exclusive_group()
    group.add_argument("--phi", type=float, help="fixed regularization value")
    group.add_argument(
        "--tune", action="store_true",
        help="select phi by Q-minimization (default for srivw)",
    )
    est.add_argument("--pleiotropy", action="store_true",
                     help="overdispersed variance for balanced pleiotropy")
    est.add_argument("--overlap", action="store_true",
                     help="sample-overlap correction (needs cov_xy columns)")
    est.add_argument("--format", choices=["json", "table"], default="table")
    est.add_argument("--dump-q", help="write the (phi, Q) tuning trace as TSV")
    est.add_argument("-o", "--output", help="write output here instead of stdout")
    est.set_defaults(func=_cmd_estimate)

    st = sub.add_parser("strength", help="instrument-strength diagnostics")
    _add_io_args(st)
    st.add_argument("--format", choices=["tsv", "json"], default="tsv")
    st.add_argument("-o", "--output", help="write output here instead of stdout")
    st.set_defaults(func=_cmd_strength)

    out = sub.add_parser("outliers", help="per-SNP heterogeneity and outlier exclusion")
    _add_io_args(out)
    out.add_argument("--alpha", type=float, default=0.05)
    out.add_argument("--max-iter", type=int, default=1)
    out.add_argument("--report", help="write the JSON report here instead of stdout")
    out.add_argument("--pruned", help="write the pruned dataset TSV here")
    out.set_defaults(func=_cmd_outliers)

    sim = sub.add_parser("simulate", help="Monte Carlo evaluation harness")
    sim.add_argument("--config", required=True, help="TOML simulation config")
    sim.add_argument("--reps", type=int, help="replications (overrides config)")
    sim.add_argument("--seed", type=int, required=True,
                     help="base seed; required for reproducibility")
    sim.add_argument("--out", required=True, help="metrics TSV output path")
    sim.add_argument("--workers", type=int,
                     help="worker processes (default from SRIVW_WORKERS)")
    sim.set_defaults(func=_cmd_simulate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SrivwError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        logger.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
