"""Command-line entry point: ``ebmtp {estimate,scan-tau,compare-weights,simulate}``.

Exit codes: 0 ok, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import functools
import logging
import os
import subprocess
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from ._parallel import default_threads
from .core import Dataset, PolicySpec, ValidationError, validate
from .diagnostics import DEFAULT_LEVELS, compare_weights, tau_scan
from .energy import DegenerateDataError
from .estimate import EstimateResult, Pipeline, make_weights, run_pipeline
from .inference import (
    BootstrapConfig,
    BootstrapError,
    influence_values,
    iqr_scale,
    multiplier_draws,
    nonparametric_bootstrap,
    wald_ci,
)
from .io import (
    ensure_dir,
    read_dataset_csv,
    read_weights_csv,
    write_column_csv,
    write_dataset_csv,
    write_json,
    write_weights_csv,
)
from .sim import DGPSpec, benchmark_policy, generate, mc_truth
from .solver import BalanceProblem, SolverOptions

logger = logging.getLogger("ebmtp")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
# execution details that must not leak into outputs
_NOT_CONFIG = {"func", "threads", "out_dir", "verbose"}


class InputError(Exception):
    pass


class NumericError(Exception):
    pass


@functools.lru_cache(maxsize=1)
def version_string() -> str:
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always"],
            cwd=here, capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _resolved_config(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIG}


def _metric(name: str) -> str:
    return "gaussian_mmd" if name == "mmd" else "energy"


def _solver_opts(args) -> SolverOptions:
    return SolverOptions(
        lam=args.lam,
        metric=_metric(args.metric),
        cap=args.cap,
        seed=args.seed,
        standardize=not args.no_standardize,
    )


def _load_data(args) -> Dataset:
    if not os.path.exists(args.data):
        raise InputError(f"data file not found: {args.data}")
    data = read_dataset_csv(args.data, args.treatment, args.outcome)
    validate(data)
    return data


def _load_policy(args) -> PolicySpec:
    if not os.path.exists(args.policy):
        raise InputError(f"policy file not found: {args.policy}")
    pol = PolicySpec.from_json(args.policy)
    if getattr(args, "tau", None) is not None:
        pol = pol.with_tau(args.tau)
    return pol


def parse_tau_grid(text: str) -> list[float]:
    """``"0,0.5,1"`` or ``"start:stop:step"`` (stop inclusive)."""
    text = text.strip()
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise InputError(f"bad tau grid {text!r}; expected start:stop:step")
        start, stop, step = parts
        k = int(np.floor((stop - start) / step + 1e-9))
        return [round(start + i * step, 12) for i in range(k + 1)]
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"bad tau grid {text!r}") from None


# -- commands ---------------------------------------------------------------


def cmd_estimate(args) -> int:
    data = _load_data(args)
    policy = _load_policy(args)
    opts = _solver_opts(args)
    pipe = Pipeline(weights=args.weights_method, estimator=args.estimator, solver=opts,
                    model_seed=args.seed)
    fit = run_pipeline(data, policy, pipe)
    wv = fit.weights
    if not wv.converged and not args.allow_nonconverged:
        raise NumericError(
            f"weight solver did not converge in {wv.iterations} iterations "
            "(use --allow-nonconverged to accept the best iterate)"
        )
    ensure_dir(args.out_dir)
    n = data.n
    level = args.level
    se_info: dict = {}
    se = ci = None
    if args.se_method in ("multiplier", "both"):
        phi = influence_values(wv, data, policy, fit.model, fit.mu_hat)
        draws = multiplier_draws(phi, BootstrapConfig(args.mult_boot_r, args.seed, level))
        sigma_half = iqr_scale(draws)
        se = sigma_half / np.sqrt(n)
        ci = wald_ci(fit.mu_hat, sigma_half, n, level)
        se_info["multiplier"] = {"R": args.mult_boot_r, "sigma_half": sigma_half, "se": se}
        if args.dump_replicates:
            write_column_csv(os.path.join(args.out_dir, "multiplier_replicates.csv"), "q", draws)
    if args.se_method in ("nonparametric", "both"):
        boot = nonparametric_bootstrap(data, policy, pipe, BootstrapConfig(args.boot_r, args.seed, level),
                                       threads=args.threads)
        se_info["nonparametric"] = {"R": args.boot_r, "se": boot.se, "nonconverged": boot.nonconverged}
        if se is None:
            se = boot.se
            ci = wald_ci(fit.mu_hat, boot.se * np.sqrt(n), n, level)
        if args.dump_replicates:
            write_column_csv(os.path.join(args.out_dir, "nonparametric_replicates.csv"), "mu_hat",
                             boot.replicates)
    result = EstimateResult(
        mu_hat=fit.mu_hat,
        method=pipe.label(),
        energy=fit.problem.report(wv.w) if opts.metric == "energy"
        else BalanceProblem.from_data(data, policy, "energy", None, opts.standardize).report(wv.w),
        n=n,
        se=se,
        ci_lower=None if ci is None else ci[0],
        ci_upper=None if ci is None else ci[1],
        level=level if ci is not None else None,
        diagnostics={
            "standard_errors": se_info,
            "solver": {
                "converged": wv.converged,
                "iterations": wv.iterations,
                "objective": wv.objective,
                "lambda": wv.lam,
            },
            "mean_y": float(np.mean(data.Y)),
            "weights_max": float(np.max(wv.w)),
        },
    )
    doc = result.to_dict()
    doc["config"] = _resolved_config(args)
    doc["policy"] = policy.to_dict()
    doc["version"] = version_string()
    write_json(os.path.join(args.out_dir, "estimate.json"), doc)
    write_weights_csv(os.path.join(args.out_dir, "weights.csv"), wv.w)
    print(f"mu_hat = {fit.mu_hat:.6g}" + ("" if ci is None else f"  {level:.0%} CI [{ci[0]:.6g}, {ci[1]:.6g}]"))
    return EXIT_OK


def cmd_scan_tau(args) -> int:
    data = _load_data(args)
    policy = _load_policy(args)
    grid = parse_tau_grid(args.tau_grid)
    if not grid:
        raise InputError("tau grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InputError("tau grid must be strictly ascending")
    if args.boot_r < 50:
        raise InputError("--boot-r must be >= 50 for thresholds")
    res = tau_scan(data, policy, grid, _solver_opts(args), R=args.boot_r, levels=DEFAULT_LEVELS,
                   seed=args.seed, threads=args.threads)
    ensure_dir(args.out_dir)
    res.write(
        os.path.join(args.out_dir, "tau_scan.csv"),
        os.path.join(args.out_dir, "tau_scan.json"),
        extra={"config": _resolved_config(args), "policy": policy.to_dict(), "version": version_string()},
    )
    for lev, tau in res.max_safe_tau.items():
        print(f"max safe tau at {lev:.3g}: {tau}")
    return EXIT_OK


def cmd_compare_weights(args) -> int:
    data = _load_data(args)
    policy = _load_policy(args)
    candidates = []
    for spec in args.weights or []:
        label, sep, path = spec.partition("=")
        if not sep:
            label, path = os.path.splitext(os.path.basename(spec))[0], spec
        if not os.path.exists(path):
            raise InputError(f"weights file not found: {path}")
        candidates.append((label, read_weights_csv(path, data.n)))
    opts = _solver_opts(args)
    builtin = [b.strip() for b in (args.builtin or "").split(",") if b.strip()]
    for name in builtin:
        if name not in ("uniform", "gps", "ebw"):
            raise InputError(f"unknown builtin weights {name!r}")
        wv = make_weights(data, policy, name, opts)
        if name == "ebw" and not wv.converged and not args.allow_nonconverged:
            raise NumericError("weight solver did not converge")
        candidates.append((name, wv.w))
    if len(candidates) < 2:
        raise InputError(f"need >= 2 candidates to compare, got {len(candidates)}")
    ranking = compare_weights(data, policy, candidates, standardize=opts.standardize)
    ensure_dir(args.out_dir)
    write_json(os.path.join(args.out_dir, "ranking.json"), {
        "ranking": [r.to_dict() for r in ranking],
        "config": _resolved_config(args),
        "policy": policy.to_dict(),
        "version": version_string(),
    })
    for r in ranking:
        print(f"{r.rank}. {r.label}  distance={r.distance:.6g}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = DGPSpec(args.n, args.p, args.complexity, args.treatment_kind, args.seed)
    policy = _load_policy(args) if args.policy else benchmark_policy(args.tau or 0.0)
    data = generate(spec)
    truth = mc_truth(spec, policy, args.mc_n)
    ensure_dir(args.out_dir)
    write_dataset_csv(os.path.join(args.out_dir, "data.csv"), data)
    write_json(os.path.join(args.out_dir, "truth.json"), {
        "truth": truth.to_dict(),
        "dgp": spec.to_dict(),
        "policy": policy.to_dict(),
        "config": _resolved_config(args),
        "version": version_string(),
    })
    print(f"wrote {spec.n} rows; mc truth = {truth.value:.6g} (mcse {truth.mcse:.2g})")
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="CSV with a header row")
    p.add_argument("--treatment", required=True, help="treatment column")
    p.add_argument("--outcome", required=True, help="outcome column")
    p.add_argument("--policy", required=True, help="policy JSON")
    p.add_argument("--tau", type=float, default=None, help="override the policy's tau")


def _solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="penalty (default 1e-4 * mean pairwise distance)")
    p.add_argument("--metric", choices=("energy", "mmd"), default="energy")
    p.add_argument("--cap", type=float, default=None, help="upper bound on each weight")
    p.add_argument("--no-standardize", action="store_true", help="use raw covariate scales")
    p.add_argument("--allow-nonconverged", action="store_true")


def _run_args(p: argparse.ArgumentParser, seed_required: bool) -> None:
    p.add_argument("--seed", type=int, required=seed_required, default=None if seed_required else 0)
    p.add_argument("--threads", type=int, default=default_threads())
    p.add_argument("--out-dir", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ebmtp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="energy balancing estimate with bootstrap CI")
    _data_args(p)
    _solver_args(p)
    _run_args(p, seed_required=True)
    p.add_argument("--weights-method", choices=("ebw", "uniform", "gps"), default="ebw")
    p.add_argument("--estimator", choices=("augmented", "weighted"), default="augmented")
    p.add_argument("--se-method", choices=("multiplier", "nonparametric", "both"), default="multiplier")
    p.add_argument("--mult-boot-r", type=int, default=1000)
    p.add_argument("--boot-r", type=int, default=100, help="nonparametric bootstrap replicates")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--dump-replicates", action="store_true")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("scan-tau", help="balance and null thresholds over a tau grid")
    _data_args(p)
    _solver_args(p)
    _run_args(p, seed_required=True)
    p.add_argument("--tau-grid", required=True, help="'0,0.5,1' or 'start:stop:step'")
    p.add_argument("--boot-r", type=int, default=1000, help="bootstrap replicates per tau")
    p.set_defaults(func=cmd_scan_tau)

    p = sub.add_parser("compare-weights", help="rank weight sets by energy distance")
    _data_args(p)
    _solver_args(p)
    _run_args(p, seed_required=False)
    p.add_argument("--weights", action="append", metavar="LABEL=CSV",
                   help="candidate weights (repeatable)")
    p.add_argument("--builtin", default=None, help="comma list from uniform,gps,ebw")
    p.set_defaults(func=cmd_compare_weights)

    p = sub.add_parser("simulate", help="draw a synthetic dataset and its Monte-Carlo truth")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--complexity", choices=("moderate", "high"), default="moderate")
    p.add_argument("--treatment-kind", choices=("continuous", "discrete"), default="continuous")
    p.add_argument("--policy", default=None, help="policy JSON (default: two-piece benchmark)")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--mc-n", type=int, default=100_000)
    _run_args(p, seed_required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (NumericError, DegenerateDataError, BootstrapError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ValidationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
