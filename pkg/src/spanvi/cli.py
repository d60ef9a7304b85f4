"""Command-line front end: generate fixtures, solve them, verify traces, sweep.

Exit codes are a stable contract: 0 success, 2 usage or input error,
3 solver stopped at the iteration cap without converging.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import io as sio
from .analysis import (
    CheckReport,
    action_gap,
    async_contraction_certificate,
    average_contraction_certificate,
    certificate_dict,
    check_ergodic,
    contraction_certificate,
    damped_contraction_certificate,
    estimate_rate,
    iteration_bound_average,
    iteration_bound_discounted,
    lock_in_index,
    verify_async_window_contraction,
    verify_damped_window_contraction,
    verify_sandwich,
    verify_step_span_bound,
    verify_window_contraction,
)
from .generators import (
    GenerationError,
    GeneratorSpec,
    gain_normalized,
    random_ergodic_mdp,
    round_robin_schedule,
    tight_gamma_mdp,
)
from .mdp import (
    AssumptionViolation,
    CapabilityError,
    DiscountSpec,
    Mdp,
    NumericalFailure,
    average_gain_from_bias,
    exact_optimal,
    policy_matrix,
    span,
)
from .solvers import SolveTrace, SolverConfig, UpdateSchedule, solve, stopping_threshold

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NO_CONVERGENCE = 3

SWEEP_SCHEMA = "spanvi-sweep-v1"
SWEEP_COLUMNS = ["gamma", "seed", "variant", "alpha", "fitted_rate", "guaranteed_rate", "iterations", "status"]


def default_seed() -> int:
    return int(os.environ.get("SPANVI_SEED", "0"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spanvi", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a fixture JSON plus provenance sidecar")
    gen.add_argument("--n", type=int, required=True, help="number of states")
    gen.add_argument("--m", type=int, default=2, help="number of actions")
    gen.add_argument("--seed", type=int, default=None, help="PRNG seed (default: $SPANVI_SEED or 0)")
    gen.add_argument("--gamma", type=float, default=0.99)
    gen.add_argument("--density", type=float, default=0.5)
    gen.add_argument("--reward-min", type=float, default=0.0)
    gen.add_argument("--reward-max", type=float, default=1.0)
    gen.add_argument("--min-gap", type=float, default=None, help="reject instances with action gap below this")
    gen.add_argument("--tight-gamma", action="store_true", help="absorbing baseline with span rate exactly gamma")
    gen.add_argument(
        "--normalize-gain",
        action="store_true",
        help="shift rewards so the optimal average gain is zero (needs the enumeration oracle)",
    )
    gen.add_argument("--out", type=str, default=".", help="output file or directory")

    sol = sub.add_parser("solve", help="run a value-iteration variant on a fixture")
    sol.add_argument("fixture", type=str)
    sol.add_argument("--variant", choices=["sync", "sync_lr", "async_lr"], default="sync")
    sol.add_argument("--alpha", type=float, default=None, help="learning rate (required for *_lr variants)")
    sol.add_argument("--criterion", choices=["discounted", "average"], default="discounted")
    sol.add_argument("--gamma", type=float, default=None, help="override the fixture's discount")
    sol.add_argument("--eps", type=float, default=None, help="target policy accuracy; sets H automatically")
    sol.add_argument("--H", dest="threshold", type=float, default=None, help="explicit span stopping threshold")
    sol.add_argument("--max-iter", type=int, default=None)
    sol.add_argument("--repeats", type=int, default=None, help="round-robin repeats per period (async only)")
    sol.add_argument("--no-oracle", action="store_true", help="skip the exact oracle (no span_err column)")
    sol.add_argument("--out-prefix", type=str, default=None)

    ver = sub.add_parser("verify", help="re-run a recorded solve and check every applicable bound")
    ver.add_argument("fixture", type=str)
    ver.add_argument("trace", type=str, help="trace CSV written by `spanvi solve`")
    ver.add_argument("--summary", type=str, default=None, help="summary JSON (default: derived from trace path)")
    ver.add_argument("--out", type=str, default=None, help="write the report JSON here as well")

    swp = sub.add_parser("sweep", help="grid of (gamma, seed, variant, alpha) runs with fitted rates")
    swp.add_argument("--gammas", type=str, required=True, help="comma-separated discount factors")
    swp.add_argument("--variants", type=str, default="sync")
    swp.add_argument("--alphas", type=str, default="0.5", help="learning rates for *_lr variants")
    swp.add_argument("--eps", type=float, default=1e-3)
    swp.add_argument("--H", dest="threshold", type=float, default=None)
    swp.add_argument("--seeds", type=str, default=None, help="comma-separated seeds (default: $SPANVI_SEED or 0)")
    swp.add_argument("--n", type=int, default=10)
    swp.add_argument("--m", type=int, default=4)
    swp.add_argument("--density", type=float, default=0.5)
    swp.add_argument("--min-gap", type=float, default=None)
    swp.add_argument("--tight-gamma", action="store_true", help="sweep the absorbing baseline instead")
    swp.add_argument("--out-dir", type=str, required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    handlers = {
        "generate": cmd_generate,
        "solve": cmd_solve,
        "verify": cmd_verify,
        "sweep": cmd_sweep,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, AssumptionViolation, GenerationError, CapabilityError, NumericalFailure, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


def _fixture_certificate(mdp: Mdp, gamma: float) -> tuple[dict, dict]:
    """(sidecar provenance fields, printable certificate) for a fixture."""
    v_star, pi_star = exact_optimal(mdp, DiscountSpec.discounted(gamma))
    ergodic, n_mix = check_ergodic(policy_matrix(mdp, pi_star))
    gap = action_gap(mdp, gamma, v_star, pi_star)
    violations = []
    if not ergodic:
        violations.append("ergodicity")
    if gap <= 0.0:
        violations.append("unique-optimal-policy")
    if violations:
        side = {"delta": None if math.isinf(gap) else gap, "tau": None, "n_mix": n_mix, "violations": violations}
        cert = {"assumptions": {"ergodicity": ergodic, "unique_optimal_policy": gap > 0.0}, "violations": violations}
        return side, cert
    constants = contraction_certificate(mdp, gamma, (v_star, pi_star))
    cert = certificate_dict(constants)
    side = {
        "delta": None if math.isinf(constants.delta) else constants.delta,
        "tau": constants.tau,
        "n_mix": constants.n_mix,
        "violations": [],
    }
    return side, cert


def cmd_generate(args) -> int:
    seed = default_seed() if args.seed is None else args.seed
    if args.tight_gamma:
        mdp = tight_gamma_mdp(args.n, args.gamma)
        spec_fields = {"kind": "tight_gamma", "n_states": args.n, "gamma": args.gamma}
        stem = f"tight_gamma_n{args.n}_g{args.gamma}"
    else:
        gspec = GeneratorSpec(
            n_states=args.n,
            n_actions=args.m,
            seed=seed,
            density=args.density,
            reward_range=(args.reward_min, args.reward_max),
            min_gap=args.min_gap,
        )
        mdp = random_ergodic_mdp(gspec, args.gamma)
        if args.normalize_gain:
            mdp = gain_normalized(mdp)
        spec_fields = {
            "kind": "random_ergodic",
            "n_states": args.n,
            "n_actions": args.m,
            "density": args.density,
            "reward_range": [args.reward_min, args.reward_max],
            "min_gap": args.min_gap,
            "gamma": args.gamma,
            "gain_normalized": args.normalize_gain,
        }
        stem = f"mdp_n{args.n}_m{args.m}_seed{seed}_g{args.gamma}"
        if args.normalize_gain:
            stem += "_zgain"

    out = Path(args.out)
    path = out / f"{stem}.json" if out.is_dir() or not out.suffix else out
    path.parent.mkdir(parents=True, exist_ok=True)
    sio.save_mdp(path, mdp)
    side, cert = _fixture_certificate(mdp, args.gamma)
    sidecar = {"seed": None if args.tight_gamma else seed, "spec": spec_fields, **side}
    side_path = path.with_suffix(".provenance.json")
    sio.write_json(side_path, sidecar)
    print(f"fixture: {path}")
    print(f"provenance: {side_path}")
    if sidecar["violations"]:
        print(f"assumption violations: {', '.join(sidecar['violations'])}")
    else:
        print(
            f"certified: delta={side['delta']:.6g} n_mix={side['n_mix']} tau={side['tau']:.17g} "
            f"guaranteed_rate_per_iter={cert['guaranteed_rate_per_iter']:.17g}"
        )
    return EXIT_OK


def _solve_once(
    mdp: Mdp,
    spec: DiscountSpec,
    variant: str,
    alpha: float,
    threshold: float,
    max_iter: int | None,
    repeats: int | None,
    want_oracle: bool,
) -> tuple[SolveTrace, tuple[np.ndarray, np.ndarray] | None, UpdateSchedule | None]:
    oracle = None
    if want_oracle:
        try:
            oracle = exact_optimal(mdp, spec)
        except (CapabilityError, AssumptionViolation):
            oracle = None
    if max_iter is None:
        max_iter = _default_max_iterations(mdp, spec, threshold, oracle)
    schedule = None
    if variant == "async_lr":
        schedule = round_robin_schedule(mdp.n_states, repeats if repeats is not None else mdp.n_states)
    cfg = SolverConfig(
        variant=variant,
        spec=spec,
        stop_threshold=threshold,
        alpha=alpha,
        max_iterations=max_iter,
    )
    trace = solve(mdp, cfg, schedule=schedule, v_star=None if oracle is None else oracle[0])
    return trace, oracle, schedule


def _default_max_iterations(mdp, spec, threshold, oracle) -> int:
    """10x the certified iteration bound when the certificate exists, else 1e6."""
    if oracle is None:
        return 10**6
    try:
        span_e0 = span(oracle[0])  # v0 = 0, so e_0 = -v*
        if spec.criterion == "discounted":
            constants = contraction_certificate(mdp, spec.gamma, oracle)
            eps = threshold * spec.gamma / (1.0 - spec.gamma) if spec.gamma > 0 else threshold
            bound = iteration_bound_discounted(eps, spec.gamma, constants, span_e0)
        else:
            constants = average_contraction_certificate(mdp, oracle, span_e0)
            bound = iteration_bound_average(threshold, constants, span_e0)
        return max(100, 10 * bound)
    except AssumptionViolation:
        return 10**6


def cmd_solve(args) -> int:
    mdp = sio.load_mdp(args.fixture)
    gamma = args.gamma if args.gamma is not None else mdp.gamma
    if args.criterion == "discounted":
        if gamma is None:
            raise ValueError("fixture carries no gamma; pass --gamma for the discounted criterion")
        spec = DiscountSpec.discounted(gamma)
    else:
        spec = DiscountSpec.average()

    if args.threshold is not None:
        threshold = args.threshold
    elif args.eps is not None:
        threshold = stopping_threshold(spec, args.eps)
    else:
        threshold = stopping_threshold(spec, 1e-3)

    alpha = args.alpha
    if alpha is None:
        alpha = 1.0 if args.variant == "sync" else 0.5

    trace, oracle, schedule = _solve_once(
        mdp, spec, args.variant, alpha, threshold, args.max_iter, args.repeats, not args.no_oracle
    )
    prefix = args.out_prefix or str(Path(args.fixture).with_suffix("")) + f".{args.variant}"
    trace_path = Path(prefix + ".trace.csv")
    summary_path = Path(prefix + ".summary.json")
    trace_path.parent.mkdir(parents=True, exist_ok=True)
    sio.write_trace_csv(trace_path, trace)
    summary = sio.trace_summary(trace, fixture_sha256=sio.sha256_file(args.fixture))
    if schedule is not None:
        summary["config"]["schedule_repeats"] = schedule.period // mdp.n_states
    summary["fitted_rate"] = _fitted_rate(mdp, trace, spec, oracle)
    sio.write_json(summary_path, summary)
    print(f"trace: {trace_path}")
    print(f"summary: {summary_path}")
    print(f"iterations={trace.iterations} converged={trace.converged} final_span={trace.final_span:.6g}")
    if oracle is not None and trace.span_errs is not None:
        print(f"span_err_final={trace.span_errs[-1]:.6g}")
    return EXIT_OK if trace.converged else EXIT_NO_CONVERGENCE


def _fitted_rate(mdp, trace, spec, oracle) -> float | None:
    """Per-iteration geometric factor fitted post lock-in (error spans when the
    oracle is available, raw change spans otherwise)."""
    if oracle is not None and trace.span_errs is not None:
        delta = action_gap(mdp, spec.effective_gamma, *oracle)
        t_lock = lock_in_index(trace.span_errs, delta, spec.effective_gamma)
        fit = estimate_rate(trace.span_errs[t_lock:])
    else:
        fit = estimate_rate(trace.span_diffs)
    return None if fit is None else fit.rate


def cmd_verify(args) -> int:
    mdp = sio.load_mdp(args.fixture)
    summary_path = Path(args.summary) if args.summary else Path(str(args.trace).replace(".trace.csv", ".summary.json"))
    if not summary_path.exists():
        raise ValueError(f"summary not found at {summary_path}; pass --summary")
    import json

    summary = json.loads(summary_path.read_text())
    recorded_sha = summary.get("fixture_sha256")
    actual_sha = sio.sha256_file(args.fixture)
    if recorded_sha != actual_sha:
        print(f"error: fixture hash mismatch: trace was produced from {recorded_sha}, got {actual_sha}", file=sys.stderr)
        return EXIT_USAGE

    cfg = summary["config"]
    criterion = cfg["criterion"]
    spec = DiscountSpec.discounted(cfg["gamma"]) if criterion == "discounted" else DiscountSpec.average()
    variant = cfg["variant"]
    alpha = cfg["alpha"]
    threshold = cfg["stop_threshold"]
    iterations = summary["iterations"]

    try:
        oracle = exact_optimal(mdp, spec)
    except (CapabilityError, AssumptionViolation) as e:
        oracle = None
        oracle_note = str(e)

    schedule = None
    if variant == "async_lr":
        schedule = round_robin_schedule(mdp.n_states, cfg.get("schedule_repeats") or mdp.n_states)
    solver_cfg = SolverConfig(
        variant=variant,
        spec=spec,
        stop_threshold=threshold,
        alpha=alpha,
        max_iterations=max(1, iterations),
    )
    trace = solve(mdp, solver_cfg, schedule=schedule, v_star=None if oracle is None else oracle[0])

    recorded_spans = sio.read_trace_spans(args.trace)
    if len(recorded_spans) != trace.iterations or not np.allclose(
        recorded_spans, trace.span_diffs, rtol=0.0, atol=0.0
    ):
        print("error: trace CSV does not match a deterministic re-run of the recorded config", file=sys.stderr)
        return EXIT_USAGE

    checks = _applicable_checks(mdp, trace, spec, oracle, schedule)
    report = {
        "fixture": str(args.fixture),
        "trace": str(args.trace),
        "oracle_available": oracle is not None,
        "checks": [_check_dict(c) for c in checks],
        "all_hard_passed": all(c.ok for c in checks),
    }
    if oracle is None:
        report["oracle_note"] = oracle_note
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return EXIT_OK if report["all_hard_passed"] else 1


def _applicable_checks(mdp, trace, spec, oracle, schedule) -> list[CheckReport]:
    checks: list[CheckReport] = []
    if oracle is None:
        checks.append(
            CheckReport(
                name="oracle",
                hard=False,
                applicable=False,
                passed=None,
                message="exact optimum unavailable; value-error checks skipped",
            )
        )
        return checks
    g_eff = spec.effective_gamma
    checks.append(verify_step_span_bound(trace))
    span_e0 = float(trace.span_errs[0])

    constants = None
    refusal = None
    try:
        if spec.criterion == "discounted":
            constants = contraction_certificate(mdp, spec.gamma, oracle)
        else:
            constants = average_contraction_certificate(mdp, oracle, span_e0)
    except AssumptionViolation as e:
        refusal = e

    if trace.variant == "sync":
        p_star = policy_matrix(mdp, oracle[1])
        checks.append(verify_sandwich(trace, p_star, g_eff) if spec.criterion == "discounted" else _na("error-sandwich", "discounted sync only"))
        if constants is not None:
            checks.append(verify_window_contraction(trace, constants, g_eff))
        else:
            checks.append(_na("window-contraction", f"not applicable: {refusal}"))
    elif trace.variant == "sync_lr":
        p_star = policy_matrix(mdp, oracle[1])
        if spec.criterion == "discounted":
            checks.append(verify_sandwich(trace, p_star, g_eff))
        if constants is not None:
            damped = damped_contraction_certificate(mdp, g_eff, trace.alpha, constants)
            checks.append(verify_damped_window_contraction(trace, damped, g_eff))
        else:
            checks.append(_na("damped-window-contraction", f"not applicable: {refusal}"))
    else:  # async_lr
        if constants is not None and schedule is not None:
            damped = damped_contraction_certificate(mdp, g_eff, trace.alpha, constants)
            gain = average_gain_from_bias(mdp, oracle[0]) if spec.criterion == "average" else 0.0
            checks.append(
                verify_async_window_contraction(trace, damped, g_eff, schedule.period, gain=gain)
            )
        else:
            checks.append(_na("async-window-contraction", f"not applicable: {refusal}"))
    rate = estimate_rate(trace.span_errs)
    if rate is not None:
        checks.append(
            CheckReport(
                name="rate-estimate",
                hard=False,
                applicable=True,
                passed=None,
                worst_observed=rate.rate,
                message=f"fitted per-iteration rate {rate.rate:.6g} (r2={rate.fit_r2:.4f})",
            )
        )
    return checks


def _na(name: str, message: str) -> CheckReport:
    return CheckReport(name=name, hard=False, applicable=False, passed=None, message=message)


def _check_dict(c: CheckReport) -> dict:
    def clean(x):
        if isinstance(x, float) and not math.isfinite(x):
            return None
        return x

    return {
        "name": c.name,
        "hard": c.hard,
        "applicable": c.applicable,
        "passed": c.passed,
        "windows": c.windows,
        "worst_observed": clean(c.worst_observed),
        "bound": clean(c.bound),
        "message": c.message,
    }


def _parse_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip() != ""]


def _parse_ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip() != ""]


def cmd_sweep(args) -> int:
    gammas = _parse_floats(args.gammas)
    if not gammas:
        raise ValueError("empty gamma list")
    for g in gammas:
        if not (0.0 < g < 1.0):
            raise ValueError(f"sweep gammas must lie in (0, 1), got {g}")
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        if v not in ("sync", "sync_lr", "async_lr"):
            raise ValueError(f"unknown variant {v!r}")
    alphas = _parse_floats(args.alphas)
    seeds = _parse_ints(args.seeds) if args.seeds else [default_seed()]
    out_dir = Path(args.out_dir)
    (out_dir / "traces").mkdir(parents=True, exist_ok=True)

    rows = []
    ok_count = 0
    for gamma in gammas:
        for seed in seeds:
            for variant in variants:
                for alpha in [1.0] if variant == "sync" else alphas:
                    row, trace = _sweep_run(args, gamma, seed, variant, alpha)
                    rows.append(row)
                    if row["status"] == "ok":
                        ok_count += 1
                    if trace is not None:
                        name = f"trace_g{gamma}_s{seed}_{variant}_a{alpha}.csv"
                        sio.write_trace_csv(out_dir / "traces" / name, trace)

    csv_path = out_dir / "sweep.csv"
    with csv_path.open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    sio.write_json(out_dir / "sweep_meta.json", {"schema": SWEEP_SCHEMA, "columns": SWEEP_COLUMNS})
    print(f"sweep: {csv_path} ({ok_count}/{len(rows)} rows ok)")
    return EXIT_OK if ok_count >= 1 else 1


def _sweep_run(args, gamma: float, seed: int, variant: str, alpha: float):
    row = {
        "gamma": gamma,
        "seed": seed,
        "variant": variant,
        "alpha": alpha,
        "fitted_rate": "",
        "guaranteed_rate": "",
        "iterations": "",
        "status": "ok",
    }
    try:
        if args.tight_gamma:
            mdp = tight_gamma_mdp(args.n, gamma)
        else:
            gspec = GeneratorSpec(
                n_states=args.n,
                n_actions=args.m,
                seed=seed,
                density=args.density,
                min_gap=args.min_gap,
            )
            mdp = random_ergodic_mdp(gspec, gamma)
        spec = DiscountSpec.discounted(gamma)
        oracle = exact_optimal(mdp, spec)
        threshold = args.threshold if args.threshold is not None else stopping_threshold(spec, args.eps)
        schedule = round_robin_schedule(mdp.n_states, mdp.n_states) if variant == "async_lr" else None
        cfg = SolverConfig(variant=variant, spec=spec, stop_threshold=threshold, alpha=alpha, max_iterations=10**6)
        trace = solve(mdp, cfg, schedule=schedule, v_star=oracle[0])
        row["iterations"] = trace.iterations
        delta = action_gap(mdp, gamma, *oracle)
        t_lock = lock_in_index(trace.span_errs, delta, gamma)
        fit = estimate_rate(trace.span_errs[t_lock:])
        if fit is not None:
            row["fitted_rate"] = repr(fit.rate)
        try:
            constants = contraction_certificate(mdp, gamma, oracle)
            row["guaranteed_rate"] = repr(constants.guaranteed_rate_per_iter)
        except AssumptionViolation:
            pass
        if not trace.converged:
            row["status"] = "not-converged"
        return row, trace
    except Exception as e:  # per-row failure stays in the table
        row["status"] = f"error: {e}"
        return row, None


if __name__ == "__main__":
    sys.exit(main())
