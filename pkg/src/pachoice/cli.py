"""Command-line interface.

Subcommands: simulate (one replica to CSV), ensemble (replicas + report),
theory (constants and inequality checks), oracle (exact small-n law),
urn (reinforced-walk fractions), report (re-summarize an ensemble dir).

Exit codes: 0 success, 1 runtime failure, 2 usage/configuration error.
Human output prints floats with 17 significant digits; --json switches
stdout to a machine-readable document.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .errors import ConfigError
from .harness import (
    ExperimentConfig,
    compare_counts,
    exact_distribution,
    load_config_file,
    load_ensemble_dir,
    run_ensemble,
    summarize,
)
from .process import ModelConfig, run
from .rng import RNG_ALGORITHM_ID, SplitMix64
from .stats import HubTimeline, TopKTracker
from .theory import (
    TheoryParams,
    exponent_base_bound,
    polya_urn_run,
    rate_factor_below_one,
    urn_final_fractions,
)


def _g(x: float) -> str:
    return format(x, ".17g")


def _echo_config(pairs: dict, as_json: bool) -> None:
    if not as_json:
        rendered = " ".join(f"{k}={v}" for k, v in pairs.items())
        print(f"# config: {rendered}")
        print(f"# version={__version__} rng={RNG_ALGORITHM_ID}")


def cmd_simulate(args) -> int:
    config = ModelConfig(d=args.d, rule=args.rule, horizon=args.n, k=args.k, seed=args.seed)
    pairs = {
        "rule": config.rule,
        "d": config.d,
        "n": config.horizon,
        "k": config.k,
        "seed": config.seed,
        "checkpoint_ratio": args.checkpoint_ratio,
        "out": args.out,
    }
    _echo_config(pairs, args.json)
    notice = None
    if config.rule == "max" and config.d <= 2:
        notice = (
            "d <= 2: theory reference values are undefined for this d; "
            "simulation output has no theory annotations"
        )
        if not args.json:
            print(f"# notice: {notice}")
    tracker = TopKTracker(config.k)
    timeline = HubTimeline(config.k)
    series = run(
        config,
        tracker=tracker,
        timeline=timeline,
        checkpoint_ratio=args.checkpoint_ratio,
        engine=args.engine,
    )
    series.to_csv(args.out)
    meta = {
        "version": __version__,
        "rng_algorithm": RNG_ALGORITHM_ID,
        "config": pairs,
        "notice": notice,
        "terminal": {
            "n": int(series.n[-1]),
            "M": [int(series.m(r)[-1]) for r in range(1, config.k + 1)],
            "L_k": int(series.l_k[-1]),
            "last_holder_change": list(timeline.last_holder_change),
        },
    }
    with open(args.out + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    if args.json:
        print(json.dumps(meta, indent=2))
    else:
        m_terminal = " ".join(
            f"M_{r}={int(series.m(r)[-1])}" for r in range(1, config.k + 1)
        )
        print(f"wrote {args.out} ({len(series)} checkpoints); terminal: {m_terminal}")
    return 0


def cmd_ensemble(args) -> int:
    overrides = {
        "rule": args.rule,
        "d": args.d,
        "k": args.k,
        "horizon": args.horizon,
        "replicas": args.replicas,
        "seed": args.seed,
        "checkpoint_ratio": args.checkpoint_ratio,
        "window_lo": args.window_lo,
        "window_hi": args.window_hi,
        "out_dir": args.out_dir,
    }
    if args.config is not None:
        config = load_config_file(args.config, overrides)
    else:
        values = {k: v for k, v in overrides.items() if v is not None}
        if "d" not in values:
            raise ConfigError("--d is required when no --config file is given")
        config = ExperimentConfig(**values)
    if args.workers is not None:
        config = ExperimentConfig(**{**_config_kwargs(config), "workers": args.workers})
    _echo_config(config.echo(), args.json)
    result = run_ensemble(config)
    if args.json:
        print(json.dumps(result.report.to_json_dict(), indent=2))
    else:
        print(result.report.to_text(), end="")
    return 0


def _config_kwargs(config: ExperimentConfig) -> dict:
    return {
        "d": config.d,
        "rule": config.rule,
        "k": config.k,
        "horizon": config.horizon,
        "replicas": config.replicas,
        "seed": config.seed,
        "checkpoint_ratio": config.checkpoint_ratio,
        "window_lo": config.window_lo,
        "window_hi": config.window_hi,
        "out_dir": config.out_dir,
        "oracle_n_max": config.oracle_n_max,
        "workers": config.workers,
    }


def cmd_theory(args) -> int:
    if args.d <= 2:
        raise ConfigError(
            "theory requires d > 2: for d = 2 the fixed-point equation "
            "1-(1-x/2)^2 = x reduces to -x^2/4 = 0, whose only root in "
            "[0, 1] is the degenerate x = 0"
        )
    params = TheoryParams.for_d(args.d, delta=args.delta)
    checks = {
        "exponent_base_bound": exponent_base_bound(args.d),
        "x_star_in_bracket": bool(1 - 1 / args.d < params.x_star < 1),
        "rate_factor_below_one_at_c": rate_factor_below_one(params.c, args.d, 10_000),
    }
    if args.json:
        print(
            json.dumps(
                {
                    "d": params.d,
                    "x_star": params.x_star,
                    "c": params.c,
                    "alpha": params.alpha,
                    "gamma_lower": params.gamma_lower,
                    "delta": params.delta,
                    "checks": checks,
                },
                indent=2,
            )
        )
    else:
        _echo_config({"d": args.d, "delta": args.delta}, False)
        print(f"x_star = {_g(params.x_star)}")
        print(f"c = {_g(params.c)}")
        print(f"alpha = {_g(params.alpha)}")
        print(f"gamma_lower = {_g(params.gamma_lower)} (delta = {_g(params.delta)})")
        for name, ok in checks.items():
            print(f"check {name}: {'pass' if ok else 'FAIL'}")
    return 0


def cmd_oracle(args) -> int:
    dist = exact_distribution(args.d, args.n, k=args.k, rule=args.rule)
    m1 = sorted(dist.m_marginal(1).items())
    comparison = None
    if args.mc_replicas:
        from .harness import mc_signature_counts

        counts = mc_signature_counts(
            args.d, args.n, args.mc_replicas, args.seed, rule=args.rule, ranks=args.k
        )
        comparison = compare_counts(counts, dist.signature_distribution(ranks=args.k))
    if args.json:
        doc = {
            "d": args.d,
            "n": args.n,
            "k": args.k,
            "rule": args.rule,
            "M_1_marginal": {str(v): str(p) for v, p in m1},
            "signatures": {
                " ".join(map(str, sig)): str(p)
                for sig, p in sorted(dist.signature_distribution().items())
            },
        }
        if comparison is not None:
            doc["mc_comparison"] = {
                "replicas": comparison.n_samples,
                "tv_distance": comparison.tv_distance,
                "chi2_p": comparison.chi2_p,
            }
        print(json.dumps(doc, indent=2))
    else:
        _echo_config({"d": args.d, "n": args.n, "k": args.k, "rule": args.rule}, False)
        for value, p in m1:
            print(f"P(M_1({args.n}) = {value}) = {p}")
        if comparison is not None:
            print(
                f"mc comparison ({comparison.n_samples} replicas): "
                f"TV = {_g(comparison.tv_distance)}, chi2 p = {_g(comparison.chi2_p)}"
            )
    return 0


def cmd_urn(args) -> int:
    _echo_config(
        {"a": args.a, "b": args.b, "steps": args.steps, "replicas": args.replicas, "seed": args.seed},
        args.json,
    )
    if args.replicas == 1:
        fraction = polya_urn_run(args.a, args.b, args.steps, SplitMix64(args.seed))
        if args.json:
            print(json.dumps({"fraction": fraction}))
        else:
            print(f"terminal fraction = {_g(fraction)}")
        return 0
    fractions = urn_final_fractions(args.a, args.b, args.steps, args.replicas, args.seed)
    summary = {
        "replicas": args.replicas,
        "steps": args.steps,
        "mean": float(fractions.mean()),
        "std": float(fractions.std(ddof=1)) if args.replicas > 1 else 0.0,
        "beta_mean": args.a / (args.a + args.b),
    }
    if args.json:
        print(json.dumps(summary, indent=2))
    else:
        print(
            f"mean fraction = {_g(summary['mean'])} (std {_g(summary['std'])}; "
            f"Beta mean {_g(summary['beta_mean'])})"
        )
    return 0


def cmd_report(args) -> int:
    config, results = load_ensemble_dir(args.dir)
    report = summarize(results, config)
    if args.json:
        print(json.dumps(report.to_json_dict(), indent=2))
    else:
        print(report.to_text(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pachoice",
        description="Max-choice preferential-attachment tree: simulate and verify.",
    )
    parser.add_argument("--version", action="version", version=f"pachoice {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one replica and write its checkpoint CSV")
    p.add_argument("--d", type=int, required=True, help="candidates sampled per step")
    p.add_argument("--rule", choices=["max", "min", "plain"], default="max")
    p.add_argument("--n", type=int, required=True, help="horizon (final step count)")
    p.add_argument("--k", type=int, default=3, help="tracked ranks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--checkpoint-ratio", type=float, default=1.05)
    p.add_argument("--engine", choices=["jit", "python"], default="jit")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ensemble", help="run replicas and write CSVs plus a report")
    p.add_argument("--config", help="key=value config file; flags override")
    p.add_argument("--rule", choices=["max", "min", "plain"])
    p.add_argument("--d", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--checkpoint-ratio", dest="checkpoint_ratio", type=float)
    p.add_argument("--window-lo", dest="window_lo", type=int)
    p.add_argument("--window-hi", dest="window_hi", type=int)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--workers", type=int)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("theory", help="print x*, c, alpha and inequality checks")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("oracle", help="exact small-n law; optional MC comparison")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True, help="steps to enumerate (<= 8)")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--rule", choices=["max", "min", "plain"], default="max")
    p.add_argument("--mc-replicas", dest="mc_replicas", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("urn", help="reinforced-urn terminal fractions")
    p.add_argument("--a", type=int, required=True)
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_urn)

    p = sub.add_parser("report", help="re-summarize an ensemble output directory")
    p.add_argument("--dir", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        # bad flag values and out-of-domain requests are usage errors
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1


if __name__ == "__main__":
    sys.exit(main())
