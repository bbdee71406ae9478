#!/usr/bin/env python3
"""Command-line front end: gen, analyze, sweep, steer, verify"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from ctrlcore import (
    EigenSolveError,
    RankMethod,
    TolerancePolicy,
    eigen_multiplicities,
    kalman_controllable,
    max_ctrl_index_gamma,
)
from exactoracle import SUITES, run_suite
from graphgen import (
    GraphKind,
    GraphSpec,
    LeaderPolicy,
    NoiseMode,
    NoiseSpec,
    Partition,
    RngStream,
    StreamPurpose,
    WeightedDigraph,
    apply_noise,
    choose_partition,
    generate_topology,
    read_edge_list,
    write_edge_list,
)
from logging_config import setup_logging
from netmodel import LeaderFollowerSystem, Representation, SingularGramianError, build_system, min_energy_steer
from sweep import RECIPES, SweepConfig, aggregate_pct, recipe, run_sweep, trend_stat, write_csv

logger = logging.getLogger(__name__)

# Exit codes
EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_BAD_ARGS = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4
EXIT_SINGULAR_GRAMIAN = 5

WORKERS_ENV = "NETCTRL_WORKERS"
STEER_DEMOS = ("scalar", "path", "example1")


class UsageError(ValueError):
    """Bad command-line arguments detected after parsing"""


def _enum_arg(enum_cls):
    """argparse type accepting enum values case-insensitively (`er`, `laplacian`, ...)"""
    lookup = {member.value.lower(): member for member in enum_cls}

    def convert(text: str):
        try:
            return lookup[text.lower()]
        except KeyError:
            raise argparse.ArgumentTypeError(
                f"expected one of {', '.join(m.value for m in enum_cls)}, got {text!r}"
            ) from None

    convert.__name__ = enum_cls.__name__
    return convert


def _default_workers() -> int:
    value = os.environ.get(WORKERS_ENV)
    if not value:
        return 1
    try:
        return max(int(value), 1)
    except ValueError:
        logger.warning(f"Ignoring non-integer {WORKERS_ENV}={value!r}")
        return 1


def _tolerance_from_args(args) -> TolerancePolicy:
    update = {}
    if args.tol_method is not None:
        update["method"] = args.tol_method
    if args.rel_tol is not None:
        update["rel_tol"] = args.rel_tol
    if args.det_threshold is not None:
        update["det_threshold"] = args.det_threshold
    return TolerancePolicy(**update)


def _add_tolerance_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tol-method", type=_enum_arg(RankMethod), default=None)
    parser.add_argument("--rel-tol", type=float, default=None)
    parser.add_argument("--det-threshold", type=float, default=None)


def _add_system_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--in", dest="input", type=Path, help="edge-list file")
    parser.add_argument("--leaders", type=int, nargs="+", help="0-based leader vertices")
    parser.add_argument("--n-leaders", type=int, default=1)
    parser.add_argument("--policy", type=_enum_arg(LeaderPolicy), default=LeaderPolicy.LAST_INDICES)
    parser.add_argument("--seed", type=int, default=None, help="seed for UniformRandom leader choice")
    parser.add_argument("--representation", type=_enum_arg(Representation), default=Representation.ADJACENCY)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netctrl", description="Controllability lab for weighted networks")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--log-dir", default=None, help="also write logs to DIR/netctrl.log")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", help="generate a (noisy) network edge list")
    gen.add_argument("--family", type=_enum_arg(GraphKind), required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--p", type=float, default=None, help="ER connection or WS rewiring probability")
    gen.add_argument("--k", type=int, default=None, help="WS neighbours per side")
    gen.add_argument("--t", type=int, default=None, help="BA added vertices")
    gen.add_argument("--m", type=int, default=None, help="BA edges per added vertex")
    gen.add_argument("--noise", type=_enum_arg(NoiseMode), default=None)
    gen.add_argument("--noise-k", type=float, default=None, help="noise coefficient")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", type=Path, required=True)

    analyze = commands.add_parser("analyze", help="controllability report for one network")
    _add_system_flags(analyze)
    _add_tolerance_flags(analyze)
    analyze.add_argument("--cluster-tol", type=float, default=None)
    analyze.add_argument("--out", type=Path, default=None, help="JSON output (stdout when omitted)")

    sweep = commands.add_parser("sweep", help="Monte Carlo sweep over the noise coefficient")
    source = sweep.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", type=Path, help="JSON SweepConfig (object or list)")
    source.add_argument("--recipe", choices=RECIPES)
    sweep.add_argument("--seed", type=int, default=None, help="overrides master_seed")
    sweep.add_argument("--trials", type=int, default=None, help="overrides trials_per_k")
    sweep.add_argument("--workers", type=int, default=None)
    _add_tolerance_flags(sweep)
    sweep.add_argument("--out", type=Path, required=True, help="CSV path; numbered per config for lists")

    steer = commands.add_parser("steer", help="minimum-energy steering of the followers to zero")
    steer.add_argument("--demo", choices=STEER_DEMOS, default=None)
    _add_system_flags(steer)
    steer.add_argument("--x0", type=str, default=None, help="comma-separated initial follower state")
    steer.add_argument("--tau", type=float, default=None)
    steer.add_argument("--steps", type=int, default=2000)
    steer.add_argument("--out", type=Path, default=None, help="trajectory CSV")

    verify = commands.add_parser("verify", help="exact-oracle agreement suites")
    verify.add_argument("--suite", choices=SUITES + ("all",), default="all")

    return parser


def _partition_from_args(g: WeightedDigraph, args) -> Partition:
    if args.leaders:
        leaders = sorted(set(args.leaders))
        if any(not 0 <= i < g.n for i in leaders) or len(leaders) >= g.n:
            raise UsageError(f"leaders must be distinct vertices in 0..{g.n - 1} leaving at least one follower")
        followers = [i for i in range(g.n) if i not in leaders]
        return Partition(tuple(followers), tuple(leaders))
    if args.policy is LeaderPolicy.UNIFORM_RANDOM and args.seed is None:
        raise UsageError("--policy UniformRandom needs --seed")
    rng = RngStream(args.seed, int(StreamPurpose.PARTITION)) if args.seed is not None else None
    return choose_partition(g, args.n_leaders, args.policy, rng)


def _load_system(args) -> LeaderFollowerSystem:
    if args.input is None:
        raise UsageError("--in is required")
    g = read_edge_list(args.input)
    return build_system(g, _partition_from_args(g, args), args.representation)


def cmd_gen(args) -> int:
    spec_fields = {"kind": args.family, "n": args.n}
    if args.p is not None:
        spec_fields["ws_p" if args.family is GraphKind.WS else "er_p"] = args.p
    for flag, name in (("k", "ws_k"), ("t", "ba_t"), ("m", "ba_m")):
        if getattr(args, flag) is not None:
            spec_fields[name] = getattr(args, flag)
    spec = GraphSpec(**spec_fields)

    g = generate_topology(spec, RngStream.for_trial(args.seed, 0, 0, StreamPurpose.TOPOLOGY))
    if args.noise is not None:
        if args.noise_k is None:
            raise UsageError("--noise needs --noise-k")
        noise = NoiseSpec(mode=args.noise, k=args.noise_k)
        g = apply_noise(g, noise, RngStream.for_trial(args.seed, 0, 0, StreamPurpose.NOISE))

    write_edge_list(g, args.out)
    print(f"n={g.n} edges={g.edge_count} seed={args.seed}")
    return EXIT_OK


def analyze_system(system: LeaderFollowerSystem, tol: TolerancePolicy,
                   cluster_tol: float | None = None) -> dict:
    """JSON-ready controllability report for a system's follower pencil"""
    report = kalman_controllable(system.F, system.G, tol)
    spectrum = eigen_multiplicities(system.F, cluster_tol, tol)
    return {
        "representation": system.representation.value,
        "followers": list(system.partition.followers) if system.partition else None,
        "leaders": list(system.partition.leaders) if system.partition else None,
        "controllable": report.controllable,
        "rank": report.rank,
        "subspace_dim": report.subspace_dim,
        "N_D": spectrum.max_geometric,
        "gamma": max_ctrl_index_gamma(system.F, tol),
        "spectrum": spectrum.model_dump(mode="json"),
        "tolerance": tol.model_dump(mode="json"),
    }


def cmd_analyze(args) -> int:
    system = _load_system(args)
    payload = analyze_system(system, _tolerance_from_args(args), args.cluster_tol)
    text = json.dumps(payload, indent=2)
    if args.out is None:
        print(text)
    else:
        args.out.write_text(text + "\n", encoding='utf-8')
        logger.info(f"Wrote analysis to {args.out}")
    return EXIT_OK


def _load_sweep_configs(args) -> list[SweepConfig]:
    if args.recipe is not None:
        if args.seed is None:
            raise UsageError("--recipe needs --seed")
        configs = recipe(args.recipe, args.seed)
    else:
        raw = json.loads(args.config.read_text(encoding='utf-8'))
        items = raw if isinstance(raw, list) else [raw]
        configs = [SweepConfig.model_validate(item) for item in items]

    update = {}
    if args.seed is not None:
        update["master_seed"] = args.seed
    if args.trials is not None:
        update["trials_per_k"] = args.trials
    if any(getattr(args, name) is not None for name in ("tol_method", "rel_tol", "det_threshold")):
        update["tol"] = _tolerance_from_args(args)
    # revalidate so overrides obey the schema too
    return [SweepConfig.model_validate({**c.model_dump(), **update}) for c in configs]


def _sweep_output_paths(out: Path, count: int) -> list[Path]:
    if count == 1:
        return [out]
    return [out.with_name(f"{out.stem}_{i}{out.suffix or '.csv'}") for i in range(count)]


def cmd_sweep(args) -> int:
    configs = _load_sweep_configs(args)
    workers = args.workers if args.workers is not None else _default_workers()
    if workers < 1:
        raise UsageError("--workers must be at least 1")

    for config, path in zip(configs, _sweep_output_paths(args.out, len(configs))):
        result = run_sweep(config, workers)
        write_csv(result, path)
        rho = trend_stat(result.rows) if len(result.rows) >= 2 else 0.0
        print(
            f"{config.graph.kind.value} {config.representation.value} {config.noise_mode.value} "
            f"n_f={config.n_followers}: spearman={rho:.4f} aggregate_pct={aggregate_pct(result):.4f} -> {path}"
        )
    return EXIT_OK


def demo_system(name: str) -> tuple[LeaderFollowerSystem, np.ndarray, float]:
    """Built-in steering demos: (system, x0, tau)"""
    if name == "scalar":
        system = LeaderFollowerSystem(Representation.ADJACENCY, F=[[0.0]], G=[[1.0]],
                                      lf_block=[[0.0]], ll_block=[[0.0]])
        return system, np.array([1.0]), 1.0
    if name == "path":
        w = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        g = WeightedDigraph(3, w)
        system = build_system(g, Partition((0, 1), (2,)), Representation.LAPLACIAN)
        return system, np.array([1.0, -1.0]), 2.0
    if name == "example1":
        # a11=1, a12=2, a21=0, a22=3, a13=1, a23=0 lies on the uncontrollable set
        system = LeaderFollowerSystem(Representation.ADJACENCY, F=[[1.0, 2.0], [0.0, 3.0]], G=[[1.0], [0.0]],
                                      lf_block=[[0.0, 0.0]], ll_block=[[0.0]])
        return system, np.array([1.0, 1.0]), 1.0
    raise UsageError(f"unknown demo {name!r}")


def cmd_steer(args) -> int:
    if args.demo is not None:
        system, x0, tau = demo_system(args.demo)
    else:
        system = _load_system(args)
        x0 = np.ones(system.n_followers)
        tau = 1.0
    if args.x0 is not None:
        try:
            x0 = np.array([float(v) for v in args.x0.split(",")])
        except ValueError:
            raise UsageError(f"--x0 must be comma-separated numbers, got {args.x0!r}") from None
    if args.tau is not None:
        tau = args.tau

    result = min_energy_steer(system, x0, tau, args.steps)
    if args.out is not None:
        result.to_csv(args.out)
        logger.info(f"Wrote trajectory to {args.out}")
    print(f"terminal_norm={result.terminal_norm:.6e}")
    return EXIT_OK


def cmd_verify(args) -> int:
    names = SUITES if args.suite == "all" else (args.suite,)
    failed = False
    for name in names:
        result = run_suite(name)
        status = "PASS" if result.passed else "FAIL"
        print(f"{name}: {status} {result.checked} checked, {len(result.mismatches)} mismatches, "
              f"{len(result.notes)} notes, {result.elapsed:.1f}s")
        for mismatch in result.mismatches:
            print(f"  {mismatch}")
        for note in result.notes:
            print(f"  note: {note}")
        failed |= not result.passed
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "analyze": cmd_analyze,
    "sweep": cmd_sweep,
    "steer": cmd_steer,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    """Parse arguments, run one command and map failures to exit codes"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging(logging.DEBUG if args.verbose else logging.INFO, args.log_dir)
    logger.info(f"Running command: {args.command}")

    try:
        return COMMANDS[args.command](args)
    except SingularGramianError as e:
        logger.error(f"Steering failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SINGULAR_GRAMIAN
    except (EigenSolveError, np.linalg.LinAlgError) as e:
        logger.error(f"Numerical solve failed: {e}")
        return EXIT_NUMERICAL
    except (ValidationError, ValueError, json.JSONDecodeError) as e:
        logger.error(f"Invalid arguments: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_ARGS
    except OSError as e:
        logger.error(f"I/O failure: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
