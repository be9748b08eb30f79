"""
Command-line entry point: bench, scale, evolve and plan.

Exit status is 0 on success (frames without a collision-free path included),
2 on precondition or validation failures and 3 on I/O failures.
"""

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from swarmforge import __version__
from swarmforge.benchmarks import BENCHMARK_SPECS, get_benchmark
from swarmforge.core.config import config
from swarmforge.core.errors import InsufficientMemoryError, MissingHypersError, SwarmForgeError
from swarmforge.core.hsef import (
    EVOLVE_HINT,
    HypersDocument,
    InnerBudget,
    OuterBudget,
    evolve,
    load_hypers,
    save_hypers,
)
from swarmforge.core.planner import VARIANTS, PathProblem, PlannerConfig
from swarmforge.core.runner import (
    ClassicSwarm,
    FitnessProblem,
    ParticleLoopSwarm,
    RunReport,
    TensorSwarm,
    run_algorithm,
)
from swarmforge.core.swarm import HyperMatrix, derive_seed
from swarmforge.data.artifacts import (
    RunManifest,
    ensure_dir,
    write_csv,
    write_json,
    write_jsonl,
    write_timing,
)
from swarmforge.data.database import DatabaseManager
from swarmforge.render.charts import (
    create_evolution_chart,
    create_fitness_curve_chart,
    create_frame_metrics_chart,
    save_chart,
)
from swarmforge.render.svg import save_frame
from swarmforge.simenv import ScenarioConfig, generate_world, resolve_variant_hypers, run_scenario

EXIT_OK = 0
EXIT_PRECONDITION = 2
EXIT_IO = 3

ALGORITHMS = ("pso", "dppso", "dtpso", "sepso")
SCALE_DTYPES = ("float64", "float32")
# x, v, pbest, the velocity temporary and two clip temporaries
SCALE_TENSOR_COPIES = 6


def setup_logging(level: str = "INFO", log_file: Optional[Path] = None):
    """Setup logging configuration"""
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file is not None:
        handlers.insert(0, logging.FileHandler(log_file))
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return number


def non_negative_int(value: str) -> int:
    number = int(value)
    if number < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return number


class RunContext:
    """Output directory, manifest and ledger bookkeeping for one invocation"""

    def __init__(self, subcommand: str, args: argparse.Namespace, argv: Sequence[str]):
        root = Path(config.get("output.root", "runs"))
        self.out_dir = ensure_dir(Path(args.out) if args.out else root / subcommand)
        self.use_ledger = not args.no_ledger
        self.started = time.perf_counter()
        self.summary_rows: List[Dict[str, Any]] = []
        self.summary_subject = "problem"
        self.summary_value = "median_final"
        self.manifest = RunManifest(
            subcommand=subcommand,
            argv=list(argv),
            config=config.snapshot(),
            seeds={"root": int(args.seed)},
            tool_version=__version__,
            out_dir=str(self.out_dir),
        )

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def record(self, *paths: Optional[Path]):
        for path in paths:
            if path is not None:
                self.manifest.add_output(path)

    def finish(self, status: str = "ok"):
        self.manifest.timing["total_seconds"] = time.perf_counter() - self.started
        self.manifest.finish(status)
        self.manifest.add_output(self.path("manifest.json"))
        self.manifest.write()
        if self.use_ledger:
            db = DatabaseManager()
            run_id = db.store_manifest(self.manifest)
            if run_id is not None and self.summary_rows:
                db.store_summaries(run_id, self.summary_rows, self.summary_subject, self.summary_value)


def _make_algorithm(algo: str, problem: FitnessProblem, hypers: Optional[HyperMatrix], particles: int,
                    pso_particles: int):
    if algo == "pso":
        return ClassicSwarm(problem, pso_particles)
    if algo == "dppso":
        return ParticleLoopSwarm(problem, hypers, hypers.groups, particles)
    return TensorSwarm(problem, hypers, hypers.groups, particles)


def _bench_trial(task) -> RunReport:
    algo, problem, hypers, particles, pso_particles, iterations, seed = task
    report = run_algorithm(_make_algorithm(algo, problem, hypers, particles, pso_particles), iterations, seed)
    if algo == "sepso":
        report = replace(report, algorithm="sepso")
    return report


def _map(fn, tasks: List[Any], jobs: int) -> List[Any]:
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(task) for task in tasks]


def _bench_hypers(algo: str, hypers_file: Optional[str]) -> Optional[HyperMatrix]:
    if algo == "pso":
        return None
    if algo == "sepso":
        if not hypers_file:
            raise MissingHypersError(
                f"--algo sepso needs an evolved hyper-parameter file (--hypers). Produce one with `{EVOLVE_HINT}`"
            )
        return load_hypers(hypers_file)
    if hypers_file:
        raise ValueError(f"--hypers is only accepted with --algo sepso, not {algo}")
    return HyperMatrix.preset(config.get("swarm.hypers_preset", "table8"))


def cmd_bench(args: argparse.Namespace, ctx: RunContext) -> int:
    """Repeated independent trials per benchmark; traces, summary and timing"""
    hypers = _bench_hypers(args.algo, args.hypers)
    dimension = args.dimension or config.get("benchmarks.dimension", 30)
    trials = args.trials or config.get("benchmarks.trials", 50)
    iterations = args.iters or config.get("swarm.iterations", 1400)
    particles = config.get("swarm.particles_per_group", 10)
    pso_particles = config.get("benchmarks.pso_particles", 80)
    problems = [get_benchmark(p, dimension) for p in (args.problem or sorted(BENCHMARK_SPECS))]

    timing_rows = []
    for problem in problems:
        tasks = [
            (args.algo, problem, hypers, particles, pso_particles, iterations,
             derive_seed(args.seed, problem.name, trial))
            for trial in range(trials)
        ]
        logging.info(f"Running {trials} {args.algo} trials on {problem.name} "
                     f"(D={dimension}, T={iterations}, jobs={args.jobs})")
        reports: List[RunReport] = _map(_bench_trial, tasks, args.jobs)

        rows = []
        for trial, report in enumerate(reports):
            row = report.to_dict(include_timing=False)
            row["trial"] = trial
            rows.append(row)
        ctx.record(write_jsonl(ctx.path(f"traces_{problem.name}.jsonl"), rows))
        ctx.record(write_csv(ctx.path(f"traces_{problem.name}.csv"), [
            {"trial": trial, "iteration": k + 1, "best_fitness": value}
            for trial, report in enumerate(reports)
            for k, value in enumerate(report.trace)
        ]))

        finals = np.array([r.best_f for r in reports])
        ctx.summary_rows.append({
            "problem": problem.name,
            "function": problem.spec.name,
            "algorithm": args.algo,
            "trials": trials,
            "iterations": iterations,
            "dimension": dimension,
            "median_final": float(np.median(finals)),
            "min_final": float(finals.min()),
            "max_final": float(finals.max()),
            "mean_final": float(finals.mean()),
        })
        walls = np.array([r.wall_seconds for r in reports])
        timing_rows.append({
            "problem": problem.name,
            "algorithm": args.algo,
            "trials": trials,
            "mean_wall_seconds": float(walls.mean()),
            "total_wall_seconds": float(walls.sum()),
        })
        ctx.record(save_chart(
            create_fitness_curve_chart({args.algo: [r.trace for r in reports]},
                                       f"{problem.spec.name} ({problem.name}), {trials} trials"),
            ctx.path(f"curves_{problem.name}.html"),
        ))
        logging.info(f"{problem.name}: median final {np.median(finals):.6g}, mean wall {walls.mean():.3f}s")

    ctx.record(write_csv(ctx.path("summary.csv"), ctx.summary_rows))
    ctx.record(write_json(ctx.path("summary.json"), ctx.summary_rows))
    ctx.record(*write_timing(ctx.out_dir, timing_rows))
    return EXIT_OK


def available_memory_bytes() -> Optional[int]:
    try:
        return os.sysconf("SC_AVPHYS_PAGES") * os.sysconf("SC_PAGE_SIZE")
    except (AttributeError, ValueError, OSError):
        return None


def check_memory(particles: int, dimension: int, available: Optional[int] = None, itemsize: int = 8):
    required = SCALE_TENSOR_COPIES * particles * dimension * itemsize
    available = available_memory_bytes() if available is None else available
    if available is not None and required > available:
        raise InsufficientMemoryError(required, available)
    return required


def cmd_scale(args: argparse.Namespace, ctx: RunContext) -> int:
    """Time the tensor update against the per-particle loop over identical work"""
    hypers = HyperMatrix.preset("table8")
    groups = hypers.groups
    if args.particles % groups:
        raise ValueError(f"--particles must be a multiple of {groups}, got {args.particles}")
    per_group = args.particles // groups
    dtype_name = args.dtype or config.get("swarm.dtype", "float64")
    if dtype_name not in SCALE_DTYPES:
        raise ValueError(f"swarm.dtype must be one of {SCALE_DTYPES}, got {dtype_name!r}")
    dtype = np.dtype(dtype_name)
    required = check_memory(args.particles, args.dimension, itemsize=dtype.itemsize)
    logging.info(f"Scale run: {args.particles} particles x {args.dimension} dims in {dtype_name}, T={args.iters}, "
                 f"about {required / 2**20:.0f} MiB of tensors")

    results, timing_rows = [], []
    for problem_id in args.problem or ["BF1"]:
        problem = get_benchmark(problem_id, args.dimension)
        seed = derive_seed(args.seed, "scale", problem.name)
        ratios = []
        for repeat in range(args.repeats):
            tensor = run_algorithm(TensorSwarm(problem, hypers, groups, per_group, dtype), args.iters, seed)
            loop = run_algorithm(ParticleLoopSwarm(problem, hypers, groups, per_group, dtype), args.iters, seed)
            ratio = tensor.wall_seconds / loop.wall_seconds if loop.wall_seconds > 0 else float("nan")
            ratios.append(ratio)
            timing_rows.append({
                "problem": problem.name,
                "repeat": repeat,
                "tensor_seconds": tensor.wall_seconds,
                "loop_seconds": loop.wall_seconds,
                "ratio": ratio,
            })
            logging.info(f"{problem.name} repeat {repeat}: tensor {tensor.wall_seconds:.2f}s, "
                         f"loop {loop.wall_seconds:.2f}s, ratio {ratio:.3f}")
        results.append({
            "problem": problem.name,
            "particles": args.particles,
            "dimension": args.dimension,
            "dtype": dtype_name,
            "iterations": args.iters,
            "repeats": args.repeats,
            "tensor_best": tensor.best_f,
            "loop_best": loop.best_f,
            "traces_match": tensor.trace == loop.trace,
        })
        ratio_array = np.array(ratios)
        timing_rows.append({
            "problem": problem.name,
            "repeat": "median",
            "tensor_seconds": None,
            "loop_seconds": None,
            "ratio": float(np.median(ratio_array)),
            "ratio_spread": float(ratio_array.max() / ratio_array.min() - 1.0) if ratio_array.min() > 0 else None,
        })

    ctx.summary_rows = results
    ctx.summary_value = "tensor_best"
    ctx.record(write_json(ctx.path("scale.json"), results))
    ctx.record(write_csv(ctx.path("scale.csv"), results))
    ctx.record(*write_timing(ctx.out_dir, timing_rows))
    return EXIT_OK


def _path_problem(seed: int) -> PathProblem:
    scenario = ScenarioConfig.from_settings(seed=seed)
    planner_config = PlannerConfig.from_settings()
    world = generate_world(scenario, seed)
    return PathProblem(world, planner_config.alpha, planner_config.beta, planner_config.dimension)


def cmd_evolve(args: argparse.Namespace, ctx: RunContext) -> int:
    """Evolve an inner hyper matrix and persist it with its evolution report"""
    hsef = config.get_hsef_config()
    if args.problem.lower() == "path":
        problem = _path_problem(args.seed)
        planner = config.get_planner_config()
        inner_defaults = (planner["groups"], planner["particles_per_group"], planner["max_iters_per_frame"])
    else:
        problem = get_benchmark(args.problem, args.dimension or config.get("benchmarks.dimension", 30))
        inner_defaults = (hsef["inner_groups"], hsef["inner_particles"], hsef["inner_iterations"])

    inner = InnerBudget(
        args.inner_groups or inner_defaults[0],
        args.inner_particles or inner_defaults[1],
        args.iters or inner_defaults[2],
    )
    outer = OuterBudget(
        args.outer_groups or hsef["outer_groups"],
        args.outer_particles or hsef["outer_particles"],
        args.evolutions or hsef["evolutions"],
    )
    report = evolve(problem, outer_budget=outer, inner_budget=inner, root_seed=args.seed, jobs=args.jobs)

    ctx.summary_rows = [{"problem": report.problem, "algorithm": "hsef", "best_lfv": report.best_lfv,
                         "evolutions": report.evolutions}]
    ctx.summary_value = "best_lfv"
    ctx.record(save_hypers(HypersDocument.from_report(report), ctx.path("hypers.json")))
    ctx.record(write_json(ctx.path("evolution.json"), report.to_dict(include_timing=False)))
    ctx.record(write_csv(ctx.path("evolution.csv"), [
        {"evolution": e + 1, "best_lfv": best, "evolution_lfv": current}
        for e, (best, current) in enumerate(zip(report.best_trace, report.evolution_trace))
    ]))
    ctx.record(*write_timing(ctx.out_dir, [{"problem": report.problem, "evolutions": report.evolutions,
                                           "wall_seconds": report.wall_seconds}]))
    ctx.record(save_chart(create_evolution_chart(report.best_trace, report.evolution_trace,
                                                 f"Hyper-parameter evolution on {report.problem}"),
                          ctx.path("evolution.html")))
    logging.info(f"Best LFV {report.best_lfv:.6g} after {report.evolutions} evolutions; "
                 f"hypers written to {ctx.path('hypers.json')}")
    return EXIT_OK


def cmd_plan(args: argparse.Namespace, ctx: RunContext) -> int:
    """Run the dynamic scenario with one planner variant"""
    if args.scenario:
        scenario = ScenarioConfig.from_json(args.scenario)
        scenario = scenario.model_copy(update={"seed": args.seed})
    else:
        scenario = ScenarioConfig.from_settings(seed=args.seed)
    frames = args.frames or scenario.frames
    hypers = load_hypers(args.hypers) if args.hypers else None
    hypers = resolve_variant_hypers(args.variant, hypers)
    stride = config.get("output.svg_stride", 10) if args.svg_stride is None else args.svg_stride

    svg_dir = ctx.path("frames")

    def on_frame(frame, world, record):
        if stride and (frame % stride == 0 or frame == frames - 1):
            caption = (f"{args.variant} frame {frame}: length {record.path_length:.1f} cm, "
                       f"{record.iterations} iterations, Q={record.q}")
            ctx.record(save_frame(svg_dir / f"frame_{frame:04d}.svg", world, record.best_path,
                                  record.collision_free, caption))

    ctx.record(scenario.to_json(ctx.path("scenario.json")))
    metrics = run_scenario(scenario, args.variant, frames=frames, seed=args.seed, hypers=hypers,
                           on_frame=on_frame)

    ctx.summary_rows = [metrics.summary(include_timing=False)]
    ctx.summary_subject = "variant"
    ctx.summary_value = "mean_path_length"
    ctx.record(write_jsonl(ctx.path("records.jsonl"), [r.to_dict(include_timing=False) for r in metrics.records]))
    ctx.record(write_csv(ctx.path("frames.csv"), metrics.frame_table(include_timing=False)))
    ctx.record(metrics.to_csv(ctx.path("metrics.csv")))
    ctx.record(write_json(ctx.path("metrics.json"), metrics.summary(include_timing=False)))
    ctx.record(*write_timing(ctx.out_dir, [
        {"frame": r.frame, "wall_seconds": r.wall_seconds, "iterations": r.iterations} for r in metrics.records
    ]))
    ctx.record(save_chart(create_frame_metrics_chart(metrics.frame_table(), f"{args.variant}: per-frame metrics"),
                          ctx.path("frames.html")))
    logging.info(f"Mean planning time per frame {metrics.mean_wall_seconds * 1000:.1f} ms")
    return EXIT_OK


COMMANDS = {
    "bench": cmd_bench,
    "scale": cmd_scale,
    "evolve": cmd_evolve,
    "plan": cmd_plan,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="root seed (default: scenario.seed)")
    common.add_argument("--out", default=None, help="output directory (default: $SWARMFORGE_OUT/<command>)")
    common.add_argument("--config", default=None, help="settings YAML layered over the defaults")
    common.add_argument("--jobs", type=positive_int, default=1, help="worker processes")
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    common.add_argument("--no-ledger", action="store_true", help="do not record the run in the database")

    parser = argparse.ArgumentParser(prog="swarmforge", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", parents=[common], help="benchmark trials")
    bench.add_argument("--problem", nargs="+", default=None, help="BF1..BF4 or function names")
    bench.add_argument("--algo", choices=ALGORITHMS, default="dtpso")
    bench.add_argument("--trials", type=positive_int, default=None)
    bench.add_argument("--iters", type=positive_int, default=None)
    bench.add_argument("--dimension", type=positive_int, default=None)
    bench.add_argument("--hypers", default=None, help="evolved hyper-parameter JSON (sepso)")

    scale = sub.add_parser("scale", parents=[common], help="tensor vs per-particle timing")
    scale.add_argument("--problem", nargs="+", default=None)
    scale.add_argument("--particles", type=positive_int, default=16384, help="total population")
    scale.add_argument("--dimension", type=positive_int, default=1000)
    scale.add_argument("--iters", type=positive_int, default=10)
    scale.add_argument("--repeats", type=positive_int, default=3)
    scale.add_argument("--dtype", choices=SCALE_DTYPES, default=None, help="default: swarm.dtype")

    evolve_parser = sub.add_parser("evolve", parents=[common], help="evolve hyper-parameters")
    evolve_parser.add_argument("--problem", default="BF1", help="benchmark id or 'path'")
    evolve_parser.add_argument("--evolutions", type=positive_int, default=None)
    evolve_parser.add_argument("--outer-groups", type=positive_int, default=None)
    evolve_parser.add_argument("--outer-particles", type=positive_int, default=None)
    evolve_parser.add_argument("--inner-groups", type=positive_int, default=None)
    evolve_parser.add_argument("--inner-particles", type=positive_int, default=None)
    evolve_parser.add_argument("--iters", type=positive_int, default=None, help="inner iterations")
    evolve_parser.add_argument("--dimension", type=positive_int, default=None)

    plan = sub.add_parser("plan", parents=[common], help="dynamic path-planning scenario")
    plan.add_argument("--variant", choices=sorted(VARIANTS), default="sepso")
    plan.add_argument("--frames", type=positive_int, default=None)
    plan.add_argument("--hypers", default=None, help="evolved hyper-parameter JSON (sepso variants)")
    plan.add_argument("--scenario", default=None, help="scenario JSON")
    plan.add_argument("--svg-stride", type=non_negative_int, default=None, help="0 disables frame SVGs")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)

    if args.config:
        config.load_config(Path(args.config))
    if args.seed is None:
        args.seed = int(config.get("scenario.seed", 0))

    ctx = None
    try:
        ctx = RunContext(args.command, args, argv)
        setup_logging(args.log_level or config.get("logging.level", "INFO"),
                      ctx.path(config.get("logging.file", "swarmforge.log")))
        status = COMMANDS[args.command](args, ctx)
        ctx.finish("ok")
        return status
    except MissingHypersError as e:
        logging.error(str(e))
        code = EXIT_PRECONDITION
    except (ValidationError, ValueError, KeyError, SwarmForgeError) as e:
        logging.error(f"{args.command} failed: {e}")
        code = EXIT_PRECONDITION
    except OSError as e:
        logging.error(f"{args.command} failed with an I/O error: {e}")
        code = EXIT_IO

    if ctx is not None:
        try:
            ctx.finish("failed")
        except Exception as e:
            logging.error(f"Could not write the run manifest: {e}")
    return code
