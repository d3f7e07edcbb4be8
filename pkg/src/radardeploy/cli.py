"""Command-line interface.

Thin wrappers over the core package: each subcommand parses arguments,
calls the corresponding library function and writes files.  ``serve``
launches the HTTP service.

Output formats
--------------
gen-dataset     scenario CSV, one line per scenario: id,jx1,jy1,jx2,jy2,jx3,jy3
solve           record CSV: id,method,coverage,wall_time_seconds,r1x,r1y,...,r4x,r4y
train           learning-curve CSV: episode,raw_coverage,shaped_return
report          text to stdout; --out writes per-method CSV
export-heatmap  probability CSV (6 decimals) or binary graymap by extension,
                plus a .txt sidecar with radar/jammer coordinates
trace           episode CSV: t,action_x,action_y,radar_x,radar_y,raw_reward,shaped_reward
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .bench import (
    SolverSettings,
    export_heatmap,
    read_records_csv,
    report,
    run_bench,
    write_records_csv,
)
from .deploy_env import write_episode_trace
from .detection import PhysicsParams
from .evolve import GAConfig, PSOConfig
from .geometry import (
    RegionSpec,
    make_grid,
    parse_scenario_line,
    sample_dataset,
    write_scenarios_csv,
)
from .policy import PolicyNetwork, load_checkpoint
from .ppo import PPOConfig, deploy, train


def _parse_radars(text: str) -> tuple[tuple[int, int], ...]:
    values = [int(v) for v in text.replace(",", " ").split()]
    if len(values) % 2 != 0:
        raise argparse.ArgumentTypeError("radars need an even count of coordinates")
    return tuple((values[2 * i], values[2 * i + 1]) for i in range(len(values) // 2))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radardeploy",
        description="Anti-jamming radar deployment toolkit",
        epilog=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-dataset", help="sample jamming scenarios to a CSV")
    p.add_argument("--count", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("solve", help="run one method over a scenario dataset")
    p.add_argument("--method", required=True, choices=["ga", "pso", "ga1d", "pso1d", "farda"])
    p.add_argument("--dataset", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint", help="policy checkpoint (required for farda)")
    p.add_argument("--out", required=True, help="record CSV path")
    p.add_argument("--fitness-grid", default="training", choices=["full", "training", "toy"])
    p.add_argument("--ga-population", type=int, default=50)
    p.add_argument("--ga-iterations", type=int, default=100)
    p.add_argument("--ga-crossover-prob", type=float, default=0.9)
    p.add_argument("--ga-mutation-prob", type=float, default=0.1)
    p.add_argument("--pso-swarm", type=int, default=20)
    p.add_argument("--pso-iterations", type=int, default=100)
    p.add_argument("--pso-inertia", type=float, default=1.0)
    p.add_argument("--pso-accel-local", type=float, default=2.0)
    p.add_argument("--pso-accel-global", type=float, default=2.0)
    p.add_argument("--progress", action="store_true")

    p = sub.add_parser("train", help="train the deployment policy")
    p.add_argument("--episodes", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", default="training", choices=["full", "training", "toy"])
    p.add_argument("--checkpoint-out", required=True)
    p.add_argument("--checkpoint-interval", type=int, default=500)
    p.add_argument("--curve-out", help="learning-curve CSV path")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--log-every", type=int, default=0)

    p = sub.add_parser("report", help="aggregate record CSVs into a report")
    p.add_argument("--records", nargs="+", required=True, help="one or more record CSVs")
    p.add_argument("--reference-method", default="ga1d")
    p.add_argument("--out", help="write per-method CSV here")

    p = sub.add_parser("export-heatmap", help="compute and export one heatmap")
    p.add_argument(
        "--scenario-line",
        required=True,
        help='dataset-format line: "id,jx1,jy1,jx2,jy2,jx3,jy3"',
    )
    p.add_argument(
        "--radars",
        type=_parse_radars,
        default=(),
        help='flat coordinates, e.g. "38750,60000,40000,43750"',
    )
    p.add_argument("--grid", default="full", choices=["full", "training", "toy"])
    p.add_argument("--out", required=True, help=".csv or .pgm path")

    p = sub.add_parser("trace", help="run one deterministic policy episode to a CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scenario-line", required=True)
    p.add_argument("--grid", default="training", choices=["full", "training", "toy"])
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    phys = PhysicsParams()
    region = RegionSpec()

    if args.command == "gen-dataset":
        scenarios = sample_dataset(args.count, args.seed, region)
        write_scenarios_csv(args.out, scenarios)
        print(f"wrote {len(scenarios)} scenarios to {args.out}")
        return 0

    if args.command == "solve":
        settings = SolverSettings(
            phys=phys,
            region=region,
            ga=GAConfig(
                population=args.ga_population,
                iterations=args.ga_iterations,
                crossover_prob=args.ga_crossover_prob,
                mutation_prob=args.ga_mutation_prob,
            ),
            pso=PSOConfig(
                swarm=args.pso_swarm,
                iterations=args.pso_iterations,
                inertia=args.pso_inertia,
                accel_local=args.pso_accel_local,
                accel_global=args.pso_accel_global,
            ),
            fitness_grid=args.fitness_grid,
            checkpoint=args.checkpoint,
        )
        records, bad_lines = run_bench(
            args.dataset, args.method, args.seed, settings, progress=args.progress
        )
        write_records_csv(args.out, records)
        print(f"wrote {len(records)} records to {args.out}")
        if bad_lines:
            print(f"{len(bad_lines)} dataset lines were skipped", file=sys.stderr)
            return 1
        return 0

    if args.command == "train":
        config = PPOConfig(
            episodes=args.episodes,
            epochs=args.epochs,
            checkpoint_interval=args.checkpoint_interval,
        )
        grid = make_grid(region, args.grid)
        result = train(
            config,
            phys,
            region,
            grid,
            args.seed,
            checkpoint_path=args.checkpoint_out,
            curve_path=args.curve_out,
            log_every=args.log_every,
        )
        tail = result.curve[-100:]
        mean_cov = float(np.mean([row[1] for row in tail]))
        print(
            f"trained {args.episodes} episodes; final-{len(tail)}-episode "
            f"mean coverage {mean_cov:.4f}; checkpoint at {args.checkpoint_out}"
        )
        return 0

    if args.command == "report":
        records = []
        for path in args.records:
            records.extend(read_records_csv(path))
        rep = report(records, reference_method=args.reference_method)
        sys.stdout.write(rep.to_text())
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(rep.to_csv())
        return 0

    if args.command == "export-heatmap":
        from .geometry import Deployment

        _, scenario = parse_scenario_line(args.scenario_line)
        grid = make_grid(region, args.grid)
        export_heatmap(phys, scenario, Deployment(args.radars), grid, args.out)
        print(f"wrote heatmap to {args.out} (sidecar {args.out}.txt)")
        return 0

    if args.command == "trace":
        _, scenario = parse_scenario_line(args.scenario_line)
        params, _ = load_checkpoint(args.checkpoint)
        grid = make_grid(region, args.grid)
        policy = PolicyNetwork(grid, params)
        result = deploy(policy, phys, region, scenario, env_grid=grid)
        write_episode_trace(args.out, result.trace)
        print(
            f"coverage {result.coverage:.4f} in {result.wall_time:.3f}s; "
            f"trace at {args.out}"
        )
        return 0

    if args.command == "serve":
        import uvicorn

        uvicorn.run("radardeploy.service.app:app", host=args.host, port=args.port)
        return 0

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
