"""
Main Script - squidcav experiment runner
Run SQUID spectra, cavity-mediated protocols, sweeps and feasibility checks from a JSON config.

    python main.py spectrum    --config cfg.json [--out DIR]
    python main.py run         --config cfg.json --experiment bell [--model full] [--seed N]
    python main.py sweep       --config cfg.json --path working_point.dispersive_ratio --values 20 10 5
    python main.py feasibility --config cfg.json

Exit codes: 0 success, 2 configuration error, 3 verification failure, 4 numeric failure.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from config_loader import EXPERIMENTS, MODELS, ExperimentConfig, load_config
from errors import SquidcavError
from experiments import ResultRecord, run_experiment, sweep

# Load environment from the repository .env file (log level, default output dir)
load_dotenv(Path(__file__).parent.parent.parent / ".env")

logger = logging.getLogger(__name__)


def configure_logging():
    level = os.getenv("SQUIDCAV_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="squidcav", description="rf-SQUID cavity QED experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser):
        p.add_argument("--config", type=Path, help="JSON configuration (defaults are used when omitted)")
        p.add_argument("--out", type=Path, help="output directory for CSV/JSON results")
        p.add_argument("--model", choices=MODELS,
                       help="effective (qubits only), effective-photon (with cavity) or full model")
        p.add_argument("--seed", type=int, help="random seed for randomized inputs")

    common(sub.add_parser("spectrum", help="solve the SQUID spectrum"))
    run = sub.add_parser("run", help="run one named experiment")
    common(run)
    run.add_argument("--experiment", choices=EXPERIMENTS)
    sweep_parser = sub.add_parser("sweep", help="sweep one numeric config field")
    common(sweep_parser)
    sweep_parser.add_argument("--experiment", choices=EXPERIMENTS)
    sweep_parser.add_argument("--path", help="dotted config path, e.g. working_point.dispersive_ratio")
    sweep_parser.add_argument("--values", type=float, nargs="*", help="values to sweep")
    sweep_parser.add_argument("--workers", type=int, help="parallel worker processes")
    common(sub.add_parser("feasibility", help="feasibility arithmetic report"))
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    experiment = {"spectrum": "spectrum", "feasibility": "feasibility"}.get(
        args.command, getattr(args, "experiment", None))
    overrides = {"model": args.model, "seed": args.seed, "experiment": experiment}
    if args.config is not None:
        return load_config(args.config, **overrides)
    return ExperimentConfig({k: v for k, v in overrides.items() if v is not None})


def resolve_output_dir(args: argparse.Namespace, config: ExperimentConfig) -> Optional[Path]:
    if args.out is not None:
        return args.out
    configured = config.section("output")["dir"] or os.getenv("SQUIDCAV_OUTPUT_DIR")
    return Path(configured) if configured else None


def print_record(record: ResultRecord):
    print(f"\n📊 {record.experiment} finished in {record.duration_s:.2f}s "
          f"(config {record.config_hash[:12]})")
    for key, value in record.summary.items():
        text = f"{value:.10g}" if isinstance(value, float) else str(value)
        print(f"   • {key}: {text}")
    if record.experiment == "feasibility":
        print()
        for line in record.payload.get("table", []):
            print(f"   {line}")
    for name, path in record.outputs.items():
        print(f"   💾 {name}: {path}")


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)

    print("\n" + "=" * 80)
    print(f"🚀 SQUIDCAV - {args.command.upper()}")
    print("=" * 80)

    try:
        config = resolve_config(args)
        output_dir = resolve_output_dir(args, config)
        print(f"\n⚙️  Experiment: {config.experiment}   Model: {config.model}   Seed: {config.seed}")
        if output_dir:
            print(f"📁 Output directory: {output_dir}")

        if args.command == "sweep":
            section = config.section("sweep")
            path = args.path or section["path"]
            values = args.values if args.values is not None else section["values"]
            workers = args.workers or section["workers"]
            if not path:
                print("❌ No sweep path given (--path or sweep.path)")
                return 2
            print(f"\n🔁 Sweeping {path} over {len(values)} values ({workers} worker(s))")
            records = sweep(config, path, values, workers=workers, output_dir=output_dir)
            for record in records:
                status = "✅" if record.ok else "❌"
                metrics = ", ".join(f"{k}={v:.6g}" for k, v in record.summary.items()
                                    if isinstance(v, float))
                print(f"   {status} {path}={record.swept['value']:g}: {metrics or record.error}")
            failed = [r for r in records if not r.ok]
            if failed:
                print(f"\n⚠️  {len(failed)} sweep point(s) failed; see the error column")
        else:
            record = run_experiment(config, output_dir)
            print_record(record)

    except SquidcavError as e:
        print(f"\n❌ {type(e).__name__}: {e}")
        if getattr(e, "diagnostics", None):
            print(f"   Diagnostics: {e.diagnostics}")
        return e.exit_code
    except KeyboardInterrupt:
        print("\n\n⚠️  Interrupted by user")
        return 130

    print("\n" + "=" * 80)
    print("✅ DONE")
    print("=" * 80)
    return 0


if __name__ == "__main__":
    sys.exit(main())
