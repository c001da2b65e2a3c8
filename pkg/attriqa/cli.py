import argparse
import sys
from pathlib import Path

from pydantic import ValidationError

from attriqa.config.settings import settings
from attriqa.errors import AttriqaError, ConfigError
from attriqa.imaging.schedule import DEFAULT_LEVELS
from attriqa.pipeline.config import load_run_config
from attriqa.pipeline.ledger import recent_runs, recorded_run
from attriqa.pipeline.stages import PipelineRunner
from attriqa.render.builder import ReportBuilder, schedule_document
from attriqa.util.logging import run_log, setup_logging


# --- 1. Define Argument Helpers ---
def add_common_args(parser):
    parser.add_argument("--config", type=Path, default=None, help="Run configuration (TOML)")
    parser.add_argument("--seed", type=int, default=None, help="Master seed")
    parser.add_argument(
        "--workers", type=int, default=None, help="Worker count (default: available cores)"
    )
    parser.add_argument("--out", type=Path, default=None, help="Run directory")


def add_generate_args(parser):
    parser.add_argument("--sources", type=Path, nargs="*", default=None, help="Pristine PNGs")
    parser.add_argument(
        "--synthetic-sources", type=int, default=None, help="Procedural sources to synthesize"
    )
    parser.add_argument("--repeats", type=int, default=None)
    parser.add_argument("--distortions", nargs="+", default=None, help="Distortion ids")
    parser.add_argument("--levels", type=int, default=None)
    parser.add_argument(
        "--single-distortion", action="store_const", const=True, default=None,
        help="Exactly one distortion per record",
    )


def add_registry_args(parser):
    parser.add_argument("--attributes", type=Path, default=None, help="Attribute source JSON")
    parser.add_argument(
        "--embeddings", type=Path, default=None, help="Imported text embeddings (default: toy)"
    )
    parser.add_argument("--dim", type=int, default=None)


def add_train_dist_args(parser):
    parser.add_argument("--mode", choices=["shallow", "deep", "full"], default=None)
    parser.add_argument(
        "--prompt-len", type=int, default=None, help="Prompt tokens for shallow/deep tuning"
    )


def add_eval_args(parser):
    parser.add_argument("--split", choices=["all", "train", "val", "test"], default=None)
    parser.add_argument(
        "--dist-predictions", type=Path, default=None, help="Distortion-probability CSV to score"
    )
    parser.add_argument("--manifest", type=Path, default=None, help="Evaluate on another pool")


def add_saliency_args(parser):
    parser.add_argument("--distortion", action="append", default=None, dest="saliency_distortions")
    parser.add_argument("--limit", type=int, default=None)
    parser.add_argument("--csv", action="store_const", const=True, default=None)


def _overrides(args) -> dict:
    def get(name):
        return getattr(args, name, None)

    overrides = {
        "seed": get("seed"),
        "workers": get("workers"),
        "out": str(args.out) if get("out") else None,
        "generate.sources": [str(p) for p in args.sources] if get("sources") else None,
        "generate.synthetic_sources": get("synthetic_sources"),
        "generate.repeats": get("repeats"),
        "generate.distortions": get("distortions"),
        "generate.levels": get("levels"),
        "generate.single_distortion": get("single_distortion"),
        "build_registry.source": str(args.attributes) if get("attributes") else None,
        "build_registry.embeddings": str(args.embeddings) if get("embeddings") else None,
        "build_registry.dim": get("dim"),
        "train_dist.mode": get("mode"),
        "train_dist.vit.prompt_len": get("prompt_len"),
        "eval.split": get("split"),
        "eval.dist_predictions": str(args.dist_predictions) if get("dist_predictions") else None,
        "eval.manifest": str(args.manifest) if get("manifest") else None,
        "saliency.distortions": get("saliency_distortions"),
        "saliency.limit": get("limit"),
        "saliency.csv": get("csv"),
    }
    return overrides


def _runner(args) -> PipelineRunner:
    return PipelineRunner(load_run_config(args.config, _overrides(args)))


def _run_stage(args, command: str, stage: str):
    runner = _runner(args)
    with recorded_run(command, runner.layout.out, runner.config.digest), run_log(runner.layout.out):
        return getattr(runner, stage)()


def cmd_generate(args):
    print("Generating distorted dataset...")
    return _run_stage(args, "generate", "generate")


def cmd_build_registry(args):
    return _run_stage(args, "build-registry", "build_registry")


def cmd_train_dist(args):
    print("Training distortion model...")
    return _run_stage(args, "train-dist", "train_dist")


def cmd_extract(args):
    return _run_stage(args, "extract", "extract")


def cmd_train_reg(args):
    print("Training quality regressor...")
    return _run_stage(args, "train-reg", "train_reg")


def cmd_eval(args):
    return _run_stage(args, "eval", "evaluate")


def cmd_saliency(args):
    return _run_stage(args, "saliency", "saliency")


def cmd_run(args):
    print("=== attriqa pipeline start ===")
    runner = _runner(args)
    with recorded_run("run", runner.layout.out, runner.config.digest), run_log(runner.layout.out):
        runner.run_all()
    print("=== pipeline complete ===")


def cmd_schedules(args):
    levels = args.levels or DEFAULT_LEVELS
    if args.out is None:
        print(schedule_document(levels))
        return
    path = ReportBuilder(args.out).build_schedules(levels)
    print(f"Schedules written to {path}")


def cmd_runs(args):
    runs = recent_runs(args.limit or 20)
    if not runs:
        print(f"No runs recorded in {settings.db_path}")
        return
    for r in runs:
        started = r.started_at.strftime("%Y-%m-%d %H:%M:%S")
        print(f"{r.id:>5}  {started}  {r.command:<15} {r.status:<8} {r.out_dir or ''}")


COMMANDS = {
    "run": cmd_run,
    "generate": cmd_generate,
    "build-registry": cmd_build_registry,
    "train-dist": cmd_train_dist,
    "extract": cmd_extract,
    "train-reg": cmd_train_reg,
    "eval": cmd_eval,
    "saliency": cmd_saliency,
    "schedules": cmd_schedules,
    "runs": cmd_runs,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Attribute-based distortion identification and quality regression"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    # --- 2. Configure 'run' (The Aggregate Command) ---
    p_run = subparsers.add_parser("run", help="Run the whole chain from one config")
    add_common_args(p_run)
    add_generate_args(p_run)
    add_registry_args(p_run)
    add_train_dist_args(p_run)

    # --- 3. Configure Individual Commands ---
    p_gen = subparsers.add_parser("generate", help="Synthesize a distorted dataset")
    add_common_args(p_gen)
    add_generate_args(p_gen)

    p_reg = subparsers.add_parser("build-registry", help="Bind attribute sentences to anchors")
    add_common_args(p_reg)
    add_registry_args(p_reg)

    p_td = subparsers.add_parser("train-dist", help="Train the distortion model")
    add_common_args(p_td)
    add_train_dist_args(p_td)

    p_ex = subparsers.add_parser("extract", help="Write attribute probability matrices")
    add_common_args(p_ex)

    p_tr = subparsers.add_parser("train-reg", help="Train the quality regressor")
    add_common_args(p_tr)

    p_ev = subparsers.add_parser("eval", help="Score strengths and quality predictions")
    add_common_args(p_ev)
    add_eval_args(p_ev)

    p_sal = subparsers.add_parser("saliency", help="Render saliency maps")
    add_common_args(p_sal)
    add_saliency_args(p_sal)

    p_sch = subparsers.add_parser("schedules", help="Export the distortion schedule table")
    p_sch.add_argument("--out", type=Path, default=None, help="Directory (default: print)")
    p_sch.add_argument("--levels", type=int, default=None)

    p_runs = subparsers.add_parser("runs", help="Show the run ledger")
    p_runs.add_argument("--limit", type=int, default=None)
    return parser


def main(argv=None):
    setup_logging()
    args = build_parser().parse_args(argv)

    # Dispatcher
    try:
        COMMANDS[args.command](args)
    except AttriqaError as e:
        print(f"error: {e}", file=sys.stderr)
        sys.exit(e.exit_code)
    except ValidationError as e:
        print(f"error: invalid configuration: {e}", file=sys.stderr)
        sys.exit(ConfigError.exit_code)
    except KeyboardInterrupt:
        print("\nOperation cancelled by user.")
        sys.exit(1)


if __name__ == "__main__":
    main()
