#!/usr/bin/env python3
"""
LongVie Command-Line Driver

Runs every experiment of the desk-scale pipeline.
Usage:
  python run_longvie.py gen-data --seed 7             # Render the synthetic corpus
  python run_longvie.py train --seed 7                # Fit backbone + control branches
  python run_longvie.py infer --scene orbit           # Generate a long video
  python run_longvie.py eval --scene orbit            # Metrics on the generated video
  python run_longvie.py ablate --seed 7               # Normalization x noise x degradation matrix
  python run_longvie.py plot                          # SVG figures of an ablation run

Common flags: --seed, --config, --out-dir, --log-level.
"""

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

from adapters.local.checkpoint_store import LocalCheckpointStore
from adapters.local.dataset_store import LocalDatasetStore
from adapters.local.file_config import DEFAULT_SCENES_FILE, LocalConfigLoader
from adapters.local.lvtf_store import LocalTensorStore, export_pgm_frames
from adapters.local.report_writer import COMBINED_NAME, LocalReportWriter, load_reports
from adapters.local.svg_plotter import SvgPlotter
from core.config import PipelineConfig, validate_model_config
from core.control_model import ControlDiT, init_model
from core.control_signal import ClipPlan, plan_clips, validate_video
from core.errors import ErrorCode, LongVieError, get_exit_code_for_error
from core.evaluation import build_metrics_report
from core.pipeline import DEFAULT_DEGRADATION, DEGRADATION_VARIANTS, fit, generate_long, run_ablation
from core.records import GenerationTrace
from core.synthdata import make_dataset, render_scene

logger = logging.getLogger("longvie")

CHECKPOINT_NAME = "model.lvck"
VIDEO_NAME = "video.lvtf"
TRACE_NAME = "trace.json"


def _loader(args) -> LocalConfigLoader:
    return LocalConfigLoader(args.config, scenes_file=args.scenes)


def _dataset(args, config: PipelineConfig):
    """Dataset from --data when given, otherwise rendered from the config and seed."""
    if args.data:
        return LocalDatasetStore().load(args.data)
    return make_dataset(config.dataset_spec(), args.seed)


def _load_model(path: str, config: PipelineConfig, seed: int) -> ControlDiT:
    if not os.path.exists(path):
        logger.warning(f"Checkpoint not found: {path}")
        logger.info("Using an untrained model.")
        return init_model(config.model, seed)
    checkpoint = LocalCheckpointStore().load(path)
    model = ControlDiT(validate_model_config(checkpoint["config"]))
    model.load_state_arrays(checkpoint["weights"])
    model.set_stage("control")
    return model


# ============================================================================
# Subcommands
# ============================================================================

def cmd_gen_data(args) -> int:
    config = _loader(args).load_pipeline()
    spec = config.dataset_spec()
    pairs = make_dataset(spec, args.seed)
    directory = os.path.join(args.out_dir, "dataset")
    LocalDatasetStore().save(directory, pairs, {"seed": args.seed, "spec": spec.model_dump(mode="json")})
    return 0


def cmd_train(args) -> int:
    config = _loader(args).load_pipeline()
    result = fit(config, _dataset(args, config), args.seed)
    path = os.path.join(args.out_dir, CHECKPOINT_NAME)
    LocalCheckpointStore().save(path, config.model.model_dump(mode="json"), result.model.state_arrays())
    LocalReportWriter().write_json(
        os.path.join(args.out_dir, "train_losses.json"),
        {"seed": args.seed, "losses": result.losses},
    )
    return 0


def cmd_infer(args) -> int:
    loader = _loader(args)
    config = loader.load_pipeline()
    scene = loader.find_scene(args.scene)
    rendered = render_scene(scene)
    if args.depth:
        depth = validate_video(LocalTensorStore().read(args.depth), "depth video")
    else:
        depth = rendered.depth
    # Fail on the clip arithmetic before any model work.
    plan_clips(depth.shape[0], config.clip_len, config.overlap)

    model = _load_model(args.checkpoint or os.path.join(args.out_dir, CHECKPOINT_NAME), config, args.seed)
    video, trace = generate_long(model, depth, scene, config, seed=args.seed, first_frame=rendered.frames[0])

    LocalTensorStore().write(os.path.join(args.out_dir, VIDEO_NAME), video)
    LocalReportWriter().write_json(os.path.join(args.out_dir, TRACE_NAME), trace.to_dict())
    if args.pgm:
        export_pgm_frames(video, os.path.join(args.out_dir, "frames"))
    logger.info(f"✅ Generated {video.shape[0]} frames in {len(trace.clips)} clips")
    return 0


def cmd_eval(args) -> int:
    loader = _loader(args)
    config = loader.load_pipeline()
    scene = loader.find_scene(args.scene)
    video = validate_video(LocalTensorStore().read(args.video or os.path.join(args.out_dir, VIDEO_NAME)))
    reference = render_scene(scene).frames[: video.shape[0]]

    trace_path = args.trace or os.path.join(args.out_dir, TRACE_NAME)
    if os.path.exists(trace_path):
        with open(trace_path, "r") as f:
            data = json.load(f)
        trace = GenerationTrace(
            noise_rmse_to_first=data.get("noise_rmse_to_first", []),
            boundary_ssim=data.get("boundary_ssim", []),
            plan=data.get("plan"),
        )
        plan = ClipPlan.from_dict(trace.plan) if trace.plan else plan_clips(video.shape[0], config.clip_len, config.overlap)
    else:
        trace = GenerationTrace()
        plan = plan_clips(video.shape[0], config.clip_len, config.overlap)

    report = build_metrics_report(
        video,
        reference,
        plan,
        trace,
        config_echo={"cell": "eval", "scene": scene.name, "config": config.model_dump(mode="json")},
    )
    LocalReportWriter().write_reports(os.path.join(args.out_dir, "eval"), [report])
    return 0


def cmd_ablate(args) -> int:
    loader = _loader(args)
    config = loader.load_pipeline()
    scene = loader.find_scene(args.scene)
    depth = render_scene(scene).depth
    reports = run_ablation(config, _dataset(args, config), depth, scene, args.seed, degradation=args.degradation)
    LocalReportWriter().write_reports(os.path.join(args.out_dir, "ablation"), reports)
    return 0


def cmd_plot(args) -> int:
    reports = load_reports(args.report or os.path.join(args.out_dir, "ablation", COMBINED_NAME))
    plotter = SvgPlotter()
    directory = os.path.join(args.out_dir, "plots")
    plotter.write(os.path.join(directory, "ssim_curves.svg"), plotter.ssim_curves(reports))
    plotter.write(os.path.join(directory, "rmse_vs_ssim.svg"), plotter.rmse_ssim_scatter(reports))
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "plot": cmd_plot,
}


# ============================================================================
# Entry point
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=0, help='Seed for every random draw')
    common.add_argument('--config', default=None, help='Pipeline configuration file (JSON)')
    common.add_argument('--scenes', default=DEFAULT_SCENES_FILE, help='Scene list file (JSON)')
    common.add_argument('--out-dir', default='./out', help='Output directory')
    common.add_argument('--log-level', default=None, help='Logging level (default: LONGVIE_LOG_LEVEL or INFO)')

    parser = argparse.ArgumentParser(prog='run_longvie.py', description='LongVie desk-scale pipeline')
    subparsers = parser.add_subparsers(dest='command', required=True)

    subparsers.add_parser('gen-data', parents=[common], help='Render the synthetic training corpus')

    train = subparsers.add_parser('train', parents=[common], help='Fit the model and write a checkpoint')
    train.add_argument('--data', default=None, help='Dataset directory written by gen-data')

    infer = subparsers.add_parser('infer', parents=[common], help='Generate a long video')
    infer.add_argument('--scene', default='orbit', help='Scene name from the scene list')
    infer.add_argument('--depth', default=None, help='LVTF depth video overriding the scene depth')
    infer.add_argument('--checkpoint', default=None, help='LVCK checkpoint (default: <out-dir>/model.lvck)')
    infer.add_argument('--pgm', action='store_true', help='Also dump frames as PGM images')

    evaluate = subparsers.add_parser('eval', parents=[common], help='Metrics on a generated video')
    evaluate.add_argument('--scene', default='orbit', help='Scene providing the ground truth')
    evaluate.add_argument('--video', default=None, help='LVTF video (default: <out-dir>/video.lvtf)')
    evaluate.add_argument('--trace', default=None, help='Trace JSON (default: <out-dir>/trace.json)')

    ablate = subparsers.add_parser('ablate', parents=[common], help='Run the ablation matrix')
    ablate.add_argument('--scene', default='drift', help='Scene name from the scene list')
    ablate.add_argument('--data', default=None, help='Dataset directory written by gen-data')
    ablate.add_argument(
        '--degradation', nargs='+', default=list(DEFAULT_DEGRADATION), choices=sorted(DEGRADATION_VARIANTS),
        help='Degradation variants to ablate (feature and data isolate one level)',
    )

    plot = subparsers.add_parser('plot', parents=[common], help='SVG figures of an ablation run')
    plot.add_argument('--report', default=None, help='reports.json (default: <out-dir>/ablation/reports.json)')

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        if not e.code:
            return 0
        return get_exit_code_for_error(ErrorCode.USAGE)

    level = (args.log_level or os.getenv('LONGVIE_LOG_LEVEL', 'INFO')).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    try:
        return COMMANDS[args.command](args)
    except LongVieError as e:
        logger.error(f"❌ {e.message}")
        print(json.dumps(e.to_dict(), sort_keys=True), file=sys.stderr)
        return get_exit_code_for_error(e.code)
    except Exception as e:
        logger.error(f"❌ {args.command} failed: {e}", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
