"""
fusedet - diffusion-based 3D object detection with LiDAR-camera fusion.

This package provides:
- Box geometry, diffusion schedule, matching and loss numerics (torch)
- Voxel and image encoders with RoI feature fusion
- Training, DDIM sampling, KITTI-style evaluation and ablation sweeps
- A synthetic scene generator for desk-scale experiments
"""

try:
    from ._version import __version__
except ImportError:
    __version__ = "0.0.0-dev"  # Fallback before first build

import argparse
import logging
from pathlib import Path
from typing import Any

from rich.console import Console

console = Console()
logger = logging.getLogger(__name__)

ABLATION_KEYS = ("fusion_mode", "image_roi", "d_steps", "num_proposals")


def _output_dir(args: argparse.Namespace) -> Path:
    from fusedet.config import output_root

    return Path(args.output) if args.output else output_root() / args.command


def _dataset_root(args: argparse.Namespace, config) -> Path:
    return Path(args.data or config.data.dataset_dir)


def _require_split(root: Path, split: str) -> Path:
    path = root / split
    if not path.is_dir():
        raise FileNotFoundError(f"Dataset split not found: {path} (run 'fusedet gen-data' first)")
    return path


def _manifest(command: str, config, seed: int, directory: Path, **extra: Any) -> None:
    from fusedet.infrastructure import build_manifest, write_manifest

    write_manifest(
        directory,
        build_manifest(command, config.model_dump(mode="json"), seed, __version__, extra),
    )


def _load_scenes(repository) -> dict:
    return {scene_id: repository.get(scene_id) for scene_id in repository.scene_ids()}


def _gen_data(args: argparse.Namespace, overrides: dict[str, Any]) -> int:
    from fusedet.cli import show_dataset
    from fusedet.composition import create_container

    container = create_container(config_path=args.config, overrides=overrides)
    cfg = container.config
    root = _dataset_root(args, cfg)
    with console.status("[cyan]Generating scenes...[/cyan]", spinner="dots"):
        summary = container.dataset_service.generate(
            root, cfg.data.num_train, cfg.data.num_val, cfg.data.seed
        )
    _manifest(args.command, cfg, cfg.data.seed, root, num_objects=summary.num_objects)
    show_dataset(summary)
    return 0


def _train(args: argparse.Namespace, overrides: dict[str, Any]) -> int:
    from fusedet.cli import show_training
    from fusedet.composition import create_container, create_repository

    if args.resume:
        overrides["train.resume"] = args.resume
    container = create_container(config_path=args.config, overrides=overrides)
    cfg = container.config
    root = _dataset_root(args, cfg)
    train_repo = create_repository(_require_split(root, "train"), cfg)
    val_repo = None
    if not args.no_val:
        if (root / "val").is_dir():
            val_repo = create_repository(root / "val", cfg)
        else:
            logger.warning("No validation split root=%s", root)

    out = _output_dir(args)
    _manifest(args.command, cfg, cfg.train.seed, out, dataset=str(root))
    with console.status("[cyan]Training...[/cyan]", spinner="dots"):
        report = container.training_service.train(train_repo, out, val_repo)
    show_training(report)
    return 0


def _infer(args: argparse.Namespace, overrides: dict[str, Any]) -> int:
    from fusedet.composition import create_container_from_checkpoint, create_repository
    from fusedet.infrastructure import write_predictions

    container = create_container_from_checkpoint(args.checkpoint, overrides)
    cfg = container.config
    root = _dataset_root(args, cfg)
    scenes = _load_scenes(create_repository(_require_split(root, args.split), cfg))

    out = _output_dir(args)
    with console.status("[cyan]Sampling...[/cyan]", spinner="dots"):
        report = container.inference_service.run(scenes.values())
    for scene_id, detections in report.detections.items():
        write_predictions(out / "predictions", scenes[scene_id], detections, cfg.data.class_names)
    _manifest(
        args.command,
        cfg,
        cfg.infer.seed,
        out,
        checkpoint=str(args.checkpoint),
        split=args.split,
        d_steps=cfg.infer.d_steps,
        num_proposals=cfg.infer.num_proposals,
        latency_s=report.latency_s,
    )
    console.print(
        f"[green]Predictions written[/green] {out / 'predictions'} "
        f"[dim]({len(scenes)} scenes, D={cfg.infer.d_steps}, {report.latency_s:.3f}s/scene)[/dim]"
    )
    return 0


def _eval(args: argparse.Namespace, overrides: dict[str, Any]) -> int:
    from fusedet.cli import metrics_table
    from fusedet.composition import (
        create_container,
        create_container_from_checkpoint,
        create_repository,
    )
    from fusedet.infrastructure import read_predictions, write_predictions

    if args.checkpoint:
        container = create_container_from_checkpoint(args.checkpoint, overrides)
    else:
        container = create_container(config_path=args.config, overrides=overrides)
    cfg = container.config
    root = _dataset_root(args, cfg)
    scenes = _load_scenes(create_repository(_require_split(root, args.split), cfg))
    out = _output_dir(args)

    if args.checkpoint:
        with console.status("[cyan]Sampling...[/cyan]", spinner="dots"):
            detections = container.inference_service.run(scenes.values()).detections
        for scene_id, dets in detections.items():
            write_predictions(out / "predictions", scenes[scene_id], dets, cfg.data.class_names)
    else:
        pred_dir = Path(args.predictions)
        if not pred_dir.is_dir():
            raise FileNotFoundError(f"Predictions directory not found: {pred_dir}")
        detections = {
            scene_id: read_predictions(pred_dir, scene_id, cfg.data.class_names)
            for scene_id in scenes
        }

    result = container.evaluation_service.evaluate_scenes(detections, scenes)
    container.evaluation_service.write(result, out)
    _manifest(
        args.command,
        cfg,
        cfg.infer.seed,
        out,
        source=str(args.checkpoint or args.predictions),
        split=args.split,
        map_3d=result.map_3d,
        map_bev=result.map_bev,
    )
    console.print(metrics_table(result))
    return 0


def _ablate(args: argparse.Namespace, overrides: dict[str, Any]) -> int:
    from fusedet.application.services import summarize
    from fusedet.cli import ablation_table
    from fusedet.composition import create_ablation_service
    from fusedet.config import load_config

    cfg = load_config(args.config, overrides)
    root = _dataset_root(args, cfg)
    _require_split(root, "train")
    _require_split(root, "val")
    out = _output_dir(args)
    _manifest(args.command, cfg, cfg.train.seed, out, dataset=str(root), seeds=cfg.ablate.seeds)
    with console.status("[cyan]Running ablation grid...[/cyan]", spinner="dots"):
        rows = create_ablation_service(cfg, root, out).run(out)
    console.print(ablation_table(summarize(rows, ABLATION_KEYS), ABLATION_KEYS))
    return 0


def _selftest(args: argparse.Namespace, overrides: dict[str, Any]) -> int:
    from fusedet.application.services import SelftestService
    from fusedet.cli import selftest_table
    from fusedet.config import load_config

    cfg = load_config(args.config, overrides)
    service = SelftestService(cfg.selftest)
    with console.status("[cyan]Running oracle suites...[/cyan]", spinner="dots") as status:
        results = service.run(on_result=lambda r: status.update(f"[cyan]{r.name} done[/cyan]"))
    out = _output_dir(args)
    _manifest(
        args.command,
        cfg,
        cfg.selftest.seed,
        out,
        suites={r.name: r.passed for r in results},
    )
    console.print(selftest_table(results))
    return 0 if all(r.passed for r in results) else 2


def _init(args: argparse.Namespace, overrides: dict[str, Any]) -> int:
    from fusedet.cli import init_config

    if init_config(args.path):
        console.print(f"Created: {args.path}")
    else:
        console.print(f"Config already exists: {args.path}")
    return 0


COMMANDS = {
    "gen-data": _gen_data,
    "train": _train,
    "infer": _infer,
    "eval": _eval,
    "ablate": _ablate,
    "selftest": _selftest,
    "init": _init,
}


def main(argv: list[str] | None = None) -> int:
    """Main entry point."""
    from fusedet.cli import parse_args
    from fusedet.domain import ConfigError
    from fusedet.logging_setup import setup_logging_from_env

    try:
        args, overrides = parse_args(argv)
    except ConfigError as e:
        console.print(f"[red]Error:[/red] {e}")
        return 1

    setup_logging_from_env(verbose=args.verbose)

    try:
        return COMMANDS[args.command](args, overrides)
    except KeyboardInterrupt:
        console.print("\n[dim]Cancelled[/dim]")
        return 1
    except (ValueError, RuntimeError, OSError) as e:
        logger.debug("Command failed command=%s", args.command, exc_info=True)
        console.print(f"[red]Error:[/red] {e}")
        return 1
