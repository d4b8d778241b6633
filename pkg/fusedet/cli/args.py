"""Command line argument parsing."""

import argparse
from pathlib import Path
from typing import Any

from fusedet import __version__
from fusedet.config import parse_overrides

SUBCOMMANDS = ("gen-data", "train", "infer", "eval", "ablate", "selftest", "init")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fusedet",
        description="fusedet - diffusion 3D detection with LiDAR-camera fusion",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="Any --section.key=value flag overrides the config file, e.g. --infer.d_steps=8",
    )
    parser.add_argument(
        "-V",
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="store_true",
        help="Show debug logs",
    )
    parser.add_argument(
        "-c",
        "--config",
        default=None,
        help="Config file (default: FUSEDET_CONFIG_PATH or fusedet.yaml in cwd)",
    )
    parser.add_argument(
        "-o",
        "--output",
        default=None,
        help="Output directory (default: $FUSEDET_OUTPUT_ROOT/<subcommand>)",
    )

    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    gen = sub.add_parser("gen-data", help="Generate synthetic train/val scenes")
    gen.add_argument("--data", default=None, help="Dataset directory (default: data.dataset_dir)")

    train = sub.add_parser("train", help="Train the detector")
    train.add_argument("--data", default=None, help="Dataset directory with train/ and val/")
    train.add_argument("--resume", default=None, help="Checkpoint to resume from")
    train.add_argument("--no-val", action="store_true", help="Skip per-epoch validation")

    infer = sub.add_parser("infer", help="Write KITTI prediction files")
    infer.add_argument("--checkpoint", required=True, help="Trained checkpoint")
    infer.add_argument("--data", default=None, help="Dataset directory")
    infer.add_argument("--split", default="val", help="Split to run on (default: val)")

    evaluate = sub.add_parser("eval", help="Compute per-class AP and PR curves")
    source = evaluate.add_mutually_exclusive_group(required=True)
    source.add_argument("--checkpoint", default=None, help="Run inference with this checkpoint")
    source.add_argument("--predictions", default=None, help="Directory of prediction files")
    evaluate.add_argument("--data", default=None, help="Dataset directory")
    evaluate.add_argument("--split", default="val", help="Split to evaluate (default: val)")

    ablate = sub.add_parser("ablate", help="Fusion / image-branch / sampling grids")
    ablate.add_argument("--data", default=None, help="Dataset directory with train/ and val/")

    sub.add_parser("selftest", help="Run the numerical oracle suites")

    init = sub.add_parser("init", help="Write a default fusedet.yaml")
    init.add_argument("--path", default="fusedet.yaml", help="Target file (default: fusedet.yaml)")

    return parser


def parse_args(argv: list[str] | None = None) -> tuple[argparse.Namespace, dict[str, Any]]:
    """Parse command line arguments.

    Returns:
        Parsed arguments namespace and the dotted config overrides found
        among the unknown flags.

    Raises:
        ConfigError: If an unknown flag is not a --section.key=value override.
    """
    args, rest = build_parser().parse_known_args(argv)
    return args, parse_overrides(rest)


DEFAULT_CONFIG = """\
# fusedet configuration file
# Any key can also be overridden on the command line: --infer.d_steps=8

data:
  class_names: [Car, Pedestrian, Cyclist]
  point_cloud_range: [2.0, -30.08, -3.0, 46.8, 30.08, 1.0]
  voxel_size: [0.16, 0.16, 0.16]
  dataset_dir: data
  num_train: 20
  num_val: 10
  seed: 0

diffusion:
  num_steps: 1000
  schedule: cosine
  paper_literal_noise: false

model:
  fusion_mode: res_ca     # res_ca | ca | sum | concat | dp | mlp
  encoder_fusion: true
  image_roi: true
  dtype: float32          # float64 for bitwise reproducible runs

train:
  lr: 0.0001
  epochs: 60
  num_proposals: 300
  seed: 0

match:
  kind: ota               # ota | hungarian

infer:
  d_steps: 4
  num_proposals: 300
  score_threshold: 0.05
  # nms: true
  # box_renewal: true

eval:
  iou_threshold: 0.7
  interp_points: 40       # 11 or 40

# ablate:
#   fusion_modes: [res_ca, ca, sum]
#   d_steps: [1, 4, 8]
#   num_proposals: [100, 300]
#   seeds: [0, 1, 2]
"""


def init_config(path: Path | str) -> bool:
    """Write the default config; False if the file already exists."""
    path = Path(path)
    if path.exists():
        return False
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(DEFAULT_CONFIG, encoding="utf-8")
    return True
