"""Ablation service - fusion-mode / image-branch / sampling grids."""

import logging
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from fusedet.config import AblateConfig
from fusedet.infrastructure.metric_log import write_csv

logger = logging.getLogger(__name__)

ABLATION_FILE = "ablation.csv"
ABLATION_FIELDS = (
    "fusion_mode",
    "image_roi",
    "seed",
    "d_steps",
    "num_proposals",
    "map_3d",
    "map_bev",
    "latency_s",
)


@dataclass(frozen=True, slots=True)
class AblationCell:
    """One trained model; every sampling setting is evaluated on it."""

    fusion_mode: str
    image_roi: bool
    seed: int

    @property
    def label(self) -> str:
        branch = "img" if self.image_roi else "noimg"
        return f"{self.fusion_mode}-{branch}-s{self.seed}"


CellRunner = Callable[[AblationCell], list[dict[str, Any]]]


def ablation_grid(settings: AblateConfig) -> list[AblationCell]:
    return [
        AblationCell(fusion_mode=mode, image_roi=image_roi, seed=seed)
        for mode in settings.fusion_modes
        for image_roi in settings.image_roi
        for seed in settings.seeds
    ]


def summarize(rows: list[dict[str, Any]], keys: tuple[str, ...]) -> list[dict[str, Any]]:
    """Mean mAP and latency over seeds for each distinct `keys` tuple."""
    groups: dict[tuple[Any, ...], list[dict[str, Any]]] = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in keys), []).append(row)
    summary = []
    for group_key, members in groups.items():
        entry = dict(zip(keys, group_key, strict=True))
        for metric in ("map_3d", "map_bev", "latency_s"):
            entry[metric] = sum(float(m[metric]) for m in members) / len(members)
        entry["runs"] = len(members)
        summary.append(entry)
    return summary


class AblationService:
    """Runs grid cells, in worker processes when `workers` > 1.

    `runner` must be picklable for the process pool (a module-level
    function or a functools.partial of one).
    """

    def __init__(self, runner: CellRunner, settings: AblateConfig) -> None:
        self._runner = runner
        self._settings = settings

    def run(self, output_dir: Path) -> list[dict[str, Any]]:
        cells = ablation_grid(self._settings)
        logger.info("Ablation start cells=%d workers=%d", len(cells), self._settings.workers)
        rows: list[dict[str, Any]] = []
        if self._settings.workers > 1 and len(cells) > 1:
            with ProcessPoolExecutor(max_workers=self._settings.workers) as pool:
                for cell, cell_rows in zip(cells, pool.map(self._runner, cells), strict=True):
                    logger.info("Ablation cell done cell=%s rows=%d", cell.label, len(cell_rows))
                    rows.extend(cell_rows)
        else:
            for cell in cells:
                cell_rows = self._runner(cell)
                logger.info("Ablation cell done cell=%s rows=%d", cell.label, len(cell_rows))
                rows.extend(cell_rows)
        write_csv(Path(output_dir) / ABLATION_FILE, ABLATION_FIELDS, rows)
        return rows
