"""CSV writers for training logs, metric tables and PR curves."""

import csv
import logging
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import Any

logger = logging.getLogger(__name__)

TRAIN_LOG_FIELDS = (
    "epoch",
    "step",
    "cls",
    "l1",
    "giou",
    "center",
    "total",
    "val_map_3d",
    "val_map_bev",
    "wall_time_s",
)
METRICS_FIELDS = ("class", "iou_kind", "AP", "num_gt")
PR_FIELDS = ("recall", "precision")


def write_csv(path: Path, fieldnames: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fieldnames})
    return path


def read_csv(path: Path) -> list[dict[str, str]]:
    with Path(path).open(encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


class MetricLog:
    """Append-only CSV; the header is written once per file."""

    def __init__(self, path: Path, fieldnames: Sequence[str] = TRAIN_LOG_FIELDS) -> None:
        self.path = Path(path)
        self.fieldnames = tuple(fieldnames)

    def append(self, row: Mapping[str, Any]) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        new_file = not self.path.exists() or self.path.stat().st_size == 0
        with self.path.open("a", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(self.fieldnames), extrasaction="ignore", lineterminator="\n")
            if new_file:
                writer.writeheader()
            writer.writerow({k: row.get(k, "") for k in self.fieldnames})
        logger.debug("Metric row appended path=%s", self.path)

    def rows(self) -> list[dict[str, str]]:
        if not self.path.exists():
            return []
        return read_csv(self.path)
