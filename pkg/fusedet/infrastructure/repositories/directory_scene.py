"""Scene repository over a KITTI-style dataset directory.

Layout:
    points/NNNNNN.bin   little-endian float32, K x 4
    images/NNNNNN.png
    labels/NNNNNN.txt   KITTI 15-field, camera frame
    calib/NNNNNN.txt    12 floats of the 3 x 4 world -> pixel projection
"""

import logging
from collections.abc import Sequence
from pathlib import Path

import cv2
import numpy as np

from fusedet.domain import Scene
from fusedet.domain.ports import SceneRepository
from fusedet.infrastructure.kitti import (
    camera_box_to_world,
    read_calib,
    read_labels,
    read_points,
    serialize_label,
    world_record,
    write_calib,
    write_labels,
    write_points,
)

logger = logging.getLogger(__name__)

SUBDIRS = ("points", "images", "labels", "calib")


class DirectorySceneRepository(SceneRepository):
    """Reads and writes scenes under `root`.

    Label classes outside `class_names` and boxes whose center leaves
    `point_cloud_range` are skipped on load.
    """

    def __init__(
        self,
        root: Path,
        class_names: Sequence[str],
        point_cloud_range: Sequence[float] | None = None,
    ) -> None:
        self.root = Path(root)
        self.class_names = tuple(class_names)
        self.point_cloud_range = tuple(point_cloud_range) if point_cloud_range else None

    def _path(self, kind: str, scene_id: str) -> Path:
        suffix = {"points": ".bin", "images": ".png"}.get(kind, ".txt")
        return self.root / kind / f"{scene_id}{suffix}"

    def scene_ids(self) -> list[str]:
        folder = self.root / "points"
        if not folder.is_dir():
            return []
        return sorted(p.stem for p in folder.glob("*.bin"))

    def _in_range(self, center: tuple[float, float, float]) -> bool:
        if self.point_cloud_range is None:
            return True
        lo, hi = self.point_cloud_range[:3], self.point_cloud_range[3:]
        return all(a <= c <= b for c, a, b in zip(center, lo, hi, strict=True))

    def get(self, scene_id: str) -> Scene:
        points_path = self._path("points", scene_id)
        if not points_path.exists():
            raise KeyError(scene_id)
        points = read_points(points_path)
        bgr = cv2.imread(str(self._path("images", scene_id)), cv2.IMREAD_COLOR)
        if bgr is None:
            raise FileNotFoundError(f"Missing image for scene {scene_id}")
        image = cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB).astype(np.float32) / 255.0
        projection = read_calib(self._path("calib", scene_id))

        boxes, labels, aux = [], [], []
        label_path = self._path("labels", scene_id)
        records = read_labels(label_path) if label_path.exists() else []
        for record in records:
            if record.is_ignorable or record.class_name not in self.class_names:
                continue
            box = camera_box_to_world(record.box)  # type: ignore[arg-type]
            if not self._in_range(box.center):
                logger.debug("Skipping out-of-range box scene_id=%s center=%s", scene_id, box.center)
                continue
            boxes.append(box)
            labels.append(self.class_names.index(record.class_name))
            aux.append(record.aux())

        return Scene(
            scene_id=scene_id,
            points=points,
            image=image,
            projection=projection,
            gt_boxes=tuple(boxes),
            gt_labels=tuple(labels),
            gt_aux=tuple(aux),
        )

    def add(self, scene: Scene) -> None:
        for kind in SUBDIRS:
            (self.root / kind).mkdir(parents=True, exist_ok=True)
        write_points(self._path("points", scene.scene_id), scene.points)
        rgb = np.round(np.clip(scene.image, 0.0, 1.0) * 255.0).astype(np.uint8)
        cv2.imwrite(str(self._path("images", scene.scene_id)), cv2.cvtColor(rgb, cv2.COLOR_RGB2BGR))
        write_calib(self._path("calib", scene.scene_id), scene.projection)
        lines = []
        for i, (box, label) in enumerate(zip(scene.gt_boxes, scene.gt_labels, strict=True)):
            aux = scene.gt_aux[i] if scene.gt_aux is not None else None
            record = world_record(
                self.class_names[label],
                box,
                scene.projection,
                scene.image_hw,
                truncated=aux.truncated if aux else 0.0,
                occluded=aux.occluded if aux else 0,
            )
            lines.append(serialize_label(record))
        write_labels(self._path("labels", scene.scene_id), lines)
