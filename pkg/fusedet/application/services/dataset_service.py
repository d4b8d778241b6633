"""Dataset service - synthetic train/val directories."""

import logging
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fusedet.domain import Scene
from fusedet.domain.ports import SceneRepository

logger = logging.getLogger(__name__)

TRAIN_SPLIT = "train"
VAL_SPLIT = "val"

SceneGenerator = Callable[[np.random.Generator, str], Scene]
RepositoryFactory = Callable[[Path], SceneRepository]


@dataclass(frozen=True, slots=True)
class DatasetSummary:
    root: Path
    num_train: int
    num_val: int
    num_objects: int


def scene_id(index: int) -> str:
    return f"{index:06d}"


class DatasetService:
    """Generates scenes with independent per-index RNG streams.

    Validation scenes continue the index sequence after the training ones,
    so the two splits never share a stream.
    """

    def __init__(
        self,
        generate: SceneGenerator,
        repository_factory: RepositoryFactory,
        rng_factory: Callable[[int, int], np.random.Generator],
    ) -> None:
        self._generate = generate
        self._repository_factory = repository_factory
        self._rng_factory = rng_factory

    def scenes(self, seed: int, start: int, count: int) -> list[Scene]:
        return [
            self._generate(self._rng_factory(seed, index), scene_id(index))
            for index in range(start, start + count)
        ]

    def generate(self, root: Path, num_train: int, num_val: int, seed: int) -> DatasetSummary:
        root = Path(root)
        objects = 0
        for split, start, count in (
            (TRAIN_SPLIT, 0, num_train),
            (VAL_SPLIT, num_train, num_val),
        ):
            repository = self._repository_factory(root / split)
            for scene in self.scenes(seed, start, count):
                repository.add(scene)
                objects += scene.num_objects
            logger.info("Split written split=%s scenes=%d root=%s", split, count, root / split)
        return DatasetSummary(root=root, num_train=num_train, num_val=num_val, num_objects=objects)
