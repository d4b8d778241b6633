"""In-memory scene repository implementation."""

from fusedet.domain import Scene
from fusedet.domain.ports import SceneRepository


class InMemorySceneRepository(SceneRepository):
    """Dict-backed scene storage, used by tests and generated-on-the-fly datasets."""

    def __init__(self, scenes: list[Scene] | None = None) -> None:
        self._scenes: dict[str, Scene] = {}
        for scene in scenes or []:
            self.add(scene)

    def scene_ids(self) -> list[str]:
        return sorted(self._scenes)

    def get(self, scene_id: str) -> Scene:
        return self._scenes[scene_id]

    def add(self, scene: Scene) -> None:
        self._scenes[scene.scene_id] = scene
