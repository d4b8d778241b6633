"""Scene repository port - interface for scene storage."""

from abc import ABC, abstractmethod
from collections.abc import Iterator

from ..values.scene import Scene


class SceneRepository(ABC):
    """Abstract interface for scene storage.

    Infrastructure layer provides concrete implementation.
    Scene ids are returned in a stable, sorted order.
    """

    @abstractmethod
    def scene_ids(self) -> list[str]:
        """All scene ids, sorted."""
        ...

    @abstractmethod
    def get(self, scene_id: str) -> Scene:
        """Load one scene; KeyError when the id is unknown."""
        ...

    @abstractmethod
    def add(self, scene: Scene) -> None:
        """Store a scene, replacing any scene with the same id."""
        ...

    def __len__(self) -> int:
        return len(self.scene_ids())

    def __iter__(self) -> Iterator[Scene]:
        for scene_id in self.scene_ids():
            yield self.get(scene_id)
