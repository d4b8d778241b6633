"""Infrastructure repositories - scene storage implementations."""

from .directory_scene import DirectorySceneRepository
from .in_memory_scene import InMemorySceneRepository

__all__ = [
    "DirectorySceneRepository",
    "InMemorySceneRepository",
]
