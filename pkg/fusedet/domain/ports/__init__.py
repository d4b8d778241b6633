"""Domain ports - interfaces for infrastructure to implement."""

from .scene_repository import SceneRepository

__all__ = [
    "SceneRepository",
]
