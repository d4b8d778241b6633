"""Domain exceptions callers branch on."""


class OutOfRangeError(ValueError):
    """Box center lies outside the configured point-cloud range."""


class KittiParseError(ValueError):
    """Malformed KITTI label or calibration line."""

    def __init__(self, message: str, line_number: int | None = None) -> None:
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during a training step."""

    def __init__(self, scene_id: str, timestep: int, detail: str = "") -> None:
        self.scene_id = scene_id
        self.timestep = timestep
        message = f"Non-finite loss scene_id={scene_id} t={timestep}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class SceneGenerationError(RuntimeError):
    """Synthetic placement could not satisfy its constraints."""


class ConfigError(ValueError):
    """Unreadable config file or malformed override."""
