"""Single-file checkpoint container: version tag, config echo, float64 parameters."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import torch
from torch import nn

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    """Everything needed to resume training or reproduce inference."""

    config: dict[str, Any]
    params: dict[str, torch.Tensor]
    optimizer: dict[str, Any] | None = None
    epoch: int = 0
    step: int = 0
    best_map: float = float("-inf")
    rng_state: torch.Tensor | None = None
    extra: dict[str, Any] = field(default_factory=dict)
    version: int = CHECKPOINT_VERSION

    @classmethod
    def capture(
        cls,
        model: nn.Module,
        config: dict[str, Any],
        optimizer: torch.optim.Optimizer | None = None,
        epoch: int = 0,
        step: int = 0,
        best_map: float = float("-inf"),
        generator: torch.Generator | None = None,
    ) -> "Checkpoint":
        params = {
            name: t.detach().to(torch.float64).clone() if t.is_floating_point() else t.detach().clone()
            for name, t in model.state_dict().items()
        }
        return cls(
            config=config,
            params=params,
            optimizer=optimizer.state_dict() if optimizer is not None else None,
            epoch=epoch,
            step=step,
            best_map=best_map,
            rng_state=generator.get_state() if generator is not None else None,
        )

    def restore(
        self,
        model: nn.Module,
        optimizer: torch.optim.Optimizer | None = None,
        generator: torch.Generator | None = None,
    ) -> None:
        """Load parameters (cast to the model's dtypes), optimizer and RNG state."""
        current = model.state_dict()
        missing = sorted(set(current) ^ set(self.params))
        if missing:
            raise ValueError(f"Checkpoint parameters do not match the model: {missing}")
        model.load_state_dict({name: self.params[name].to(current[name].dtype) for name in current})
        if optimizer is not None and self.optimizer is not None:
            optimizer.load_state_dict(self.optimizer)
        if generator is not None and self.rng_state is not None:
            generator.set_state(self.rng_state)

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": self.version,
            "config": self.config,
            "params": self.params,
            "optimizer": self.optimizer,
            "epoch": self.epoch,
            "step": self.step,
            "best_map": self.best_map,
            "rng_state": self.rng_state,
            "extra": self.extra,
        }


def save_checkpoint(checkpoint: Checkpoint, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(checkpoint.to_dict(), tmp)
    tmp.replace(path)
    logger.info("Checkpoint saved path=%s epoch=%d step=%d", path, checkpoint.epoch, checkpoint.step)
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    data = torch.load(path, map_location="cpu", weights_only=True)
    version = data.get("version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"Unsupported checkpoint version {version} in {path}")
    logger.debug("Checkpoint loaded path=%s epoch=%d", path, data["epoch"])
    return Checkpoint(
        config=data["config"],
        params=data["params"],
        optimizer=data["optimizer"],
        epoch=data["epoch"],
        step=data["step"],
        best_map=data["best_map"],
        rng_state=data["rng_state"],
        extra=data.get("extra") or {},
        version=version,
    )
