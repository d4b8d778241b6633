"""Denoiser port - what the sampling and training loops need from a model."""

from typing import Any, Protocol

import torch

from fusedet.model import HeadOutput, SceneTensors


class Denoiser(Protocol):
    """Two-phase box denoiser.

    `extract` runs once per scene; `decode` runs once per sampling step on
    the cached features and returns the x0 prediction for every proposal.
    FusionDetector implements this; tests plug in oracles.
    """

    def extract(self, scene: SceneTensors) -> Any:
        """Encode a scene into reusable feature maps."""
        ...

    def decode(
        self,
        maps: Any,
        point_signal: torch.Tensor,
        image_signal: torch.Tensor,
        t: int,
    ) -> HeadOutput:
        """Predict signal-space x0 boxes and class logits for N proposals."""
        ...

    def train(self, mode: bool = True) -> Any: ...

    def eval(self) -> Any: ...
