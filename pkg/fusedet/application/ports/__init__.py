"""Application layer ports - interfaces the services depend on."""

from .denoiser import Denoiser

__all__ = [
    "Denoiser",
]
