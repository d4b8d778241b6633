"""Application layer - training, sampling and evaluation use cases."""
