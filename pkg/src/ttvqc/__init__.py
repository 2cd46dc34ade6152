"""Tensor-train networks feeding variational quantum circuits, with TT pre-training."""

__version__ = "0.1.0"
