"""Hyperspectral catalyst extraction: a residual net distills a reconstructed
31-band cube into 3 channels matched to the clean-RGB distribution."""

from __future__ import annotations

import torch
import torch.nn.functional as F

from .colorcue import NUM_BANDS
from .errors import TrainingDiverged
from .imagecore import ImageTensor
from .networks import ResNetCatalyst, from_torch, to_torch

DEFAULT_LR = 2e-4


def catalyst(net: ResNetCatalyst, cube: ImageTensor) -> ImageTensor:
    """Extract the 3-channel catalyst image from a 31-band cube."""
    if cube.channels != NUM_BANDS:
        raise ValueError(f"expected a {NUM_BANDS}-band cube, got {cube.channels} channels")
    with torch.no_grad():
        out = net(to_torch(cube))
    return from_torch(out)


def loss_hsc(y_clean, prediction):
    """Mean absolute error between the clean RGB and the catalyst prediction."""
    if prediction.shape != y_clean.shape:
        raise ValueError(
            f"prediction {tuple(prediction.shape)} vs clean {tuple(y_clean.shape)}"
        )
    return (y_clean - prediction).abs().mean()


def train_hsc_step(net: ResNetCatalyst, h2h_bundle, batch: dict,
                   opt: torch.optim.Optimizer) -> float:
    """One gradient step on the catalyst net; the H2H bundle stays frozen.

    batch holds x_spanned (B,31,H,W) and y_clean (B,3,H,W); the cube may be
    passed precomputed as batch["h_hat"] since G_x is frozen at this stage.
    """
    if "h_hat" in batch:
        h_hat = batch["h_hat"]
    else:
        with torch.no_grad():
            h_hat = h2h_bundle.g_x(batch["x_spanned"])
    loss = loss_hsc(batch["y_clean"], net(h_hat))
    if not torch.isfinite(loss):
        raise TrainingDiverged(f"non-finite catalyst loss: {loss}")
    opt.zero_grad()
    loss.backward()
    opt.step()
    return float(loss.detach())
