"""Multi-cue conditional dehazer: G_z consumes the 12-channel multi-cue image
plus the 3-channel catalyst; D_z judges candidates stacked on that conditioning.
Also hosts the end-to-end dehaze pipeline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .colorcue import assemble_multicue, span_channels
from .errors import TrainingDiverged
from .imagecore import ImageTensor
from .networks import from_torch, span_rgb, to_torch

I2I_CHANNELS = 15  # 12 multi-cue + 3 catalyst
DEFAULT_LAMBDA_L1 = 100.0


@dataclass
class DehazeResult:
    """Final dehazed RGB plus optional pipeline intermediates."""

    dehazed: ImageTensor
    spanned: ImageTensor | None = None
    cube: ImageTensor | None = None
    catalyst: ImageTensor | None = None


def assemble_i2i_input(x_rgb: ImageTensor, catalyst_img: ImageTensor) -> ImageTensor:
    """Fixed-order concatenation [12 multi-cue | 3 catalyst] of matching size."""
    if catalyst_img.channels != 3:
        raise ValueError(f"catalyst must have 3 channels, got {catalyst_img.channels}")
    if (x_rgb.height, x_rgb.width) != (catalyst_img.height, catalyst_img.width):
        raise ValueError(
            f"image {x_rgb.height}×{x_rgb.width} and catalyst "
            f"{catalyst_img.height}×{catalyst_img.width} dimensions differ"
        )
    multicue = assemble_multicue(x_rgb)
    stacked = np.concatenate(
        [multicue.data, catalyst_img.data.astype(multicue.data.dtype)], axis=-1
    )
    return ImageTensor(stacked)


def loss_i2i(fake_rgb, y_clean, d_fake_logits, d_real_logits,
             lambda_l1: float = DEFAULT_LAMBDA_L1):
    """Conditional-GAN objective pair.

    g_loss: non-saturating adversarial term plus lambda_l1 * mean|y - fake|.
    d_loss: mean BCE over the real (label 1) and fake (label 0) verdicts.
    """
    if fake_rgb.shape != y_clean.shape:
        raise ValueError(f"fake {tuple(fake_rgb.shape)} vs clean {tuple(y_clean.shape)}")
    d_loss = 0.5 * (
        F.binary_cross_entropy_with_logits(d_real_logits, torch.ones_like(d_real_logits))
        + F.binary_cross_entropy_with_logits(d_fake_logits, torch.zeros_like(d_fake_logits))
    )
    g_loss = F.softplus(-d_fake_logits).mean() + lambda_l1 * (y_clean - fake_rgb).abs().mean()
    return g_loss, d_loss


def train_i2i_step(g_z, d_z, batch: dict, opt_g, opt_d,
                   lambda_l1: float = DEFAULT_LAMBDA_L1) -> tuple[float, float]:
    """One alternating conditional-GAN update.

    batch holds cond (B,15,H,W) and y_clean (B,3,H,W); D_z sees the candidate
    stacked on the conditioning (18 channels).
    """
    cond, y = batch["cond"], batch["y_clean"]
    fake = g_z(cond)

    _, d_loss = loss_i2i(
        fake.detach(),
        y,
        d_z(torch.cat([cond, fake.detach()], dim=1)),
        d_z(torch.cat([cond, y], dim=1)),
        lambda_l1,
    )
    if not torch.isfinite(d_loss):
        raise TrainingDiverged(f"non-finite dehazer critic loss: {d_loss}")
    opt_d.zero_grad()
    d_loss.backward()
    opt_d.step()

    g_loss, _ = loss_i2i(
        fake,
        y,
        d_z(torch.cat([cond, fake], dim=1)),
        d_z(torch.cat([cond, y], dim=1)).detach(),
        lambda_l1,
    )
    if not torch.isfinite(g_loss):
        raise TrainingDiverged(f"non-finite dehazer generator loss: {g_loss}")
    opt_g.zero_grad()
    g_loss.backward()
    opt_g.step()
    return float(g_loss.detach()), float(d_loss.detach())


def _pad_to_divisible(t: torch.Tensor, divisor: int) -> tuple[torch.Tensor, int, int]:
    h, w = t.shape[-2], t.shape[-1]
    pad_h = (-h) % divisor
    pad_w = (-w) % divisor
    if pad_h or pad_w:
        t = F.pad(t, (0, pad_w, 0, pad_h), mode="reflect")
    return t, pad_h, pad_w


def dehaze(h2h_bundle, catalyst_net, g_z, x_rgb: ImageTensor,
           keep_intermediates: bool = False) -> DehazeResult:
    """Full pipeline: span -> G_x -> catalyst -> multi-cue conditioning -> G_z.

    Inputs whose sides are not divisible by the generators' 2^depth are
    reflect-padded on the bottom/right and cropped back, so the output always
    matches the input size. Stage errors are re-raised with the stage name.
    """
    if x_rgb.channels != 3:
        raise ValueError(f"dehaze expects 3-channel RGB, got {x_rgb.channels}")
    divisor = 1 << max(h2h_bundle.depth, g_z.spec.depth)
    h, w = x_rgb.height, x_rgb.width

    x = to_torch(x_rgb)
    x_pad, pad_h, pad_w = _pad_to_divisible(x, divisor)

    def _stage(name, fn, *args):
        try:
            return fn(*args)
        except ValueError as exc:
            raise ValueError(f"{name}: {exc}") from exc

    with torch.no_grad():
        spanned = span_rgb(x_pad)
        cube = _stage("h2h", h2h_bundle.g_x, spanned)
        cat = _stage("hsc", catalyst_net, cube)
        multicue_np = assemble_multicue(from_torch(x_pad)).data
        multicue = torch.from_numpy(np.transpose(multicue_np, (2, 0, 1)).copy()).to(
            torch.float32
        ).unsqueeze(0)
        cond = torch.cat([multicue, cat], dim=1)
        out = _stage("i2i", g_z, cond)

    def _crop(t):
        return from_torch(t[..., :h, :w])

    result = DehazeResult(dehazed=_crop(out))
    if keep_intermediates:
        result.spanned = _crop(spanned)
        result.cube = _crop(cube)
        result.catalyst = _crop(cat)
    return result
