"""Hazy-to-hyperspectral training core: generators G_x/G_h, PatchGAN critics,
the hazy/clear domain classifier, and their joint losses.

Sign conventions: the adversarial objectives are the quantities the critics
maximize (log-density form, always <= 0 for finite logits); critic updates
minimize their negation, generator updates use the non-saturating variant.
The domain classifier trains on binary cross-entropy (hazy=1, clear=0) over
reconstructed cubes while generators receive its negation, so G_x is pushed
toward haze-invariant reconstructions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from .errors import TrainingDiverged
from .imagecore import ImageTensor
from .colorcue import NUM_BANDS, span_channels
from .networks import (
    DiscriminatorSpec,
    DomainClassifier,
    GeneratorSpec,
    PatchDiscriminator,
    UNetGenerator,
    anchor_rgb,
    from_torch,
    span_rgb,
    to_torch,
)

DEFAULT_LOSS_WEIGHTS = {"gan": 1.0, "cyc": 10.0, "idt": 5.0, "cls": 1.0}
DEFAULT_ADAM_BETAS = (0.5, 0.999)
DEFAULT_LR = 2e-4


@dataclass
class LossReport:
    """Per-step loss summary; l_gan is exactly l_x + l_h."""

    l_x: float
    l_h: float
    l_gan: float
    l_cyc: float
    l_idt: float
    l_cls: float
    total: float
    step: int

    def to_dict(self):
        return {
            "l_x": self.l_x,
            "l_h": self.l_h,
            "l_gan": self.l_gan,
            "l_cyc": self.l_cyc,
            "l_idt": self.l_idt,
            "l_cls": self.l_cls,
            "total": self.total,
            "step": self.step,
        }


class H2HBundle:
    """G_x (31->31), G_h (31->3), their critics, and the domain classifier."""

    def __init__(self, depth=4, base_width=32, disc_layers=3,
                 loss_weights=None, lr=DEFAULT_LR, betas=DEFAULT_ADAM_BETAS):
        self.g_x = UNetGenerator(GeneratorSpec(NUM_BANDS, NUM_BANDS, depth, base_width))
        self.g_h = UNetGenerator(GeneratorSpec(NUM_BANDS, 3, depth, base_width))
        self.d_x = PatchDiscriminator(DiscriminatorSpec(NUM_BANDS, disc_layers, base_width))
        self.d_h = PatchDiscriminator(DiscriminatorSpec(3, disc_layers, base_width))
        self.clf = DomainClassifier(NUM_BANDS, base_width)
        self.loss_weights = dict(DEFAULT_LOSS_WEIGHTS if loss_weights is None else loss_weights)
        self.lr = lr
        self.betas = tuple(betas)
        self.opt_g = torch.optim.Adam(
            list(self.g_x.parameters()) + list(self.g_h.parameters()), lr=lr, betas=self.betas
        )
        self.opt_d = torch.optim.Adam(
            list(self.d_x.parameters())
            + list(self.d_h.parameters())
            + list(self.clf.parameters()),
            lr=lr,
            betas=self.betas,
        )

    def spec_dict(self):
        g = self.g_x.spec
        return {
            "depth": g.depth,
            "base_width": g.base_width,
            "disc_layers": self.d_x.spec.layers,
            "lr": self.lr,
            "betas": list(self.betas),
        }

    def modules(self):
        return {"g_x": self.g_x, "g_h": self.g_h, "d_x": self.d_x,
                "d_h": self.d_h, "clf": self.clf}

    @property
    def depth(self) -> int:
        return self.g_x.spec.depth


def adversarial_objective(fake_logits, real_logits):
    """E[log(1-sigma(fake))] + E[log(sigma(real))] in stable log-sigmoid form."""
    return F.logsigmoid(-fake_logits).mean() + F.logsigmoid(real_logits).mean()


def loss_adversarial_x(d_x_fake_logits, d_x_real_logits):
    """Critic objective on reconstructed cubes vs real spectral cubes."""
    return adversarial_objective(d_x_fake_logits, d_x_real_logits)


def loss_adversarial_h(d_h_fake_logits, d_h_real_logits):
    """Critic objective on generated RGB vs real hazy-domain RGB."""
    return adversarial_objective(d_h_fake_logits, d_h_real_logits)


def loss_cycle(x_spanned, y_clean, h, g_x, g_h):
    """Task-supervised cycle loss: the x-cycle targets the paired clean RGB.

    The h-cycle re-spans the generated RGB to 31 bands before re-entering G_x.
    Both terms are element-mean squared error.
    """
    y_hat = g_h(g_x(x_spanned))
    if y_hat.shape != y_clean.shape:
        raise ValueError(f"cycle output {tuple(y_hat.shape)} vs clean {tuple(y_clean.shape)}")
    h_cyc = g_x(span_rgb(g_h(h)))
    return F.mse_loss(y_hat, y_clean) + F.mse_loss(h_cyc, h)


def loss_identity(h, x_spanned, g_x, g_h):
    """G_x fed a real cube and G_h fed a spanned RGB should change nothing."""
    idt_x = F.mse_loss(g_x(h), h)
    idt_h = F.mse_loss(g_h(x_spanned), anchor_rgb(x_spanned))
    return idt_x + idt_h


def loss_domain_classifier(clf, cube_from_hazy, cube_from_clean):
    """BCE of the classifier (hazy=1, clear=0) and its negation for the generator."""
    logits_hazy = clf(cube_from_hazy)
    logits_clean = clf(cube_from_clean)
    bce = 0.5 * (
        F.binary_cross_entropy_with_logits(logits_hazy, torch.ones_like(logits_hazy))
        + F.binary_cross_entropy_with_logits(logits_clean, torch.zeros_like(logits_clean))
    )
    return bce, -bce


def _check_finite(**named_values):
    for name, value in named_values.items():
        if not torch.isfinite(value).all():
            raise TrainingDiverged(f"non-finite loss term {name!r}: {value}")


def train_h2h_step(bundle: H2HBundle, batch: dict, step: int) -> LossReport:
    """One alternating update: critics and classifier first, then generators.

    batch holds x_spanned (B,31,H,W), y_clean (B,3,H,W), h (B,31,H,W).
    """
    x_sp, y, h = batch["x_spanned"], batch["y_clean"], batch["h"]
    w = bundle.loss_weights
    g_x, g_h, d_x, d_h, clf = bundle.g_x, bundle.g_h, bundle.d_x, bundle.d_h, bundle.clf

    # Phase 1: critics and classifier (generators frozen via detached fakes).
    with torch.no_grad():
        h_hat = g_x(x_sp)
        x_hat = g_h(h)
        h_hat_clean = g_x(span_rgb(y))
    l_x = loss_adversarial_x(d_x(h_hat), d_x(h))
    l_h = loss_adversarial_h(d_h(x_hat), d_h(y))
    l_cls, _ = loss_domain_classifier(clf, h_hat, h_hat_clean)
    _check_finite(l_x=l_x, l_h=l_h, l_cls=l_cls)
    bundle.opt_d.zero_grad()
    (-(l_x + l_h) + l_cls).backward()
    bundle.opt_d.step()

    # Phase 2: generators (critics and classifier frozen; non-saturating terms).
    h_hat = g_x(x_sp)
    y_hat = g_h(h_hat)
    adv_g = F.softplus(-d_x(h_hat)).mean() + F.softplus(-d_h(y_hat)).mean()
    l_cyc = F.mse_loss(y_hat, y) + F.mse_loss(g_x(span_rgb(g_h(h))), h)
    l_idt = loss_identity(h, x_sp, g_x, g_h)
    _, gen_penalty = loss_domain_classifier(clf, h_hat, g_x(span_rgb(y)))
    total = w["gan"] * adv_g + w["cyc"] * l_cyc + w["idt"] * l_idt + w["cls"] * gen_penalty
    _check_finite(adv_g=adv_g, l_cyc=l_cyc, l_idt=l_idt, gen_penalty=gen_penalty, total=total)
    bundle.opt_g.zero_grad()
    total.backward()
    bundle.opt_g.step()

    l_x_f, l_h_f = float(l_x.detach()), float(l_h.detach())
    return LossReport(
        l_x=l_x_f,
        l_h=l_h_f,
        l_gan=l_x_f + l_h_f,
        l_cyc=float(l_cyc.detach()),
        l_idt=float(l_idt.detach()),
        l_cls=float(l_cls.detach()),
        total=float(total.detach()),
        step=step,
    )


def reconstruct_hsi(bundle: H2HBundle, x_rgb: ImageTensor) -> ImageTensor:
    """Span an RGB image and push it through G_x; returns the 31-band cube in [0,1]."""
    if x_rgb.channels != 3:
        raise ValueError(f"expected 3-channel RGB, got {x_rgb.channels}")
    spanned = to_torch(span_channels(x_rgb))
    with torch.no_grad():
        cube = bundle.g_x(spanned)
    return from_torch(cube)
