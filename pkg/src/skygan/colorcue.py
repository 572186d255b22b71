"""Color-space conversions, the 12-channel multi-cue assembly, and 3-to-31 channel spanning.

Conversions accept arrays shaped (..., 3) in [0,1] and operate in float64.
Fixed multi-cue channel order: [R,G,B, H,S,V, Y,Cb,Cr, L*,a*,b*], every
channel normalized to [0,1].
"""

from __future__ import annotations

import numpy as np

from .imagecore import ImageTensor

# Band axis: 31 bands at 400 + 10k nm, k = 0..30.
WAVELENGTHS_NM = np.arange(400, 701, 10)
NUM_BANDS = 31
# Band indices whose spanning weight is a pure primary: R at 650, G at 550, B at 450 nm.
ANCHOR_BAND_RGB = (25, 15, 5)

# sRGB -> XYZ (D65, 2 deg). Rows are renormalized to sum exactly to 1 so the
# reference white maps to L*=100, a*=b*=0 without float residue.
_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_SRGB_TO_XYZ_WHITE_REL = _SRGB_TO_XYZ / _SRGB_TO_XYZ.sum(axis=1, keepdims=True)


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """Hexcone HSV with hue normalized to [0,1); H=0 for achromatic pixels."""
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = np.max(rgb, axis=-1)
    minc = np.min(rgb, axis=-1)
    delta = maxc - minc
    chromatic = delta > 0

    v = maxc
    s = np.zeros_like(maxc)
    np.divide(delta, maxc, out=s, where=maxc > 0)

    safe = np.where(chromatic, delta, 1.0)
    rc = (maxc - r) / safe
    gc = (maxc - g) / safe
    bc = (maxc - b) / safe
    h = np.select(
        [r == maxc, g == maxc],
        [bc - gc, 2.0 + rc - bc],
        default=4.0 + gc - rc,
    )
    h = np.where(chromatic, (h / 6.0) % 1.0, 0.0)
    return np.stack([h, s, v], axis=-1)


def rgb_to_ycbcr(rgb: np.ndarray) -> np.ndarray:
    """BT.601 full-range luma/chroma with Cb, Cr offset into [0,1]."""
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = (b - y) / 1.772 + 0.5
    cr = (r - y) / 1.402 + 0.5
    return np.stack([y, cb, cr], axis=-1)


def _srgb_linearize(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _lab_f(t: np.ndarray) -> np.ndarray:
    delta = 6.0 / 29.0
    return np.where(t > delta**3, np.cbrt(t), t / (3.0 * delta * delta) + 4.0 / 29.0)


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """CIE 1976 L*a*b* (sRGB linearization, D65), normalized to [0,1].

    Returned components are (L*/100, (a*+128)/255, (b*+128)/255).
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    lin = _srgb_linearize(rgb)
    xyz_rel = lin @ _SRGB_TO_XYZ_WHITE_REL.T  # already divided by the white point
    fx, fy, fz = xyz_rel[..., 0], xyz_rel[..., 1], xyz_rel[..., 2]
    fx, fy, fz = _lab_f(fx), _lab_f(fy), _lab_f(fz)
    l_star = 116.0 * fy - 16.0
    a_star = 500.0 * (fx - fy)
    b_star = 200.0 * (fy - fz)
    return np.stack(
        [l_star / 100.0, (a_star + 128.0) / 255.0, (b_star + 128.0) / 255.0], axis=-1
    )


def assemble_multicue(rgb: ImageTensor) -> ImageTensor:
    """Concatenate RGB|HSV|YCbCr|LAB into the fixed 12-channel multi-cue image.

    Channels 0-2 are the source RGB values unchanged.
    """
    if rgb.channels != 3:
        raise ValueError(f"multi-cue assembly requires 3 channels, got {rgb.channels}")
    src = rgb.data.astype(np.float64)
    stacked = np.concatenate(
        [src, rgb_to_hsv(src), rgb_to_ycbcr(src), rgb_to_lab(src)], axis=-1
    )
    # Guard float roundoff at the range edges; exact for in-gamut values.
    stacked[..., 3:] = np.clip(stacked[..., 3:], 0.0, 1.0)
    return ImageTensor(stacked)


def band_weights() -> np.ndarray:
    """31×3 row-stochastic weights (columns R,G,B), piecewise linear in wavelength.

    Anchors: pure blue at 450 nm, pure green at 550 nm, pure red at 650 nm;
    all-blue below 450, all-red above 650, linear cross-fades between anchors.
    """
    w = np.zeros((NUM_BANDS, 3))
    for k, lam in enumerate(WAVELENGTHS_NM):
        if lam <= 450:
            w[k] = (0.0, 0.0, 1.0)
        elif lam <= 550:
            t = (lam - 450) / 100.0
            w[k] = (0.0, t, 1.0 - t)
        elif lam <= 650:
            t = (lam - 550) / 100.0
            w[k] = (t, 1.0 - t, 0.0)
        else:
            w[k] = (1.0, 0.0, 0.0)
    return w


def span_channels(rgb: ImageTensor) -> ImageTensor:
    """Span a 3-channel image into a 31-band stack, band k at 400+10k nm.

    Each band is a convex combination of R,G,B, so gray pixels stay constant
    across all bands and every band lies within [min(R,G,B), max(R,G,B)].
    """
    if rgb.channels != 3:
        raise ValueError(f"channel spanning requires 3 channels, got {rgb.channels}")
    spanned = rgb.data.astype(np.float64) @ band_weights().T
    # Convex combinations can overshoot [0,1] by one ulp; clip protects the invariant.
    return ImageTensor(np.clip(spanned, 0.0, 1.0))


def anchor_band_rgb(spanned: ImageTensor) -> ImageTensor:
    """Extract the (R,G,B) anchor bands (650/550/450 nm) from a 31-band image."""
    if spanned.channels != NUM_BANDS:
        raise ValueError(f"expected {NUM_BANDS} bands, got {spanned.channels}")
    return ImageTensor(spanned.data[..., list(ANCHOR_BAND_RGB)])
