"""Synthetic priors and masks for desk-scale experiments."""

from __future__ import annotations

import numpy as np

from .core import Mask, RandomStream
from .denoisers import GMMPrior


def textured_gmm(
    shape: tuple[int, int, int] = (32, 32, 3),
    n_components: int = 4,
    variance: float = 0.01,
    amplitude: float = 0.25,
    seed: int = 0,
) -> GMMPrior:
    """Equal-weight GMM whose component means are oriented sinusoidal gratings around 0.5."""
    h, w, c = shape
    st = RandomStream(seed)
    yy, xx, cc = np.meshgrid(np.arange(h), np.arange(w), np.arange(c), indexing="ij")
    means = []
    for _ in range(n_components):
        theta, freq, phase, tilt = st.uniform(4)
        theta *= np.pi
        freq = 0.05 + 0.2 * freq
        arg = 2 * np.pi * freq * (np.cos(theta) * xx + np.sin(theta) * yy) + 2 * np.pi * phase + tilt * cc
        means.append((0.5 + amplitude * np.sin(arg)).ravel())
    k = n_components
    return GMMPrior(np.full(k, 1.0 / k), np.array(means), np.full(k, variance))


# 3x5 block glyphs, '#' = ink
_GLYPHS = {
    "T": ["###", ".#.", ".#.", ".#.", ".#."],
    "E": ["###", "#..", "##.", "#..", "###"],
    "X": ["#.#", "#.#", ".#.", "#.#", "#.#"],
}


def text_mask(height: int, width: int, text: str = "TEXT", scale: int = 1, channels: int = 1) -> Mask:
    """Observed everywhere except where block letters are drawn (the missing text).

    Returns a Mask over a (height, width, channels) signal; a pixel's channels
    are observed or missing together.
    """
    ink = np.zeros((height, width), dtype=bool)
    gw, gh = 3 * scale, 5 * scale
    total = len(text) * (gw + scale) - scale
    x0 = max(0, (width - total) // 2)
    y0 = max(0, (height - gh) // 2)
    for n, ch in enumerate(text):
        glyph = _GLYPHS[ch.upper()]
        for r, row in enumerate(glyph):
            for q, cell in enumerate(row):
                if cell == "#":
                    ys = y0 + r * scale
                    xs = x0 + n * (gw + scale) + q * scale
                    ink[ys : ys + scale, xs : xs + scale] = True
    observed = np.repeat(~ink.ravel(), channels)
    return Mask.from_bool(observed)
