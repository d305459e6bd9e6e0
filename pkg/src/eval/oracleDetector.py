"""Hand-written artifact detector used to confirm the benchmark is solvable.

Artifacts show up as sharp structure in the difference channel, so the
strongest Laplacian response there is a strong bogus indicator. Negating it
gives a normality score on the same "higher is more inlier-like" scale as the
Dirichlet score.
"""

from __future__ import annotations

import numpy as np

from ..transforms.stampTransforms import convolve2d, laplacianKernel

differenceChannel = 2


def laplacianOracleScores(pixels: np.ndarray, *, channel: int = differenceChannel) -> np.ndarray:
    if pixels.ndim != 4 or pixels.shape[1] <= channel:
        raise ValueError(f'Expected (samples, channels > {channel}, height, width), got {pixels.shape}')
    kernel = laplacianKernel()
    return np.array(
        [-float(np.abs(convolve2d(stamp[channel].astype(np.float64), kernel)).max()) for stamp in pixels]
    )
