"""
Métriques de reconstruction: PSNR et SSIM (fenêtres uniformes 8x8, pas 8).
Les clips sont des tableaux [T, H, W, C] à valeurs dans [0, 1].
"""
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError

PSNR_CAP = 99.0
SSIM_WINDOW = 8
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


@dataclass
class MetricReport:
    """Moyennes et valeurs par image."""

    psnr_db: float
    ssim: float
    psnr_per_frame: List[float] = field(default_factory=list)
    ssim_per_frame: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _check_pair(a: np.ndarray, b: np.ndarray):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"formes différentes : {a.shape} et {b.shape}")
    if a.ndim != 4:
        raise ShapeError(f"clip [T, H, W, C] attendu, reçu {a.shape}")
    return a, b


def psnr_per_frame(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = _check_pair(a, b)
    mse = ((a - b) ** 2).mean(axis=(1, 2, 3))
    with np.errstate(divide='ignore'):
        values = np.where(mse > 0, 10.0 * np.log10(1.0 / np.maximum(mse, 1e-300)), PSNR_CAP)
    return np.minimum(values, PSNR_CAP)


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR moyen sur les images (MAX = 1), plafonné à 99 dB."""
    return float(psnr_per_frame(a, b).mean())


def _windows(frames: np.ndarray) -> np.ndarray:
    # [T, H, W, C] -> [T, nh, nw, C, 8, 8]
    view = sliding_window_view(frames, (SSIM_WINDOW, SSIM_WINDOW), axis=(1, 2))
    return view[:, ::SSIM_WINDOW, ::SSIM_WINDOW]


def ssim_per_frame(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = _check_pair(a, b)
    if a.shape[1] < SSIM_WINDOW or a.shape[2] < SSIM_WINDOW:
        raise ShapeError(f"images {a.shape[1]}x{a.shape[2]} plus petites que la fenêtre {SSIM_WINDOW}")
    wa, wb = _windows(a), _windows(b)
    axes = (-2, -1)
    mu_a, mu_b = wa.mean(axis=axes), wb.mean(axis=axes)
    var_a = wa.var(axis=axes)
    var_b = wb.var(axis=axes)
    cov = (wa * wb).mean(axis=axes) - mu_a * mu_b
    numerator = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    denominator = (mu_a ** 2 + mu_b ** 2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return (numerator / denominator).mean(axis=(1, 2, 3))


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """SSIM moyen (par canal puis par image)."""
    return float(ssim_per_frame(a, b).mean())


def evaluate(reference: np.ndarray, candidate: np.ndarray) -> MetricReport:
    psnr_frames = psnr_per_frame(reference, candidate)
    ssim_frames = ssim_per_frame(reference, candidate)
    return MetricReport(float(psnr_frames.mean()), float(ssim_frames.mean()),
                        psnr_frames.tolist(), ssim_frames.tolist())
