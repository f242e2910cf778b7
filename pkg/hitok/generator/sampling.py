"""Guidage sans classifieur et échantillonnage (température, top-k)."""
import numpy as np

from ..errors import ShapeError


def cfg_logits(cond: np.ndarray, uncond: np.ndarray, scale: float) -> np.ndarray:
    """uncond + (cond - uncond) * scale; les échelles 0 et 1 rendent les entrées exactes."""
    cond = np.asarray(cond)
    uncond = np.asarray(uncond)
    if cond.shape != uncond.shape:
        raise ShapeError(f"logits conditionnels {cond.shape} et inconditionnels {uncond.shape}")
    if scale == 1.0:
        return cond.copy()
    if scale == 0.0:
        return uncond.copy()
    return uncond + (cond - uncond) * scale


def top_k_filter(logits: np.ndarray, k: int) -> np.ndarray:
    """Garde les k plus grands logits (k = 0: tous), les autres passent à -inf."""
    logits = np.asarray(logits, dtype=np.float64)
    if k <= 0 or k >= logits.shape[-1]:
        return logits
    threshold = np.partition(logits, -k, axis=-1)[..., -k, None]
    return np.where(logits >= threshold, logits, -np.inf)


def token_probabilities(logits: np.ndarray, temperature: float = 1.0, top_k: int = 0) -> np.ndarray:
    if temperature <= 0:
        raise ShapeError(f"température {temperature} invalide")
    scaled = top_k_filter(np.asarray(logits, dtype=np.float64) / temperature, top_k)
    scaled = scaled - scaled.max(axis=-1, keepdims=True)
    weights = np.exp(scaled)
    return weights / weights.sum(axis=-1, keepdims=True)


def sample_token(logits: np.ndarray, rng: np.random.Generator, temperature: float = 1.0, top_k: int = 0) -> int:
    """Tire un indice selon softmax(logits / température) restreint au top-k."""
    probs = token_probabilities(logits, temperature, top_k)
    cumulative = np.cumsum(probs)
    index = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side='right'))
    index = min(index, probs.shape[-1] - 1)
    return index
