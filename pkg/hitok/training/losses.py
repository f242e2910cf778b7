"""Pertes du tokenizer (L1 + entropie) et du générateur (entropie croisée pondérée par couche)."""
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core import functional as F
from ..core.tensor import Tensor, as_tensor
from ..errors import ConfigError, ShapeError
from ..tokenizer.lfq import entropy_penalty


def l1_loss(video: np.ndarray, recon) -> Tensor:
    """Moyenne de |video - recon|."""
    recon = as_tensor(recon)
    target = Tensor(np.asarray(video), dtype=recon.dtype)
    if target.shape != recon.shape:
        raise ShapeError(f"cible {target.shape}, reconstruction {recon.shape}")
    return F.mean(F.abs(F.sub(recon, target)))


def tokenizer_loss(video: np.ndarray, recon, latents, entropy_weight: float = 0.1,
                   tau: float = 1.0, gamma: float = 1.0) -> Tuple[Tensor, Dict[str, float]]:
    """
    L1 plus la pénalité d'entropie pondérée, sommée sur les couches.

    Args:
        video: Cible dans [0, 1]
        recon: Reconstruction dans [0, 1] (tenseur ou tableau)
        latents: HierLatents dont `pre_quant` alimente la pénalité

    Returns:
        (perte totale, composantes {'l1', 'entropy', 'total'}); 'entropy' est déjà pondérée
    """
    l1 = l1_loss(video, recon)
    total = l1
    entropy_value = 0.0
    pre_quant = [z for z in latents.pre_quant if z is not None]
    if entropy_weight and pre_quant:
        entropy = entropy_penalty(pre_quant[0], pre_quant[0].shape[-1], tau, gamma)
        for z in pre_quant[1:]:
            entropy = F.add(entropy, entropy_penalty(z, z.shape[-1], tau, gamma))
        weighted = F.mul(entropy, entropy_weight)
        total = F.add(l1, weighted)
        entropy_value = weighted.item()
    return total, {'l1': l1.item(), 'entropy': entropy_value, 'total': total.item()}


def layer_weights(token_counts: Sequence[int], override: Optional[Sequence[float]] = None) -> np.ndarray:
    """Poids w_m proportionnels à 1/N_m (ou imposés), normalisés à une somme de 1."""
    if override is not None:
        weights = np.asarray(override, dtype=np.float64)
        if weights.shape != (len(token_counts),):
            raise ConfigError(f"{weights.size} poids pour {len(token_counts)} couches")
    else:
        weights = 1.0 / np.asarray(token_counts, dtype=np.float64)
    if weights.sum() <= 0:
        raise ConfigError("la somme des poids de couches doit être > 0")
    return weights / weights.sum()


def generator_loss(logits: List[Tensor], targets: List[np.ndarray],
                   weights: Sequence[float]) -> Tuple[Tensor, Dict[str, float]]:
    """
    Somme pondérée des entropies croisées par couche.

    Args:
        logits: Par couche, logits [n_m, V_m]
        targets: Par couche, cibles entières (aplaties en [n_m])
        weights: Poids par couche

    Returns:
        (perte totale, composantes {'ce{m}': entropie croisée non pondérée, 'total'})
    """
    if not len(logits) == len(targets) == len(weights):
        raise ShapeError(f"{len(logits)} logits, {len(targets)} cibles, {len(weights)} poids")
    total = None
    parts: Dict[str, float] = {}
    for m, (layer_logits, layer_targets, weight) in enumerate(zip(logits, targets, weights)):
        layer_targets = np.asarray(layer_targets).reshape(-1)
        if layer_logits.shape[0] != layer_targets.size:
            raise ShapeError(f"couche {m} : {layer_logits.shape[0]} positions, {layer_targets.size} cibles")
        ce = F.cross_entropy(layer_logits, layer_targets)
        parts[f'ce{m}'] = ce.item()
        term = F.mul(ce, float(weight))
        total = term if total is None else F.add(total, term)
    parts['total'] = total.item()
    return total, parts
