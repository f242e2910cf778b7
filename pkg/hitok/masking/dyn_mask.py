"""
Masquage dynamique des positions redondantes d'une grille de jetons.

Une position (t, h, w), t >= 1, est candidate quand la distance de Hamming
normalisée entre ses bits et ceux de l'image t-1 est strictement inférieure
à la moyenne de la grille. Le nombre de positions masquées est plafonné.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from ..core.tensor import Tensor, no_grad
from ..errors import ShapeError, StrategyError
from ..metrics import psnr
from .strategies import STRATEGIES, get_strategy

logger = logging.getLogger(__name__)

# Écart relatif sous lequel un score est considéré égal à la moyenne (non masqué)
TIE_TOLERANCE = 1e-12


@dataclass(eq=False)
class MaskPlan:
    """Plan de masquage d'une couche: vrai = position masquée."""

    mask: np.ndarray
    strategy: str = 'repeat_prev'
    cap: float = 0.85

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.ndim < 3:
            raise ShapeError(f"masque de rang >= 3 attendu, reçu {self.mask.shape}")
        if self.strategy not in STRATEGIES:
            raise StrategyError(f"stratégie de masque inconnue : {self.strategy}")

    @property
    def masked_count(self) -> int:
        return int(self.mask.sum())

    @property
    def maskable_count(self) -> int:
        """Positions des images 1..T-1 (l'image 0 n'est jamais masquée)."""
        return int(self.mask[..., 1:, :, :].size)

    @property
    def masked_fraction(self) -> float:
        """Part masquée des positions masquables."""
        if self.maskable_count == 0:
            return 0.0
        return self.masked_count / self.maskable_count

    @property
    def kept_fraction(self) -> float:
        """Part des positions de la grille entière transmises."""
        return 1.0 - self.masked_count / self.mask.size

    def validate(self) -> None:
        if self.mask[..., 0, :, :].any():
            raise StrategyError("l'image 0 ne doit jamais être masquée")
        if self.masked_fraction > self.cap:
            raise StrategyError(f"fraction masquée {self.masked_fraction:.3f} > plafond {self.cap}")


def diff_matrix(signs: np.ndarray) -> np.ndarray:
    """
    Distances de Hamming normalisées entre images consécutives.

    Args:
        signs: Bits ±1 d'une couche [T, H, W, qd]

    Returns:
        Scores [T-1, H, W] dans [0, 1]
    """
    signs = np.asarray(signs)
    if signs.ndim != 4:
        raise ShapeError(f"diff_matrix: grille [T, H, W, qd] attendue, reçu {signs.shape}")
    return (signs[1:] != signs[:-1]).mean(axis=-1)


def build_mask(scores: np.ndarray, cap: float = 0.85, rng: Optional[np.random.Generator] = None,
               strategy: str = 'repeat_prev') -> MaskPlan:
    """
    Construit le masque d'une couche à partir de ses scores de différence.

    Les candidats sont les scores strictement sous la moyenne; s'ils dépassent
    floor(cap * positions masquables), un sous-ensemble de cette taille est
    tiré sans remise avec `rng`.

    Args:
        scores: Sortie de `diff_matrix`, [T-1, H, W]
        cap: Plafond de la fraction masquée, dans (0, 1]
        rng: Générateur pseudo-aléatoire (graine 0 par défaut)
        strategy: Stratégie de substitution associée au plan

    Returns:
        MaskPlan de forme [T, H, W] avec l'image 0 jamais masquée
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 3:
        raise ShapeError(f"build_mask: scores [T-1, H, W] attendus, reçu {scores.shape}")
    if not 0.0 < cap <= 1.0:
        raise StrategyError(f"plafond de masque invalide : {cap}")
    mask = np.zeros((scores.shape[0] + 1,) + scores.shape[1:], dtype=bool)
    if scores.size == 0:
        return MaskPlan(mask, strategy, cap)

    mean = math.fsum(scores.ravel()) / scores.size
    candidates = scores < mean - TIE_TOLERANCE * max(1.0, abs(mean))
    limit = int(math.floor(cap * scores.size))
    if candidates.sum() > limit:
        rng = rng if rng is not None else np.random.default_rng(0)
        chosen = rng.choice(np.flatnonzero(candidates), size=limit, replace=False)
        candidates = np.zeros_like(candidates)
        candidates.flat[chosen] = True
    mask[1:] = candidates
    logger.debug("masque: %d/%d positions (plafond %d)", int(candidates.sum()), scores.size, limit)
    return MaskPlan(mask, strategy, cap)


def _broadcast_mask(plan: MaskPlan, latent: Tensor) -> np.ndarray:
    target = latent.shape[:-1]
    if plan.mask.shape == target:
        return plan.mask
    if plan.mask.shape == target[1:] and target[0] == 1:
        return plan.mask[None]
    raise ShapeError(f"masque {plan.mask.shape} incompatible avec la grille {latent.shape}")


def apply_mask(latent: Tensor, plan: MaskPlan, learned_token: Optional[Tensor] = None) -> Tensor:
    """
    Remplace les positions masquées d'une grille selon la stratégie du plan.

    Args:
        latent: Grille [B, T, H, W, C] (ou [T, H, W, C])
        plan: Plan de masquage de la couche
        learned_token: Jeton appris [C], requis par 'learned' et seulement par elle

    Returns:
        Grille substituée; identique à l'entrée pour un masque vide
    """
    strategy = get_strategy(plan.strategy)
    mask = _broadcast_mask(plan, latent)
    return strategy.substitute(latent, mask, learned_token)


def signs_of(indices: np.ndarray, quant_dim: int) -> np.ndarray:
    """Bits ±1 [..., qd] d'une grille d'indices (raccourci pour `diff_matrix`)."""
    from ..tokenizer.lfq import index_to_signs
    return index_to_signs(indices, quant_dim)


def plan_for_grid(indices: np.ndarray, quant_dim: int, cap: float, strategy: str,
                  rng: Optional[np.random.Generator] = None) -> MaskPlan:
    """Enchaîne `diff_matrix` et `build_mask` pour une grille d'indices [T, H, W]."""
    return build_mask(diff_matrix(signs_of(indices, quant_dim)), cap, rng, strategy)


def summarize_plans(plans: Dict[int, MaskPlan]) -> Dict[str, float]:
    """Fractions masquées par couche, pour les journaux et `eval`."""
    return {f"layer{m}_masked": plan.masked_fraction for m, plan in sorted(plans.items())}


def evaluate_masking(tokenizer, video: np.ndarray, cap: Optional[float] = None,
                     layers=None, seed: int = 0) -> Dict[str, object]:
    """
    Compare le décodage masqué de chaque stratégie au décodage complet.

    Args:
        tokenizer: HierTokenizer entraîné
        video: Clip [T, H, W, C]
        cap: Plafond de masquage (défaut: configuration du tokenizer)
        layers: Couches masquées (défaut: configuration du tokenizer)
        seed: Graine du tirage sous le plafond

    Returns:
        PSNR sans masque, PSNR par stratégie, fraction masquée et jetons transmis
    """
    from ..output.accounting import effective_tokens, masked_payload_bits
    reference = np.asarray(video, dtype=np.float64)
    with no_grad():
        latents = tokenizer.encode(video)
        full = tokenizer.decode(latents, masks={})[0]
        report: Dict[str, object] = {'unmasked_psnr': psnr(reference, full), 'strategies': {}}
        plans: Dict[int, MaskPlan] = {}
        for name in STRATEGIES:
            plans = tokenizer.plan_masks(latents, strategy=name, cap=cap, layers=layers, seed=seed)
            recon = tokenizer.decode(latents, masks=plans)[0]
            report['strategies'][name] = psnr(reference, recon)
    report.update(summarize_plans(plans))
    report['effective_tokens'] = effective_tokens(tokenizer.cfg, plans)
    report['total_tokens'] = tokenizer.cfg.total_tokens
    report['masked_payload_bytes'] = math.ceil(masked_payload_bits(tokenizer.cfg, plans) / 8)
    logger.debug("masquage : %d/%d jetons transmis", report['effective_tokens'], report['total_tokens'])
    return report
