"""
Comptabilité de compression: jetons, taux de compression, bits par pixel.
"""
import math
from typing import Any, Dict, Mapping, Optional, Sequence

from ..config import HierarchyConfig
from ..errors import ConfigError


def pixel_count(input_shape: Sequence[int]) -> int:
    t, h, w = input_shape[:3]
    return int(t) * int(h) * int(w)


def compression_ratio(input_shape: Sequence[int], total_tokens: int) -> float:
    """T*H*W divisé par le nombre de jetons."""
    if total_tokens < 1:
        raise ConfigError(f"nombre de jetons invalide : {total_tokens}")
    return pixel_count(input_shape) / total_tokens


def total_bits(cfg: HierarchyConfig) -> int:
    return sum(layer.token_count * layer.quant_dim for layer in cfg.layers)


def bits_per_pixel(cfg: HierarchyConfig) -> float:
    """Somme des N_m * quant_dim_m rapportée aux pixels du clip d'entrée."""
    return total_bits(cfg) / pixel_count(cfg.input_shape)


def effective_tokens(cfg: HierarchyConfig, plans: Optional[Mapping[int, Any]] = None) -> int:
    """Jetons réellement transmis une fois les positions masquées retirées."""
    masked = sum(int(plan.mask.sum()) for plan in (plans or {}).values())
    return cfg.total_tokens - masked


def masked_payload_bits(cfg: HierarchyConfig, plans: Optional[Mapping[int, Any]] = None) -> int:
    """Bits de charge utile d'un flux masqué: carte de masque + indices transmis."""
    plans = plans or {}
    bits = 0
    for m, layer in enumerate(cfg.layers):
        plan = plans.get(m)
        if plan is None:
            bits += layer.token_count * layer.quant_dim
        else:
            kept = layer.token_count - int(plan.mask.sum())
            bits += layer.token_count + kept * layer.quant_dim
    return bits


def hierarchy_stats(cfg: HierarchyConfig) -> Dict[str, Any]:
    """Tableau récapitulatif d'une hiérarchie (une entrée par couche, la plus dense d'abord)."""
    total = cfg.total_tokens
    layers = []
    for m, layer in enumerate(cfg.layers):
        layers.append({
            'layer': m,
            'latent_shape': list(layer.latent_shape),
            'quant_dim': layer.quant_dim,
            'codebook_size': layer.codebook_size,
            'tokens': layer.token_count,
            'bits': layer.token_count * layer.quant_dim,
            'share': layer.token_count / total,
        })
    bits = total_bits(cfg)
    return {
        'input_shape': list(cfg.input_shape),
        'layers': layers,
        'total_tokens': total,
        'compression_ratio': compression_ratio(cfg.input_shape, total),
        'total_bits': bits,
        'payload_bytes': math.ceil(bits / 8),
        'bpp': bits_per_pixel(cfg),
    }
