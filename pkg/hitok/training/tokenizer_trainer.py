"""
Entraînement du tokenizer: L1 + pénalité d'entropie, programme progressif,
Adam à pas constant. Déterministe pour une graine donnée.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from ..config import RunConfig
from ..core import functional as F
from ..core.params import adam_step
from ..core.tensor import no_grad
from ..errors import ConfigError, DivergenceError, NonFiniteError
from ..metrics import psnr
from ..tokenizer.hier_vae import HierTokenizer
from .losses import tokenizer_loss
from .metric_log import MetricLog
from .schedule import progressive_stage

logger = logging.getLogger(__name__)


@dataclass
class TokenizerRun:
    tokenizer: HierTokenizer
    history: List[Dict[str, float]] = field(default_factory=list)

    @property
    def initial_l1(self) -> float:
        return self.history[0]['l1']

    @property
    def final_l1(self) -> float:
        return self.history[-1]['l1']


def train_tokenizer(run_config: RunConfig, clips: Sequence[np.ndarray], out_path: Optional[str] = None,
                    log_path: Optional[str] = None, progress: bool = False) -> TokenizerRun:
    """
    Entraîne un tokenizer sur des clips [T, H, W, C].

    Args:
        run_config: Sections `hierarchy` et `tokenizer_train`
        clips: Jeu d'entraînement (non vide)
        out_path: Checkpoint HTCK à écrire (avec sa configuration)
        log_path: Journal JSON lines
        progress: Barre de progression tqdm

    Returns:
        Le tokenizer entraîné et l'historique des pertes
    """
    cfg = run_config.tokenizer_train
    hierarchy = run_config.hierarchy
    if len(clips) == 0:
        raise ConfigError("jeu d'entraînement vide")
    data = np.stack([np.asarray(clip, dtype=np.float64) for clip in clips])
    tokenizer = HierTokenizer(hierarchy, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    batch_size = min(cfg.batch_size, len(data))
    run = TokenizerRun(tokenizer)
    logger.info("tokenizer : %d paramètres, %d clips, %d étapes", tokenizer.num_parameters(), len(data), cfg.steps)

    with MetricLog(log_path) as log:
        log.header(run_config.to_dict(), entropy_weight=cfg.entropy_weight, lr=cfg.lr,
                   batch_size=cfg.batch_size, progressive_boundary=cfg.progressive_boundary)
        for step in tqdm(range(cfg.steps), desc="tokenizer", disable=not progress):
            batch = data[rng.choice(len(data), size=batch_size, replace=False)]
            active = progressive_stage(step, cfg.steps, cfg.progressive_boundary, hierarchy.num_layers)
            try:
                latents = tokenizer.encode(batch)
                signed = tokenizer.reconstruct(latents, masks={}, active_layers=active, placeholder='learned')
                recon = F.add(F.mul(signed, 0.5), 0.5)
                loss, parts = tokenizer_loss(batch, recon, latents, cfg.entropy_weight,
                                             cfg.entropy_tau, cfg.entropy_gamma)
                tokenizer.store.zero_grad()
                loss.backward()
                adam_step(tokenizer.store, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
            except NonFiniteError as e:
                raise DivergenceError(f"étape {step} : {e.message}") from e
            if not np.isfinite(parts['total']):
                raise DivergenceError(f"étape {step} : perte non finie {parts['total']}")
            parts['active_layers'] = len(active)
            run.history.append(parts)
            log.log(step, **parts)
            if step % cfg.log_every == 0 or step == cfg.steps - 1:
                logger.info("étape %d/%d  l1=%.4f  entropie=%.4f", step, cfg.steps, parts['l1'], parts['entropy'])
        log.summary(initial_l1=run.initial_l1, final_l1=run.final_l1)

    if out_path:
        tokenizer.save(out_path, run_config)
        logger.info("checkpoint écrit : %s", out_path)
    return run


def evaluate_tokenizer(tokenizer: HierTokenizer, clips: Sequence[np.ndarray]) -> Dict[str, object]:
    """PSNR moyen complet et grossier, et part des clips où la hiérarchie complète l'emporte."""
    full, coarse = [], []
    for clip in clips:
        with no_grad():
            latents = tokenizer.encode(clip)
        full.append(psnr(clip, tokenizer.decode(latents, masks={})[0]))
        if tokenizer.cfg.num_layers > 1:
            coarse.append(psnr(clip, tokenizer.decode_coarse(latents)[0]))
    report: Dict[str, object] = {'psnr': float(np.mean(full)), 'psnr_per_clip': full}
    if coarse:
        report['coarse_psnr'] = float(np.mean(coarse))
        report['hierarchy_wins'] = float(np.mean([f > c for f, c in zip(full, coarse)]))
    return report
