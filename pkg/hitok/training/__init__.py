"""Entraînement: pertes, programme progressif, boucles tokenizer/générateur, journal."""
from .losses import generator_loss, layer_weights, tokenizer_loss
from .schedule import progressive_stage
from .metric_log import MetricLog, read_metric_log
from .tokenizer_trainer import TokenizerRun, evaluate_tokenizer, train_tokenizer
from .generator_trainer import GeneratorRun, evaluate_generator, tokenize_clips, train_generator, uniform_baseline

__all__ = [
    'generator_loss', 'layer_weights', 'tokenizer_loss', 'progressive_stage', 'MetricLog', 'read_metric_log',
    'TokenizerRun', 'evaluate_tokenizer', 'train_tokenizer', 'GeneratorRun', 'evaluate_generator',
    'tokenize_clips', 'train_generator', 'uniform_baseline',
]
