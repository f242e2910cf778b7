"""Moteur de tenseurs: différentiation automatique, paramètres, points de contrôle."""
from .tensor import Tensor, as_tensor, default_dtype, no_grad, precision, is_grad_enabled
from .params import ParamStore, adam_step
from .checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    'Tensor', 'as_tensor', 'default_dtype', 'no_grad', 'precision', 'is_grad_enabled',
    'ParamStore', 'adam_step', 'save_checkpoint', 'load_checkpoint',
]
