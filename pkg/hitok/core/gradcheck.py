"""
Vérification des gradients par différences finies centrées.
"""
from typing import Callable, List, Sequence

import numpy as np

from .tensor import Tensor, no_grad


def numeric_gradients(fn: Callable[[], Tensor], inputs: Sequence[Tensor], h: float = 1e-5) -> List[np.ndarray]:
    """Gradient numérique de la perte scalaire `fn()` par rapport à chaque entrée."""
    grads = []
    with no_grad():
        for tensor in inputs:
            grad = np.zeros_like(tensor.data, dtype=np.float64)
            flat = tensor.data.reshape(-1)
            for i in range(flat.size):
                original = flat[i]
                flat[i] = original + h
                plus = float(fn().data)
                flat[i] = original - h
                minus = float(fn().data)
                flat[i] = original
                grad.reshape(-1)[i] = (plus - minus) / (2.0 * h)
            grads.append(grad)
    return grads


def max_relative_error(fn: Callable[[], Tensor], inputs: Sequence[Tensor], h: float = 1e-5,
                       floor: float = 1e-3) -> float:
    """
    Écart relatif maximal entre gradients analytiques et numériques.

    Args:
        fn: Fonction sans argument renvoyant une perte scalaire
        inputs: Tenseurs (requires_grad=True) dont on vérifie le gradient
        h: Pas des différences finies
        floor: Plancher du dénominateur pour les gradients quasi nuls
    """
    for tensor in inputs:
        tensor.grad = None
    fn().backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad for t in inputs]
    numeric = numeric_gradients(fn, inputs, h)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float((np.abs(a - n) / denom).max(initial=0.0)))
    return worst
