"""
Réglages d'environnement.
HITOK_THREADS doit être appliqué avant le chargement de numpy.
"""
import logging
import os

THREADS_ENV = "HITOK_THREADS"
_BLAS_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def thread_count() -> int:
    """Nombre de threads autorisés (défaut: 1, pour le déterminisme)."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def apply_thread_limit() -> None:
    """Plafonne les threads BLAS/OpenMP selon HITOK_THREADS."""
    count = str(thread_count())
    for var in _BLAS_VARS:
        os.environ.setdefault(var, count)


def configure_logging(verbosity: int = 0, quiet: bool = False) -> None:
    """Installe un handler console unique pour le logger `hitok`."""
    logger = logging.getLogger("hitok")
    logger.handlers.clear()
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    logger.addHandler(handler)
    if quiet:
        logger.setLevel(logging.WARNING)
    elif verbosity > 0:
        logger.setLevel(logging.DEBUG)
    else:
        logger.setLevel(logging.INFO)
