"""
Journal de métriques JSON lines.

Le premier enregistrement est un en-tête avec la configuration résolue;
les suivants portent une étape et des valeurs. Aucun horodatage: deux
exécutions de même graine produisent des journaux identiques.
"""
import json
import logging
import os
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)


class MetricLog:
    """Écrit les enregistrements au fil de l'eau et les garde en mémoire."""

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self.records: List[Dict[str, Any]] = []
        self._file = None
        if path:
            os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
            self._file = open(path, 'w', encoding='utf-8')

    def _write(self, record: Dict[str, Any]) -> None:
        self.records.append(record)
        if self._file is not None:
            self._file.write(json.dumps(record, sort_keys=True) + "\n")

    def header(self, config: Dict[str, Any], **extra: Any) -> None:
        self._write({'type': 'header', 'config': config, **extra})

    def log(self, step: int, **values: Any) -> None:
        self._write({'type': 'step', 'step': int(step), **values})

    def summary(self, **values: Any) -> None:
        self._write({'type': 'summary', **values})

    def steps(self) -> List[Dict[str, Any]]:
        return [r for r in self.records if r['type'] == 'step']

    def close(self) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None
            logger.debug("journal écrit : %s", self.path)

    def __enter__(self) -> 'MetricLog':
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_metric_log(path: str) -> List[Dict[str, Any]]:
    with open(path, 'r', encoding='utf-8') as f:
        return [json.loads(line) for line in f if line.strip()]
