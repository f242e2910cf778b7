"""Formatters du récapitulatif de compression (`stats`)."""
import json
from typing import Any, Dict

from .base_formatter import BaseFormatter


class StatsTextFormatter(BaseFormatter):
    """Tableau lisible: jetons par couche, total, taux de compression, bpp."""

    def format(self, results: Dict[str, Any]) -> str:
        output = []
        t, h, w = results['input_shape'][:3]
        output.append("=" * 72)
        output.append(f"HIÉRARCHIE DE JETONS - entrée {t}x{h}x{w}")
        output.append("=" * 72)
        output.append(f"{'couche':>6}  {'latent':>12}  {'quant_dim':>9}  {'vocabulaire':>12}  {'jetons':>8}  {'part':>6}")
        for layer in results['layers']:
            shape = 'x'.join(str(n) for n in layer['latent_shape'])
            output.append(f"{layer['layer']:>6}  {shape:>12}  {layer['quant_dim']:>9}  "
                          f"{layer['codebook_size']:>12}  {layer['tokens']:>8}  {layer['share']:>6.1%}")
        output.append("-" * 72)
        output.append(f"total tokens        : {results['total_tokens']}")
        output.append(f"compression ratio   : {results['compression_ratio']:.2f}")
        output.append(f"bits / pixel        : {results['bpp']:.6f}")
        output.append(f"charge utile (oct.) : {results['payload_bytes']}")
        if 'effective_tokens' in results:
            output.append(f"jetons transmis     : {results['effective_tokens']}")
        masking = results.get('masking')
        if masking:
            output.append("-" * 72)
            output.append(f"PSNR sans masque    : {masking['unmasked_psnr']:.2f} dB")
            for name, value in sorted(masking['strategies'].items()):
                output.append(f"PSNR {name:<14} : {value:.2f} dB")
            output.append(f"charge masquée (o.) : {masking['masked_payload_bytes']}")
        output.append("=" * 72)
        return "\n".join(output)


class StatsJsonFormatter(BaseFormatter):
    """Même contenu en JSON (clés triées, stable d'une exécution à l'autre)."""

    def format(self, results: Dict[str, Any]) -> str:
        return json.dumps(results, indent=2, sort_keys=True)
