"""
Exceptions du tokenizer hiérarchique.
Chaque famille porte son code de sortie CLI et un code court lisible par machine.
"""


class HitokError(Exception):
    """Erreur racine du paquet."""

    code = "error"
    exit_code = 1

    def __init__(self, message: str = ""):
        super().__init__(message)
        self.message = message

    def one_line(self) -> str:
        """Message d'erreur sur une seule ligne, format `error: <code>: <message>`."""
        text = " ".join(str(self.message).split())
        return f"error: {self.code}: {text}"


class ConfigError(HitokError):
    code = "config"
    exit_code = 2


class ShapeError(HitokError):
    code = "shape"
    exit_code = 2


class StrategyError(HitokError):
    code = "strategy"
    exit_code = 2


class CodecError(HitokError):
    code = "format"
    exit_code = 3


class BadMagicError(CodecError):
    code = "bad_magic"


class VersionMismatchError(CodecError):
    code = "version_mismatch"


class TruncatedPayloadError(CodecError):
    code = "truncated_payload"


class NumericError(HitokError):
    code = "numeric"
    exit_code = 4


class NonFiniteError(NumericError):
    code = "non_finite"


class DivergenceError(NumericError):
    code = "divergence"


class MissingGradientError(NumericError):
    code = "missing_gradient"
