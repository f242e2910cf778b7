"""Formats de sortie: flux de jetons, clips, images, récapitulatifs."""
from .base_formatter import BaseFormatter, BaseCodec
from .token_stream import TokenStreamCodec, payload_bits
from .video_file import VideoCodec
from .frame_export import PpmCodec, export_frames
from .accounting import bits_per_pixel, compression_ratio, effective_tokens, hierarchy_stats
from .stats_formatter import StatsTextFormatter, StatsJsonFormatter

__all__ = [
    'BaseFormatter', 'BaseCodec', 'TokenStreamCodec', 'payload_bits', 'VideoCodec', 'PpmCodec',
    'export_frames', 'bits_per_pixel', 'compression_ratio', 'effective_tokens', 'hierarchy_stats',
    'StatsTextFormatter', 'StatsJsonFormatter',
]
