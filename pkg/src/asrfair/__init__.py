"""Metamorphic, differential fairness testing for speech recognition services."""

__version__ = "0.1.0"

from .audio_io import AudioClip, read_wav, synth_sine, write_wav
from .text_metrics import normalized_distance, tokenize, word_counts, word_levenshtein
from .transforms import DEFAULT_SCHEDULES, Kind, SeveritySchedule, Transformation, apply

__all__ = [
    "AudioClip", "read_wav", "write_wav", "synth_sine",
    "tokenize", "word_levenshtein", "normalized_distance", "word_counts",
    "Kind", "Transformation", "SeveritySchedule", "DEFAULT_SCHEDULES", "apply",
]
