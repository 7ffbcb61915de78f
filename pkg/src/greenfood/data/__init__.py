from .corpus import (
    Corpus,
    CorpusError,
    Direction,
    IndicatorSpec,
    InteractionLog,
    NormalizedView,
    UserSequence,
    build_sequences,
    fit_specs,
    load_corpus,
    normalize_indicators,
    normalize_values,
    user_green_profile,
    write_corpus,
)
from .sampling import GREEN_NEGATIVE, GREEN_POSITIVE, NORMAL, TrainingBatch, TrainingPair, sample_batch
from .synth import SynthConfig, SynthConfigError, SyntheticCorpus, synth_generate

__all__ = [
    "Corpus",
    "CorpusError", "Direction", "IndicatorSpec", "InteractionLog", "NormalizedView", "UserSequence",
    "build_sequences", "fit_specs", "load_corpus", "normalize_indicators", "normalize_values",
    "user_green_profile", "write_corpus", "GREEN_NEGATIVE", "GREEN_POSITIVE", "NORMAL",
    "TrainingBatch", "TrainingPair", "sample_batch", "SynthConfig", "SynthConfigError",
    "SyntheticCorpus", "synth_generate",
]
