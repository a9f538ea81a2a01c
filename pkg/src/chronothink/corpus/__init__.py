from .generate import (
    DEFAULT_KNOWLEDGE,
    DEFAULT_LEXICON,
    ChainGenerator,
    ExternalClient,
    GenerationRejected,
    HttpTransport,
    RuleBasedGenerator,
    TransientError,
    rule_based_chain,
)
from .io import SchemaError, iter_corpus, load_corpus, record_from_dict, record_to_dict, save_corpus
from .records import DialogueRecord, Turn
from .similarity import DiscardEntry, FilterResult, filter_corpus, levenshtein, similarity_ratio
from .synth import SynthSpec, synth_chain, synth_corpus

__all__ = [
    "DEFAULT_KNOWLEDGE",
    "DEFAULT_LEXICON",
    "ChainGenerator",
    "DialogueRecord",
    "DiscardEntry",
    "ExternalClient",
    "FilterResult",
    "GenerationRejected",
    "HttpTransport",
    "RuleBasedGenerator",
    "SchemaError",
    "SynthSpec",
    "TransientError",
    "Turn",
    "filter_corpus",
    "iter_corpus",
    "levenshtein",
    "load_corpus",
    "record_from_dict",
    "record_to_dict",
    "rule_based_chain",
    "save_corpus",
    "similarity_ratio",
    "synth_chain",
    "synth_corpus",
]
