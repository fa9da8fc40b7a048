"""Cross-language API mapping mining by joint embedding of API sequences.

Records from two programming languages (API call sequence plus a short
natural-language description) train one encoder-decoder model. Aligning
the resulting semantic vectors pairs equivalent sequences across
languages, and phrase statistics over the aligned pairs yield mapping
rules.
"""
from .alignment import AlignedPair, EmbeddingIndex, align, align_vectors, alignment_accuracy, cosine_similarity
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import Corpus, Language, SnippetRecord, Vocabulary, build_corpus, load_corpus
from .errors import ApiAlignError, CheckpointError, ConfigError, CorpusError, DataError, NumericError
from .evaluation import (
    MappingSet,
    correctness,
    edit_distance_ratio,
    ir_baseline_align,
    levenshtein,
    score_mappings,
)
from .model import JointModel, ModelConfig, embed, embed_corpus, evaluate_loss, forward_loss, train
from .phrases import MappingRule, extract_phrase_pairs, mine_mappings, one_to_one_mappings, translation_probability
from .synthetic import Noise, demo_specs, generate_synthetic_corpus

__version__ = "0.1.0"
