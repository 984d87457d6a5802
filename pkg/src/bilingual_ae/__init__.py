"""Bilingual word embeddings learned by bag-of-words autoencoders."""
__version__ = "0.1.0"

from .autoencoder import build_tree, encode_binary, encode_counts
from .bilingual import (
    BilingualModel,
    ModelFormatError,
    NumericError,
    TrainConfig,
    TrainReport,
    encode,
    load_model,
    save_model,
    train,
)
from .classifier import DataError, cross_lingual_eval, perceptron_train
from .corpus import (
    AlignedPair,
    BagOfWords,
    CorpusError,
    Vocabulary,
    build_vocabulary,
    compute_tfidf,
    make_pairs,
    merge_minibatch,
    to_bow,
    tokenize,
)
from .embeddings import EmbeddingTable, doc_vector, export_embeddings, nearest, tables_from_model

__all__ = [
    "build_tree",
    "encode_binary",
    "encode_counts",
    "BilingualModel",
    "ModelFormatError",
    "NumericError",
    "TrainConfig",
    "TrainReport",
    "encode",
    "load_model",
    "save_model",
    "train",
    "DataError",
    "cross_lingual_eval",
    "perceptron_train",
    "AlignedPair",
    "BagOfWords",
    "CorpusError",
    "Vocabulary",
    "build_vocabulary",
    "compute_tfidf",
    "make_pairs",
    "merge_minibatch",
    "to_bow",
    "tokenize",
    "EmbeddingTable",
    "doc_vector",
    "export_embeddings",
    "nearest",
    "tables_from_model",
]
