"""Word vectors from a trained model: lookup, nearest neighbours, doc vectors."""
from dataclasses import dataclass

import numpy as np

from .corpus import Vocabulary


@dataclass
class EmbeddingTable:
    language: str
    vocab: Vocabulary
    matrix: np.ndarray  # D x V, columns are word vectors

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[1] != len(self.vocab):
            raise ValueError(
                f"matrix has {self.matrix.shape[-1]} columns for a vocabulary of {len(self.vocab)}")
        if len(self.vocab) == 0:
            raise ValueError("empty embedding table")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("non-finite embedding entries")

    @property
    def dim(self):
        return self.matrix.shape[0]

    def vector(self, word):
        try:
            return self.matrix[:, self.vocab.index[word]]
        except KeyError:
            raise KeyError(f"OOV: {word!r}") from None


def tables_from_model(model, vocab_x=None, vocab_y=None):
    """(x table, y table) from a BilingualModel; vocabularies default to the embedded ones."""
    vx = vocab_x if vocab_x is not None else Vocabulary.from_words(model.vocab_x)
    vy = vocab_y if vocab_y is not None else Vocabulary.from_words(model.vocab_y)
    return EmbeddingTable("x", vx, model.Wx), EmbeddingTable("y", vy, model.Wy)


@dataclass
class DocVector:
    vector: np.ndarray
    language: str


def doc_vector(doc, table, stats):
    """Tf-idf weighted sum of the document's word columns (tf = raw count)."""
    w = doc.counts * stats.idf[doc.indices]
    return DocVector(table.matrix[:, doc.indices] @ w, table.language)


def nearest(query_word, query_table, target_table, k=10):
    """k nearest target words to ``query_word`` by Euclidean distance.

    Returns ``[(word, distance), ...]`` ascending; ties go to the lower word
    index.  Within one language the query itself comes first.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    q = query_table.vector(query_word)
    M = target_table.matrix
    if M.shape[0] != q.shape[0]:
        raise ValueError("tables differ in dimension")
    dist = np.sqrt(((M - q[:, None]) ** 2).sum(axis=0))
    first = np.zeros(dist.shape[0], dtype=np.int8)
    if target_table is query_table or (
            target_table.language == query_table.language and query_word in target_table.vocab):
        self_idx = target_table.vocab.index[query_word]
        dist[self_idx] = 0.0
        first[:] = 1
        first[self_idx] = 0
    order = np.lexsort((np.arange(dist.shape[0]), first, dist))[:k]
    words = target_table.vocab.words
    return [(words[i], float(dist[i])) for i in order]


def export_embeddings(table, path):
    """Text format: ``V D`` header, then ``word v1 ... vD`` with 9 significant digits."""
    V, D = len(table.vocab), table.dim
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{V} {D}\n")
        for i, w in enumerate(table.vocab.words):
            vals = " ".join(f"{v:.9g}" for v in table.matrix[:, i])
            f.write(f"{w} {vals}\n")


def import_embeddings(path, language="x"):
    with open(path, encoding="utf-8") as f:
        V, D = (int(t) for t in f.readline().split())
        words, cols = [], np.empty((D, V))
        for i in range(V):
            parts = f.readline().rstrip("\n").split(" ")
            if len(parts) != D + 1:
                raise ValueError(f"{path}: line {i + 2} has {len(parts) - 1} values, expected {D}")
            words.append(parts[0])
            cols[:, i] = [float(t) for t in parts[1:]]
    return EmbeddingTable(language, Vocabulary.from_words(words), cols)
