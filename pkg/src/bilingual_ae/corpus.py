"""Text ingestion, vocabularies and sparse bags-of-words."""
import unicodedata
from collections import Counter
from dataclasses import dataclass, field

import numpy as np


class CorpusError(ValueError):
    """Raised on malformed or inconsistent input data."""


def _is_punct(ch):
    return unicodedata.category(ch).startswith("P")


def _strip_punct(tok):
    i, j = 0, len(tok)
    while i < j and _is_punct(tok[i]):
        i += 1
    while j > i and _is_punct(tok[j - 1]):
        j -= 1
    return tok[i:j]


def tokenize(line):
    """Lowercase, split on whitespace and strip punctuation from token edges.

    Tokens that are punctuation only disappear. Stopwords are kept.
    """
    out = []
    for tok in line.lower().split():
        tok = _strip_punct(tok)
        if tok:
            out.append(tok)
    return out


@dataclass
class Vocabulary:
    words: list
    doc_freq: np.ndarray
    corpus_doc_count: int
    freq: np.ndarray = None
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {w: i for i, w in enumerate(self.words)}
        if len(self.index) != len(self.words):
            raise CorpusError("duplicate words in vocabulary")
        self.doc_freq = np.asarray(self.doc_freq, dtype=np.int64)
        if self.freq is None:
            self.freq = np.zeros(len(self.words), dtype=np.int64)
        self.freq = np.asarray(self.freq, dtype=np.int64)

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index

    def __eq__(self, other):
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return (self.words == other.words
                and self.corpus_doc_count == other.corpus_doc_count
                and np.array_equal(self.doc_freq, other.doc_freq)
                and np.array_equal(self.freq, other.freq))

    @classmethod
    def from_words(cls, words):
        """Vocabulary with no corpus statistics (e.g. restored from a model file)."""
        n = len(words)
        return cls(list(words), np.zeros(n, dtype=np.int64), 0)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"#vocab v1 N={self.corpus_doc_count}\n")
            for w, fr, df in zip(self.words, self.freq, self.doc_freq):
                f.write(f"{w}\t{fr}\t{df}\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            header = f.readline().rstrip("\n")
            if not header.startswith("#vocab v1 N="):
                raise CorpusError(f"{path}: bad vocabulary header {header!r}")
            n_docs = int(header.split("N=", 1)[1])
            words, freq, df = [], [], []
            for lineno, line in enumerate(f, start=2):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3:
                    raise CorpusError(f"{path}:{lineno}: expected 3 tab-separated fields")
                words.append(parts[0])
                freq.append(int(parts[1]))
                df.append(int(parts[2]))
        return cls(words, np.array(df, dtype=np.int64), n_docs, np.array(freq, dtype=np.int64))


def build_vocabulary(token_streams, max_size=None, min_count=1):
    """Build a vocabulary from an iterable of token lists (one list per document).

    Words are ordered by descending corpus frequency, ties broken
    lexicographically, so identical input always gives identical indices.
    """
    counts = Counter()
    dfs = Counter()
    n_docs = 0
    for stream in token_streams:
        n_docs += 1
        counts.update(stream)
        dfs.update(set(stream))
    kept = [w for w, n in counts.items() if n >= min_count]
    kept.sort(key=lambda w: (-counts[w], w))
    if max_size is not None:
        kept = kept[:max_size]
    if not kept:
        raise CorpusError("empty vocabulary")
    return Vocabulary(
        kept,
        np.array([dfs[w] for w in kept], dtype=np.int64),
        n_docs,
        np.array([counts[w] for w in kept], dtype=np.int64),
    )


class BagOfWords:
    """Sparse multiset of word indices.

    Stored as sorted unique ``indices`` with matching positive ``counts``.
    """

    __slots__ = ("indices", "counts")

    def __init__(self, indices=(), counts=None):
        idx = np.asarray(indices, dtype=np.int64).ravel()
        if counts is None:
            idx, cnt = np.unique(idx, return_counts=True)
        else:
            cnt = np.asarray(counts, dtype=np.int64).ravel()
            if cnt.shape != idx.shape:
                raise ValueError("indices and counts differ in length")
            if np.any(cnt < 1):
                raise ValueError("counts must be >= 1")
            order = np.argsort(idx, kind="stable")
            idx, cnt = idx[order], cnt[order]
            if idx.size and np.any(np.diff(idx) == 0):
                uniq, inv = np.unique(idx, return_inverse=True)
                cnt = np.bincount(inv, weights=cnt).astype(np.int64)
                idx = uniq
        if np.any(idx < 0):
            raise ValueError("negative word index")
        self.indices = idx
        self.counts = cnt.astype(np.int64)

    @classmethod
    def from_dict(cls, entries):
        keys = list(entries)
        return cls(keys, [entries[k] for k in keys])

    @property
    def entries(self):
        return {int(i): int(c) for i, c in zip(self.indices, self.counts)}

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def binary(self):
        """Index set, ignoring multiplicity."""
        return self.indices

    def __len__(self):
        return self.indices.size

    def __bool__(self):
        return self.indices.size > 0

    def __eq__(self, other):
        if not isinstance(other, BagOfWords):
            return NotImplemented
        return (np.array_equal(self.indices, other.indices)
                and np.array_equal(self.counts, other.counts))

    def __add__(self, other):
        return BagOfWords(np.concatenate([self.indices, other.indices]),
                          np.concatenate([self.counts, other.counts]))

    def scaled(self, k):
        return BagOfWords(self.indices, self.counts * int(k))

    def __repr__(self):
        return f"BagOfWords({self.entries})"


@dataclass
class AlignedPair:
    src: BagOfWords
    tgt: BagOfWords


def to_bow(tokens, vocab):
    """Map tokens through ``vocab``; out-of-vocabulary tokens are skipped."""
    idx = [vocab.index[t] for t in tokens if t in vocab.index]
    return BagOfWords(idx)


def _merge_runs(bags, k):
    out = []
    for start in range(0, len(bags), k):
        run = bags[start:start + k]
        if len(run) == 1:
            out.append(run[0])
        else:
            out.append(BagOfWords(np.concatenate([b.indices for b in run]),
                                  np.concatenate([b.counts for b in run])))
    return out


def merge_minibatch(bags, k=5):
    """Sum consecutive runs of ``k`` bags into one bag each.

    A trailing run shorter than ``k`` is merged too.
    """
    if k < 1:
        raise ValueError(f"merge size must be >= 1, got {k}")
    if k == 1:
        return list(bags)
    return _merge_runs(list(bags), k)


def merge_pairs(pairs, k=5):
    """``merge_minibatch`` applied to both sides of aligned pairs in lockstep."""
    if k < 1:
        raise ValueError(f"merge size must be >= 1, got {k}")
    xs = merge_minibatch([p.src for p in pairs], k)
    ys = merge_minibatch([p.tgt for p in pairs], k)
    return [AlignedPair(x, y) for x, y in zip(xs, ys)]


@dataclass
class TfIdfStats:
    idf: np.ndarray
    n_docs: int


def compute_tfidf(docs, vocab):
    """Smoothed idf, ``ln((1 + N) / (1 + df))``, from a document collection."""
    docs = list(docs)
    if not docs:
        raise ValueError("compute_tfidf needs at least one document")
    V = len(vocab)
    df = np.zeros(V, dtype=np.int64)
    for d in docs:
        df[d.indices] += 1
    n = len(docs)
    idf = np.log((1.0 + n) / (1.0 + df))
    return TfIdfStats(idf=idf, n_docs=n)


# --- file readers -----------------------------------------------------------

def read_lines(path):
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\n").rstrip("\r") for line in f]


def read_aligned(path_x, path_y):
    """Read a line-aligned corpus; returns two token-list lists."""
    lx, ly = read_lines(path_x), read_lines(path_y)
    if len(lx) != len(ly):
        raise CorpusError(
            f"aligned files differ in line count: {path_x} has {len(lx)}, {path_y} has {len(ly)}")
    return [tokenize(s) for s in lx], [tokenize(s) for s in ly]


def read_labeled(path):
    """Read ``label<TAB>text`` lines into a list of ``(label, tokens)``."""
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            if "\t" not in line:
                raise CorpusError(f"{path}:{lineno}: expected label<TAB>text")
            label, text = line.split("\t", 1)
            out.append((label, tokenize(text)))
    return out


def make_pairs(tokens_x, tokens_y, vocab_x, vocab_y):
    """Convert aligned token lists into pairs, dropping pairs with an empty side.

    Returns ``(pairs, n_dropped)``.
    """
    pairs, dropped = [], 0
    for tx, ty in zip(tokens_x, tokens_y):
        bx, by = to_bow(tx, vocab_x), to_bow(ty, vocab_y)
        if bx and by:
            pairs.append(AlignedPair(bx, by))
        else:
            dropped += 1
    return pairs, dropped
