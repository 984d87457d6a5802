"""Synthetic bilingual world for desk-scale verification.

Two languages share a hidden word-level bijection.  Each of ``n_classes``
topics has its own word-frequency profile; sentences and labelled
documents are drawn from a topic, and the target side of a sentence pair
is the token-wise translation of the source side (with an optional
replacement-noise rate).
"""
import os
from dataclasses import dataclass

import numpy as np


@dataclass
class SynthWorld:
    words_x: list
    words_y: list
    translation: np.ndarray  # translation[i] = index in words_y of words_x[i]
    topic_probs: np.ndarray  # n_classes x Vs, over language-x word indices
    class_priors: np.ndarray

    def translate(self, ids):
        return self.translation[np.asarray(ids, dtype=np.int64)]


@dataclass
class SynthCorpus:
    world: SynthWorld
    sents_x: list
    sents_y: list
    docs_train_x: list  # (label, text)
    docs_test_x: list
    docs_train_y: list
    docs_test_y: list


def make_world(vocab_size=50, n_classes=4, seed=1, topic_boost=8.0, class_priors=None):
    rng = np.random.default_rng(seed)
    words_x = [f"xa{i:03d}" for i in range(vocab_size)]
    words_y = [f"yb{j:03d}" for j in range(vocab_size)]
    translation = rng.permutation(vocab_size)
    home = rng.permutation(np.arange(vocab_size) % n_classes)
    base = rng.gamma(2.0, 1.0, size=vocab_size) + 0.2
    probs = np.empty((n_classes, vocab_size))
    for t in range(n_classes):
        p = base * np.where(home == t, topic_boost, 1.0)
        probs[t] = p / p.sum()
    if class_priors is None:
        class_priors = np.linspace(2.0, 1.0, n_classes)
    class_priors = np.asarray(class_priors, dtype=np.float64)
    return SynthWorld(words_x, words_y, translation, probs, class_priors / class_priors.sum())


def _sample(rng, world, topic, length):
    return rng.choice(world.topic_probs.shape[1], size=length, p=world.topic_probs[topic])


def _noisy(rng, ids, noise, V):
    ids = ids.copy()
    hit = rng.random(ids.size) < noise
    ids[hit] = rng.integers(0, V, size=int(hit.sum()))
    return ids


def generate(vocab_size=50, n_classes=4, n_pairs=2000, noise=0.1, seed=1,
             n_docs_train=1000, n_docs_test=500, sent_len=(4, 12), doc_len=(20, 50),
             topic_boost=8.0):
    """Sample an aligned corpus plus labelled documents in both languages."""
    world = make_world(vocab_size, n_classes, seed, topic_boost)
    rng = np.random.default_rng([seed, 1])
    V = vocab_size
    sents_x, sents_y = [], []
    # adjacent sentences share a topic for a while, like consecutive turns of a conversation
    topic = rng.integers(n_classes)
    for _ in range(n_pairs):
        if rng.random() < 0.2:
            topic = rng.integers(n_classes)
        ids = _sample(rng, world, topic, rng.integers(sent_len[0], sent_len[1] + 1))
        sents_x.append(" ".join(world.words_x[i] for i in ids))
        tgt = _noisy(rng, world.translate(ids), noise, V)
        sents_y.append(" ".join(world.words_y[j] for j in tgt))

    def docs(words, translate, n):
        out = []
        for _ in range(n):
            label = rng.choice(n_classes, p=world.class_priors)
            ids = _sample(rng, world, label, rng.integers(doc_len[0], doc_len[1] + 1))
            if translate:
                ids = world.translate(ids)
            out.append((f"c{label}", " ".join(words[i] for i in ids)))
        return out

    return SynthCorpus(
        world, sents_x, sents_y,
        docs(world.words_x, False, n_docs_train), docs(world.words_x, False, n_docs_test),
        docs(world.words_y, True, n_docs_train), docs(world.words_y, True, n_docs_test),
    )


FILES = {
    "sents_x": "train.x",
    "sents_y": "train.y",
    "docs_train_x": "docs_train.x.tsv",
    "docs_test_x": "docs_test.x.tsv",
    "docs_train_y": "docs_train.y.tsv",
    "docs_test_y": "docs_test.y.tsv",
    "translation": "translation.tsv",
}


def write_corpus(corpus, outdir):
    """Write every synthetic artefact under ``outdir``; returns name -> path."""
    os.makedirs(outdir, exist_ok=True)
    paths = {k: os.path.join(outdir, v) for k, v in FILES.items()}
    for key in ("sents_x", "sents_y"):
        with open(paths[key], "w", encoding="utf-8") as f:
            f.writelines(s + "\n" for s in getattr(corpus, key))
    for key in ("docs_train_x", "docs_test_x", "docs_train_y", "docs_test_y"):
        with open(paths[key], "w", encoding="utf-8") as f:
            f.writelines(f"{label}\t{text}\n" for label, text in getattr(corpus, key))
    w = corpus.world
    with open(paths["translation"], "w", encoding="utf-8") as f:
        for i, j in enumerate(w.translation):
            f.write(f"{w.words_x[i]}\t{w.words_y[j]}\n")
    return paths
