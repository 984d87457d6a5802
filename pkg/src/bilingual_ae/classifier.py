"""Averaged multi-class perceptron and cross-lingual document classification."""
from dataclasses import dataclass, field

import numpy as np

from .corpus import compute_tfidf, to_bow
from .embeddings import doc_vector, tables_from_model


class DataError(ValueError):
    pass


@dataclass
class PerceptronModel:
    classes: list
    weights: np.ndarray           # C x (D + 1), bias last
    averaged_weights: np.ndarray  # same shape, used for prediction


def _augment(x):
    return np.append(np.asarray(x, dtype=np.float64), 1.0)


def perceptron_train(examples, epochs=10, seed=0, classes=None, shuffle=True):
    """Multi-class perceptron with Freund-Schapire weight averaging.

    ``examples`` is a list of ``(vector, label)``.  The averaged weights are
    the mean of the weight matrix after every example visit.  Ties in the
    argmax go to the lowest class index.
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    labels = [lab for _, lab in examples]
    if classes is None:
        classes = sorted(set(labels))
    classes = list(classes)
    if len(set(labels)) < 2:
        raise DataError("perceptron training needs at least 2 classes")
    pos = {c: i for i, c in enumerate(classes)}
    X = np.stack([_augment(getattr(v, "vector", v)) for v, _ in examples])
    y = np.array([pos[lab] for lab in labels])
    W = np.zeros((len(classes), X.shape[1]))
    total = np.zeros_like(W)
    rng = np.random.default_rng(seed)
    n = len(examples)
    for _ in range(epochs):
        order = rng.permutation(n) if shuffle else np.arange(n)
        for i in order:
            pred = int(np.argmax(W @ X[i]))
            if pred != y[i]:
                W[y[i]] += X[i]
                W[pred] -= X[i]
            total += W
    return PerceptronModel(classes, W, total / (epochs * n))


def predict(m, x, averaged=True):
    W = m.averaged_weights if averaged else m.weights
    return m.classes[int(np.argmax(W @ _augment(getattr(x, "vector", x))))]


def predict_many(m, X, averaged=True):
    W = m.averaged_weights if averaged else m.weights
    X = np.asarray(X, dtype=np.float64)
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    return [m.classes[i] for i in np.argmax(Xa @ W.T, axis=1)]


@dataclass
class EvalResult:
    accuracy: float
    confusion: np.ndarray  # gold rows x predicted columns
    n_test: int
    classes: list
    majority_baseline: float = float("nan")
    majority_class: str = None
    predictions: list = field(default_factory=list)  # (doc_id, gold, pred)
    n_empty_train: int = 0
    n_empty_test: int = 0

    def to_json(self, config=None):
        return {
            "accuracy": self.accuracy,
            "n_test": self.n_test,
            "majority_baseline": self.majority_baseline,
            "confusion": {"classes": list(self.classes), "matrix": self.confusion.tolist()},
            "config": config or {},
        }


def evaluate(m, vectors, gold):
    preds = predict_many(m, vectors)
    pos = {c: i for i, c in enumerate(m.classes)}
    conf = np.zeros((len(m.classes), len(m.classes)), dtype=np.int64)
    for g, p in zip(gold, preds):
        conf[pos[g], pos[p]] += 1
    n = len(gold)
    acc = float(np.trace(conf) / n) if n else float("nan")
    return EvalResult(acc, conf, n, list(m.classes),
                      predictions=[(i, g, p) for i, (g, p) in enumerate(zip(gold, preds))])


def stratified_sample(labels, size, seed):
    """Indices of a class-proportional subsample (largest-remainder quotas)."""
    labels = list(labels)
    n = len(labels)
    if size > n:
        raise DataError(f"requested {size} training documents but only {n} available")
    classes = sorted(set(labels))
    by_class = {c: [i for i, lab in enumerate(labels) if lab == c] for c in classes}
    exact = np.array([size * len(by_class[c]) / n for c in classes])
    quota = np.floor(exact).astype(int)
    rest = size - quota.sum()
    # largest fractional part first, class order breaks ties
    for k in sorted(range(len(classes)), key=lambda k: (-(exact[k] - quota[k]), k))[:rest]:
        quota[k] += 1
    rng = np.random.default_rng(seed)
    picked = []
    for c, q in zip(classes, quota):
        picked.extend(rng.choice(by_class[c], size=q, replace=False).tolist())
    return sorted(picked)


def _vectors(docs, vocab, table, stats, normalize):
    bags = [to_bow(toks, vocab) for _, toks in docs]
    X = np.stack([doc_vector(b, table, stats).vector for b in bags]) if bags else np.zeros((0, table.dim))
    if normalize:
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        X = np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)
    return X, sum(1 for b in bags if not b)


def cross_lingual_eval(model, train_docs, test_docs, train_size, seed=0, source="x",
                       target=None, idf_docs=None, epochs=10, l2_normalize=False):
    """Train on ``source``-language documents, test on ``target``-language ones.

    ``target`` defaults to the other language; passing the same language
    gives a monolingual run.

    ``train_docs`` and ``test_docs`` are lists of ``(label, tokens)``.  The
    source-side idf comes from the whole training pool; the target-side idf
    from ``idf_docs`` (the target language's unlabelled training pool) when
    given, otherwise from the test documents' text (or the training pool
    itself for a monolingual run).
    """
    if target is None:
        target = "y" if source == "x" else "x"
    if source not in ("x", "y") or target not in ("x", "y"):
        raise ValueError("languages must be 'x' or 'y'")
    classes = sorted({lab for lab, _ in train_docs})
    missing = sorted({lab for lab, _ in test_docs} - set(classes))
    if missing:
        raise DataError(f"test labels missing from training data: {missing}")
    tables = dict(zip("xy", tables_from_model(model)))
    src_table, tgt_table = tables[source], tables[target]
    src_vocab, tgt_vocab = src_table.vocab, tgt_table.vocab

    src_stats = compute_tfidf([to_bow(t, src_vocab) for _, t in train_docs], src_vocab)
    if idf_docs is not None:
        pool = idf_docs
    else:
        pool = train_docs if target == source else test_docs
    tgt_stats = compute_tfidf([to_bow(t, tgt_vocab) for _, t in pool], tgt_vocab)

    picked = stratified_sample([lab for lab, _ in train_docs], train_size, seed)
    sub = [train_docs[i] for i in picked]
    if len({lab for lab, _ in sub}) < 2:
        raise DataError("training subsample covers fewer than 2 classes")
    Xtr, n_empty_tr = _vectors(sub, src_vocab, src_table, src_stats, l2_normalize)
    pm = perceptron_train(list(zip(Xtr, [lab for lab, _ in sub])), epochs, seed, classes)

    Xte, n_empty_te = _vectors(test_docs, tgt_vocab, tgt_table, tgt_stats, l2_normalize)
    gold = [lab for lab, _ in test_docs]
    res = evaluate(pm, Xte, gold)
    res.majority_class, res.majority_baseline = majority_baseline([lab for lab, _ in sub], gold)
    res.n_empty_train, res.n_empty_test = n_empty_tr, n_empty_te
    return res


def majority_baseline(train_labels, test_labels):
    """(majority training class, its accuracy on the test labels)."""
    vals, counts = np.unique(np.asarray(train_labels, dtype=object).astype(str), return_counts=True)
    top = str(vals[np.argmax(counts)])
    acc = float(np.mean([lab == top for lab in test_labels])) if test_labels else float("nan")
    return top, acc
