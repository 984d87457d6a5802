"""
What the correlation term buys
==============================

Train the binary-decoder model with and without the correlation penalty
for a single epoch, then compare how well the two languages line up.
"""
import numpy as np

from bilingual_ae import synth
from bilingual_ae.bilingual import TrainConfig, correlation, encode, train
from bilingual_ae.classifier import cross_lingual_eval
from bilingual_ae.corpus import build_vocabulary, make_pairs, tokenize

corpus = synth.generate(seed=1)
tx = [tokenize(s) for s in corpus.sents_x]
ty = [tokenize(s) for s in corpus.sents_y]
vx, vy = build_vocabulary(tx), build_vocabulary(ty)
pairs, _ = make_pairs(tx, ty, vx, vy)
train_x = [(lab, tokenize(t)) for lab, t in corpus.docs_train_x]
train_y = [(lab, tokenize(t)) for lab, t in corpus.docs_train_y]
test_y = [(lab, tokenize(t)) for lab, t in corpus.docs_test_y]

probe = pairs[-200:]  # a fixed slice of the training pairs
for lam in (0.0, 4.0):
    cfg = TrainConfig(dim=40, epochs=1, lam=lam)
    model, _ = train(pairs, cfg, vocab_x=vx, vocab_y=vy)
    PX = np.stack([encode(model, p.src, "x") for p in probe])
    PY = np.stack([encode(model, p.tgt, "y") for p in probe])
    acc = cross_lingual_eval(model, train_x, test_y, 100, idf_docs=train_y).accuracy
    # correlation is summed over hidden units, so its ceiling is the dimension
    print(f"{cfg.tag:12s} probe corr {correlation(PX, PY):6.2f} / {cfg.dim}   X->Y accuracy {acc:.3f}")
