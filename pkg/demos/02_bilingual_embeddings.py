"""
Learning bilingual embeddings from a synthetic parallel corpus
==============================================================

The synthetic world has two 50-word languages linked by a hidden
one-to-one translation.  Training only sees aligned sentences; afterwards
nearest neighbours across languages should recover the translation.
"""
import numpy as np

from bilingual_ae import synth
from bilingual_ae.bilingual import TrainConfig, train
from bilingual_ae.corpus import build_vocabulary, make_pairs, tokenize
from bilingual_ae.embeddings import nearest, tables_from_model

corpus = synth.generate(seed=1)
print(corpus.sents_x[0])
print(corpus.sents_y[0])

tx = [tokenize(s) for s in corpus.sents_x]
ty = [tokenize(s) for s in corpus.sents_y]
vx, vy = build_vocabulary(tx), build_vocabulary(ty)
pairs, dropped = make_pairs(tx, ty, vx, vy)
print(len(pairs), "pairs,", dropped, "dropped")

cfg = TrainConfig(dim=16, epochs=20, merge_k=5, lam=4.0)
model, report = train(pairs, cfg, vocab_x=vx, vocab_y=vy,
                      callback=lambda e: print(f"epoch {e['epoch']:2d}  loss {e['total']:7.2f}"
                                               f"  corr {e['correlation']:6.2f}"))

tab_x, tab_y = tables_from_model(model)
world = corpus.world
truth = {world.words_x[i]: world.words_y[j] for i, j in enumerate(world.translation)}
for w in ("xa000", "xa017", "xa042"):
    print(w, "->", [(u, round(d, 3)) for u, d in nearest(w, tab_x, tab_y, 3)], " truth:", truth[w])

hits = np.mean([nearest(w, tab_x, tab_y, 1)[0][0] == truth[w] for w in vx.words])
print(f"rank-1 translation accuracy {hits:.2f}")
