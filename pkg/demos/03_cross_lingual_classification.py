"""
Train a document classifier in one language, apply it in the other
==================================================================

Documents become tf-idf weighted sums of word vectors.  Because both
languages share one embedding space, a perceptron trained on language-X
documents can label language-Y documents.
"""
from bilingual_ae import synth
from bilingual_ae.bilingual import TrainConfig, train
from bilingual_ae.classifier import cross_lingual_eval
from bilingual_ae.corpus import build_vocabulary, make_pairs, tokenize

corpus = synth.generate(seed=1)
tx = [tokenize(s) for s in corpus.sents_x]
ty = [tokenize(s) for s in corpus.sents_y]
vx, vy = build_vocabulary(tx), build_vocabulary(ty)
pairs, _ = make_pairs(tx, ty, vx, vy)
model, _ = train(pairs, TrainConfig(dim=40, epochs=10), vocab_x=vx, vocab_y=vy)


def docs(rows):
    return [(label, tokenize(text)) for label, text in rows]


train_x, test_y = docs(corpus.docs_train_x), docs(corpus.docs_test_y)
train_y, test_x = docs(corpus.docs_train_y), docs(corpus.docs_test_x)

print("size   X->Y    Y->X    majority")
for size in (20, 50, 100, 500, 1000):
    xy = cross_lingual_eval(model, train_x, test_y, size, source="x", idf_docs=train_y)
    yx = cross_lingual_eval(model, train_y, test_x, size, source="y", idf_docs=train_x)
    print(f"{size:5d}  {xy.accuracy:.3f}   {yx.accuracy:.3f}   {xy.majority_baseline:.3f}")

print(xy.confusion)
