"""
Bag-of-words autoencoders on a toy vocabulary
=============================================

Encode a sentence bag, reconstruct it with the binary decoder and with the
tree decoder, and take a few gradient steps.
"""
import numpy as np

from bilingual_ae.autoencoder import (
    BinaryDecoderParams,
    EncoderParams,
    backward_binary,
    backward_tree,
    build_tree,
    decode_binary,
    encode_binary,
    encode_counts,
    tree_word_probs,
)
from bilingual_ae.corpus import Vocabulary, to_bow, tokenize

vocab = Vocabulary.from_words(["the", "dog", "barked", "cat", "slept", "loudly"])
bag = to_bow(tokenize("The dog barked, the dog barked loudly."), vocab)
print("bag:", bag.entries)  # word index -> count

rng = np.random.default_rng(0)
V, D = len(vocab), 3
enc = EncoderParams(rng.uniform(-0.1, 0.1, (D, V)), np.zeros(D))

# binary view ignores repeats, the count encoder does not
print("phi binary:", encode_binary(bag, enc))
print("phi counts:", encode_counts(bag, enc))

# binary decoder: one independent Bernoulli per vocabulary word
dec = BinaryDecoderParams(rng.uniform(-0.1, 0.1, (V, D)), np.zeros(V))
for step in range(201):
    g = backward_binary(bag, enc, dec)
    if step % 50 == 0:
        print(f"binary step {step:3d}  loss {g.loss:.4f}")
    enc.W -= 0.5 * g.grads["W"]
    enc.c -= 0.5 * g.grads["c"]
    dec.Vdec -= 0.5 * g.grads["Vdec"]
    dec.b -= 0.5 * g.grads["b"]
vhat = decode_binary(encode_binary(bag, enc), dec)
print("reconstruction:", {w: round(float(v), 3) for w, v in zip(vocab.words, vhat)})

# tree decoder: words sit at leaves, each internal node is a logistic unit
tree = build_tree(V, seed=0, D=D)
print("path of 'dog':", tree.path(vocab.index["dog"]))
phi = encode_counts(bag, enc)
print("uniform start:", np.round(tree_word_probs(phi, tree), 3))
for step in range(200):
    g = backward_tree(bag, enc, tree)
    tree.node_bias -= 0.2 * g.grads["node_bias"]
    tree.node_weight -= 0.2 * g.grads["node_weight"]
p = tree_word_probs(encode_counts(bag, enc), tree)
print("after fitting:", {w: round(float(v), 3) for w, v in zip(vocab.words, p)}, "sum", p.sum())
