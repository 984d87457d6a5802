import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bilingual_ae.autoencoder import (
    BinaryDecoderParams,
    EncoderParams,
    WordTree,
    backward_binary,
    backward_tree,
    binary_xent_loss,
    count_preactivation,
    build_tree,
    decode_binary,
    encode_binary,
    encode_counts,
    sigmoid,
    tree_branch_prob,
    tree_nll_loss,
    tree_word_prob,
    tree_word_probs,
)
from bilingual_ae.corpus import BagOfWords

from conftest import random_bag
from helpers import numeric_grad, rel_error


def sigm(z):
    return 1.0 / (1.0 + math.exp(-z))


class TestEncoders:
    def test_empty_bag_is_half(self):
        p = EncoderParams(np.zeros((3, 5)), np.zeros(3))
        np.testing.assert_array_equal(encode_binary(BagOfWords(), p), 0.5)

    def test_scalar_binary(self):
        p = EncoderParams([[1.0, -1.0]], [0.25])
        np.testing.assert_allclose(encode_binary(BagOfWords([0, 1]), p), [sigm(0.25)], rtol=1e-15)
        np.testing.assert_allclose(encode_binary(BagOfWords([0, 1]), p), [0.56218], atol=5e-6)

    def test_binary_ignores_multiplicity(self):
        p = EncoderParams([[0.3, 0.7]], [0.0])
        np.testing.assert_array_equal(encode_binary(BagOfWords([0, 0]), p),
                                      encode_binary(BagOfWords([0]), p))

    def test_counts_sum_and_average(self):
        W = [[0.5, 9.0]]
        bag = BagOfWords.from_dict({0: 2})
        np.testing.assert_allclose(encode_counts(bag, EncoderParams(W, [0.0])), [sigm(1.0)], rtol=1e-15)
        np.testing.assert_allclose(encode_counts(bag, EncoderParams(W, [0.0], aggregation="average")),
                                   [sigm(0.5)], rtol=1e-15)
        np.testing.assert_allclose(sigm(1.0), 0.73106, atol=5e-6)
        np.testing.assert_allclose(sigm(0.5), 0.62246, atol=5e-6)

    def test_average_adds_bias_after_division(self):
        p = EncoderParams([[1.0]], [1.0], "sigmoid", "average")
        np.testing.assert_allclose(encode_counts(BagOfWords.from_dict({0: 4}), p), [sigm(2.0)], rtol=1e-15)

    def test_zero_W(self):
        c = np.array([0.3, -1.2])
        p = EncoderParams(np.zeros((2, 4)), c)
        np.testing.assert_allclose(encode_counts(BagOfWords([1, 1, 3]), p), sigmoid(c))

    def test_errors(self):
        p = EncoderParams(np.zeros((2, 3)), np.zeros(2), aggregation="average")
        with pytest.raises(ValueError):
            encode_counts(BagOfWords(), p)
        with pytest.raises(IndexError):
            encode_binary(BagOfWords([3]), p)

    def test_tanh(self):
        p = EncoderParams([[0.4, 0.1]], [0.2], "tanh")
        np.testing.assert_allclose(encode_binary(BagOfWords([0, 1]), p), [math.tanh(0.7)], rtol=1e-15)

    @given(st.lists(st.integers(0, 5), max_size=8), st.lists(st.integers(0, 5), max_size=8))
    def test_sum_preactivation_additive(self, a, b):
        rng = np.random.default_rng(0)
        W = rng.normal(size=(3, 6))
        ba, bb = BagOfWords(a), BagOfWords(b)
        np.testing.assert_allclose(count_preactivation(ba + bb, W, np.zeros(3)),
                                   count_preactivation(ba, W, np.zeros(3))
                                   + count_preactivation(bb, W, np.zeros(3)), atol=1e-12)


class TestBinaryDecoder:
    def test_zero_params(self):
        d = BinaryDecoderParams(np.zeros((4, 2)), np.zeros(4))
        np.testing.assert_array_equal(decode_binary(np.ones(2), d), 0.5)

    def test_scalar(self):
        d = BinaryDecoderParams([[2.0]], [-1.0])
        np.testing.assert_array_equal(decode_binary([0.5], d), [0.5])

    def test_tied_equals_transposed(self):
        rng = np.random.default_rng(3)
        W = rng.normal(size=(3, 5))
        b = rng.normal(size=5)
        phi = rng.random(3)
        np.testing.assert_array_equal(
            decode_binary(phi, BinaryDecoderParams(None, b, tied=True), W),
            decode_binary(phi, BinaryDecoderParams(W.T.copy(), b)))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            decode_binary(np.ones(3), BinaryDecoderParams(np.zeros((4, 2)), np.zeros(4)))

    def test_loss_examples(self):
        np.testing.assert_allclose(binary_xent_loss(BagOfWords([1, 3]), np.full(4, 0.5)), 4 * math.log(2),
                                   rtol=1e-15)
        np.testing.assert_allclose(binary_xent_loss(BagOfWords([0]), [sigm(10), sigm(-10)]),
                                   2 * math.log1p(math.exp(-10)), rtol=1e-10)
        np.testing.assert_allclose(binary_xent_loss(BagOfWords(), [0.9]), -math.log(0.1), rtol=1e-12)

    def test_clamp(self):
        loss = binary_xent_loss(BagOfWords([0]), [0.0])
        np.testing.assert_allclose(loss, -math.log(1e-10), rtol=1e-12)

    def test_loss_nonnegative(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            assert binary_xent_loss(BagOfWords(rng.integers(0, 6, 3)), rng.random(6)) >= 0


class TestTree:
    def test_v2(self):
        t = build_tree(2, seed=0)
        paths = [t.path(int(np.flatnonzero(t.perm == leaf)[0])) for leaf in range(2)]
        assert paths == [[(0, 0)], [(0, 1)]]

    def test_v4(self):
        t = build_tree(4, seed=0)
        assert t.n_internal == 3
        assert all(len(p) == 2 for p in t.paths)

    def test_v3_split(self):
        t = WordTree(np.arange(3), np.zeros(2), np.zeros((2, 1)))
        assert t.paths == [[(0, 0), (1, 0)], [(0, 0), (1, 1)], [(0, 1)]]

    def test_preorder_numbering(self):
        t = WordTree(np.arange(5), np.zeros(4), np.zeros((4, 1)))
        # [0,5) -> [0,3) | [3,5); [0,3) -> [0,2) | [2,3)
        assert t.paths == [[(0, 0), (1, 0), (2, 0)], [(0, 0), (1, 0), (2, 1)],
                           [(0, 0), (1, 1)], [(0, 1), (3, 0)], [(0, 1), (3, 1)]]

    def test_deterministic(self):
        a, b = build_tree(31, seed=7), build_tree(31, seed=7)
        np.testing.assert_array_equal(a.perm, b.perm)
        assert a.paths == b.paths
        assert sorted(a.perm.tolist()) == list(range(31))

    def test_too_small(self):
        with pytest.raises(ValueError):
            build_tree(1, seed=0)

    def test_branch_prob(self):
        t = build_tree(4, seed=0, D=1)
        assert tree_branch_prob(0, [1.0], t) == 0.5
        t.node_bias[1] = 1.0
        np.testing.assert_allclose(tree_branch_prob(1, [0.0], t), 0.73106, atol=5e-6)
        t.node_weight[2, 0] = 2.0
        np.testing.assert_allclose(tree_branch_prob(2, [0.5], t), sigm(1.0), rtol=1e-15)

    def test_uniform_word_probs(self):
        t4 = build_tree(4, seed=1)
        assert [tree_word_prob(w, [0.0], t4) for w in range(4)] == [0.25] * 4
        t3 = WordTree(np.arange(3), np.zeros(2), np.zeros((2, 1)))
        assert [tree_word_prob(w, [0.0], t3) for w in range(3)] == [0.25, 0.25, 0.5]

    @pytest.mark.parametrize("V", [2, 3, 4, 16, 31, 100])
    def test_normalized(self, V):
        rng = np.random.default_rng(V)
        t = WordTree(rng.permutation(V), rng.normal(size=V - 1), rng.normal(size=(V - 1, 3)))
        for _ in range(5):
            phi = rng.normal(size=3) * 2
            np.testing.assert_allclose(tree_word_probs(phi, t).sum(), 1.0, atol=1e-9)
            np.testing.assert_allclose(tree_word_probs(phi, t),
                                       [tree_word_prob(w, phi, t) for w in range(V)], rtol=1e-12)

    def test_nll_examples(self):
        t = build_tree(4, seed=2, D=2)
        np.testing.assert_allclose(tree_nll_loss(BagOfWords([0, 1, 1]), np.ones(2), t), 3 * math.log(4),
                                   rtol=1e-15)
        rng = np.random.default_rng(0)
        t = WordTree(rng.permutation(9), rng.normal(size=8), rng.normal(size=(8, 2)))
        phi = rng.random(2)
        one = tree_nll_loss(BagOfWords([5]), phi, t)
        np.testing.assert_allclose(tree_nll_loss(BagOfWords([5, 5]), phi, t), 2 * one, rtol=1e-14)
        np.testing.assert_allclose(one, -math.log(tree_word_prob(5, phi, t)), rtol=1e-12)

    def test_nll_empty(self):
        with pytest.raises(ValueError):
            tree_nll_loss(BagOfWords(), np.zeros(1), build_tree(2, 0))

    def test_shared_prefix_matches_per_word_sum(self):
        rng = np.random.default_rng(4)
        t = WordTree(rng.permutation(20), rng.normal(size=19), rng.normal(size=(19, 3)))
        bag = BagOfWords.from_dict({0: 3, 7: 1, 8: 2, 19: 1})
        phi = rng.random(3)
        ref = -sum(c * math.log(tree_word_prob(w, phi, t)) for w, c in bag.entries.items())
        np.testing.assert_allclose(tree_nll_loss(bag, phi, t), ref, rtol=1e-12)


def _enc(rng, D, V, nl, agg="sum"):
    return EncoderParams(rng.normal(scale=0.5, size=(D, V)), rng.normal(scale=0.5, size=D), nl, agg)


class TestGradients:
    @pytest.mark.parametrize("nl", ["sigmoid", "tanh"])
    @pytest.mark.parametrize("tied", [False, True])
    def test_binary_fd(self, nl, tied):
        rng = np.random.default_rng(11)
        V, D = 20, 5
        enc = _enc(rng, D, V, nl)
        dec = BinaryDecoderParams(None if tied else rng.normal(scale=0.5, size=(V, D)),
                                  rng.normal(scale=0.5, size=V), tied)
        bag, target = random_bag(rng, V), random_bag(rng, V)
        lg = backward_binary(bag, enc, dec, target)
        f = lambda: backward_binary(bag, enc, dec, target).loss
        params = {"W": enc.W, "c": enc.c, "b": dec.b}
        if not tied:
            params["Vdec"] = dec.Vdec
        for name, p in params.items():
            assert rel_error(lg.grads[name], numeric_grad(f, p)) < 1e-5, name

    @pytest.mark.parametrize("nl", ["sigmoid", "tanh"])
    @pytest.mark.parametrize("agg", ["sum", "average"])
    def test_tree_fd(self, nl, agg):
        rng = np.random.default_rng(12)
        V, D = 20, 5
        enc = _enc(rng, D, V, nl, agg)
        t = WordTree(rng.permutation(V), rng.normal(size=V - 1), rng.normal(scale=0.5, size=(V - 1, D)))
        bag = random_bag(rng, V)
        lg = backward_tree(bag, enc, t)
        f = lambda: backward_tree(bag, enc, t).loss
        for name, p in {"W": enc.W, "c": enc.c, "node_bias": t.node_bias,
                        "node_weight": t.node_weight}.items():
            assert rel_error(lg.grads[name], numeric_grad(f, p)) < 1e-5, name

    def test_tree_linear_in_counts(self):
        rng = np.random.default_rng(5)
        V, D = 12, 3
        enc = _enc(rng, D, V, "sigmoid")
        t = WordTree(rng.permutation(V), rng.normal(size=V - 1), rng.normal(size=(V - 1, D)))
        bag, target = random_bag(rng, V), random_bag(rng, V)
        one = backward_tree(bag, enc, t, target)
        two = backward_tree(bag, enc, t, target.scaled(2))
        np.testing.assert_allclose(two.loss, 2 * one.loss, rtol=1e-14)
        for k in one.grads:
            np.testing.assert_allclose(two.grads[k], 2 * one.grads[k], rtol=1e-13, atol=1e-15)

    # 1-word input, V=2; the two conflicting targets put the optimum at p = 0.5,
    # a finite stationary point that plain gradient descent reaches
    def test_zero_gradient_tree(self):
        enc = EncoderParams([[0.3, -0.2]], [0.1])
        t = build_tree(2, seed=0, D=1)
        t.node_bias[:] = 1.5
        bag, targets = BagOfWords([0]), [BagOfWords([0]), BagOfWords([1])]
        params = {"W": enc.W, "c": enc.c, "node_bias": t.node_bias, "node_weight": t.node_weight}
        for _ in range(2000):
            gs = [backward_tree(bag, enc, t, y).grads for y in targets]
            for k, p in params.items():
                p -= 0.5 * (gs[0][k] + gs[1][k])
        gs = [backward_tree(bag, enc, t, y).grads for y in targets]
        assert sum(np.linalg.norm(gs[0][k] + gs[1][k]) for k in params) < 1e-6
        np.testing.assert_allclose(tree_word_prob(0, encode_counts(bag, enc), t), 0.5, atol=1e-6)

    def test_zero_gradient_binary(self):
        rng = np.random.default_rng(0)
        enc = EncoderParams(rng.normal(size=(1, 2)), [0.0])
        dec = BinaryDecoderParams(rng.normal(size=(2, 1)), [1.0, -1.0])
        bag, targets = BagOfWords([0]), [BagOfWords([0]), BagOfWords([1])]
        params = {"W": enc.W, "c": enc.c, "b": dec.b, "Vdec": dec.Vdec}
        for _ in range(2000):
            gs = [backward_binary(bag, enc, dec, y).grads for y in targets]
            for k, p in params.items():
                p -= 0.5 * (gs[0][k] + gs[1][k])
        gs = [backward_binary(bag, enc, dec, y).grads for y in targets]
        assert sum(np.linalg.norm(gs[0][k] + gs[1][k]) for k in params) < 1e-6
        np.testing.assert_allclose(decode_binary(encode_binary(bag, enc), dec), 0.5, atol=1e-6)
