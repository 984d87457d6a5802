"""Bag-of-words autoencoder building blocks.

Two decoders are provided: a binary reconstruction decoder scored with
cross-entropy over the whole vocabulary, and a binary-tree decoder that
factorises p(word | phi) into logistic branch decisions along a
root-to-leaf path.  Every forward function has a matching hand-derived
backward pass; nothing here depends on an autodiff framework.
"""
from dataclasses import dataclass, field

import numpy as np

from .corpus import BagOfWords

PROB_CLAMP = 1e-10

NONLINEARITIES = ("sigmoid", "tanh")
AGGREGATIONS = ("sum", "average")


def sigmoid(a):
    # split by sign so neither branch overflows
    a = np.asarray(a, dtype=np.float64)
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


def activate(a, nonlinearity):
    if nonlinearity == "sigmoid":
        return sigmoid(a)
    if nonlinearity == "tanh":
        return np.tanh(a)
    raise ValueError(f"unknown nonlinearity {nonlinearity!r}")


def activation_grad(phi, nonlinearity):
    """Derivative of the nonlinearity expressed through its output."""
    if nonlinearity == "sigmoid":
        return phi * (1.0 - phi)
    return 1.0 - phi * phi


@dataclass
class EncoderParams:
    W: np.ndarray  # D x V, columns are word vectors
    c: np.ndarray  # D
    nonlinearity: str = "sigmoid"
    aggregation: str = "sum"

    def __post_init__(self):
        if self.nonlinearity not in NONLINEARITIES:
            raise ValueError(f"unknown nonlinearity {self.nonlinearity!r}")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        self.W = np.asarray(self.W, dtype=np.float64)
        self.c = np.asarray(self.c, dtype=np.float64)
        if self.W.ndim != 2 or self.c.shape != (self.W.shape[0],):
            raise ValueError(f"encoder shapes W{self.W.shape} and c{self.c.shape} disagree")

    @property
    def dim(self):
        return self.W.shape[0]

    @property
    def vocab_size(self):
        return self.W.shape[1]


@dataclass
class BinaryDecoderParams:
    Vdec: np.ndarray  # V x D, or None when tied to the encoder
    b: np.ndarray     # V
    tied: bool = False

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.tied:
            self.Vdec = None
        else:
            self.Vdec = np.asarray(self.Vdec, dtype=np.float64)
            if self.Vdec.shape[0] != self.b.shape[0]:
                raise ValueError(f"decoder shapes Vdec{self.Vdec.shape} and b{self.b.shape} disagree")

    def weight(self, W=None):
        """Decoder matrix, resolving tying against the encoder matrix ``W``."""
        if self.tied:
            if W is None:
                raise ValueError("tied decoder needs the encoder matrix")
            return W.T
        return self.Vdec


@dataclass
class LossGrad:
    loss: float
    grads: dict = field(default_factory=dict)


def _check_bag(bag, V):
    if bag.indices.size and bag.indices[-1] >= V:
        raise IndexError(f"word index {bag.indices[-1]} out of range for vocabulary of {V}")


# --- encoders ---------------------------------------------------------------

def binary_preactivation(bag, W, c):
    _check_bag(bag, W.shape[1])
    return c + W[:, bag.indices].sum(axis=1)


def count_preactivation(bag, W, c, aggregation="sum"):
    _check_bag(bag, W.shape[1])
    s = W[:, bag.indices] @ bag.counts.astype(np.float64)
    if aggregation == "average":
        if not bag:
            raise ValueError("average aggregation of an empty bag")
        s = s / bag.total
    return c + s


def encode_binary(bag, p):
    """h(c + W v(x)); each distinct word counts once."""
    return activate(binary_preactivation(bag, p.W, p.c), p.nonlinearity)


def encode_counts(bag, p):
    """h(c + sum of word columns weighted by count), optionally averaged."""
    return activate(count_preactivation(bag, p.W, p.c, p.aggregation), p.nonlinearity)


def encoder_input_weights(bag, binary, aggregation="sum"):
    """Per-word coefficient of W[:, i] in the pre-activation."""
    if binary:
        return np.ones(bag.indices.size)
    w = bag.counts.astype(np.float64)
    if aggregation == "average":
        w = w / bag.total
    return w


# --- binary decoder ---------------------------------------------------------

def decode_binary(phi, p, W=None):
    """Elementwise sigm(Vdec phi + b)."""
    Vd = p.weight(W)
    phi = np.asarray(phi, dtype=np.float64)
    if Vd.shape[1] != phi.shape[0] or Vd.shape[0] != p.b.shape[0]:
        raise ValueError(f"shape mismatch: Vdec{Vd.shape}, phi{phi.shape}, b{p.b.shape}")
    return sigmoid(Vd @ phi + p.b)


def _binary_target(target, V):
    t = np.zeros(V)
    idx = target.binary if isinstance(target, BagOfWords) else np.asarray(target, dtype=np.int64)
    t[idx] = 1.0
    return t


def binary_xent_loss(target, vhat):
    """Cross-entropy between a binary bag and a reconstruction, summed over V.

    ``target`` is a BagOfWords (its binary view is used) or an index array.
    """
    vhat = np.clip(np.asarray(vhat, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    t = _binary_target(target, vhat.shape[0])
    return float(-(t * np.log(vhat) + (1.0 - t) * np.log1p(-vhat)).sum())


def binary_decoder_backward(phi, Vd, b, target):
    """Loss and gradients of the binary decoder for one target bag.

    Returns ``(loss, dphi, dVdec, db)``.  Gradient is zero where the
    probability clamp is active, matching the clamped loss exactly.
    """
    z = Vd @ phi + b
    vhat = sigmoid(z)
    t = _binary_target(target, b.shape[0])
    clamped = (vhat < PROB_CLAMP) | (vhat > 1.0 - PROB_CLAMP)
    vc = np.clip(vhat, PROB_CLAMP, 1.0 - PROB_CLAMP)
    loss = float(-(t * np.log(vc) + (1.0 - t) * np.log1p(-vc)).sum())
    dz = vhat - t
    dz[clamped] = 0.0
    return loss, Vd.T @ dz, np.outer(dz, phi), dz


def backward_binary(bag, enc, dec, target=None):
    """Loss and full gradients of the binary autoencoder on one bag.

    ``target`` defaults to ``bag`` (self reconstruction).  With a tied
    decoder the decoder-weight gradient is folded into ``W``.
    """
    target = bag if target is None else target
    a = binary_preactivation(bag, enc.W, enc.c)
    phi = activate(a, enc.nonlinearity)
    Vd = dec.weight(enc.W)
    loss, dphi, dVd, db = binary_decoder_backward(phi, Vd, dec.b, target)
    da = dphi * activation_grad(phi, enc.nonlinearity)
    dW = np.zeros_like(enc.W)
    dW[:, bag.indices] += da[:, None]
    grads = {"W": dW, "c": da.copy(), "b": db}
    if dec.tied:
        dW += dVd.T
    else:
        grads["Vdec"] = dVd
    return LossGrad(loss, grads)


# --- tree decoder -----------------------------------------------------------

@dataclass
class WordTree:
    """Complete binary tree over a vocabulary, with logistic node parameters.

    ``perm[w]`` is the leaf position of word ``w``.  Paths are stored padded
    in ``path_nodes`` / ``path_bits`` (one row per word) with true lengths in
    ``path_len``.
    """
    perm: np.ndarray
    node_bias: np.ndarray
    node_weight: np.ndarray
    path_nodes: np.ndarray = field(repr=False, default=None)
    path_bits: np.ndarray = field(repr=False, default=None)
    path_len: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        self.perm = np.asarray(self.perm, dtype=np.int64)
        V = self.perm.size
        if V < 2:
            raise ValueError(f"a word tree needs at least 2 words, got {V}")
        if self.path_nodes is None:
            nodes, bits, lens = _leaf_paths(V)
            self.path_nodes = nodes[self.perm]
            self.path_bits = bits[self.perm]
            self.path_len = lens[self.perm]
        self.node_bias = np.asarray(self.node_bias, dtype=np.float64)
        self.node_weight = np.asarray(self.node_weight, dtype=np.float64)
        if self.node_bias.shape != (V - 1,) or self.node_weight.shape[0] != V - 1:
            raise ValueError("tree node parameters must have V-1 rows")

    @property
    def vocab_size(self):
        return self.perm.size

    @property
    def n_internal(self):
        return self.perm.size - 1

    def path(self, word):
        n = self.path_len[word]
        return list(zip(self.path_nodes[word, :n].tolist(), self.path_bits[word, :n].tolist()))

    @property
    def paths(self):
        return [self.path(w) for w in range(self.vocab_size)]


def _leaf_paths(V):
    """Paths for leaf positions 0..V-1 of the ceil-split complete tree.

    Range [a, b) splits into [a, m) and [m, b) with m = a + ceil((b - a) / 2);
    internal nodes are numbered in pre-order.
    """
    depth = int(np.ceil(np.log2(V)))
    nodes = np.zeros((V, depth), dtype=np.int64)
    bits = np.zeros((V, depth), dtype=np.int8)
    lens = np.zeros(V, dtype=np.int64)
    counter = 0
    # explicit stack keeps deep vocabularies off the recursion limit
    stack = [(0, V, [])]
    while stack:
        a, b, prefix = stack.pop()
        if b - a == 1:
            lens[a] = len(prefix)
            for k, (n, bit) in enumerate(prefix):
                nodes[a, k] = n
                bits[a, k] = bit
            continue
        node = counter
        counter += 1
        m = a + (b - a + 1) // 2
        # right pushed first so the left subtree is numbered first
        stack.append((m, b, prefix + [(node, 1)]))
        stack.append((a, m, prefix + [(node, 0)]))
    return nodes, bits, lens


def build_tree(V, seed, D=1, node_weight=None):
    """Random word-to-leaf assignment on the deterministic complete tree.

    Node biases and weights start at zero, which makes every branch a fair
    coin.  ``D`` is the encoder width used to size ``node_weight``.
    """
    if V < 2:
        raise ValueError(f"a word tree needs at least 2 words, got {V}")
    perm = np.random.default_rng(seed).permutation(V)
    if node_weight is None:
        node_weight = np.zeros((V - 1, D))
    return WordTree(perm, np.zeros(V - 1), node_weight)


def tree_branch_prob(node, phi, tree):
    """Probability of taking the right branch (bit 1) at an internal node."""
    u = tree.node_bias[node] + tree.node_weight[node] @ np.asarray(phi, dtype=np.float64)
    return float(sigmoid(np.array([u]))[0])


def _log_sigmoid(u):
    return -np.logaddexp(0.0, -u)


def tree_word_prob(word, phi, tree):
    n = tree.path_len[word]
    nodes = tree.path_nodes[word, :n]
    bits = tree.path_bits[word, :n]
    u = tree.node_bias[nodes] + tree.node_weight[nodes] @ np.asarray(phi, dtype=np.float64)
    signed = np.where(bits == 1, u, -u)
    return float(np.exp(_log_sigmoid(signed).sum()))


def tree_word_probs(phi, tree):
    """p(w | phi) for every word at once."""
    u = tree.node_bias + tree.node_weight @ np.asarray(phi, dtype=np.float64)
    uw = u[tree.path_nodes]
    signed = np.where(tree.path_bits == 1, uw, -uw)
    mask = np.arange(tree.path_nodes.shape[1])[None, :] < tree.path_len[:, None]
    return np.exp(np.where(mask, _log_sigmoid(signed), 0.0).sum(axis=1))


def _node_counts(bag, tree):
    """Aggregate a bag onto the internal nodes its words visit.

    Returns touched node ids with the count-weighted number of right and
    left traversals at each, so shared path prefixes are scored once.
    """
    _check_bag(bag, tree.vocab_size)
    lens = tree.path_len[bag.indices]
    mask = np.arange(tree.path_nodes.shape[1])[None, :] < lens[:, None]
    nodes = tree.path_nodes[bag.indices][mask]
    bits = tree.path_bits[bag.indices][mask]
    w = np.broadcast_to(bag.counts[:, None], mask.shape)[mask].astype(np.float64)
    uniq, inv = np.unique(nodes, return_inverse=True)
    right = np.bincount(inv, weights=w * (bits == 1), minlength=uniq.size)
    left = np.bincount(inv, weights=w * (bits == 0), minlength=uniq.size)
    return uniq, right, left


def tree_decoder_backward(phi, tree, target):
    """Count-weighted tree NLL of ``target`` and its gradients.

    Returns ``(loss, dphi, nodes, dnode_bias, dnode_weight)`` where the node
    gradients are rows for ``nodes`` only.
    """
    if not target:
        raise ValueError("tree loss of an empty bag")
    nodes, right, left = _node_counts(target, tree)
    u = tree.node_bias[nodes] + tree.node_weight[nodes] @ phi
    loss = float((right * np.logaddexp(0.0, -u) + left * np.logaddexp(0.0, u)).sum())
    du = (right + left) * sigmoid(u) - right
    return loss, tree.node_weight[nodes].T @ du, nodes, du, np.outer(du, phi)


def tree_nll_loss(bag, phi, tree):
    """Sum over tokens (with multiplicity) of -ln p(word | phi)."""
    return tree_decoder_backward(np.asarray(phi, dtype=np.float64), tree, bag)[0]


def backward_tree(bag, enc, tree, target=None):
    """Loss and full gradients of the tree autoencoder on one bag."""
    target = bag if target is None else target
    a = count_preactivation(bag, enc.W, enc.c, enc.aggregation)
    phi = activate(a, enc.nonlinearity)
    loss, dphi, nodes, dnb, dnw = tree_decoder_backward(phi, tree, target)
    da = dphi * activation_grad(phi, enc.nonlinearity)
    dW = np.zeros_like(enc.W)
    dW[:, bag.indices] += np.outer(da, encoder_input_weights(bag, False, enc.aggregation))
    gnb = np.zeros_like(tree.node_bias)
    gnw = np.zeros_like(tree.node_weight)
    gnb[nodes] = dnb
    gnw[nodes] = dnw
    return LossGrad(loss, {"W": dW, "c": da.copy(), "node_bias": gnb, "node_weight": gnw})
