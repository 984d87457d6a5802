"""Bilingual autoencoder: model, objective, SGD training and model files."""
import hashlib
import logging
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .autoencoder import (
    AGGREGATIONS,
    NONLINEARITIES,
    BinaryDecoderParams,
    WordTree,
    activate,
    activation_grad,
    binary_decoder_backward,
    binary_preactivation,
    build_tree,
    count_preactivation,
    encoder_input_weights,
    tree_decoder_backward,
)
from .corpus import AlignedPair, merge_pairs

logger = logging.getLogger(__name__)

CORR_EPS = 1e-8
VARIANTS = ("binary", "tree")
# per-instance step sizes; tree losses grow with token count, so need a smaller step
DEFAULT_LR = {"binary": 0.1, "tree": 0.02}


class NumericError(FloatingPointError):
    """A loss or correlation term became non-finite during training."""


class ModelFormatError(ValueError):
    pass


@dataclass
class BilingualModel:
    Wx: np.ndarray
    Wy: np.ndarray
    c: np.ndarray
    dec_x: object  # BinaryDecoderParams or WordTree
    dec_y: object
    variant: str = "binary"
    nonlinearity: str = "sigmoid"
    aggregation: str = "sum"
    tied: bool = False
    seed: int = 0
    vocab_x: list = None
    vocab_y: list = None

    @property
    def dim(self):
        return self.Wx.shape[0]

    @property
    def vocab_sizes(self):
        return self.Wx.shape[1], self.Wy.shape[1]

    def W(self, lang):
        return self.Wx if lang == "x" else self.Wy

    def decoder(self, lang):
        return self.dec_x if lang == "x" else self.dec_y

    def parameters(self):
        """Name -> array view of every trainable parameter."""
        params = {"Wx": self.Wx, "Wy": self.Wy, "c": self.c}
        for lang, dec in (("x", self.dec_x), ("y", self.dec_y)):
            if self.variant == "binary":
                if not dec.tied:
                    params[f"dec_{lang}.Vdec"] = dec.Vdec
                params[f"dec_{lang}.b"] = dec.b
            else:
                params[f"dec_{lang}.node_bias"] = dec.node_bias
                params[f"dec_{lang}.node_weight"] = dec.node_weight
        return params

    def copy(self):
        def dup(dec):
            if isinstance(dec, WordTree):
                return WordTree(dec.perm.copy(), dec.node_bias.copy(), dec.node_weight.copy())
            return BinaryDecoderParams(None if dec.tied else dec.Vdec.copy(), dec.b.copy(), dec.tied)
        return BilingualModel(
            self.Wx.copy(), self.Wy.copy(), self.c.copy(), dup(self.dec_x), dup(self.dec_y),
            self.variant, self.nonlinearity, self.aggregation, self.tied, self.seed,
            None if self.vocab_x is None else list(self.vocab_x),
            None if self.vocab_y is None else list(self.vocab_y),
        )

    def checksums(self):
        return {k: hashlib.sha256(np.ascontiguousarray(v).tobytes()).hexdigest()[:16]
                for k, v in self.parameters().items()}


def models_equal(a, b):
    """Bit-exact comparison of configuration, parameters and vocabularies."""
    if (a.variant, a.nonlinearity, a.aggregation, a.tied, a.seed) != \
       (b.variant, b.nonlinearity, b.aggregation, b.tied, b.seed):
        return False
    pa, pb = a.parameters(), b.parameters()
    if pa.keys() != pb.keys():
        return False
    if not all(np.array_equal(pa[k], pb[k]) for k in pa):
        return False
    if a.variant == "tree":
        if not (np.array_equal(a.dec_x.perm, b.dec_x.perm) and np.array_equal(a.dec_y.perm, b.dec_y.perm)):
            return False
    return a.vocab_x == b.vocab_x and a.vocab_y == b.vocab_y


@dataclass
class TrainConfig:
    dim: int = 40
    epochs: int = 20
    learning_rate: float = None  # None -> DEFAULT_LR[variant]
    merge_k: int = 5
    lam: float = 4.0
    corr_batch: int = 20
    seed: int = 0
    variant: str = "binary"
    nonlinearity: str = "sigmoid"
    aggregation: str = "sum"
    tie_decoders: bool = False
    include_monolingual_docs: bool = True
    cross_only: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.nonlinearity not in NONLINEARITIES:
            raise ValueError(f"unknown nonlinearity {self.nonlinearity!r}")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        for name in ("dim", "epochs", "merge_k", "threads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.corr_batch < 2:
            raise ValueError("corr_batch must be >= 2")
        if self.learning_rate is None:
            self.learning_rate = DEFAULT_LR[self.variant]
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not self.lam >= 0:
            raise ValueError("lambda must be >= 0")
        if self.tie_decoders and self.variant == "tree":
            raise ValueError("tie_decoders applies to the binary variant only")

    @property
    def tag(self):
        if self.variant == "tree":
            return "BAE-tr/corr" if self.lam > 0 else "BAE-tr"
        return "BAE-cr/corr" if self.lam > 0 else "BAE-cr"


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)
    final_objective: float = float("nan")
    checksums: dict = field(default_factory=dict)
    n_instances: int = 0
    updates_per_epoch: int = 0

    def to_dict(self):
        return asdict(self)


def init_model(cfg, Vx, Vy, vocab_x=None, vocab_y=None):
    """Small uniform embeddings, zero biases, zero tree node weights."""
    rng = np.random.default_rng(cfg.seed)
    D = cfg.dim
    scale = 0.1 / np.sqrt(D)
    Wx = rng.uniform(-scale, scale, size=(D, Vx))
    Wy = rng.uniform(-scale, scale, size=(D, Vy))
    c = np.zeros(D)
    if cfg.variant == "binary":
        decs = []
        for V in (Vx, Vy):
            Vd = None if cfg.tie_decoders else rng.uniform(-scale, scale, size=(V, D))
            decs.append(BinaryDecoderParams(Vd, np.zeros(V), cfg.tie_decoders))
    else:
        decs = [build_tree(Vx, cfg.seed, D), build_tree(Vy, cfg.seed + 1, D)]
    return BilingualModel(Wx, Wy, c, decs[0], decs[1], cfg.variant, cfg.nonlinearity,
                          cfg.aggregation, cfg.tie_decoders,
                          cfg.seed if cfg.variant == "tree" else 0,
                          None if vocab_x is None else list(vocab_x),
                          None if vocab_y is None else list(vocab_y))


# --- forward / backward pieces --------------------------------------------

def _encode(m, bag, lang):
    W = m.W(lang)
    if m.variant == "binary":
        a = binary_preactivation(bag, W, m.c)
    else:
        a = count_preactivation(bag, W, m.c, m.aggregation)
    return activate(a, m.nonlinearity)


def encode(m, bag, lang):
    """Hidden representation of a bag in language ``lang`` ("x" or "y")."""
    return _encode(m, bag, lang)


def _decode(m, phi, target, lang, contribs):
    """Score ``target`` (a bag in ``lang``) from ``phi``; queue decoder grads."""
    dec = m.decoder(lang)
    if m.variant == "binary":
        W = m.W(lang)
        loss, dphi, dVd, db = binary_decoder_backward(phi, dec.weight(W), dec.b, target)
        if dec.tied:
            contribs.append((f"W{lang}", None, dVd.T))
        else:
            contribs.append((f"dec_{lang}.Vdec", None, dVd))
        contribs.append((f"dec_{lang}.b", None, db))
    else:
        loss, dphi, nodes, dnb, dnw = tree_decoder_backward(phi, dec, target)
        contribs.append((f"dec_{lang}.node_bias", nodes, dnb))
        contribs.append((f"dec_{lang}.node_weight", nodes, dnw))
    return loss, dphi


def _decode_loss(m, phi, target, lang):
    return _decode(m, phi, target, lang, [])[0]


def _encoder_backward(m, bag, phi, dphi, lang, contribs):
    da = dphi * activation_grad(phi, m.nonlinearity)
    coef = encoder_input_weights(bag, m.variant == "binary", m.aggregation)
    contribs.append((f"W{lang}", ("cols", bag.indices), np.outer(da, coef)))
    contribs.append(("c", None, da))


def _as_instance(item):
    if isinstance(item, AlignedPair):
        return item.src, item.tgt
    return item


def pair_losses(pair, m):
    """(l(x), l(y), l(x,y), l(y,x)) for one aligned pair."""
    x, y = _as_instance(pair)
    if not x or not y:
        raise ValueError("pair has an empty side")
    phix, phiy = _encode(m, x, "x"), _encode(m, y, "y")
    return (_decode_loss(m, phix, x, "x"), _decode_loss(m, phiy, y, "y"),
            _decode_loss(m, phix, y, "y"), _decode_loss(m, phiy, x, "x"))


def correlation(phis_x, phis_y, eps=CORR_EPS, return_grad=False):
    """Sum over hidden dimensions of the Pearson correlation across rows.

    Standard deviations are population (1/B) estimates, each offset by
    ``eps`` in the denominator.  With ``return_grad`` also returns the
    gradients with respect to both inputs.
    """
    X = np.asarray(phis_x, dtype=np.float64)
    Y = np.asarray(phis_y, dtype=np.float64)
    if X.shape != Y.shape:
        raise ValueError(f"shape mismatch {X.shape} vs {Y.shape}")
    B = X.shape[0]
    if B < 2:
        raise ValueError("correlation needs at least 2 rows")
    xc = X - X.mean(axis=0)
    yc = Y - Y.mean(axis=0)
    sx = np.sqrt((xc * xc).mean(axis=0))
    sy = np.sqrt((yc * yc).mean(axis=0))
    cov = (xc * yc).mean(axis=0)
    den = (sx + eps) * (sy + eps)
    r = cov / den
    total = float(r.sum())
    if not return_grad:
        return total
    with np.errstate(divide="ignore", invalid="ignore"):
        kx = np.where(sx > 0, r / (sx * (sx + eps)), 0.0)
        ky = np.where(sy > 0, r / (sy * (sy + eps)), 0.0)
    dX = (yc / den - xc * kx) / B
    dY = (xc / den - yc * ky) / B
    return total, dX, dY


@dataclass
class ObjectiveResult:
    value: float
    losses: tuple  # summed (lx, ly, lxy, lyx)
    correlation: float  # nan when not computed
    grads: dict
    n_pairs: int = 0
    n_x: int = 0
    n_y: int = 0


def _instance_grad(m, inst, phis, extra, cross_only):
    """Losses and gradient contributions of one instance.

    Decoder contributions are queued self-loss first, then cross-loss, for
    both languages, so mirrored models stay bit-identical.
    """
    x, y = inst
    phix, phiy = phis
    ex, ey = extra
    contribs = []
    losses = [0.0, 0.0, 0.0, 0.0]
    dx = dy = None
    if x is not None:
        dx = np.zeros_like(phix) if ex is None else ex.copy()
    if y is not None:
        dy = np.zeros_like(phiy) if ey is None else ey.copy()
    if x is not None and (y is None or not cross_only):
        losses[0], g = _decode(m, phix, x, "x", contribs)
        dx += g
    if y is not None and (x is None or not cross_only):
        losses[1], g = _decode(m, phiy, y, "y", contribs)
        dy += g
    if x is not None and y is not None:
        losses[3], g = _decode(m, phiy, x, "x", contribs)
        dy += g
        losses[2], g = _decode(m, phix, y, "y", contribs)
        dx += g
    if x is not None:
        _encoder_backward(m, x, phix, dx, "x", contribs)
    if y is not None:
        _encoder_backward(m, y, phiy, dy, "y", contribs)
    return losses, contribs


def batch_objective(instances, m, lam=0.0, cross_only=False, threads=1, with_grad=True):
    """Objective over a window of instances, with gradients.

    ``instances`` holds AlignedPair objects or ``(x, y)`` tuples where one
    side may be None (monolingual documents, which only add their
    self-reconstruction loss).  The value is the sum of all reconstruction
    losses minus ``lam`` times the correlation of the pair encodings; with
    ``cross_only`` the self-reconstruction terms of pairs are dropped.
    """
    insts = [_as_instance(i) for i in instances]
    phis = [(None if x is None else _encode(m, x, "x"), None if y is None else _encode(m, y, "y"))
            for x, y in insts]
    pair_ids = [k for k, (x, y) in enumerate(insts) if x is not None and y is not None]
    extra = [(None, None)] * len(insts)
    corr = float("nan")
    if len(pair_ids) >= 2:
        PX = np.stack([phis[k][0] for k in pair_ids])
        PY = np.stack([phis[k][1] for k in pair_ids])
        if lam > 0 and with_grad:
            corr, dPX, dPY = correlation(PX, PY, return_grad=True)
            extra = list(extra)
            for row, k in enumerate(pair_ids):
                extra[k] = (-lam * dPX[row], -lam * dPY[row])
        else:
            corr = correlation(PX, PY)

    def work(k):
        return _instance_grad(m, insts[k], phis[k], extra[k], cross_only)

    if threads > 1 and len(insts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(len(insts))))
    else:
        results = [work(k) for k in range(len(insts))]

    sums = np.zeros(4)
    grads = {}
    if with_grad:
        grads = {k: np.zeros_like(v) for k, v in m.parameters().items()}
    for losses, contribs in results:  # fixed instance order -> deterministic reduction
        sums += losses
        if not with_grad:
            continue
        for name, idx, val in contribs:
            g = grads[name]
            if idx is None:
                g += val
            elif isinstance(idx, tuple):
                g[:, idx[1]] += val
            else:
                g[idx] += val
    value = float(sums.sum())
    if lam > 0 and len(pair_ids) >= 2:
        value -= lam * corr
    n_x = sum(1 for x, _ in insts if x is not None)
    n_y = sum(1 for _, y in insts if y is not None)
    return ObjectiveResult(value, tuple(float(s) for s in sums), corr, grads,
                           len(pair_ids), n_x, n_y)


def evaluate_objective(m, instances, cfg):
    """Forward-only objective summed over consecutive windows of ``cfg.corr_batch``."""
    total = 0.0
    for start in range(0, len(instances), cfg.corr_batch):
        window = instances[start:start + cfg.corr_batch]
        res = batch_objective(window, m, cfg.lam, cfg.cross_only, with_grad=False)
        total += res.value
    return total


def _check_finite(res, epoch, window):
    names = ("l(x)", "l(y)", "l(x,y)", "l(y,x)")
    for name, v in zip(names, res.losses):
        if not np.isfinite(v):
            raise NumericError(f"non-finite {name} at epoch {epoch}, window {window}")
    if res.n_pairs >= 2 and not np.isfinite(res.correlation):
        raise NumericError(f"non-finite correlation at epoch {epoch}, window {window}")


def train(corpus, cfg, mono_x=None, mono_y=None, vocab_x=None, vocab_y=None, model=None,
          callback=None):
    """Train a bilingual autoencoder by SGD over merged mini-batches.

    ``corpus`` is a list of AlignedPair.  Pairs are merged in corpus order
    into runs of ``cfg.merge_k``; each epoch shuffles the merged instances
    (plus monolingual documents, if any) and takes one SGD step per window
    of ``cfg.corr_batch`` instances.  The step is ``learning_rate`` times the
    window objective's gradient divided by the window length, so the rate
    is per instance.  Returns ``(model, TrainReport)``.
    """
    if not corpus:
        raise ValueError("empty training corpus")
    if model is None:
        Vx = len(vocab_x) if vocab_x is not None else 1 + max(int(p.src.indices[-1]) for p in corpus)
        Vy = len(vocab_y) if vocab_y is not None else 1 + max(int(p.tgt.indices[-1]) for p in corpus)
        words_x = getattr(vocab_x, "words", vocab_x)
        words_y = getattr(vocab_y, "words", vocab_y)
        model = init_model(cfg, Vx, Vy, words_x, words_y)
    merged = merge_pairs(corpus, cfg.merge_k)
    instances = [(p.src, p.tgt) for p in merged]
    if cfg.include_monolingual_docs:
        instances += [(d, None) for d in (mono_x or []) if d]
        instances += [(None, d) for d in (mono_y or []) if d]
    params = model.parameters()
    report = TrainReport(n_instances=len(instances))
    n = len(instances)
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
        sums = np.zeros(4)
        counts = np.zeros(4)
        corrs = []
        updates = 0
        for w, start in enumerate(range(0, n, cfg.corr_batch)):
            window = [instances[k] for k in order[start:start + cfg.corr_batch]]
            res = batch_objective(window, model, cfg.lam, cfg.cross_only, cfg.threads)
            _check_finite(res, epoch, w)
            step = cfg.learning_rate / len(window)
            for name, g in res.grads.items():
                params[name] -= step * g
            updates += 1
            sums += res.losses
            counts += (res.n_x, res.n_y, res.n_pairs, res.n_pairs)
            if res.n_pairs >= 2:
                corrs.append(res.correlation)
        means = np.divide(sums, counts, out=np.zeros(4), where=counts > 0)
        rec = {
            "epoch": epoch,
            "lx": float(means[0]), "ly": float(means[1]),
            "lxy": float(means[2]), "lyx": float(means[3]),
            "total": float(means.sum()),
            "correlation": float(np.mean(corrs)) if corrs else float("nan"),
            "updates": updates,
            "seconds": time.perf_counter() - t0,
        }
        report.epochs.append(rec)
        report.updates_per_epoch = updates
        logger.info("epoch %d total %.4f corr %.4f", epoch, rec["total"], rec["correlation"])
        if callback is not None:
            callback(rec)
    report.final_objective = evaluate_objective(model, instances, cfg)
    report.checksums = model.checksums()
    return model, report


# --- model files ------------------------------------------------------------

MAGIC = b"BAE1"
VERSION = 1
_HEADER = struct.Struct("<4sBBBBBIIIQ")


def _write_words(f, words):
    words = words or []
    f.write(struct.pack("<I", len(words)))
    for w in words:
        raw = w.encode("utf-8")
        f.write(struct.pack("<I", len(raw)))
        f.write(raw)


def save_model(m, path):
    """Write the little-endian binary model format."""
    D = m.dim
    Vx, Vy = m.vocab_sizes
    header = _HEADER.pack(
        MAGIC, VERSION, VARIANTS.index(m.variant), NONLINEARITIES.index(m.nonlinearity),
        AGGREGATIONS.index(m.aggregation), int(m.tied), D, Vx, Vy,
        m.seed if m.variant == "tree" else 0,
    )
    with open(path, "wb") as f:
        f.write(header)
        for arr in (m.Wx, m.Wy, m.c):
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        for dec in (m.dec_x, m.dec_y):
            if m.variant == "binary":
                if not dec.tied:
                    f.write(np.ascontiguousarray(dec.Vdec, dtype="<f8").tobytes())
                f.write(np.ascontiguousarray(dec.b, dtype="<f8").tobytes())
            else:
                f.write(np.ascontiguousarray(dec.perm, dtype="<u4").tobytes())
                f.write(np.ascontiguousarray(dec.node_bias, dtype="<f8").tobytes())
                f.write(np.ascontiguousarray(dec.node_weight, dtype="<f8").tobytes())
        _write_words(f, m.vocab_x)
        _write_words(f, m.vocab_y)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise ModelFormatError("truncated model file")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def array(self, dtype, shape):
        count = int(np.prod(shape))
        size = np.dtype(dtype).itemsize * count
        return np.frombuffer(self.take(size), dtype=dtype).reshape(shape).copy()

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def words(self):
        n = self.u32()
        return [self.take(self.u32()).decode("utf-8") for _ in range(n)]


def load_model(path):
    with open(path, "rb") as f:
        data = f.read()
    r = _Reader(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise ModelFormatError("bad magic")
    if len(data) < 5 or data[4] != VERSION:
        raise ModelFormatError(f"unsupported version {data[4] if len(data) > 4 else None}")
    (_, _, variant, nonlin, agg, tied, D, Vx, Vy, seed) = _HEADER.unpack(r.take(_HEADER.size))
    try:
        variant = VARIANTS[variant]
        nonlin = NONLINEARITIES[nonlin]
        agg = AGGREGATIONS[agg]
    except IndexError:
        raise ModelFormatError("bad enum byte in header") from None
    tied = bool(tied)
    Wx = r.array("<f8", (D, Vx)).astype(np.float64)
    Wy = r.array("<f8", (D, Vy)).astype(np.float64)
    c = r.array("<f8", (D,)).astype(np.float64)
    decs = []
    for V in (Vx, Vy):
        if variant == "binary":
            Vd = None if tied else r.array("<f8", (V, D)).astype(np.float64)
            decs.append(BinaryDecoderParams(Vd, r.array("<f8", (V,)).astype(np.float64), tied))
        else:
            perm = r.array("<u4", (V,)).astype(np.int64)
            nb = r.array("<f8", (V - 1,)).astype(np.float64)
            nw = r.array("<f8", (V - 1, D)).astype(np.float64)
            decs.append(WordTree(perm, nb, nw))
    vx, vy = r.words(), r.words()
    if r.pos != len(data):
        raise ModelFormatError("trailing bytes after model payload")
    return BilingualModel(Wx, Wy, c, decs[0], decs[1], variant, nonlin, agg, tied, int(seed),
                          vx or None, vy or None)
