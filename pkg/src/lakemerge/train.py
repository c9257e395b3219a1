"""Self-supervised contrastive training of the pair matcher.

Each anchor tuple is trained against its perturbed copies (label 1), an
adversarial copy refreshed every epoch (label 1), and sampled other rows
(label 0) under a binary NCE loss. Gradients are exact; the adversarial
direction is the loss gradient with respect to the second copy in the
self-pair (anchor, anchor).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .augment import SynonymParaphraser, build_train_pairs
from .core import Table
from .embed import (
    EmbeddingCache,
    EmbeddingProvider,
    HashedNgramProvider,
    TupleEmbedding,
    embed_row,
    embed_table,
)
from .match import MatcherParams, ShapeMismatch, _attention, init_matcher
from .seeds import rng_for

__all__ = [
    "ZeroGradient",
    "TrainConfig",
    "Gradients",
    "TrainResult",
    "nce_loss",
    "grad",
    "adversarial_example",
    "train",
]

# probability clamp for the NCE log terms
_CLAMP_LO = 1.0e-7
_CLAMP_HI = 1.0 - 1.0e-7

_BUILTIN_LR = 1.0e-3
_EXTERNAL_LR = 1.0e-6


class ZeroGradient(Exception):
    """Adversarial direction undefined: input gradient norm is ~0."""


@dataclass(frozen=True)
class TrainConfig:
    n_pos: int = 6
    n_neg: int = 20
    epochs: int = 30
    learning_rate: float | None = None  # None: resolved by provider kind
    epsilon: float = 0.05
    adv_sign: str = "ascent"  # or "paper" (descent direction)
    optimizer: str = "adam"  # or "sgd"
    hidden: int = 64
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_pos < 1 or self.n_neg < 1:
            raise ValueError("need n_pos >= 1 and n_neg >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.adv_sign not in ("ascent", "paper"):
            raise ValueError(f"unknown adv_sign {self.adv_sign!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    def resolve_lr(self, provider: EmbeddingProvider) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        if isinstance(provider, HashedNgramProvider):
            return _BUILTIN_LR
        return _EXTERNAL_LR


@dataclass
class Gradients:
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "w_q": self.w_q,
            "w_k": self.w_k,
            "w_v": self.w_v,
            "w1": self.w1,
            "b1": self.b1,
            "w2": self.w2,
            "b2": self.b2,
        }


@dataclass
class TrainResult:
    params: MatcherParams
    log: list[dict]
    anchors_skipped: int


def _stack_pairs(
    anchor: TupleEmbedding, others: list[TupleEmbedding]
) -> tuple[np.ndarray, np.ndarray]:
    m, d = anchor.attr_vecs.shape
    B = len(others)
    X = np.empty((B, 2 * m, d))
    bits = np.empty((B, 2 * m))
    X[:, :m] = anchor.attr_vecs
    bits[:, :m] = anchor.mask.bits
    for i, o in enumerate(others):
        if o.attr_vecs.shape != (m, d):
            raise ShapeMismatch(f"expected ({m}, {d}), got {o.attr_vecs.shape}")
        X[i, m:] = o.attr_vecs
        bits[i, m:] = o.mask.bits
    return X, bits


def _core(
    params: MatcherParams,
    X: np.ndarray,
    bits: np.ndarray,
    y: np.ndarray,
    need_param_grads: bool,
    need_input_grads: bool,
) -> tuple[float, Gradients | None, np.ndarray | None]:
    """Loss (sum over pairs) and exact gradients for a stacked pair batch."""
    B, S, d = X.shape
    q, k, v, attn, attended = _attention(params, X, bits)
    u = attended.reshape(B, S * d)
    z1 = u @ params.w1 + params.b1
    a1 = np.tanh(z1)
    z2 = a1 @ params.w2 + params.b2
    p = 1.0 / (1.0 + np.exp(-z2[:, 0]))
    alive = bits.sum(axis=1) > 0
    p = np.where(alive, p, 0.0)

    pc = np.clip(p, _CLAMP_LO, _CLAMP_HI)
    loss = float(-np.sum(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))
    if not (need_param_grads or need_input_grads):
        return loss, None, None

    # clamp is flat outside its range; fully-masked pairs are constants
    in_range = (p > _CLAMP_LO) & (p < _CLAMP_HI) & alive
    dz2 = (p - y) * in_range  # (B,)

    dw2 = a1.T @ dz2[:, None]
    db2 = np.array([dz2.sum()])
    da1 = dz2[:, None] @ params.w2.T
    dz1 = da1 * (1.0 - a1 * a1)
    dw1 = u.T @ dz1
    db1 = dz1.sum(axis=0)
    du = dz1 @ params.w1.T
    dE = du.reshape(B, S, d) * bits[:, :, None]

    dattn = dE @ v.swapaxes(1, 2)
    dv = attn.swapaxes(1, 2) @ dE
    # softmax backward; masked columns have attn 0 so their raw-logit grad is 0
    draw = attn * (dattn - (dattn * attn).sum(axis=2, keepdims=True))
    scale = 1.0 / np.sqrt(d)
    dq = draw @ k * scale
    dk = draw.swapaxes(1, 2) @ q * scale

    grads = None
    if need_param_grads:
        # sum_b X_b^T d*_b, flattened over (batch, slot) so BLAS does it
        flat_x = X.reshape(-1, d)
        grads = Gradients(
            w_q=flat_x.T @ dq.reshape(-1, d),
            w_k=flat_x.T @ dk.reshape(-1, d),
            w_v=flat_x.T @ dv.reshape(-1, d),
            w1=dw1,
            b1=db1,
            w2=dw2,
            b2=db2,
        )
    dX = None
    if need_input_grads:
        dX = dq @ params.w_q.T + dk @ params.w_k.T + dv @ params.w_v.T
    return loss, grads, dX


def nce_loss(
    params: MatcherParams,
    anchor: TupleEmbedding,
    positives: list[TupleEmbedding],
    negatives: list[TupleEmbedding],
) -> float:
    """-[sum log f(a, pos) + sum log(1 - f(a, neg))], probabilities clamped."""
    X, bits = _stack_pairs(anchor, list(positives) + list(negatives))
    y = np.array([1.0] * len(positives) + [0.0] * len(negatives))
    loss, _, _ = _core(params, X, bits, y, False, False)
    return loss


def grad(
    params: MatcherParams,
    anchor: TupleEmbedding,
    positives: list[TupleEmbedding],
    negatives: list[TupleEmbedding],
) -> Gradients:
    """Exact parameter gradients of nce_loss for one anchor batch."""
    X, bits = _stack_pairs(anchor, list(positives) + list(negatives))
    y = np.array([1.0] * len(positives) + [0.0] * len(negatives))
    _, grads, _ = _core(params, X, bits, y, True, False)
    assert grads is not None
    return grads


def adversarial_example(
    params: MatcherParams,
    anchor: TupleEmbedding,
    epsilon: float,
    adv_sign: str = "ascent",
) -> TupleEmbedding:
    """Perturb a copy of the anchor along the self-pair loss gradient.

    The gradient is taken with respect to the second copy in the pair
    (anchor, anchor) labelled positive; "ascent" moves along it (loss up),
    "paper" against it. The perturbation has L2 norm epsilon and is zero on
    masked slots.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if adv_sign not in ("ascent", "paper"):
        raise ValueError(f"unknown adv_sign {adv_sign!r}")
    m = anchor.attr_vecs.shape[0]
    X, bits = _stack_pairs(anchor, [anchor])
    y = np.array([1.0])
    _, _, dX = _core(params, X, bits, y, False, True)
    assert dX is not None
    g = dX[0, m:]
    norm = float(np.linalg.norm(g))
    if norm <= 1.0e-12:
        raise ZeroGradient(f"gradient norm {norm} too small for a direction")
    sign = 1.0 if adv_sign == "ascent" else -1.0
    r = sign * epsilon / norm * g
    return TupleEmbedding(anchor.attr_vecs + r, anchor.mask)


class _Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: MatcherParams, grads: Gradients) -> None:
        arrs = params.arrays()
        for name, g in grads.arrays().items():
            arrs[name] -= self.lr * g


class _Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1.0e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: MatcherParams, grads: Gradients) -> None:
        self.t += 1
        arrs = params.arrays()
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, g in grads.arrays().items():
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            m, v = self.m[name], self.v[name]
            # in-place moment updates; the hot loop runs once per anchor
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = v / bc2
            np.sqrt(update, out=update)
            update += self.eps
            np.divide(m, update, out=update)
            arrs[name] -= (self.lr / bc1) * update


def _make_optimizer(config: TrainConfig, lr: float):
    if config.optimizer == "adam":
        return _Adam(lr)
    return _Sgd(lr)


def train(
    table: Table,
    provider: EmbeddingProvider,
    config: TrainConfig,
    paraphraser: SynonymParaphraser | None = None,
    log_path: str | None = None,
) -> TrainResult:
    """Train a matcher on one table.

    The pair set is generated once and held fixed across epochs; only the
    adversarial copy is recomputed per epoch against current parameters.
    One optimizer step per anchor visit, anchors in a seeded shuffled order
    that differs per epoch. epochs=0 returns the initialization untouched.
    """
    if paraphraser is None:
        paraphraser = SynonymParaphraser()
    pair_rng = rng_for(config.seed, "train-pairs")
    pairs, skipped = build_train_pairs(
        table, config.n_pos, config.n_neg, paraphraser, pair_rng
    )
    if skipped:
        warnings.warn(f"skipped {skipped} all-null anchor rows", stacklevel=2)

    cache = EmbeddingCache(provider)
    texts = {c.text for r in table.iter_rows() for c in r.cells if not c.is_null}
    for per_anchor in pairs.positives:
        for row, _kind in per_anchor:
            texts.update(c.text for c in row.cells if not c.is_null)
    cache.warm(sorted(texts))

    table_emb = embed_table(cache, table)
    pos_embs: list[list[TupleEmbedding]] = [
        [embed_row(cache, row) for row, _kind in per_anchor]
        for per_anchor in pairs.positives
    ]

    m = table.n_attrs
    params = init_matcher(m, provider.dimension(), config.hidden, config.seed)
    optimizer = _make_optimizer(config, config.resolve_lr(provider))

    log: list[dict] = []
    n = len(pairs.anchors)
    for epoch in range(1, config.epochs + 1):
        order = rng_for(config.seed, f"train-epoch-{epoch}").permutation(n)
        total = 0.0
        for idx in order:
            anchor_emb = table_emb.tuple_embedding(pairs.anchors[idx])
            others = list(pos_embs[idx])
            try:
                others.append(
                    adversarial_example(params, anchor_emb, config.epsilon, config.adv_sign)
                )
            except ZeroGradient:
                pass  # rare; train on the plain batch this visit
            n_pos_here = len(others)
            for neg_id in pairs.negatives[idx]:
                others.append(table_emb.tuple_embedding(neg_id))
            X, bits = _stack_pairs(anchor_emb, others)
            y = np.array([1.0] * n_pos_here + [0.0] * len(pairs.negatives[idx]))
            loss, grads, _ = _core(params, X, bits, y, True, False)
            assert grads is not None
            optimizer.step(params, grads)
            total += loss
        entry = {
            "epoch": epoch,
            "mean_loss": total / n if n else 0.0,
            "anchors_skipped": skipped,
        }
        log.append(entry)

    if log_path is not None:
        with open(log_path, "w", encoding="utf-8") as fh:
            for entry in log:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
    return TrainResult(params=params, log=log, anchors_skipped=skipped)
