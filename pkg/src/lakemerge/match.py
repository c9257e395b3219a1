"""Pairwise integrability matcher: masked self-attention over a concatenated
tuple pair, then an MLP head.

A pair (t1, t2) becomes 2m slots of attribute vectors. Each slot attends
over all slots except masked (Null) ones; masked columns get an additive
-1e9 on their logits before the row softmax, and masked rows of the attended
output are zeroed before the MLP, so the probability is literally
independent of whatever vectors sit in masked slots.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .embed import TupleEmbedding
from .seeds import rng_for

__all__ = [
    "ShapeMismatch",
    "MatcherHyper",
    "MatcherParams",
    "PairScore",
    "init_matcher",
    "forward",
    "forward_batch",
    "judge_pair",
    "save_checkpoint",
    "load_checkpoint",
]

_MASK_PENALTY = -1.0e9
CHECKPOINT_FORMAT = "lakemerge-matcher"
CHECKPOINT_VERSION = 1


class ShapeMismatch(Exception):
    """Embedding shape does not agree with the matcher's hyperparameters."""


@dataclass(frozen=True)
class MatcherHyper:
    m: int
    d_k: int
    h: int

    def __post_init__(self) -> None:
        if self.m < 1 or self.d_k < 2 or self.h < 1:
            raise ValueError("need m >= 1, d_k >= 2, h >= 1")


@dataclass
class MatcherParams:
    """Projection matrices plus the two-layer head (tanh hidden, sigmoid out)."""

    hyper: MatcherHyper
    w_q: np.ndarray  # (d_k, d_k)
    w_k: np.ndarray  # (d_k, d_k)
    w_v: np.ndarray  # (d_k, d_k)
    w1: np.ndarray  # (2m*d_k, h)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (h, 1)
    b2: np.ndarray  # (1,)

    def copy(self) -> "MatcherParams":
        return MatcherParams(
            self.hyper,
            self.w_q.copy(),
            self.w_k.copy(),
            self.w_v.copy(),
            self.w1.copy(),
            self.b1.copy(),
            self.w2.copy(),
            self.b2.copy(),
        )

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


@dataclass(frozen=True)
class PairScore:
    probability: float
    label: int

    @staticmethod
    def from_probability(p: float, threshold: float) -> "PairScore":
        return PairScore(p, 1 if p >= threshold else 0)


def init_matcher(m: int, d_k: int, h: int, seed: int) -> MatcherParams:
    """Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)]; biases zero."""
    hyper = MatcherHyper(m, d_k, h)
    rng = rng_for(seed, "matcher-init")

    def uniform(shape: tuple[int, ...], fan_in: int) -> np.ndarray:
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    return MatcherParams(
        hyper,
        w_q=uniform((d_k, d_k), d_k),
        w_k=uniform((d_k, d_k), d_k),
        w_v=uniform((d_k, d_k), d_k),
        w1=uniform((2 * m * d_k, h), 2 * m * d_k),
        b1=np.zeros(h),
        w2=uniform((h, 1), h),
        b2=np.zeros(1),
    )


def _check_embedding(params: MatcherParams, e: TupleEmbedding) -> None:
    m, d = params.hyper.m, params.hyper.d_k
    if e.attr_vecs.shape != (m, d):
        raise ShapeMismatch(f"expected ({m}, {d}), got {e.attr_vecs.shape}")
    if len(e.mask.bits) != m:
        raise ShapeMismatch(f"mask has {len(e.mask.bits)} bits, expected {m}")


def _attention(params: MatcherParams, X: np.ndarray, bits: np.ndarray):
    """Shared forward pass. X: (B, S, d), bits: (B, S). Returns intermediates."""
    d = params.hyper.d_k
    q = X @ params.w_q
    k = X @ params.w_k
    v = X @ params.w_v
    logits = q @ k.swapaxes(1, 2) / np.sqrt(d)
    logits = logits + (1.0 - bits[:, None, :]) * _MASK_PENALTY
    shift = logits.max(axis=2, keepdims=True)
    expv = np.exp(logits - shift)
    attn = expv / expv.sum(axis=2, keepdims=True)
    attended = (attn @ v) * bits[:, :, None]  # zero masked output rows
    return q, k, v, attn, attended


def forward_batch(params: MatcherParams, X: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """Probabilities for B stacked pairs; fully-masked pairs short-circuit to 0."""
    B, S, d = X.shape
    if S != 2 * params.hyper.m or d != params.hyper.d_k:
        raise ShapeMismatch(f"pair tensor {X.shape} does not fit hyper {params.hyper}")
    _, _, _, _, attended = _attention(params, X, bits)
    u = attended.reshape(B, S * d)
    a1 = np.tanh(u @ params.w1 + params.b1)
    z2 = a1 @ params.w2 + params.b2
    p = 1.0 / (1.0 + np.exp(-z2[:, 0]))
    p = np.where(bits.sum(axis=1) == 0, 0.0, p)
    return p


def pair_tensor(e1: TupleEmbedding, e2: TupleEmbedding) -> tuple[np.ndarray, np.ndarray]:
    X = np.concatenate([e1.attr_vecs, e2.attr_vecs])[None, :, :]
    bits = np.array([e1.mask.bits + e2.mask.bits], dtype=float)
    return X, bits


def forward(params: MatcherParams, e1: TupleEmbedding, e2: TupleEmbedding) -> float:
    """Integrability probability for the ordered pair (e1, e2)."""
    _check_embedding(params, e1)
    _check_embedding(params, e2)
    X, bits = pair_tensor(e1, e2)
    return float(forward_batch(params, X, bits)[0])


def judge_pair(
    params: MatcherParams,
    e1: TupleEmbedding,
    e2: TupleEmbedding,
    threshold: float = 0.5,
) -> PairScore:
    """Threshold the forward probability; label 1 iff p >= threshold."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    return PairScore.from_probability(forward(params, e1, e2), threshold)


def save_checkpoint(params: MatcherParams, path: str) -> None:
    """Versioned JSON tensor dump; keys sorted so identical params give
    identical bytes."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "hyper": {"m": params.hyper.m, "d_k": params.hyper.d_k, "h": params.hyper.h},
        "tensors": {
            name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in params.arrays().items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path: str) -> MatcherParams:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a matcher checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    hyper = MatcherHyper(**doc["hyper"])
    tensors = {}
    for name, spec in doc["tensors"].items():
        arr = np.asarray(spec["data"], dtype=float).reshape(spec["shape"])
        tensors[name] = arr
    params = MatcherParams(hyper, **tensors)
    for name, arr in params.arrays().items():
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{path}: non-finite values in {name}")
    return params
