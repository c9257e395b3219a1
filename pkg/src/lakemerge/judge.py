"""LSH blocking and batch pairwise judgment.

Each tuple is summarized by the mean of its unmasked attribute vectors;
random-hyperplane sign bits per band put near-identical summaries in the
same block, and only co-blocked pairs are scored by the matcher. The
matcher is not symmetric in its arguments, so each pair is scored in both
orders and the probabilities combined (mean by default).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .embed import TableEmbedding, TupleEmbedding
from .match import MatcherParams, PairScore, forward_batch
from .seeds import rng_for

__all__ = [
    "BlockingConfig",
    "PairJudgments",
    "lsh_blocks",
    "judge_all",
    "save_judgments",
    "load_judgments",
]


@dataclass(frozen=True)
class BlockingConfig:
    planes_per_band: int = 4
    bands: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.bands < 1 or self.planes_per_band < 0:
            raise ValueError("need bands >= 1 and planes_per_band >= 0")


@dataclass(frozen=True)
class PairJudgments:
    """Scored unordered pairs (a < b), plus the table size and threshold."""

    n: int
    threshold: float
    pairs: tuple[tuple[int, int, float, int], ...]

    def __post_init__(self) -> None:
        seen = set()
        for a, b, p, label in self.pairs:
            if not 0 <= a < b < self.n:
                raise ValueError(f"bad pair ({a}, {b}) for n={self.n}")
            if (a, b) in seen:
                raise ValueError(f"duplicate pair ({a}, {b})")
            seen.add((a, b))
            if label != (1 if p >= self.threshold else 0):
                raise ValueError(f"label of ({a}, {b}) inconsistent with threshold")

    def positive_pairs(self) -> set[tuple[int, int]]:
        return {(a, b) for a, b, _p, label in self.pairs if label == 1}


def _as_arrays(embeddings) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(embeddings, TableEmbedding):
        return embeddings.vecs, embeddings.mask_bits
    if embeddings and isinstance(embeddings[0], TupleEmbedding):
        vecs = np.stack([e.attr_vecs for e in embeddings])
        bits = np.array([e.mask.bits for e in embeddings], dtype=float)
        return vecs, bits
    raise ValueError("expected a TableEmbedding or a non-empty list of TupleEmbedding")


def _summaries(vecs: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """Mean of unmasked attribute vectors; all-Null tuples fall back to the
    plain mean (their slots all hold the null token, so that IS the null
    token)."""
    counts = bits.sum(axis=1)
    safe = np.where(counts == 0, vecs.shape[1], counts)
    summed = np.where(counts[:, None] == 0, vecs.sum(axis=1), (vecs * bits[:, :, None]).sum(axis=1))
    return summed / safe[:, None]


def lsh_blocks(embeddings, config: BlockingConfig) -> list[set[int]]:
    """Union over bands of same-signature groups; duplicates collapsed."""
    vecs, bits = _as_arrays(embeddings)
    if vecs.shape[0] == 0:
        raise ValueError("embeddings must be non-empty")
    summary = _summaries(vecs, bits)
    d = summary.shape[1]
    blocks: dict[tuple, set[int]] = {}
    for band in range(config.bands):
        if config.planes_per_band == 0:
            keys = [(band,)] * summary.shape[0]
        else:
            planes = rng_for(config.seed, f"lsh-band-{band}").normal(size=(config.planes_per_band, d))
            signs = (summary @ planes.T) >= 0.0
            keys = [(band,) + tuple(bool(x) for x in row) for row in signs]
        for row_id, key in enumerate(keys):
            blocks.setdefault(key, set()).add(row_id)
    unique: dict[frozenset, set[int]] = {}
    for members in blocks.values():
        unique[frozenset(members)] = members
    return sorted(unique.values(), key=lambda s: sorted(s))


def candidate_pairs(blocks: list[set[int]]) -> list[tuple[int, int]]:
    pairs = set()
    for block in blocks:
        members = sorted(block)
        for i, a in enumerate(members):
            for b in members[i + 1 :]:
                pairs.add((a, b))
    return sorted(pairs)


def judge_all(
    params: MatcherParams,
    embeddings: TableEmbedding,
    blocks: list[set[int]],
    threshold: float = 0.5,
    combine: str = "mean",
    chunk: int = 512,
) -> PairJudgments:
    """Score every co-blocked unordered pair once, both orders combined."""
    if combine not in ("mean", "max"):
        raise ValueError(f"unknown combine {combine!r}")
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    vecs, bits = embeddings.vecs, embeddings.mask_bits
    n, m, d = vecs.shape
    pairs = candidate_pairs(blocks)
    out = []
    for lo in range(0, len(pairs), chunk):
        sub = pairs[lo : lo + chunk]
        B = len(sub)
        X = np.empty((2 * B, 2 * m, d))
        bb = np.empty((2 * B, 2 * m))
        for i, (a, b) in enumerate(sub):
            X[i, :m], X[i, m:] = vecs[a], vecs[b]
            bb[i, :m], bb[i, m:] = bits[a], bits[b]
            X[B + i, :m], X[B + i, m:] = vecs[b], vecs[a]
            bb[B + i, :m], bb[B + i, m:] = bits[b], bits[a]
        p = forward_batch(params, X, bb)
        if combine == "mean":
            merged = (p[:B] + p[B:]) / 2.0
        else:
            merged = np.maximum(p[:B], p[B:])
        for (a, b), prob in zip(sub, merged):
            score = PairScore.from_probability(float(prob), threshold)
            out.append((a, b, score.probability, score.label))
    return PairJudgments(n=n, threshold=threshold, pairs=tuple(out))


def save_judgments(judgments: PairJudgments, path: str) -> None:
    doc = {
        "n": judgments.n,
        "threshold": judgments.threshold,
        "pairs": [[a, b, p, label] for a, b, p, label in judgments.pairs],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_judgments(path: str) -> PairJudgments:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    pairs = tuple((int(a), int(b), float(p), int(label)) for a, b, p, label in doc["pairs"])
    return PairJudgments(n=int(doc["n"]), threshold=float(doc["threshold"]), pairs=pairs)
