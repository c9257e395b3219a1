import numpy as np
import pytest

from lakemerge.core import MaskVector
from lakemerge.embed import TupleEmbedding
from lakemerge.match import (
    MatcherHyper,
    PairScore,
    ShapeMismatch,
    _attention,
    forward,
    init_matcher,
    judge_pair,
    load_checkpoint,
    pair_tensor,
    save_checkpoint,
)


def emb(rng, m, d, bits=None):
    if bits is None:
        bits = tuple(int(b) for b in rng.integers(0, 2, size=m))
        if sum(bits) == 0:
            bits = (1,) + bits[1:]
    return TupleEmbedding(rng.normal(size=(m, d)), MaskVector(tuple(bits)))


def test_init_shapes_and_bounds():
    p = init_matcher(4, 16, 8, seed=5)
    assert p.w_q.shape == (16, 16)
    assert p.w1.shape == (2 * 4 * 16, 8)
    assert p.w2.shape == (8, 1)
    assert np.all(p.b1 == 0.0) and np.all(p.b2 == 0.0)
    assert np.abs(p.w_q).max() <= 1 / np.sqrt(16)
    assert np.abs(p.w1).max() <= 1 / np.sqrt(2 * 4 * 16)
    q = init_matcher(4, 16, 8, seed=5)
    for a, b in zip(p.arrays().values(), q.arrays().values()):
        assert np.array_equal(a, b)
    r = init_matcher(4, 16, 8, seed=6)
    assert not np.array_equal(p.w_q, r.w_q)


def test_hyper_validation():
    with pytest.raises(ValueError):
        MatcherHyper(0, 8, 8)
    with pytest.raises(ValueError):
        init_matcher(3, 1, 8, seed=0)


def test_forward_range_and_determinism():
    rng = np.random.default_rng(0)
    p = init_matcher(3, 8, 8, seed=1)
    for _ in range(20):
        a, b = emb(rng, 3, 8), emb(rng, 3, 8)
        x = forward(p, a, b)
        assert 0.0 <= x <= 1.0
        assert forward(p, a, b) == x


def test_shape_mismatch():
    rng = np.random.default_rng(0)
    p = init_matcher(3, 8, 8, seed=1)
    with pytest.raises(ShapeMismatch):
        forward(p, emb(rng, 4, 8), emb(rng, 3, 8))
    with pytest.raises(ShapeMismatch):
        forward(p, emb(rng, 3, 8), emb(rng, 3, 16))


def test_masked_slots_do_not_affect_probability():
    rng = np.random.default_rng(7)
    p = init_matcher(4, 8, 8, seed=2)
    a = emb(rng, 4, 8, bits=(1, 0, 1, 0))
    b = emb(rng, 4, 8, bits=(0, 1, 1, 1))
    base = forward(p, a, b)
    for _ in range(10):
        av = a.attr_vecs.copy()
        bv = b.attr_vecs.copy()
        av[1], av[3] = rng.normal(size=8) * 50, rng.normal(size=8) * 50
        bv[0] = rng.normal(size=8) * 50
        a2 = TupleEmbedding(av, a.mask)
        b2 = TupleEmbedding(bv, b.mask)
        assert forward(p, a2, b2) == base


def test_attention_rows_stochastic_and_masked_mass():
    rng = np.random.default_rng(3)
    p = init_matcher(4, 8, 8, seed=3)
    a = emb(rng, 4, 8, bits=(1, 0, 1, 1))
    b = emb(rng, 4, 8, bits=(1, 1, 0, 1))
    X, bits = pair_tensor(a, b)
    _, _, _, attn, _ = _attention(p, X, bits)
    sums = attn.sum(axis=2)
    assert np.all(np.abs(sums - 1.0) <= 1e-9)
    masked_cols = bits[0] == 0.0
    assert attn[0][:, masked_cols].sum() < 1e-6


def test_pair_order_matters_generally():
    rng = np.random.default_rng(9)
    p = init_matcher(3, 8, 8, seed=4)
    hits = 0
    for _ in range(10):
        a, b = emb(rng, 3, 8, bits=(1, 1, 1)), emb(rng, 3, 8, bits=(1, 1, 1))
        if forward(p, a, b) != forward(p, b, a):
            hits += 1
    assert hits >= 8


def test_fully_masked_pair_scores_zero():
    rng = np.random.default_rng(1)
    p = init_matcher(3, 8, 8, seed=5)
    a = emb(rng, 3, 8, bits=(0, 0, 0))
    b = emb(rng, 3, 8, bits=(0, 0, 0))
    assert forward(p, a, b) == 0.0


def test_judge_pair_boundary():
    rng = np.random.default_rng(2)
    p = init_matcher(3, 8, 8, seed=6)
    p.w2[:] = 0.0
    p.b2[:] = 0.0  # forces z2 = 0 so probability is exactly 0.5
    a, b = emb(rng, 3, 8), emb(rng, 3, 8)
    score = judge_pair(p, a, b, threshold=0.5)
    assert score == PairScore(0.5, 1)
    assert judge_pair(p, a, b, threshold=0.50001).label == 0
    with pytest.raises(ValueError):
        judge_pair(p, a, b, threshold=0.0)


def test_checkpoint_roundtrip_and_byte_identity(tmp_path):
    p = init_matcher(3, 8, 8, seed=7)
    f1 = tmp_path / "a.json"
    f2 = tmp_path / "b.json"
    save_checkpoint(p, str(f1))
    save_checkpoint(p, str(f2))
    assert f1.read_bytes() == f2.read_bytes()
    q = load_checkpoint(str(f1))
    assert q.hyper == p.hyper
    for a, b in zip(p.arrays().values(), q.arrays().values()):
        assert np.array_equal(a, b)
    f3 = tmp_path / "c.json"
    save_checkpoint(q, str(f3))
    assert f3.read_bytes() == f1.read_bytes()


def test_checkpoint_rejects_foreign_files(tmp_path):
    f = tmp_path / "x.json"
    f.write_text('{"format": "something-else", "version": 1}')
    with pytest.raises(ValueError):
        load_checkpoint(str(f))
    g = tmp_path / "y.json"
    p = init_matcher(2, 8, 4, seed=0)
    save_checkpoint(p, str(g))
    doc = g.read_text().replace('"version":1', '"version":99')
    g.write_text(doc)
    with pytest.raises(ValueError):
        load_checkpoint(str(g))
