"""Metric tests, anchored by brute-force enumeration oracles."""

import itertools

import numpy as np
import pytest

from lakemerge.bench import ConflictSet, ConflictTruth
from lakemerge.core import NULL, Table, Value
from lakemerge.discover import Partition
from lakemerge.evaluate import (
    F1Report,
    UniverseMismatch,
    build_report,
    exact_match_pairs,
    hungarian,
    pairwise_f1,
    partition_similarity,
    render_text,
    resolution_accuracy,
)
from lakemerge.resolve import ResolvedTuple
from lakemerge.seeds import rng_for


def brute_best_assignment(w: np.ndarray) -> float:
    """Best total over all padded-square permutations, by enumeration."""
    side = max(w.shape)
    padded = np.zeros((side, side))
    padded[: w.shape[0], : w.shape[1]] = w
    return max(
        sum(padded[i, p[i]] for i in range(side))
        for p in itertools.permutations(range(side))
    )


def random_partition(n: int, rng: np.random.Generator) -> Partition:
    labels = rng.integers(0, max(1, n // 2) + 1, size=n)
    groups: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(i)
    return Partition.from_sets(n, [tuple(g) for g in groups.values()])


def test_f1_identity():
    pairs = {(0, 1), (2, 3), (4, 7)}
    rep = pairwise_f1(pairs, pairs)
    assert rep.f1 == rep.precision == rep.recall == 1.0
    assert (rep.tp, rep.fp, rep.fn) == (3, 0, 0)


def test_f1_mixed_counts():
    truth = {(0, i) for i in range(1, 11)}
    pred = {(0, i) for i in range(1, 9)} | {(1, 2), (1, 3)}
    rep = pairwise_f1(pred, truth)
    assert (rep.tp, rep.fp, rep.fn) == (8, 2, 2)
    assert rep.precision == pytest.approx(0.8)
    assert rep.recall == pytest.approx(0.8)
    assert rep.f1 == pytest.approx(0.8)


def test_f1_degenerate_conventions():
    assert pairwise_f1(set(), {(0, 1)}).f1 == 0.0
    assert pairwise_f1({(0, 1)}, set()).f1 == 0.0
    empty = pairwise_f1(set(), set())
    assert empty.f1 == empty.precision == empty.recall == 0.0


def test_f1_rejects_non_canonical_pairs():
    with pytest.raises(ValueError, match="not canonical"):
        pairwise_f1({(3, 1)}, set())
    with pytest.raises(ValueError, match="not canonical"):
        pairwise_f1(set(), {(2, 2)})


def test_hungarian_two_by_two():
    edges = hungarian(np.array([[0.9, 0.1], [0.2, 0.8]]))
    assert edges == ((0, 0), (1, 1))


def test_hungarian_single_row():
    assert hungarian(np.array([[0.1, 0.7, 0.3]])) == ((0, 1),)


def test_hungarian_diagonal_dominance():
    w = np.diag([5.0, 4.0, 3.0]) + 0.1
    assert hungarian(w) == ((0, 0), (1, 1), (2, 2))


def test_hungarian_rejects_bad_weights():
    with pytest.raises(ValueError):
        hungarian(np.array([[1.0, -0.1]]))
    with pytest.raises(ValueError):
        hungarian(np.array([[np.inf, 1.0]]))
    with pytest.raises(ValueError):
        hungarian(np.array([1.0, 2.0]))


def test_hungarian_empty():
    assert hungarian(np.zeros((0, 3))) == ()
    assert hungarian(np.zeros((2, 0))) == ()


def test_hungarian_matches_enumeration():
    rng = rng_for(0, "test-hungarian")
    for _ in range(80):
        n_r = int(rng.integers(1, 8))
        n_s = int(rng.integers(1, 8))
        w = rng.random((n_r, n_s))
        edges = hungarian(w)
        total = sum(w[i, j] for i, j in edges)
        assert abs(total - brute_best_assignment(w)) <= 1e-9
        assert len({i for i, _ in edges}) == len(edges)
        assert len({j for _, j in edges}) == len(edges)


def test_similarity_identical_partitions():
    part = Partition.from_sets(6, [(0, 1, 2), (3, 4), (5,)])
    rep = partition_similarity(part, part)
    assert rep.normalized == 1.0
    assert rep.raw_sum == pytest.approx(3.0)


def test_similarity_split_fixture():
    whole = Partition.from_sets(3, [(0, 1, 2)])
    split = Partition.from_sets(3, [(0, 1), (2,)])
    rep = partition_similarity(whole, split)
    assert rep.raw_sum == pytest.approx(2 / 3)
    assert rep.normalized == pytest.approx(1 / 3)


def test_similarity_singletons_vs_whole():
    singles = Partition.from_sets(4, [(i,) for i in range(4)])
    whole = Partition.from_sets(4, [(0, 1, 2, 3)])
    rep = partition_similarity(singles, whole)
    assert rep.raw_sum == pytest.approx(1 / 4)
    assert rep.normalized == pytest.approx(1 / 16)
    assert len(rep.matching) == 1


def test_similarity_symmetry():
    rng = rng_for(0, "test-similarity-sym")
    for _ in range(30):
        n = int(rng.integers(2, 15))
        a = random_partition(n, rng)
        b = random_partition(n, rng)
        assert partition_similarity(a, b).normalized == pytest.approx(
            partition_similarity(b, a).normalized
        )


def test_similarity_universe_mismatch():
    a = Partition.from_sets(3, [(0, 1, 2)])
    b = Partition.from_sets(4, [(0, 1, 2, 3)])
    with pytest.raises(UniverseMismatch):
        partition_similarity(a, b)


def _resolved(cells) -> ResolvedTuple:
    return ResolvedTuple(cells=tuple(cells), provenance=("unique",) * len(cells))


def test_resolution_accuracy_fixtures():
    t = Value.text_of
    truth = ConflictTruth(
        sets=tuple(
            ConflictSet(set_id=i, target_attr=0, truth="good", rows=((10 + i, 1000),))
            for i in range(4)
        ),
        reliability=((1000, 0.5),),
    )
    all_good = {i: _resolved([t("good")]) for i in range(4)}
    assert resolution_accuracy(all_good, truth) == 1.0
    three = dict(all_good)
    three[2] = _resolved([t("bad")])
    assert resolution_accuracy(three, truth) == 0.75
    empty = ConflictTruth(sets=(), reliability=((1000, 0.5),))
    assert resolution_accuracy({}, empty) == 1.0


def test_resolution_accuracy_null_is_wrong():
    truth = ConflictTruth(
        sets=(ConflictSet(set_id=0, target_attr=0, truth="x", rows=((5, 1000),)),),
        reliability=((1000, 0.5),),
    )
    assert resolution_accuracy({0: _resolved([NULL])}, truth) == 0.0


def test_resolution_accuracy_missing_set():
    truth = ConflictTruth(
        sets=(ConflictSet(set_id=3, target_attr=0, truth="x", rows=((5, 1000),)),),
        reliability=((1000, 0.5),),
    )
    with pytest.raises(ValueError, match="no resolved tuple"):
        resolution_accuracy({}, truth)


def test_exact_match_pairs_fixture():
    t = Value.text_of
    rows = (
        (t("a"), t("b")),
        (t("a"), NULL),     # agrees with 0 on shared attr 0
        (t("a"), t("c")),   # conflicts with 0 on attr 1, pairs with 1
        (NULL, NULL),       # shares nothing
    )
    table = Table(("x", "y"), rows, (0,) * 4)
    assert exact_match_pairs(table) == {(0, 1), (1, 2)}


def test_exact_match_pairs_matches_direct_scan():
    rng = rng_for(0, "test-exact-match")
    for _ in range(10):
        n = int(rng.integers(2, 30))
        rows = []
        for _ in range(n):
            cells = []
            for _ in range(4):
                roll = rng.random()
                if roll < 0.3:
                    cells.append(NULL)
                else:
                    cells.append(Value.text_of(f"v{int(rng.integers(4))}"))
            rows.append(tuple(cells))
        table = Table(("a", "b", "c", "d"), tuple(rows), (0,) * n)
        expected = set()
        for i in range(n):
            for j in range(i + 1, n):
                shared = [
                    (rows[i][a], rows[j][a])
                    for a in range(4)
                    if not rows[i][a].is_null and not rows[j][a].is_null
                ]
                if shared and all(x == y for x, y in shared):
                    expected.add((i, j))
        assert exact_match_pairs(table) == expected


def test_report_json_and_text():
    f1 = F1Report(tp=8, fp=2, fn=2, precision=0.8, recall=0.8, f1=0.8)
    part = Partition.from_sets(3, [(0, 1, 2)])
    sim = partition_similarity(part, part)
    report = build_report(f1, sim, 0.75, config={"seed": 7})
    assert report["accuracy"] == 0.75
    assert report["config"] == {"seed": 7}
    text = render_text(report)
    assert "precision" in text and "0.8000" in text
    assert "similarity" in text and "1.0000" in text
    assert "accuracy" in text and "0.7500" in text
    no_acc = render_text(build_report(f1, sim, None))
    assert "n/a" in no_acc


def test_similarity_report_validation():
    from lakemerge.evaluate import SimilarityReport

    with pytest.raises(ValueError, match="reuses"):
        SimilarityReport(matching=((0, 0, 0.5), (0, 1, 0.5)), raw_sum=1.0, normalized=0.5)
    with pytest.raises(ValueError, match="out of range"):
        SimilarityReport(matching=(), raw_sum=5.0, normalized=2.5)
