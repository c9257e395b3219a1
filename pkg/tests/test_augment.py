import numpy as np
import pytest

from lakemerge.augment import (
    CHAR_DIGIT_KINDS,
    CHAR_TEXT_KINDS,
    DegenerateTuple,
    InapplicableKind,
    InsufficientRows,
    NoSynonym,
    PerturbKind,
    SynonymDict,
    SynonymParaphraser,
    applicable_kinds,
    build_train_pairs,
    gen_positives,
    perturb_attribute,
    perturb_char,
    perturb_word,
    sample_negatives,
)
from lakemerge.core import NULL, Row, Table, Value


def levenshtein(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[-1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def rng(seed=0):
    return np.random.default_rng(seed)


SYN = SynonymDict.default()
PARA = SynonymParaphraser(SYN)


def test_char_swap_requires_two_distinct_adjacent():
    with pytest.raises(InapplicableKind):
        perturb_char(Value.text_of("A"), PerturbKind.CHAR_SWAP, rng())
    with pytest.raises(InapplicableKind):
        perturb_char(Value.text_of("aaa"), PerturbKind.CHAR_SWAP, rng())
    out = perturb_char(Value.text_of("ab"), PerturbKind.CHAR_SWAP, rng())
    assert out.text == "ba"


def test_digit_swap_example():
    out = perturb_char(Value.number_of("1997"), PerturbKind.DIGIT_SWAP, rng(3))
    assert out.is_number
    assert out.text in ("9197", "1979")  # the two unequal adjacent digit pairs


def test_char_edits_stay_within_levenshtein_two():
    r = rng(11)
    texts = ["United States", "Titanic", "a b c", "Bo", "xyzzy", "Hello  World"]
    numbers = ["1997", "3.14", "-250", "1002", "7", "0.5"]
    for _ in range(300):
        for raw in texts:
            v = Value.text_of(raw)
            kinds = [k for k in CHAR_TEXT_KINDS]
            k = kinds[int(r.integers(len(kinds)))]
            try:
                out = perturb_char(v, k, r)
            except InapplicableKind:
                continue
            assert out.text != raw
            assert levenshtein(raw, out.text) <= 2
        for raw in numbers:
            v = Value.number_of(raw)
            kinds = [k for k in CHAR_DIGIT_KINDS]
            k = kinds[int(r.integers(len(kinds)))]
            try:
                out = perturb_char(v, k, r)
            except InapplicableKind:
                continue
            assert out.is_number and out.text != v.text
            assert levenshtein(v.text, out.text) <= 2


def test_digit_edits_keep_numbers_valid():
    r = rng(5)
    for _ in range(200):
        v = Value.number_of(str(int(r.integers(1, 100000))))
        for k in CHAR_DIGIT_KINDS:
            try:
                out = perturb_char(v, k, r)
            except InapplicableKind:
                continue
            # result reparses to the same canonical representation
            assert Value.number_of(out.text) == out


def test_nearby_char_preserves_case():
    out = perturb_char(Value.text_of("T"), PerturbKind.NEARBY_CHAR, rng(1))
    assert out.text.isupper() and out.text != "T"


def test_word_removal():
    out = perturb_word(Value.text_of("James Cameron"), PerturbKind.WORD_REMOVAL, SYN, rng(0))
    assert out.text in ("James", "Cameron")
    with pytest.raises(InapplicableKind):
        perturb_word(Value.text_of("James"), PerturbKind.WORD_REMOVAL, SYN, rng())


def test_word_substitution_uses_dictionary():
    out = perturb_word(Value.text_of("big ship"), PerturbKind.WORD_SUBSTITUTION, SYN, rng(0))
    words = out.text.split()
    assert len(words) == 2
    assert words[0] in ("large", "huge", "big")
    assert words[1] in ("vessel", "boat", "ship")
    assert out.text != "big ship"
    with pytest.raises(NoSynonym):
        perturb_word(Value.text_of("qqq zzz"), PerturbKind.WORD_SUBSTITUTION, SYN, rng())


def test_word_substitution_preserves_case():
    out = perturb_word(Value.text_of("Red"), PerturbKind.WORD_SUBSTITUTION, SYN, rng(0))
    assert out.text[0].isupper()
    assert out.text.lower() in ("crimson", "scarlet")


def test_word_swap():
    out = perturb_word(Value.text_of("James Cameron"), PerturbKind.WORD_SWAP, SYN, rng())
    assert out.text == "Cameron James"
    with pytest.raises(InapplicableKind):
        perturb_word(Value.text_of("a a"), PerturbKind.WORD_SWAP, SYN, rng())


def test_attr_removal_and_substitution():
    row = Row(0, (Value.text_of("u.s."), Value.number_of("1997")))
    out = perturb_attribute(row, PerturbKind.ATTR_REMOVAL, PARA, rng(0))
    assert sum(c.is_null for c in out.cells) == 1
    out = perturb_attribute(row, PerturbKind.ATTR_SUBSTITUTION, PARA, rng(0))
    assert out.cells[1] == row.cells[1]  # numeric cell untouched
    assert out.cells[0].is_text
    assert out.cells[0].text in ("united states", "usa")


def test_attr_kinds_on_all_null_raise():
    from lakemerge.augment import NoEligibleAttribute

    row = Row(0, (NULL, NULL))
    with pytest.raises(NoEligibleAttribute):
        perturb_attribute(row, PerturbKind.ATTR_REMOVAL, PARA, rng())


def test_applicable_kinds_numeric_only_tuple():
    kinds = applicable_kinds((Value.number_of("42"), NULL), SYN)
    assert PerturbKind.ATTR_REMOVAL in kinds
    assert PerturbKind.ATTR_SUBSTITUTION not in kinds
    assert all(k not in CHAR_TEXT_KINDS for k in kinds)
    assert PerturbKind.EXTRA_DIGIT in kinds


def test_gen_positives_counts_and_single_cell_diff():
    row = Row(
        3,
        (
            Value.text_of("United States"),
            Value.number_of("1997"),
            Value.text_of("red"),
            NULL,
        ),
    )
    for seed in range(20):
        got = gen_positives(row, 6, PARA, rng(seed))
        assert len(got) == 6
        for perturbed, kind in got:
            assert perturbed.row_id == row.row_id
            diffs = [
                i
                for i, (a, b) in enumerate(zip(row.cells, perturbed.cells))
                if a != b
            ]
            assert len(diffs) <= 1
            if kind is not PerturbKind.ATTR_SUBSTITUTION:
                assert len(diffs) == 1


def test_gen_positives_degenerate():
    with pytest.raises(DegenerateTuple):
        gen_positives(Row(0, (NULL, NULL)), 1, PARA, rng())


def test_gen_positives_single_numeric_cell():
    row = Row(0, (Value.number_of("7"),))
    got = gen_positives(row, 8, PARA, rng(2))
    for perturbed, kind in got:
        assert kind in CHAR_DIGIT_KINDS or kind is PerturbKind.ATTR_REMOVAL


def test_sample_negatives_distinct_and_excludes_anchor():
    t = Table(("a",), tuple((Value.number_of(str(i)),) for i in range(30)), tuple([0] * 30))
    for seed in range(10):
        ids = sample_negatives(t.row(4), t, 20, rng(seed))
        assert len(ids) == 20
        assert len(set(ids)) == 20
        assert 4 not in ids
    with pytest.raises(InsufficientRows):
        sample_negatives(t.row(0), t, 30, rng())


def test_sample_negatives_forced_outcome():
    t = Table(("a",), ((Value.number_of("1"),), (Value.number_of("2"),)), (0, 0))
    assert sample_negatives(t.row(0), t, 1, rng()) == [1]


def test_build_train_pairs_deterministic():
    cells = [
        (Value.text_of("red oak"), Value.number_of("10")),
        (Value.text_of("blue glass"), Value.number_of("20")),
        (NULL, NULL),
        (Value.text_of("green wool"), Value.number_of("30")),
        (Value.text_of("white marble"), NULL),
    ]
    t = Table(("x", "y"), tuple(cells), tuple([0] * len(cells)))
    first, skipped1 = build_train_pairs(t, 3, 2, PARA, rng(42))
    second, skipped2 = build_train_pairs(t, 3, 2, PARA, rng(42))
    assert first == second
    assert skipped1 == skipped2 == 1
    assert 2 not in first.anchors
    assert all(len(p) == 3 for p in first.positives)
    assert all(len(n) == 2 for n in first.negatives)


def test_paraphrase_never_empties():
    r = rng(0)
    for text in ("red", "zzz", "big red house", "x"):
        assert SynonymParaphraser(SYN).paraphrase(text, r) != ""
