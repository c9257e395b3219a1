import os

import numpy as np
import pytest

from lakemerge.core import (
    NULL,
    Table,
    Value,
    canonical_decimal,
    mask_vector,
    outer_union,
    parse_cell,
    read_csv,
    write_csv,
)


def test_parse_cell_null_forms():
    assert parse_cell("") is NULL or parse_cell("").is_null
    for form in ("NULL", "null", "Null", "nUlL"):
        assert parse_cell(form).is_null


def test_parse_cell_numbers_canonicalize():
    assert parse_cell("1.50") == Value("number", "1.5")
    assert parse_cell("+7") == Value("number", "7")
    assert parse_cell("-0.0") == Value("number", "0")
    assert parse_cell("1e3") == Value("number", "1000")
    assert parse_cell(".5") == Value("number", "0.5")
    assert parse_cell("01") == Value("number", "1")


def test_parse_cell_text_fallthrough():
    # things Decimal() would happily parse but a CSV reader should not
    for raw in ("Infinity", "NaN", "1_0", " 1", "1 ", "1.2.3", "4te", "-"):
        assert parse_cell(raw).is_text, raw


def test_parse_cell_total_and_deterministic():
    rng = np.random.default_rng(7)
    alphabet = list("abcXYZ0123456789.,+-eE _")
    for _ in range(500):
        s = "".join(rng.choice(alphabet, size=rng.integers(0, 12)))
        v1, v2 = parse_cell(s), parse_cell(s)
        assert v1 == v2
        assert v1.kind in ("null", "text", "number")


def test_canonical_decimal_round_trips():
    from decimal import Decimal

    for raw in ("1.50", "0007", "-3.14000", "2e-4", "123456789.000", "0.000"):
        canon = canonical_decimal(raw)
        assert canon is not None
        assert Decimal(canon) == Decimal(raw)
        # canonical form is a fixpoint
        assert canonical_decimal(canon) == canon


def test_number_equality_across_spellings():
    assert parse_cell("1997") == parse_cell("1997.0") == parse_cell("01997")


def test_mask_vector_bits():
    cells = (Value.text_of("a"), NULL, Value.number_of("2"))
    assert mask_vector(cells).bits == (1, 0, 1)


def test_table_invariants():
    with pytest.raises(ValueError):
        Table(("a", "a"), (), ())
    with pytest.raises(ValueError):
        Table(("a", "b"), ((NULL,),), (0,))
    with pytest.raises(ValueError):
        Table(("a",), ((NULL,),), ())


def test_outer_union_schema_and_provenance():
    t1 = Table(("a", "b"), ((Value.text_of("x"), Value.text_of("y")),), (0,))
    t2 = Table(("b", "c"), ((Value.text_of("p"), Value.text_of("q")),), (0,))
    merged = outer_union([t1, t2])
    assert merged.attributes == ("a", "b", "c")
    assert merged.rows[0] == (Value.text_of("x"), Value.text_of("y"), NULL)
    assert merged.rows[1] == (NULL, Value.text_of("p"), Value.text_of("q"))
    assert merged.provenance == (0, 1)
    assert [r.row_id for r in merged.iter_rows()] == [0, 1]


def test_outer_union_is_associative_on_schemas():
    t1 = Table(("a",), (), ())
    t2 = Table(("b", "a"), (), ())
    t3 = Table(("c",), (), ())
    assert outer_union([outer_union([t1, t2]), t3]).attributes == outer_union(
        [t1, t2, t3]
    ).attributes


def test_csv_round_trip(tmp_path):
    table = Table(
        ("name", "year", "note"),
        (
            (Value.text_of("alpha beta"), Value.number_of("1990"), NULL),
            (NULL, Value.number_of("2.50"), Value.text_of("x,y\nz")),
        ),
        (0, 0),
    )
    path = os.path.join(tmp_path, "t.csv")
    write_csv(table, path)
    back = read_csv(path)
    assert back.attributes == table.attributes
    assert back.rows == table.rows
    assert back.provenance == (0, 0)


def test_read_csv_rejects_ragged(tmp_path):
    path = os.path.join(tmp_path, "bad.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("a,b\n1\n")
    with pytest.raises(ValueError):
        read_csv(path)


def test_drop_attributes():
    t = Table(
        ("a", "_entity", "b"),
        ((Value.text_of("x"), Value.number_of("3"), NULL),),
        (0,),
    )
    d = t.drop_attributes(["_entity"])
    assert d.attributes == ("a", "b")
    assert d.rows == ((Value.text_of("x"), NULL),)
