import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mcrnorm.csvio import format_matrix_csv, parse_matrix_csv, write_matrix_csv
from mcrnorm.schemas import SCHEMA_NAMES, SchemaError, load_schema, validate_document

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=80, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 6), st.integers(1, 5)), elements=finite))
def test_csv_round_trip_is_lossless(M):
    back, names = parse_matrix_csv(format_matrix_csv(M))
    assert names is None and np.array_equal(back, M)


def test_header_detection():
    M, names = parse_matrix_csv("a,b\n1,2\n3,4\n")
    assert names == ["a", "b"] and M.shape == (2, 2)
    with pytest.raises(ValueError):
        parse_matrix_csv("1,2\n3\n")
    with pytest.raises(ValueError):
        parse_matrix_csv("")


def test_atomic_write_leaves_no_temp_files(tmp_path):
    write_matrix_csv(tmp_path / "m.csv", np.eye(2), ["x", "y"])
    assert [p.name for p in tmp_path.iterdir()] == ["m.csv"]


def test_packaged_schemas_match_docs_copies():
    docs = Path(__file__).resolve().parents[1] / "docs" / "schemas"
    for name in SCHEMA_NAMES:
        assert json.loads((docs / f"{name}.json").read_text()) == load_schema(name)


def test_schema_error_reports_path():
    doc = {"species": ["A"], "reactions": [{"reactants": {"A": 1}, "products": {}, "k": "fast"}], "y0": [1]}
    with pytest.raises(SchemaError) as info:
        validate_document(doc, "reaction_system")
    assert info.value.path == "$.reactions[0].k"
    with pytest.raises(ValueError):
        load_schema("unknown")
