"""JSON Schema validation of the input documents (reaction systems,
spectrum sets, titration protocols)."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import jsonschema

SCHEMA_NAMES = ("reaction_system", "spectrum_set", "titration")


class SchemaError(ValueError):
    """Input document does not match its schema; ``path`` is the JSON path
    of the offending element."""

    def __init__(self, message: str, path: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    if name not in SCHEMA_NAMES:
        raise ValueError(f"unknown schema {name!r}; choose from {SCHEMA_NAMES}")
    text = resources.files("mcrnorm").joinpath("schema_data").joinpath(f"{name}.json").read_text()
    return json.loads(text)


def _json_path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def validate_document(doc, name: str) -> None:
    """Raise ``SchemaError`` for the first (deepest-path) violation."""
    schema = load_schema(name)
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (-len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        e = errors[0]
        raise SchemaError(e.message, _json_path(e.absolute_path))
