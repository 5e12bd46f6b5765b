"""JSONL dataset ingestion with line-precise diagnostics.

One record per line: {"id": str, "prefix": [ids], "suffix": [ids],
"tags": {...}}.  Token ids are already integers; tokenization happened
wherever the dataset was prepared.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .metrics import SequenceRecord

__all__ = ["Dataset", "DatasetError", "ingest_dataset"]


class DatasetError(Exception):
    """Malformed or inconsistent dataset input."""


@dataclass
class Dataset:
    records: tuple[SequenceRecord, ...]
    source: str
    vocab_size: int | None = None  # set once a model declares V

    def __len__(self) -> int:
        return len(self.records)

    def validate_vocab(self, vocab_size: int) -> None:
        """Check every token id against the model's vocab; remembers V on success."""
        for rec in self.records:
            for name, toks in (("prefix", rec.prefix), ("suffix", rec.suffix)):
                for pos, tok in enumerate(toks):
                    if not (0 <= tok < vocab_size):
                        raise DatasetError(
                            f"record {rec.id!r}: {name} token at position {pos + 1} "
                            f"is {tok}, outside vocab of size {vocab_size}")
        self.vocab_size = vocab_size


def _field(obj: dict, key: str, lineno: int):
    if key not in obj:
        raise DatasetError(f"line {lineno}: missing field {key!r}")
    return obj[key]


def _token_list(value, key: str, lineno: int) -> tuple[int, ...]:
    if not isinstance(value, list) or not value:
        raise DatasetError(f"line {lineno}: {key!r} must be a non-empty array of token ids")
    for t in value:
        if not isinstance(t, int) or isinstance(t, bool) or t < 0:
            raise DatasetError(f"line {lineno}: {key!r} contains a non-token value {t!r}")
    return tuple(value)


def ingest_dataset(path) -> Dataset:
    """Parse and validate a JSONL dataset; failures name the offending line."""
    records = []
    seen: dict[str, int] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"line {lineno}: invalid JSON ({e.msg})") from e
            if not isinstance(obj, dict):
                raise DatasetError(f"line {lineno}: record must be a JSON object")
            rid = _field(obj, "id", lineno)
            if not isinstance(rid, str) or not rid:
                raise DatasetError(f"line {lineno}: 'id' must be a non-empty string")
            if rid in seen:
                raise DatasetError(
                    f"line {lineno}: duplicate record id {rid!r} (first seen on line {seen[rid]})")
            seen[rid] = lineno
            prefix = _token_list(_field(obj, "prefix", lineno), "prefix", lineno)
            suffix = _token_list(_field(obj, "suffix", lineno), "suffix", lineno)
            tags = obj.get("tags", {})
            if not isinstance(tags, dict):
                raise DatasetError(f"line {lineno}: 'tags' must be an object")
            records.append(SequenceRecord(id=rid, prefix=prefix, suffix=suffix, tags=tags))
    if not records:
        raise DatasetError(f"{path}: empty dataset")
    return Dataset(records=tuple(records), source=str(path))
