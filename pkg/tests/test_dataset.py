import json

import pytest

from seqleak import Dataset, DatasetError, ingest_dataset


def write_jsonl(path, rows):
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


class TestIngest:
    def test_valid_file(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_jsonl(p, [
            {"id": "a", "prefix": [0, 1], "suffix": [2], "tags": {"k": 1}},
            {"id": "b", "prefix": [3], "suffix": [4, 5]},
        ])
        ds = ingest_dataset(p)
        assert len(ds) == 2
        assert ds.records[0].id == "a"
        assert ds.records[0].prefix == (0, 1)
        assert ds.records[0].tags == {"k": 1}
        assert ds.records[1].suffix == (4, 5)
        assert ds.records[1].tags == {}
        assert ds.source == str(p)

    def test_blank_lines_skipped(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text('{"id": "a", "prefix": [0], "suffix": [1]}\n\n\n')
        assert len(ingest_dataset(p)) == 1

    def test_invalid_json_names_line(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text('{"id": "a", "prefix": [0], "suffix": [1]}\n{oops\n')
        with pytest.raises(DatasetError, match="line 2"):
            ingest_dataset(p)

    def test_missing_field_names_line_and_key(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_jsonl(p, [{"id": "a", "prefix": [0]}])
        with pytest.raises(DatasetError, match="line 1.*suffix"):
            ingest_dataset(p)

    def test_empty_token_list_rejected(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_jsonl(p, [{"id": "a", "prefix": [], "suffix": [1]}])
        with pytest.raises(DatasetError, match="non-empty"):
            ingest_dataset(p)

    def test_non_integer_token_rejected(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_jsonl(p, [{"id": "a", "prefix": [0.5], "suffix": [1]}])
        with pytest.raises(DatasetError, match="non-token"):
            ingest_dataset(p)
        write_jsonl(p, [{"id": "a", "prefix": [True], "suffix": [1]}])
        with pytest.raises(DatasetError, match="non-token"):
            ingest_dataset(p)
        write_jsonl(p, [{"id": "a", "prefix": [-1], "suffix": [1]}])
        with pytest.raises(DatasetError, match="non-token"):
            ingest_dataset(p)

    def test_duplicate_id_names_both_lines(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_jsonl(p, [
            {"id": "a", "prefix": [0], "suffix": [1]},
            {"id": "a", "prefix": [2], "suffix": [3]},
        ])
        with pytest.raises(DatasetError, match="line 2.*first seen on line 1"):
            ingest_dataset(p)

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text("")
        with pytest.raises(DatasetError, match="empty"):
            ingest_dataset(p)

    def test_bad_tags_rejected(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_jsonl(p, [{"id": "a", "prefix": [0], "suffix": [1], "tags": [1]}])
        with pytest.raises(DatasetError, match="tags"):
            ingest_dataset(p)

    def test_toy_dataset_loads(self, toy_paths):
        ds = ingest_dataset(toy_paths["records"])
        assert len(ds) == 4
        assert {r.id for r in ds.records} == {"toy-a", "toy-b", "toy-c", "toy-d"}


class TestVocabValidation:
    def test_in_range_passes_and_remembers(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_jsonl(p, [{"id": "a", "prefix": [0, 3], "suffix": [2]}])
        ds = ingest_dataset(p)
        ds.validate_vocab(4)
        assert ds.vocab_size == 4

    def test_out_of_range_names_record_and_position(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_jsonl(p, [{"id": "a", "prefix": [0], "suffix": [1, 9]}])
        ds = ingest_dataset(p)
        with pytest.raises(DatasetError, match="record 'a'.*suffix token at position 2"):
            ds.validate_vocab(4)
