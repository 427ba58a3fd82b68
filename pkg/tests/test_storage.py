"""
Tests for corpus files, model documents, report tables and run manifests.
"""
import hashlib

import numpy as np
import orjson
import pytest

from src.config.exceptions import DataError, ErrorCode, SystemError
from src.models.estimation import EstimationConfig
from src.pruning.context_model import complete_model, predict
from src.pruning.prune_tree import fit_model
from src.storage.corpus_store import format_corpus, parse_corpus, parse_corpus_text, write_corpus
from src.storage.manifest import MANIFEST_NAME, RunManifest, file_digest
from src.storage.model_store import (
    load_model,
    model_from_dict,
    model_to_dict,
    model_to_dot,
    read_json,
    save_model,
    study_table,
    write_json,
    write_report_table,
)
from src.truth.study import StudyReport
from tests.conftest import make_model


# ============================================================================
# Corpus files
# ============================================================================

@pytest.mark.unit
class TestCorpusFiles:
    """Header, group lines and error locations"""

    def test_two_groups_quinary(self):
        text = "# two agents\nalphabet: 0 1 2 3 4\n0 1 4 4 2\n\n3 3 0 1\n"
        sample = parse_corpus_text(text)
        assert sample.alphabet.size == 5
        assert sample.group_count == 2
        assert sample.sequences[0].tolist() == [0, 1, 4, 4, 2]
        assert sample.lengths == (5, 4)

    def test_comments_between_groups(self):
        sample = parse_corpus_text("alphabet: a b\n# first\na b a\n  # second\nb b\n")
        assert sample.group_count == 2
        assert sample.sequences[1].tolist() == [1, 1]

    def test_unknown_token_location(self):
        with pytest.raises(DataError) as exc_info:
            parse_corpus_text("alphabet: 0 1\n0 1 2\n", source="c.txt")
        error = exc_info.value
        assert error.error_code == ErrorCode.CORPUS_UNKNOWN_TOKEN
        assert error.context["line"] == 2
        assert error.context["column"] == 5
        assert "c.txt:2:5" in error.message

    def test_missing_header(self):
        with pytest.raises(DataError) as exc_info:
            parse_corpus_text("0 1 0 1\n")
        assert exc_info.value.error_code == ErrorCode.CORPUS_HEADER_INVALID

    def test_empty_body(self):
        with pytest.raises(DataError) as exc_info:
            parse_corpus_text("alphabet: 0 1\n# nothing else\n")
        assert exc_info.value.error_code == ErrorCode.CORPUS_EMPTY

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError) as exc_info:
            parse_corpus(tmp_path / "absent.txt")
        assert exc_info.value.error_code == ErrorCode.CORPUS_NOT_FOUND

    def test_written_corpus_reads_back(self, random_sample, tmp_path):
        path = write_corpus(random_sample, tmp_path / "out" / "corpus.txt", comment="seed 12345")
        loaded = parse_corpus(path)
        assert path.read_text(encoding="utf-8").startswith("# seed 12345\nalphabet: 0 1\n")
        for original, copy in zip(random_sample.sequences, loaded.sequences):
            assert np.array_equal(original, copy)

    def test_fixture_corpus(self, periodic_corpus):
        sample = parse_corpus(periodic_corpus)
        assert sample.n == 1000
        assert format_corpus(sample).count("\n") == 2


# ============================================================================
# Model documents
# ============================================================================

@pytest.mark.unit
class TestModelFiles:
    """JSON model documents and Graphviz output"""

    def test_saved_model_predicts_identically(self, random_sample, tmp_path, rng):
        model = complete_model(fit_model(random_sample, EstimationConfig(c=0.3), max_depth=4).model)
        path = save_model(model, tmp_path / "model.json")
        loaded = load_model(path)
        assert loaded.shape.nodes == model.shape.nodes
        assert loaded.config == model.config
        assert loaded.completed and loaded.synthetic == model.synthetic
        for _ in range(20):
            past = rng.integers(0, 2, size=6).tolist()
            for group in range(model.group_count):
                assert np.array_equal(predict(loaded, past, group), predict(model, past, group))

    def test_document_layout(self, periodic_sample):
        data = model_to_dict(fit_model(periodic_sample, EstimationConfig()).model)
        assert data["format"] == "grouptree-model/1"
        assert [node["context"] for node in data["nodes"]] == ["e", "0", "1"]
        assert data["nodes"][1]["probabilities"] == [[0.0, 1.0]]
        assert data["config"]["c"] == pytest.approx(1.01)

    def test_document_round_trip_through_dict(self, periodic_sample):
        model = fit_model(periodic_sample, EstimationConfig()).model
        again = model_from_dict(orjson.loads(orjson.dumps(model_to_dict(model), option=orjson.OPT_SERIALIZE_NUMPY)))
        assert again.shape.nodes == model.shape.nodes
        assert again.lengths == model.lengths

    def test_wrong_format(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_bytes(orjson.dumps({"format": "something-else"}))
        with pytest.raises(DataError) as exc_info:
            load_model(path)
        assert exc_info.value.error_code == ErrorCode.MODEL_FILE_INVALID

    def test_malformed_documents(self, tmp_path):
        broken = tmp_path / "broken.json"
        broken.write_text("{not json", encoding="utf-8")
        with pytest.raises(DataError):
            read_json(broken)
        with pytest.raises(DataError):
            load_model(tmp_path / "missing.json")
        with pytest.raises(DataError) as exc_info:
            model_from_dict({"format": "grouptree-model/1", "alphabet": ["0", "1"]})
        assert exc_info.value.error_code == ErrorCode.MODEL_FILE_INVALID

    def test_dot_marks_synthetic_leaves(self):
        model = make_model(
            [(), (0,), (1,), (0, 0)],
            {(0,): [[0.2, 0.8]], (1,): [[0.6, 0.4]], (0, 0): [[0.9, 0.1]]},
        )
        dot = model_to_dot(complete_model(model))
        assert dot.startswith("digraph context_tree {")
        assert dot.count("style=dashed") == 1
        assert "g1: (0.900, 0.100)" in dot
        assert dot.count("->") == 4


# ============================================================================
# Reports and manifests
# ============================================================================

@pytest.fixture
def report():
    return StudyReport(
        config={"n": 100},
        tracked=["0", "e"],
        frequencies={"0": 0.5, "e": 1.0},
        extra_mean=0.25,
        others_mean=0.0,
        good_frequency=1.0,
        good=[True, True],
        theorem_violations={},
        l2_fallback=False,
        replication_seconds=[0.1, 0.1],
    )


@pytest.mark.unit
class TestReports:
    """Selection tables and run manifests"""

    def test_study_table_rows(self, report):
        lines = study_table(report).splitlines()
        assert lines[0].split() == ["node", "frequency"]
        assert [line.split()[0] for line in lines[2:]] == ["0", "e", "others", "extra", "good"]
        assert lines[2].split()[1] == "0.50"

    def test_report_table_file(self, report, tmp_path):
        path = write_report_table(report, tmp_path / "tables" / "study.txt")
        assert "extra" in path.read_text(encoding="utf-8")

    def test_manifest(self, periodic_corpus, tmp_path):
        manifest = RunManifest(command="fit", config={"c": 1.01}, seed=3)
        manifest.add_input(periodic_corpus)
        manifest.add_output(tmp_path / "model.json")
        path = manifest.write(tmp_path)
        assert path.name == MANIFEST_NAME
        data = read_json(path)
        expected = hashlib.sha256(periodic_corpus.read_bytes()).hexdigest()
        assert data["inputs"] == {str(periodic_corpus): expected}
        assert file_digest(periodic_corpus) == expected
        assert data["command"] == "fit"
        assert data["seed"] == 3
        assert "numpy" in data["versions"]

    def test_write_failure_is_structured(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("not a directory", encoding="utf-8")
        with pytest.raises(SystemError) as exc_info:
            write_json({"a": 1}, blocker / "out.json")
        error = exc_info.value
        assert error.error_code == ErrorCode.OUTPUT_WRITE_FAILED
        assert error.context["function"] == "write_json"
        assert error.get_exit_code() == 2
