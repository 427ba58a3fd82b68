"""
Tests for the grouptree command line front end and its exit codes.
"""
import pytest

from src.cli import main
from src.storage.corpus_store import parse_corpus
from src.storage.model_store import read_json, save_model
from tests.conftest import make_model


@pytest.fixture
def agents_model_path(tmp_path):
    model = make_model(
        [(), (0,), (1,)],
        {(0,): [[0.7, 0.3], [0.4, 0.6]], (1,): [[0.8, 0.2], [0.8, 0.2]]},
    )
    return save_model(model, tmp_path / "agents" / "model.json")


def write_config(tmp_path, text, name="run.yaml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


@pytest.mark.integration
class TestFitCommand:
    """grouptree fit"""

    def test_periodic_corpus(self, periodic_corpus, tmp_path):
        out = tmp_path / "fit"
        assert main(["fit", str(periodic_corpus), "-o", str(out)]) == 0
        model = read_json(out / "model.json")
        assert [node["context"] for node in model["nodes"]] == ["e", "0", "1"]
        manifest = read_json(out / "manifest.json")
        assert manifest["command"] == "fit"
        assert str(periodic_corpus) in manifest["inputs"]
        assert set(manifest["timings"]) >= {"read", "count", "radii", "prune"}

    def test_dot_output(self, periodic_corpus, tmp_path):
        out = tmp_path / "fit"
        assert main(["fit", str(periodic_corpus), "-o", str(out), "--format", "dot", "--max-depth", "3"]) == 0
        assert (out / "tree.dot").read_text(encoding="utf-8").startswith("digraph")

    def test_table_output_with_json_logs(self, periodic_corpus, tmp_path):
        code = main(["--log-format", "json", "fit", str(periodic_corpus), "-o", str(tmp_path), "-f", "table"])
        assert code == 0

    def test_missing_corpus(self, tmp_path):
        assert main(["fit", str(tmp_path / "absent.txt"), "-o", str(tmp_path)]) == 2

    def test_invalid_config(self, periodic_corpus, tmp_path):
        config = write_config(tmp_path, "fit:\n  frontier: partial\n")
        assert main(["fit", str(periodic_corpus), "-c", config, "-o", str(tmp_path)]) == 1

    def test_inadmissible_exponents(self, periodic_corpus, tmp_path, capsys):
        config = write_config(tmp_path, "k: 2\nr: 3\nm: 2\n")
        assert main(["fit", str(periodic_corpus), "-c", config, "-o", str(tmp_path)]) == 1
        assert "CFG_5003" in capsys.readouterr().err

    def test_missing_config(self, periodic_corpus, tmp_path):
        assert main(["fit", str(periodic_corpus), "-c", str(tmp_path / "absent.yaml")]) == 1

    def test_unknown_option(self, periodic_corpus):
        assert main(["fit", str(periodic_corpus), "--depth", "3"]) == 1


@pytest.mark.integration
class TestSimulateCommand:
    """grouptree simulate"""

    def test_writes_corpus(self, tmp_path):
        assert main(["simulate", "--n", "200", "--groups", "2", "--seed", "1", "-o", str(tmp_path)]) == 0
        sample = parse_corpus(tmp_path / "corpus.txt")
        assert sample.group_count == 2
        assert sample.lengths == (200, 200)
        assert read_json(tmp_path / "manifest.json")["seed"] == 1

    def test_same_seed_same_corpus(self, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--truth", "renewal", "--n", "300", "--seed", "4", "-o", str(first)]) == 0
        assert main(["simulate", "--truth", "renewal", "--n", "300", "--seed", "4", "-o", str(second)]) == 0
        assert (first / "corpus.txt").read_text() == (second / "corpus.txt").read_text()

    def test_population_truth(self, tmp_path):
        assert main(["simulate", "--truth", "depth1_population", "--n", "100", "--groups", "3", "-o", str(tmp_path)]) == 0
        assert parse_corpus(tmp_path / "corpus.txt").group_count == 3

    def test_missing_length(self, tmp_path):
        assert main(["simulate", "-o", str(tmp_path)]) == 1


@pytest.mark.integration
class TestSolverCommands:
    """grouptree dp and grouptree avem"""

    def test_dp(self, agents_model_path, tmp_path):
        config = write_config(
            tmp_path,
            "dp:\n  actions: [rest, work]\n  rewards: [[0.0, 1.0], [1.0, 0.0]]\n  discount: 0.5\n",
        )
        out = tmp_path / "dp"
        assert main(["dp", str(agents_model_path), "-c", config, "-o", str(out)]) == 0
        document = read_json(out / "value_table.json")
        assert set(document["states"]) == {"0", "1"}
        assert document["discount"] == 0.5
        assert document["residual"] <= 1e-9
        assert set(read_json(out / "manifest.json")["timings"]) == {"load", "value_iteration"}

    def test_dp_without_section(self, agents_model_path, tmp_path, capsys):
        assert main(["dp", str(agents_model_path), "-o", str(tmp_path)]) == 1
        assert "CFG_5004" in capsys.readouterr().err

    def test_dp_on_missing_model(self, tmp_path):
        config = write_config(tmp_path, "dp:\n  actions: [a]\n  rewards: [[0.0], [1.0]]\n  discount: 0.5\n")
        assert main(["dp", str(tmp_path / "absent.json"), "-c", config]) == 2

    def test_avem(self, agents_model_path, tmp_path):
        out = tmp_path / "avem"
        code = main(["avem", str(agents_model_path), "--option", "1", "--x", "0", "--y", "1", "-o", str(out)])
        assert code == 0
        effects = read_json(out / "effects.json")
        assert effects["effects"] == pytest.approx([0.1, 0.4])
        assert effects["avem"] == pytest.approx(0.25)
        assert set(read_json(out / "manifest.json")["timings"]) == {"load", "avem"}

    def test_avem_from_config(self, agents_model_path, tmp_path):
        config = write_config(tmp_path, "avem:\n  option: '1'\n  x: '1'\n  y: '0'\n")
        out = tmp_path / "avem"
        assert main(["avem", str(agents_model_path), "-c", config, "-o", str(out)]) == 0
        assert read_json(out / "effects.json")["avem"] == pytest.approx(-0.25)

    def test_avem_missing_fields(self, agents_model_path, tmp_path, capsys):
        assert main(["avem", str(agents_model_path), "--option", "1", "-o", str(tmp_path)]) == 1
        err = capsys.readouterr().err
        assert "CFG_5004" in err
        assert "Missing effect query fields: x, y" in err

    def test_avem_unknown_option_symbol(self, agents_model_path, tmp_path):
        code = main(["avem", str(agents_model_path), "--option", "7", "--x", "0", "--y", "1", "-o", str(tmp_path)])
        assert code == 2


@pytest.mark.integration
class TestStudyCommand:
    """grouptree study"""

    def test_small_study(self, tmp_path):
        config = write_config(tmp_path, "study:\n  max_depth: 4\n  oracle_depth: 2\n")
        out = tmp_path / "study"
        code = main(["study", "-c", config, "--n", "200", "--replications", "2", "--seed", "5", "-o", str(out)])
        assert code == 0
        report = read_json(out / "study.json")
        assert report["frequencies"]["e"] == 1.0
        assert report["config"]["replications"] == 2
        assert "extra" in (out / "study.txt").read_text(encoding="utf-8")
