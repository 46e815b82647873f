import json

import jsonschema
import pytest

from duetml import cli
from duetml import data_toolkit as dt
from duetml.datasets import asset_path, asset_text, generate_assets
from duetml.fixtures import generate_fixtures
from duetml.llm_backend import write_fixture


def run_cli(*argv):
    return cli.main(list(argv))


def reg_args(out):
    return [
        "run",
        "--train", str(asset_path("reg_train.csv")),
        "--test", str(asset_path("reg_test.csv")),
        "--target", "y",
        "--backend", f"scripted:{asset_path('reg_fixture.jsonl')}",
        "--out", str(out),
    ]


class TestAssets:
    def test_datasets_regenerate_identically(self):
        for name, text in generate_assets().items():
            assert asset_text(name) == text

    def test_fixtures_regenerate_identically(self, tmp_path):
        from duetml.fixtures import write_fixtures

        write_fixtures(tmp_path)
        for name in ("reg_fixture.jsonl", "clf_fixture.jsonl"):
            assert (tmp_path / name).read_text() == asset_text(name)

    def test_dataset_shapes(self):
        train = dt.read_csv(asset_text("clf_train.csv"), "train")
        assert train.n_rows == 400
        assert train.column_names() == ["f1", "f2", "n1", "n2", "n3", "label"]
        assert train.column("n1").missing_count() == 12
        assert set(train.column("label").present()) == {0.0, 1.0}


class TestRun:
    def test_exit_zero_and_outputs(self, tmp_path, capsys):
        assert run_cli(*reg_args(tmp_path / "out")) == 0
        out = capsys.readouterr().out
        assert "finalized model: m_final" in out
        submission = (tmp_path / "out" / "artifacts" / "submission.csv")
        lines = submission.read_text().strip().splitlines()
        assert lines[0] == "id,prediction"
        assert len(lines) - 1 == 100  # one prediction per test row
        assert (tmp_path / "out" / "journal.jsonl").exists()
        assert json.loads(
            (tmp_path / "out" / "report.json").read_text()
        )["model"] == "m_final"

    def test_journals_byte_identical(self, tmp_path):
        assert run_cli(*reg_args(tmp_path / "a")) == 0
        assert run_cli(*reg_args(tmp_path / "b")) == 0
        assert ((tmp_path / "a" / "journal.jsonl").read_bytes()
                == (tmp_path / "b" / "journal.jsonl").read_bytes())

    def test_missing_target_column(self, tmp_path, capsys):
        argv = reg_args(tmp_path / "out")
        argv[argv.index("--target") + 1] = "price"
        assert run_cli(*argv) == 1
        assert "price" in capsys.readouterr().err
        # the journal is still left on disk
        assert (tmp_path / "out" / "journal.jsonl").exists()


class TestReplay:
    def test_valid_journal(self, tmp_path, capsys):
        run_cli(*reg_args(tmp_path / "out"))
        assert run_cli("replay", str(tmp_path / "out" / "journal.jsonl")) == 0
        out = capsys.readouterr().out
        assert "stage: Tuned" in out
        assert "chosen model: m_final" in out

    def test_gap_reported(self, tmp_path, capsys):
        run_cli(*reg_args(tmp_path / "out"))
        path = tmp_path / "out" / "journal.jsonl"
        lines = path.read_text().splitlines()
        del lines[2]
        broken = tmp_path / "broken.jsonl"
        broken.write_text("\n".join(lines) + "\n")
        assert run_cli("replay", str(broken)) == 1
        assert "first missing seq is 3" in capsys.readouterr().err

    def test_empty_journal(self, tmp_path, capsys):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        assert run_cli("replay", str(empty)) == 1
        assert "E_EMPTY" in capsys.readouterr().err


class TestChat:
    def test_repl_flow(self, tmp_path, capsys, monkeypatch):
        fixture = tmp_path / "fixture.jsonl"
        from duetml.llm_backend import FixtureEntry

        write_fixture(fixture, [FixtureEntry(
            "Final Answer: The table has 400 rows.")])
        lines = iter([
            ":report",
            f":attach train {asset_path('reg_train.csv')}",
            "Explore the dataset",
            ":events 3",
            ":quit",
        ])
        monkeypatch.setattr("builtins.input", lambda prompt="": next(lines))
        assert run_cli("chat", "--session-dir", str(tmp_path / "chat"),
                       "--backend", f"scripted:{fixture}") == 0
        out = capsys.readouterr().out
        assert '"stage": "Init"' in out  # :report before data
        assert "attached train: 400 rows" in out
        assert "The table has 400 rows." in out
        assert '"type": "user_reply"' in out  # :events output

    def test_eof_exits_cleanly(self, tmp_path, monkeypatch):
        def raise_eof(prompt=""):
            raise EOFError

        fixture = tmp_path / "fixture.jsonl"
        fixture.write_text("")
        monkeypatch.setattr("builtins.input", raise_eof)
        assert run_cli("chat", "--session-dir", str(tmp_path / "chat"),
                       "--backend", f"scripted:{fixture}") == 0


class TestRankPercentile:
    def test_beats_all(self):
        pool = [{"score": 2.0}, {"score": 3.0}, {"score": 4.0},
                {"score": 5.0}]
        assert cli.rank_percentile(1.0, pool, "minimize") == 1.0

    def test_worst(self):
        pool = [{"score": 2.0}, {"score": 3.0}]
        assert cli.rank_percentile(9.0, pool, "minimize") == 0.0

    def test_three_of_four(self):
        pool = [{"score": 0.9}, {"score": 0.7}, {"score": 0.6},
                {"error": "E_X: boom"}]
        assert cli.rank_percentile(0.8, pool, "maximize") == 0.75

    def test_tie_is_not_beaten(self):
        pool = [{"score": 1.0}]
        assert cli.rank_percentile(1.0, pool, "minimize") == 0.0

    def test_agent_failure_is_zero(self):
        assert cli.rank_percentile(None, [{"score": 1.0}], "minimize") == 0.0


class TestDefaultProcess:
    def test_impute_and_onehot(self):
        table = dt.read_csv(
            "num,cat,y\n" + "\n".join(
                f"{i if i != 2 else ''},{'ab'[i % 2]},{i % 2}"
                for i in range(10)) + "\n",
            "train")
        out = cli.default_process(table, "y")
        assert out.column("num").missing_count() == 0
        assert not out.has_column("cat")
        assert out.has_column("cat=a") and out.has_column("cat=b")


@pytest.fixture(scope="module")
def bench_result(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench") / "result.json"
    code = cli.main(["bench", "--suite",
                     str(asset_path("bench_suite.json")),
                     "--out", str(out)])
    return code, out


class TestBench:
    def test_exit_and_schema(self, bench_result):
        code, out = bench_result
        assert code == 0
        data = json.loads(out.read_text())
        schema = json.loads(asset_text("bench_schema.json"))
        jsonschema.validate(data, schema)

    def test_rank_percentiles(self, bench_result):
        _, out = bench_result
        data = json.loads(out.read_text())
        ranks = {d["name"]: d["rank_percentile"] for d in data["datasets"]}
        assert ranks["synthetic_regression"] >= 0.75
        assert ranks["synthetic_classification"] >= 0.75
        assert data["summary"]["mean_rank_percentile"] >= 0.75

    def test_figure_rendered(self, bench_result):
        _, out = bench_result
        png = out.with_suffix(".png")
        assert png.is_file()
        assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_pool_note_present(self, bench_result):
        _, out = bench_result
        data = json.loads(out.read_text())
        assert "not comparable" in data["pool_note"]
        pool = data["datasets"][0]["pool"]
        assert [p["family"] for p in pool] == ["baseline", "linear",
                                               "logistic", "tree"]
