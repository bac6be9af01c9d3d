from __future__ import annotations

import json
import subprocess
import sys

import pytest
from click.testing import CliRunner

from scratchplot.cli import main

import e2e_fixture


@pytest.fixture()
def fixture_dir(tmp_path):
    e2e_fixture.write_fixture(tmp_path)
    return tmp_path


def invoke(args, cwd):
    runner = CliRunner()
    result = runner.invoke(
        main, ["--config", str(cwd / "config.yaml"), *args], catch_exceptions=False
    )
    assert result.exit_code == 0, result.output
    return result


class TestGenElements:
    def test_all_kinds(self, fixture_dir):
        result = invoke(
            ["gen-elements", "--kind", "all", "--pool", str(fixture_dir / "pool.jsonl"),
             "--seed", "0"],
            fixture_dir,
        )
        assert "location: wrote" in result.output
        assert (fixture_dir / "pool.jsonl").exists()

    def test_num_override(self, fixture_dir):
        invoke(
            ["gen-elements", "--kind", "genre", "--pool",
             str(fixture_dir / "pool.jsonl"), "--num", "1", "--seed", "3"],
            fixture_dir,
        )
        lines = (fixture_dir / "pool.jsonl").read_text().splitlines()
        # one continuation per each of the three genre descriptions, minus dupes
        assert 1 <= len(lines) <= 3


class TestGenStory:
    def test_story_document_shape(self, fixture_dir):
        pool = fixture_dir / "pool.jsonl"
        invoke(["gen-elements", "--kind", "all", "--pool", str(pool)], fixture_dir)
        out = fixture_dir / "story.jsonl"
        invoke(
            ["gen-story", "--pool", str(pool), "--out", str(out),
             "--bodies", "3", "--endings", "2", "--ranker", "ppl", "--seed", "1",
             "--include-candidates"],
            fixture_dir,
        )
        doc = json.loads(out.read_text().splitlines()[0])
        assert set(doc) >= {"plan", "body", "ending", "scores"}
        assert doc["scores"]["ppl"] > 0
        assert doc["all_candidates"]
        assert {"location", "cast_male", "cast_female", "genre", "theme"} == set(doc["plan"])

    def test_multiple_stories(self, fixture_dir):
        pool = fixture_dir / "pool.jsonl"
        invoke(["gen-elements", "--kind", "all", "--pool", str(pool)], fixture_dir)
        out = fixture_dir / "stories.jsonl"
        invoke(
            ["gen-story", "--pool", str(pool), "--out", str(out), "--count", "3",
             "--seed", "2"],
            fixture_dir,
        )
        assert len(out.read_text().splitlines()) == 3

    def test_bare_story(self, fixture_dir):
        out = fixture_dir / "bare.jsonl"
        invoke(
            ["gen-story", "--pool", str(fixture_dir / "pool.jsonl"), "--out", str(out),
             "--bare", "--seed", "4"],
            fixture_dir,
        )
        doc = json.loads(out.read_text().splitlines()[0])
        assert doc["bare"] is True
        assert doc["body"]


class TestEvalCloze:
    def test_oracle_accuracy(self, fixture_dir, tmp_path):
        # scripted scorer: "good" tokens are likely, "bad" tokens are not
        script = {
            "models": {
                "story-model": {
                    "default": {"good": 0.9, "bad": 0.1},
                }
            }
        }
        (tmp_path / "cloze_script.json").write_text(json.dumps(script))
        (tmp_path / "cloze_config.yaml").write_text(
            e2e_fixture.CONFIG_TEMPLATE.format(
                script_path="cloze_script.json", model="story-model"
            )
        )
        header = ",".join(
            ["InputStoryid", "InputSentence1", "InputSentence2", "InputSentence3",
             "InputSentence4", "RandomFifthSentenceQuiz1",
             "RandomFifthSentenceQuiz2", "AnswerRightEnding"]
        )
        rows = [
            f"id{i},c1.,c2.,c3.,c4.,good good,bad bad,1" for i in range(4)
        ]
        data = tmp_path / "cloze.csv"
        data.write_text(header + "\n" + "\n".join(rows) + "\n")
        runner = CliRunner()
        result = runner.invoke(
            main,
            ["--config", str(tmp_path / "cloze_config.yaml"), "eval-cloze",
             "--data", str(data), "--method", "ppl",
             "--out", str(tmp_path / "judgments.jsonl")],
            catch_exceptions=False,
        )
        assert result.exit_code == 0, result.output
        assert "accuracy: 1.0000" in result.output
        assert len((tmp_path / "judgments.jsonl").read_text().splitlines()) == 4


class TestMetricsCommand:
    def test_report(self, fixture_dir):
        stories = fixture_dir / "stories.jsonl"
        records = [
            {"body": "John met Mira near the sea.", "ending": "They sailed far away."},
            {"text": "Dawn broke over the silent valley floor."},
            {"body": "A storm chased the caravan east.", "ending": "It never caught them."},
        ]
        stories.write_text("\n".join(json.dumps(r) for r in records) + "\n")
        runner = CliRunner()
        result = runner.invoke(
            main, ["metrics", "--stories", str(stories), "--n", "1,2"],
            catch_exceptions=False,
        )
        assert result.exit_code == 0, result.output
        report = json.loads(result.output)
        assert set(report["self_bleu"]) == {"1", "2"} or set(report["self_bleu"]) == {1, 2}
        assert 0.0 <= report["self_bleu"]["1" if "1" in report["self_bleu"] else 1] <= 1.0


class TestConsoleScript:
    def test_installed_entry_point(self, fixture_dir):
        result = subprocess.run(
            [sys.executable, "-m", "scratchplot.cli", "--help"],
            capture_output=True, text=True,
        )
        assert result.returncode == 0
        for command in ("gen-elements", "gen-story", "eval-cloze", "metrics"):
            assert command in result.stdout
