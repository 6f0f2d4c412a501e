"""CLI behavior: exit codes, offline mode, scenario runs."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from fedplane.cli import main

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture()
def runner():
    return CliRunner()


def offline(tmp_path, *args):
    return ["--offline", "--data-dir", str(tmp_path / "data"), *args]


class TestStatus:
    def test_empty_federation(self, runner, tmp_path):
        result = runner.invoke(main, offline(tmp_path, "status"))
        assert result.exit_code == 0, result.output
        assert result.output.startswith("0 clusters, 0 projects")

    def test_status_json(self, runner, tmp_path):
        result = runner.invoke(main, offline(tmp_path, "--json", "status"))
        assert result.exit_code == 0
        payload = json.loads(result.output)
        assert payload["clusters"] == []


class TestClusterAndProject:
    def test_add_list_register_flow(self, runner, tmp_path):
        args = offline(tmp_path)
        result = runner.invoke(
            main,
            args + ["cluster", "add", "--id", "kuh", "--gpus", "2", "--cpu", "64", "--mem", "388"],
        )
        assert result.exit_code == 0, result.output
        result = runner.invoke(
            main,
            args
            + [
                "project", "register", "--name", "demo", "--member", "u1",
                "--gpus", "1", "--cpu", "8", "--mem", "32",
            ],
        )
        assert result.exit_code == 0, result.output
        assert "placed on kuh" in result.output
        result = runner.invoke(main, args + ["status"])
        assert "1 clusters, 1 projects" in result.output
        result = runner.invoke(main, args + ["cluster", "list"])
        assert "kuh: 2 GPUs" in result.output

    def test_state_persists_across_invocations(self, runner, tmp_path):
        args = offline(tmp_path)
        runner.invoke(main, args + ["cluster", "add", "--id", "kuh", "--gpus", "1"])
        result = runner.invoke(main, args + ["cluster", "list"])
        assert "kuh" in result.output


class TestBookingErrors:
    def setup_federation(self, runner, tmp_path):
        args = offline(tmp_path)
        runner.invoke(
            main,
            args + ["cluster", "add", "--id", "kuh", "--gpus", "2", "--cpu", "8", "--mem", "32"],
        )
        result = runner.invoke(
            main,
            args
            + [
                "project", "register", "--name", "demo", "--member", "admin",
                "--gpus", "2", "--cpu", "4", "--mem", "16",
            ],
        )
        assert result.exit_code == 0, result.output
        return args

    def test_end_before_start_exits_2(self, runner, tmp_path):
        args = self.setup_federation(runner, tmp_path)
        result = runner.invoke(
            main,
            args
            + [
                "booking", "create", "--project", "p-0001",
                "--gpus", "1", "--start", "100", "--end", "100",
            ],
        )
        assert result.exit_code == 2, result.output

    def test_capacity_conflict_exits_4(self, runner, tmp_path):
        import time

        args = self.setup_federation(runner, tmp_path)
        future = int(time.time()) + 3600  # offline mode runs on the wall clock
        create = [
            "booking", "create", "--project", "p-0001", "--gpus", "2",
            "--start", str(future), "--end", str(future + 100),
        ]
        assert runner.invoke(main, args + create).exit_code == 0
        result = runner.invoke(main, args + create)
        assert result.exit_code == 4, result.output

    def test_cancel_unknown_booking_exits_1(self, runner, tmp_path):
        args = self.setup_federation(runner, tmp_path)
        result = runner.invoke(main, args + ["booking", "cancel", "b-9999"])
        assert result.exit_code == 1


class TestReleases:
    def test_publish_and_drift(self, runner, tmp_path):
        args = offline(tmp_path)
        runner.invoke(
            main,
            args
            + [
                "cluster", "add", "--id", "kuh", "--gpus", "1",
                "--app", "workspace:1.0.0",
            ],
        )
        result = runner.invoke(
            main, args + ["release", "publish", "--app", "workspace", "--version", "1.1.0"]
        )
        assert result.exit_code == 0, result.output
        result = runner.invoke(main, args + ["release", "drift", "kuh"])
        assert result.exit_code == 0
        # live clock: the auto poll has not run, so drift shows behind by 1
        assert "behind by 1" in result.output

    def test_duplicate_publish_exits_4(self, runner, tmp_path):
        args = offline(tmp_path)
        publish = ["release", "publish", "--app", "workspace", "--version", "1.0.0"]
        runner.invoke(main, args + publish)
        result = runner.invoke(main, args + publish)
        assert result.exit_code == 4


class TestScenario:
    def test_run_bundled_scenario(self, runner, tmp_path):
        trace_out = tmp_path / "kuh.trace"
        result = runner.invoke(
            main,
            ["scenario", "run", str(SCENARIO_DIR / "kuh.scn"), "--trace", str(trace_out)],
        )
        assert result.exit_code == 0, result.output
        assert "scenario ok" in result.output
        golden = Path(__file__).resolve().parent / "golden" / "kuh.trace"
        assert trace_out.read_text() == golden.read_text()

    def test_scenario_json_summary(self, runner):
        result = runner.invoke(main, ["--json", "scenario", "run", str(SCENARIO_DIR / "kuh.scn")])
        assert result.exit_code == 0
        payload = json.loads(result.output)
        assert payload["ok"] is True
        assert payload["final_digest"]

    def test_failing_assert_exits_1(self, runner, tmp_path):
        bad = tmp_path / "bad.scn"
        bad.write_text(
            "cluster a gpus=1 cpu=1 mem=1\n"
            "0 register-project demo members=u1 gpus=1 cpu=1 mem=1\n"
            "1 assert project demo state=Rejected\n"
        )
        result = runner.invoke(main, ["scenario", "run", str(bad)])
        assert result.exit_code == 1

    def test_parse_error_exits_2(self, runner, tmp_path):
        bad = tmp_path / "bad.scn"
        bad.write_text("0 frobnicate\n")
        result = runner.invoke(main, ["scenario", "run", str(bad)])
        assert result.exit_code == 2
