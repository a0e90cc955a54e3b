"""CLI tests, run in-process through main(argv)."""

import json

import pytest

from emedge.classifier import dataset_from_dir, evaluate, load_model
from emedge.cli import main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def simulate(tmp_path, capsys, name="trace", seed=7, extra=()):
    out = tmp_path / name
    code, _, _ = run(["simulate", "--seed", str(seed), "--days", "1",
                      "--out", str(out), *extra], capsys)
    assert code == 0
    return out


class TestSimulate:
    def test_smoke_creates_trace_files(self, tmp_path, capsys):
        out = simulate(tmp_path, capsys)
        names = {p.name for p in out.iterdir()}
        assert {"manifest.json", "events.jsonl", "power_ac1.csv",
                "labels_ac1.csv", "occupancy_lab1.csv", "env_outdoor.csv"} <= names

    def test_byte_identical_for_fixed_seed(self, tmp_path, capsys):
        a = simulate(tmp_path, capsys, "a", extra=["--noise-accuracy", "98.16"])
        b = simulate(tmp_path, capsys, "b", extra=["--noise-accuracy", "98.16"])
        for f in sorted(a.iterdir()):
            assert f.read_bytes() == (b / f.name).read_bytes(), f.name

    def test_bad_noise_accuracy_fails_cleanly(self, tmp_path, capsys):
        code, _, err = run(["simulate", "--out", str(tmp_path / "x"),
                            "--noise-accuracy", "101"], capsys)
        assert code == 1
        assert "error:" in err


@pytest.fixture(scope="module")
def trace_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli-trace")
    code = main(["simulate", "--seed", "5", "--days", "1", "--interval", "120",
                 "--out", str(tmp / "t")])
    assert code == 0
    return tmp / "t"


class TestTrainEval:
    def test_train_twice_byte_identical(self, trace_dir, tmp_path, capsys):
        for name in ("m1.json", "m2.json"):
            code, _, _ = run(["train", "--data", str(trace_dir), "--model",
                              str(tmp_path / name), "--kind", "ebt",
                              "--learners", "3", "--max-splits", "20",
                              "--seed", "9"], capsys)
            assert code == 0
        assert (tmp_path / "m1.json").read_bytes() == (tmp_path / "m2.json").read_bytes()

    def test_eval_matches_library_call(self, trace_dir, tmp_path, capsys):
        model_path = tmp_path / "m.json"
        run(["train", "--data", str(trace_dir), "--model", str(model_path),
             "--kind", "dt", "--max-splits", "30", "--seed", "2"], capsys)
        code, out, err = run(["eval", "--model", str(model_path), "--data",
                              str(trace_dir), "--table"], capsys)
        assert code == 0
        report = json.loads(out)
        X, y, dataset_id = dataset_from_dir(trace_dir, signal="measured")
        expected = evaluate(load_model(model_path), X, y, dataset_id=dataset_id)
        assert report == json.loads(expected.to_json())
        assert "accuracy" in err  # human table on stderr

    def test_eval_reports_identical_across_runs(self, trace_dir, tmp_path, capsys):
        model_path = tmp_path / "m.json"
        run(["train", "--data", str(trace_dir), "--model", str(model_path),
             "--kind", "knn"], capsys)
        outs = []
        for _ in range(2):
            code, out, _ = run(["eval", "--model", str(model_path), "--data",
                                str(trace_dir)], capsys)
            assert code == 0
            outs.append(out)
        assert outs[0] == outs[1]


class TestReplayCommand:
    def test_replay_into_store(self, tmp_path, capsys):
        trace_dir = simulate(tmp_path, capsys, extra=["--interval", "300"])
        events = trace_dir / "events.jsonl"
        n_events = len(events.read_text().splitlines())
        code, out, _ = run(["replay", "--file", str(events), "--store",
                            str(tmp_path / "store"), "--site", "home"], capsys)
        assert code == 0
        counters = json.loads(out)
        assert counters["delivered"] == n_events
        assert counters["malformed"] == 0


class TestMineCommand:
    def test_rules_from_raw_events(self, tmp_path, capsys):
        log = tmp_path / "actions.jsonl"
        with open(log, "w") as f:
            for i in range(30):
                f.write(json.dumps({
                    "appliance_id": "tv1", "verb": "turn_on",
                    "ts": 1699990200 + i * 7, "occupied": True,
                }) + "\n")
        code, out, _ = run(["mine", "--events", str(log),
                            "--min-support", "0.5", "--min-confidence", "0.6"], capsys)
        assert code == 0
        rules = json.loads(out)
        assert any(r["appliance_id"] == "tv1" and r["verb"] == "turn_on" for r in rules)


class TestArchiveCommand:
    def test_archive_prints_count(self, tmp_path, capsys):
        from emedge.store import TelemetryStore

        with TelemetryStore(tmp_path / "store") as store:
            for i in range(10):
                store.append("power/a/b/c", i * 60, {"w": 1.0})
        code, out, _ = run(["archive", "--store", str(tmp_path / "store"),
                            "--cutoff", "600"], capsys)
        assert code == 0
        assert "archived 10 samples" in out


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err.lower()
