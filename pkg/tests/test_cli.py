"""End-to-end CLI coverage: generate/train/eval/benchmark/ablate, config
files, exit codes, output routing, and report determinism."""

import json

import numpy as np
import pytest

from twinadapt.cli import main, parse_config_file
from twinadapt.data import load_dataset


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    rc = main([
        "generate", "--out", str(out), "--source-traj", "4",
        "--target-traj", "36", "--seq-len", "50", "--seed", "0",
    ])
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "tiny.cfg"
    path.write_text(
        "# tiny test setup\n"
        "batch_size = 8\n"
        "epochs = 2\n"
        "seeds = 0, 1\n"
    )
    return path


def _json(path):
    return json.loads(path.read_text())


class TestGenerate:
    def test_writes_both_sides(self, corpus_dir):
        source = load_dataset(corpus_dir / "source")
        target = load_dataset(corpus_dir / "target")
        assert len(source) == 36 and len(target) == 36
        assert source.length == 50

    def test_byte_deterministic(self, tmp_path):
        args = ["--source-traj", "2", "--target-traj", "3",
                "--seq-len", "50", "--seed", "7"]
        assert main(["generate", "--out", str(tmp_path / "a")] + args) == 0
        assert main(["generate", "--out", str(tmp_path / "b")] + args) == 0
        for name in ("source.bin", "source.json", "target.bin", "target.json"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes(), name

    def test_gap_flags_reach_generator(self, tmp_path):
        rc = main([
            "generate", "--out", str(tmp_path), "--source-traj", "1",
            "--target-traj", "1", "--seq-len", "50", "--seed", "0",
            "--gap-gain", "0.5", "--gap-noise", "0.002",
        ])
        assert rc == 0
        prov = _json(tmp_path / "target.json")["provenance"]["generated"]
        assert prov["twin_config"]["gap"]["gain_offset"] == 0.5
        assert prov["twin_config"]["gap"]["noise_std"] == 0.002

    def test_invalid_gap_is_config_error(self, tmp_path):
        rc = main([
            "generate", "--out", str(tmp_path / "x"), "--source-traj", "1",
            "--target-traj", "1", "--seq-len", "50", "--gap-noise", "-1",
        ])
        assert rc == 2


class TestTrainEval:
    def test_train_then_eval(self, corpus_dir, config_file, tmp_path):
        rc = main([
            "train", "--corpus", str(corpus_dir), "--config", str(config_file),
            "--out", str(tmp_path), "--model", "cnn", "--seed", "0",
        ])
        assert rc == 0
        assert (tmp_path / "cnn_seed0.bin").exists()
        history = _json(tmp_path / "cnn_seed0_history.json")
        assert len(history["history"]["val_accuracy"]) == 2
        assert history["meta"]["config"]["batch_size"] == 8
        assert "config_hash" in history["meta"]

        rc = main([
            "eval", "--checkpoint", str(tmp_path / "cnn_seed0"),
            "--corpus", str(corpus_dir), "--domain", "target",
            "--out", str(tmp_path / "ev"),
        ])
        assert rc == 0
        report = _json(tmp_path / "ev" / "eval.json")
        assert 0.0 <= report["metrics"]["accuracy"] <= 1.0
        assert report["metrics"]["n_samples"] == 36

    def test_cli_epochs_beats_config_file(self, corpus_dir, config_file, tmp_path):
        rc = main([
            "train", "--corpus", str(corpus_dir), "--config", str(config_file),
            "--out", str(tmp_path), "--model", "cnn", "--seed", "0",
            "--epochs", "1",
        ])
        assert rc == 0
        history = _json(tmp_path / "cnn_seed0_history.json")
        assert len(history["history"]["val_accuracy"]) == 1

    def test_dann_training_via_cli(self, corpus_dir, config_file, tmp_path):
        rc = main([
            "train", "--corpus", str(corpus_dir), "--config", str(config_file),
            "--out", str(tmp_path), "--model", "dann", "--seed", "1",
        ])
        assert rc == 0
        history = _json(tmp_path / "dann_seed1_history.json")
        assert history["history"]["mode"] == "dann"
        assert all(v is not None for v in history["history"]["domain_loss"])


BENCH_ARTIFACTS = (
    "benchmark.json", "benchmark_accuracy.txt", "benchmark_accuracy.csv",
    "benchmark_f1.txt", "benchmark_f1.csv", "benchmark_accuracy.png",
    "benchmark_f1.png", "benchmark_curves.png",
)


def _bench(corpus_dir, config_file, out, extra=()):
    return main([
        "benchmark", "--corpus", str(corpus_dir), "--config", str(config_file),
        "--out", str(out), "--models", "cnn,dann", "--seeds", "0,1", *extra,
    ])


class TestBenchmark:
    def test_artifacts_and_content(self, corpus_dir, config_file, tmp_path):
        assert _bench(corpus_dir, config_file, tmp_path) == 0
        for name in BENCH_ARTIFACTS:
            assert (tmp_path / name).exists(), name
        report = _json(tmp_path / "benchmark.json")
        assert report["model_order"] == ["cnn", "dann"]
        assert report["meta"]["seeds"] == [0, 1]
        assert report["meta"]["corpus"]["n_source"] == 36
        runs = report["models"]["dann"]["runs"]
        assert [r["seed"] for r in runs] == [0, 1]
        agg = report["models"]["dann"]["aggregate"]
        accs = [r["test"]["accuracy"] for r in runs]
        assert agg["test_accuracy"]["mean"] == pytest.approx(np.mean(accs))
        assert 0.0 <= agg["test_accuracy"]["mean"] <= 1.0
        assert len(report["models"]["cnn"]["mean_curves"]["val_accuracy"]) == 2
        table = (tmp_path / "benchmark_accuracy.txt").read_text()
        assert "cnn" in table and "dann" in table

    def test_repeat_run_is_bit_identical_except_timestamp(
        self, corpus_dir, config_file, tmp_path
    ):
        assert _bench(corpus_dir, config_file, tmp_path / "r1") == 0
        assert _bench(corpus_dir, config_file, tmp_path / "r2") == 0
        a = _json(tmp_path / "r1" / "benchmark.json")
        b = _json(tmp_path / "r2" / "benchmark.json")
        assert a["meta"].pop("generated_at") and b["meta"].pop("generated_at")
        assert a == b
        for name in BENCH_ARTIFACTS[1:]:
            assert (tmp_path / "r1" / name).read_bytes() == (
                tmp_path / "r2" / name
            ).read_bytes(), name

    def test_parallel_jobs_match_serial(self, corpus_dir, config_file, tmp_path):
        assert _bench(corpus_dir, config_file, tmp_path / "serial") == 0
        assert _bench(
            corpus_dir, config_file, tmp_path / "par", extra=("--jobs", "2")
        ) == 0
        a = _json(tmp_path / "serial" / "benchmark.json")
        b = _json(tmp_path / "par" / "benchmark.json")
        a["meta"].pop("generated_at"), b["meta"].pop("generated_at")
        assert a == b


class TestAblate:
    def test_artifacts_and_split(self, corpus_dir, config_file, tmp_path):
        rc = main([
            "ablate", "--corpus", str(corpus_dir), "--config", str(config_file),
            "--out", str(tmp_path), "--models", "cnn,dann", "--seeds", "0",
        ])
        assert rc == 0
        for name in ("ablation.json", "ablation.txt", "ablation.csv", "ablation.png"):
            assert (tmp_path / name).exists(), name
        report = _json(tmp_path / "ablation.json")
        assert report["split"]["n_train"] == 27 and report["split"]["n_test"] == 9
        cnn = report["models"]["cnn"]
        assert not cnn["twin"]["transductive"]
        assert report["models"]["dann"]["twin"]["transductive"]
        table = (tmp_path / "ablation.txt").read_text()
        assert "transductive" in table
        csv_text = (tmp_path / "ablation.csv").read_text()
        assert csv_text.splitlines()[0] == "model,real_mean,real_std,twin_mean,twin_std"


class TestConfigFile:
    def test_parse_basics(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("a = 1\n# comment\nb = two words  # trailing\n\n")
        assert parse_config_file(p) == {"a": "1", "b": "two words"}

    def test_parse_errors(self, tmp_path):
        from twinadapt.errors import ConfigError

        with pytest.raises(ConfigError, match="not found"):
            parse_config_file(tmp_path / "ghost.cfg")
        p = tmp_path / "bad.cfg"
        p.write_text("just some words\n")
        with pytest.raises(ConfigError, match="bad.cfg:1"):
            parse_config_file(p)


class TestExitCodes:
    def test_missing_corpus_is_data_error(self, tmp_path):
        rc = main([
            "train", "--corpus", str(tmp_path / "nowhere"), "--model", "cnn",
            "--out", str(tmp_path),
        ])
        assert rc == 3

    def test_bad_config_key_is_config_error(self, corpus_dir, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("momentum = 0.9\n")
        rc = main([
            "train", "--corpus", str(corpus_dir), "--config", str(bad),
            "--out", str(tmp_path),
        ])
        assert rc == 2

    def test_missing_checkpoint_is_data_error(self, corpus_dir, tmp_path):
        rc = main([
            "eval", "--checkpoint", str(tmp_path / "ghost"),
            "--corpus", str(corpus_dir), "--out", str(tmp_path),
        ])
        assert rc == 3

    def test_unknown_model_flag_exits_two(self, corpus_dir, tmp_path):
        with pytest.raises(SystemExit) as err:
            main([
                "benchmark", "--corpus", str(corpus_dir),
                "--models", "resnet", "--out", str(tmp_path),
            ])
        assert err.value.code == 2

    def test_train_on_csv_corpus_is_data_error(self, tmp_path):
        (tmp_path / "manifest.csv").write_text("file,label\n")
        rc = main([
            "train", "--corpus", str(tmp_path), "--model", "cnn",
            "--out", str(tmp_path),
        ])
        assert rc == 3


class TestOutputRouting:
    def test_env_var_rooting(self, tmp_path, monkeypatch):
        monkeypatch.setenv("TWINADAPT_OUT", str(tmp_path / "root"))
        rc = main([
            "generate", "--source-traj", "1", "--target-traj", "1",
            "--seq-len", "50", "--seed", "0",
        ])
        assert rc == 0
        assert (tmp_path / "root" / "corpus" / "source.bin").exists()

    def test_explicit_out_wins(self, tmp_path, monkeypatch):
        monkeypatch.setenv("TWINADAPT_OUT", str(tmp_path / "env"))
        rc = main([
            "generate", "--out", str(tmp_path / "given"), "--source-traj", "1",
            "--target-traj", "1", "--seq-len", "50", "--seed", "0",
        ])
        assert rc == 0
        assert (tmp_path / "given" / "source.bin").exists()
        assert not (tmp_path / "env").exists()


class TestCsvCorpusThroughCli:
    def test_eval_on_csv_imported_target(self, corpus_dir, config_file, tmp_path):
        rc = main([
            "train", "--corpus", str(corpus_dir), "--config", str(config_file),
            "--out", str(tmp_path), "--model", "cnn", "--seed", "0",
        ])
        assert rc == 0

        csv_dir = tmp_path / "real"
        csv_dir.mkdir()
        rng = np.random.default_rng(0)
        names = []
        for i in range(9):
            name = f"sample_{i}.csv"
            rows = rng.normal(size=(20, 6))
            lines = ["dx,dy,dz,rx,ry,rz"]
            lines += [",".join(f"{v:.8f}" for v in row) for row in rows]
            (csv_dir / name).write_text("\n".join(lines) + "\n")
            names.append(name)
        manifest = ["file,label"] + [
            f"{name},{label}" for name, label in zip(
                names, ("Healthy", "Motor 1 Stuck", "Motor 1 Steady state error",
                        "Motor 2 Stuck", "Motor 2 Steady state error", "Motor 3 Stuck",
                        "Motor 3 Steady state error", "Motor 4 Stuck",
                        "Motor 4 Steady state error"))
        ]
        (csv_dir / "manifest.csv").write_text("\n".join(manifest) + "\n")

        rc = main([
            "eval", "--checkpoint", str(tmp_path / "cnn_seed0"),
            "--corpus", str(csv_dir), "--domain", "target",
            "--out", str(tmp_path / "ev"),
        ])
        assert rc == 0
        report = _json(tmp_path / "ev" / "eval.json")
        assert report["metrics"]["n_samples"] == 9
