"""End-to-end CLI behavior through real subprocesses."""

import os
import subprocess
import sys

import pytest

from lamcore import dataio

ENV = {**os.environ, "OPENBLAS_NUM_THREADS": "1", "OMP_NUM_THREADS": "1"}


def run_cli(*args, check=True):
    proc = subprocess.run(
        [sys.executable, "-m", "lamcore", *map(str, args)],
        capture_output=True,
        text=True,
        env=ENV,
    )
    if check and proc.returncode != 0:
        raise AssertionError(f"cli failed ({proc.returncode}): {proc.stderr}")
    return proc


class TestUsageErrors:
    def test_unknown_subcommand_exits_2(self):
        proc = run_cli("frobnicate", check=False)
        assert proc.returncode == 2
        assert "usage" in proc.stderr.lower()

    def test_unknown_flag_exits_2(self):
        proc = run_cli("synth", "--bogus", check=False)
        assert proc.returncode == 2

    def test_runtime_failure_exits_1(self, tmp_path):
        proc = run_cli(
            "annotate",
            "--model", tmp_path / "missing.lamm",
            "--features-dir", tmp_path,
            "--out-dir", tmp_path / "out",
            check=False,
        )
        assert proc.returncode == 1
        assert proc.stderr.strip()


class TestSynth:
    def test_writes_paired_files(self, tmp_path):
        run_cli(
            "synth", "--out-dir", tmp_path, "--count", 3, "--classes", 4,
            "--size", "16x16", "--rng-seed", 5,
        )
        lfts = sorted(tmp_path.glob("*.lft"))
        llbs = sorted(tmp_path.glob("*.llb"))
        assert len(lfts) == 3 and len(llbs) == 3
        feats = dataio.load_features(lfts[0])
        labels = dataio.load_labels(llbs[0])
        assert feats.shape == (16, 16, 16)
        assert labels.shape == (16, 16)


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """synth -> train -> annotate -> eval, kept for several tests."""
    root = tmp_path_factory.mktemp("pipe")
    data = root / "data"
    run_cli("synth", "--out-dir", data, "--count", 4, "--classes", 4,
            "--size", "24x24", "--rng-seed", 11)
    model_path = root / "model.lamm"
    train = run_cli(
        "train",
        "--seed-features", data / "scene_0000.lft",
        "--seed-labels", data / "scene_0000.llb",
        "--out", model_path,
        "--epochs", 120, "--lr", 0.05, "--rng-seed", 1,
    )
    out_dir = root / "pred"
    annotate = run_cli(
        "annotate", "--model", model_path, "--features-dir", data,
        "--out-dir", out_dir, "--mode", "self",
    )
    ev = run_cli("eval", "--pred-dir", out_dir, "--gt-dir", data, "--classes", 4)
    return root, data, model_path, out_dir, train, annotate, ev


class TestPipeline:
    def test_train_prints_loss_csv(self, pipeline):
        *_, train, _, _ = pipeline
        lines = train.stdout.strip().splitlines()
        assert lines[0] == "epoch,loss"
        assert len(lines) == 121
        first = float(lines[1].split(",")[1])
        last = float(lines[-1].split(",")[1])
        assert last < first

    def test_model_file_written(self, pipeline):
        _, _, model_path, *_ = pipeline
        model = dataio.load_model(model_path)
        assert model.class_count == 4 and model.sca.n_in == 16

    def test_annotate_writes_labels_and_summary(self, pipeline):
        root, data, _, out_dir, _, annotate, _ = pipeline
        assert len(list(out_dir.glob("*.llb"))) == 4
        summary = (out_dir / "summary.csv").read_text().splitlines()
        assert summary[0].startswith("file,status,error,seconds,output")
        assert len(summary) == 5
        assert annotate.stdout.splitlines()[0] == summary[0]

    def test_eval_emits_metric_csv(self, pipeline):
        *_, ev = pipeline
        lines = ev.stdout.strip().splitlines()
        assert lines[0] == "class_id,iou,f1"
        assert lines[-1].startswith("mean,")
        mean_iou = float(lines[-1].split(",")[1])
        assert 0.9 <= mean_iou <= 1.0

    def test_oracle_annotate_then_eval_is_near_perfect(self, pipeline, tmp_path):
        root, data, model_path, *_ = pipeline
        out_dir = tmp_path / "oracle_pred"
        run_cli(
            "annotate", "--model", model_path, "--features-dir", data,
            "--out-dir", out_dir, "--mode", "oracle", "--gt-dir", data,
        )
        ev = run_cli("eval", "--pred-dir", out_dir, "--gt-dir", data, "--classes", 4)
        mean_iou = float(ev.stdout.strip().splitlines()[-1].split(",")[1])
        assert mean_iou >= 0.999

    def test_oracle_mode_requires_gt_dir(self, pipeline):
        root, data, model_path, *_ = pipeline
        proc = run_cli(
            "annotate", "--model", model_path, "--features-dir", data,
            "--out-dir", root / "x", "--mode", "oracle", check=False,
        )
        assert proc.returncode == 2

    def test_annotate_survives_malformed_file(self, pipeline, tmp_path):
        root, data, model_path, *_ = pipeline
        mixed = tmp_path / "mixed"
        mixed.mkdir()
        (mixed / "broken.lft").write_bytes(b"junk")
        src = sorted(data.glob("*.lft"))[0]
        (mixed / "ok.lft").write_bytes(src.read_bytes())
        proc = run_cli("annotate", "--model", model_path, "--features-dir", mixed,
                       "--out-dir", tmp_path / "out")
        assert proc.returncode == 0
        rows = [l.split(",")[1] for l in proc.stdout.strip().splitlines()[1:]]
        assert sorted(rows) == ["error", "ok"]


class TestGradcheckCommand:
    def test_exits_zero_and_reports(self):
        proc = run_cli("gradcheck", "--rng-seed", 0)
        lines = proc.stdout.strip().splitlines()
        assert lines[0] == "suite,instances,max_rel_err,pass"
        assert len(lines) >= 6
        assert all(line.endswith(",yes") for line in lines[1:])
