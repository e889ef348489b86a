"""
CLI Tests
---------
End-to-end runs of every command on stub backbones and fixture data, and the
exit codes of the failure classes.
"""

import json

import pandas as pd
import pytest

from src.core.config import TrainConfig
from src.tools.cli import _scale_schedule, main

TINY_CONFIG = {
    "train": {"dtype": "float64", "warmup_epochs": 1, "log_every": 0},
    "adapter": {
        "num_prompts": 2,
        "points_per_prompt": 2,
        "embed_dim": 16,
        "num_heads": 2,
        "attention_dropout": 0.0,
        "ffn_dim": 0,
        "grid_size": [4, 4],
        "semantic_dim": 8,
    },
    "augment": {"enabled": False},
    "backbone": {"mode": "stub"},
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Fixture dataset plus a two-epoch stub training run, shared by the module."""
    base = tmp_path_factory.mktemp("cli")
    data = base / "data"
    config = base / "tiny.json"
    config.write_text(json.dumps(TINY_CONFIG), encoding="utf-8")
    assert main(["fixtures", "--out", str(data), "--seed", "3", "--n", "2", "--size", "64", "64", "--splits", "train", "val", "test"]) == 0
    run = base / "run"
    code = main(
        ["train", "--config", str(config), "--data", str(data), "--out", str(run), "--epochs", "2", "--set", "train.seed=5"]
    )
    assert code == 0
    return {"base": base, "data": data, "config": config, "run": run}


class TestFixturesAndValidate:
    def test_generated_tree_validates(self, workspace):
        """A fixtures tree passes validation with zero defects."""
        data = workspace["data"]
        assert main(["validate", str(data)]) == 0
        report = json.loads((data / "validation.json").read_text())
        assert report["defects"] == []
        assert (data / "manifest_validate.json").is_file()
        assert (data / "manifest_fixtures.json").is_file()

    def test_defects_are_listed_not_fatal(self, workspace, tmp_path):
        out = tmp_path / "v"
        (workspace["data"] / "val" / "RGB" / "99999_0001.png").write_bytes(
            (workspace["data"] / "val" / "RGB" / "00000_0001.png").read_bytes()
        )
        try:
            assert main(["validate", str(workspace["data"]), "--split", "val", "--out", str(out)]) == 0
            report = json.loads((out / "validation.json").read_text())
            assert [d["kind"] for d in report["defects"]] == ["orphan_rgb"]
        finally:
            (workspace["data"] / "val" / "RGB" / "99999_0001.png").unlink()

    def test_empty_directory_exits_2(self, tmp_path):
        assert main(["validate", str(tmp_path)]) == 2


class TestTrain:
    def test_run_outputs(self, workspace):
        run = workspace["run"]
        for name in ("adapter_best.pt", "adapter_last.pt", "metrics.csv", "steps.csv", "curves.png", "manifest_train.json"):
            assert (run / name).is_file(), name

    def test_manifest_records_overrides(self, workspace):
        manifest = json.loads((workspace["run"] / "manifest_train.json").read_text())
        assert manifest["command"] == "train"
        assert manifest["overrides"] == ["train.seed=5"]
        assert manifest["seed"] == 5
        assert manifest["backbone_mode"] == "stub"
        assert manifest["config"]["train"]["epochs"] == 2
        assert manifest["config"]["train"]["warmup_epochs"] == pytest.approx(1 * 2 / 50)

    def test_missing_dataset_exits_2(self, workspace, tmp_path):
        code = main(["train", "--config", str(workspace["config"]), "--data", str(tmp_path / "none"), "--out", str(tmp_path / "r")])
        assert code == 2

    def test_bad_override_exits_2(self, workspace, tmp_path):
        code = main(["train", "--config", str(workspace["config"]), "--set", "train.schedule=weekly", "--out", str(tmp_path / "r")])
        assert code == 2


class TestScheduleScaling:
    def test_defaults_scale_by_epoch_ratio(self):
        """Twenty epochs out of fifty give two warm-up epochs and a switch at ten."""
        cfg = TrainConfig()
        _scale_schedule(cfg, 20)
        assert cfg.epochs == 20
        assert cfg.warmup_epochs == pytest.approx(2.0)
        assert cfg.stage_switch_epoch == 10

    def test_longer_runs_stretch_the_schedule(self):
        cfg = TrainConfig()
        _scale_schedule(cfg, 100)
        assert cfg.warmup_epochs == pytest.approx(10.0)
        assert cfg.stage_switch_epoch == 50

    def test_switch_stays_inside_the_run(self):
        """A two-epoch run still switches stage after its first epoch."""
        cfg = TrainConfig()
        _scale_schedule(cfg, 2)
        assert cfg.stage_switch_epoch == 1
        assert cfg.warmup_epochs < 2


class TestEval:
    def test_classifier_and_oracle_reports(self, workspace, tmp_path):
        """Both modes write a report; the Oracle score is never lower."""
        checkpoint = workspace["run"] / "adapter_best.pt"
        common = ["eval", "--checkpoint", str(checkpoint), "--data", str(workspace["data"]), "--out", str(tmp_path)]
        assert main(common) == 0
        assert main(common + ["--oracle"]) == 0
        classifier = json.loads((tmp_path / "report_test_classifier.json").read_text())
        oracle = json.loads((tmp_path / "report_test_oracle.json").read_text())
        assert classifier["settings"]["n_images"] == 2
        assert oracle["miou"] >= classifier["miou"]
        assert (tmp_path / "report_test_oracle.png").is_file()
        assert (tmp_path / "manifest_eval.json").is_file()

    def test_checkpoint_mismatch_exits_3(self, workspace, tmp_path):
        checkpoint = workspace["run"] / "adapter_last.pt"
        code = main(
            ["eval", "--checkpoint", str(checkpoint), "--data", str(workspace["data"]), "--set", "adapter.num_prompts=3", "--out", str(tmp_path)]
        )
        assert code == 3

    def test_missing_checkpoint_exits_2(self, workspace, tmp_path):
        assert main(["eval", "--checkpoint", str(tmp_path / "none.pt"), "--data", str(workspace["data"])]) == 2


class TestInfer:
    def test_outputs_for_a_dataset_image(self, workspace, tmp_path):
        """The stub backbone finds the sibling semantic mask of a dataset image."""
        image = workspace["data"] / "test" / "RGB" / "00000_0001.png"
        out = tmp_path / "infer"
        assert main(["infer", str(image), "--checkpoint", str(workspace["run"] / "adapter_last.pt"), "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["text"] == "cables"
        assert summary["n_prompts"] == 2
        assert (out / "overlay.png").is_file()
        assert len(list(out.glob("instance_*.png"))) == summary["n_kept"]

    def test_corrupted_image_exits_4(self, workspace, tmp_path):
        image = tmp_path / "broken.png"
        image.write_bytes(b"not an image")
        mask = workspace["data"] / "test" / "Masks" / "00000_mask.png"
        code = main(["infer", str(image), "--checkpoint", str(workspace["run"] / "adapter_last.pt"), "--mask", str(mask), "--out", str(tmp_path)])
        assert code == 4

    def test_stub_without_mask_exits_2(self, workspace, tmp_path):
        image = tmp_path / "loose.png"
        image.write_bytes((workspace["data"] / "test" / "RGB" / "00000_0001.png").read_bytes())
        code = main(["infer", str(image), "--checkpoint", str(workspace["run"] / "adapter_last.pt"), "--out", str(tmp_path / "o")])
        assert code == 2


class TestCompare:
    def test_reports_side_by_side(self, workspace, tmp_path):
        """Classifier and Oracle reports of one checkpoint end up in one table."""
        checkpoint = workspace["run"] / "adapter_best.pt"
        reports = tmp_path / "reports"
        common = ["eval", "--checkpoint", str(checkpoint), "--data", str(workspace["data"]), "--out", str(reports)]
        assert main(common) == 0
        assert main(common + ["--oracle"]) == 0

        stem = tmp_path / "cmp" / "both"
        paths = [str(reports / "report_test_classifier.json"), str(reports / "report_test_oracle.json")]
        assert main(["compare", *paths, "--labels", "cls", "oracle", "--out", str(stem)]) == 0
        frame = pd.read_csv(stem.with_suffix(".csv"))
        assert frame["run"].tolist() == ["cls", "oracle"]
        assert frame["mode"].tolist() == ["classifier", "oracle"]
        assert stem.with_suffix(".png").is_file()
        assert (stem.parent / "manifest_compare.json").is_file()

    def test_label_count_mismatch_exits_2(self, workspace, tmp_path):
        checkpoint = workspace["run"] / "adapter_best.pt"
        assert main(["eval", "--checkpoint", str(checkpoint), "--data", str(workspace["data"]), "--out", str(tmp_path)]) == 0
        report = str(tmp_path / "report_test_classifier.json")
        assert main(["compare", report, "--labels", "a", "b", "--out", str(tmp_path / "c")]) == 2

    def test_missing_report_exits_2(self, tmp_path):
        assert main(["compare", str(tmp_path / "none.json"), "--out", str(tmp_path / "c")]) == 2
