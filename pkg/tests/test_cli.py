"""Tests for the command-line entry point."""

import csv
import json

import pytest

from app.services.checkpoint_service import CheckpointService
from main import build_parser, main, resolve_config

TINY_FLAGS = [
    "--task", "denoise_demosaic",
    "--n-ll", "2",
    "--width", "8",
    "--synth-count", "6",
    "--synth-height", "32",
    "--synth-width", "32",
    "--checkpoint-every", "1",
]


class TestResolveConfig:
    def test_flags_are_typed_by_the_schema(self):
        args = build_parser().parse_args(["train", *TINY_FLAGS, "--lr", "0.001", "--no-augment"])
        config = resolve_config(args)
        assert (config.n_ll, config.width, config.lr, config.augment) == (2, 8, 1e-3, False)
        assert config.epochs == 5000 and config.n_hl == 0

    def test_file_values_overridden_by_flags(self, tmp_path):
        path = tmp_path / "experiment.json"
        path.write_text(json.dumps({"task": "full_isp", "width": 16, "epochs": 3}), encoding="utf-8")
        config = resolve_config(build_parser().parse_args(["train", "--config", str(path), "--epochs", "7"]))
        assert (config.task, config.width, config.epochs, config.n_hl) == ("full_isp", 16, 7, 3)

    def test_unknown_key_in_file_rejected(self, tmp_path):
        path = tmp_path / "experiment.json"
        path.write_text(json.dumps({"widht": 16}), encoding="utf-8")
        assert main(["train", "--config", str(path)]) == 1


class TestCommands:
    def test_synth_writes_manifest(self, output_root):
        assert main(["--no-progress", "synth", "--synth-count", "0", "--output-dir", "empty"]) == 0
        manifest = json.loads((output_root / "empty" / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["count"] == 0

    def test_synth_is_deterministic(self, output_root):
        for name in ("one", "two"):
            assert main(["--no-progress", "synth", "--synth-count", "2", "--output-dir", name]) == 0
        for file in ("000_input.png", "001_target.png", "manifest.json"):
            assert (output_root / "one" / file).read_bytes() == (output_root / "two" / file).read_bytes()

    def test_train_then_eval(self, output_root):
        flags = [*TINY_FLAGS, "--epochs", "1", "--output-dir", "cli"]
        assert main(["--no-progress", "train", *flags]) == 0
        checkpoint = output_root / "cli" / "checkpoint.ckpt"
        assert CheckpointService(checkpoint.parent).load().epoch == 1

        assert main(["--no-progress", "eval", *flags, "--checkpoint", str(checkpoint)]) == 0
        with (output_root / "cli" / "eval_report.csv").open(newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
        assert {row[1] for row in rows[1:]} == {"model", "baseline"}
        assert rows[-1][0] == "mean"

    def test_infer_directory(self, output_root, tmp_path, rng):
        from app.imaging.image_io import write_image

        flags = [*TINY_FLAGS, "--epochs", "0", "--output-dir", "cli"]
        assert main(["--no-progress", "train", *flags]) == 0
        write_image(tmp_path / "raw" / "frame.png", rng.uniform(size=(16, 16)))
        checkpoint = str(output_root / "cli" / "checkpoint.ckpt")
        destination = tmp_path / "out"
        code = main(["infer", "--checkpoint", checkpoint, "--input", str(tmp_path / "raw"), "--output", str(destination)])
        assert code == 0
        assert (destination / "frame.png").exists()

    def test_gradcheck_selected(self):
        assert main(["gradcheck", "--only", "tanh", "relu", "--points", "2"]) == 0

    def test_gradcheck_unknown_check(self):
        assert main(["gradcheck", "--only", "softmax"]) == 1

    def test_missing_checkpoint_reported(self, tmp_path):
        missing = str(tmp_path / "none.ckpt")
        assert main(["infer", "--checkpoint", missing, "--input", str(tmp_path), "--output", str(tmp_path)]) == 1

    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            main([])
