"""Tests for the training, inference, evaluation, synthesis and experiment services."""

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from app.autodiff.tensor import Tensor
from app.core.errors import CheckpointError, DatasetError, ShapeError, TrainingAbortedError
from app.core.schemas import ModelConfig
from app.data import Dataset, ImagePair, synthesize_dataset
from app.handlers.training_handler import LOG_COLUMNS, TrainingEvent, TrainingEventHandler
from app.imaging import RawImage, bilinear_demosaic, mosaic
from app.imaging.image_io import read_image, write_image
from app.model import identity_params, init_params
from app.services.checkpoint_service import CheckpointService
from app.services.evaluation_service import EvaluationService
from app.services.experiment_service import ExperimentService
from app.services.inference_service import InferenceService
from app.services.synth_service import MANIFEST_NAME, SynthService
from app.services.trainer_service import CONFIG_NAME, LOG_NAME, DataSplits, TrainerService, build_datasets


def read_log(path):
    with path.open(newline="", encoding="utf-8") as handle:
        return list(csv.reader(handle))


def trained(config, **changes):
    config = config.model_copy(update=changes)
    trainer = TrainerService(config, progress=False)
    return trainer, trainer.run()


# =============================================================================
# Training
# =============================================================================


class TestBuildDatasets:
    def test_synthetic_splits(self, tiny_train_config):
        splits = build_datasets(tiny_train_config)
        assert (len(splits.train), len(splits.val), len(splits.test)) == (4, 1, 1)

    def test_directory_source(self, tiny_train_config, tmp_path):
        from app.data import write_flat_dataset

        write_flat_dataset(synthesize_dataset(10, seed=1, height=32, width=32), tmp_path / "pairs")
        config = tiny_train_config.model_copy(update={"data_source": "dir", "data_dir": tmp_path / "pairs"})
        splits = build_datasets(config)
        assert len(splits.train) + len(splits.val) + len(splits.test) == 10


class TestTrainerService:
    def test_zero_epochs_writes_initialization(self, tiny_train_config, output_root):
        trainer, result = trained(tiny_train_config, epochs=0)
        assert result.epoch == 0 and result.history == []
        checkpoint = CheckpointService(output_root / "tiny").load()
        expected = init_params(tiny_train_config.seed, tiny_train_config.to_model_config())
        assert checkpoint.epoch == 0 and checkpoint.adam.t == 0
        for name in expected:
            np.testing.assert_array_equal(checkpoint.params[name], expected[name])
        assert read_log(output_root / "tiny" / LOG_NAME) == [list(LOG_COLUMNS)]
        assert (output_root / "tiny" / CONFIG_NAME).exists()

    def test_log_has_one_row_per_epoch(self, tiny_train_config, output_root):
        _, result = trained(tiny_train_config)
        rows = read_log(output_root / "tiny" / LOG_NAME)
        assert [row[0] for row in rows[1:]] == ["1", "2"]
        assert float(rows[-1][1]) == result.final_train_loss
        assert result.adam.t == 2 * 4

    def test_identical_runs_identical_bytes(self, tiny_train_config, output_root):
        trained(tiny_train_config, output_dir=Path("first"))
        trained(tiny_train_config, output_dir=Path("second"))
        for name in ("checkpoint.ckpt", LOG_NAME):
            assert (output_root / "first" / name).read_bytes() == (output_root / "second" / name).read_bytes()

    def test_resume_matches_uninterrupted_run(self, tiny_train_config, output_root):
        trained(tiny_train_config, output_dir=Path("split"), epochs=2)
        longer = tiny_train_config.model_copy(update={"output_dir": Path("split"), "epochs": 4})
        result = TrainerService(longer, progress=False).run(resume=True)
        assert result.epoch == 4
        trained(tiny_train_config, output_dir=Path("whole"), epochs=4)
        for name in ("checkpoint.ckpt", LOG_NAME):
            assert (output_root / "split" / name).read_bytes() == (output_root / "whole" / name).read_bytes()

    def test_resume_truncates_later_log_rows(self, tiny_train_config, output_root):
        trained(tiny_train_config, epochs=3)
        # Put the epoch-2 state of the same experiment back in place.
        trained(tiny_train_config, output_dir=Path("rewind"), epochs=2)
        rewound = (output_root / "rewind" / "checkpoint.ckpt").read_bytes()
        (output_root / "tiny" / "checkpoint.ckpt").write_bytes(rewound)
        TrainerService(tiny_train_config.model_copy(update={"epochs": 2}), progress=False).run(resume=True)
        assert [row[0] for row in read_log(output_root / "tiny" / LOG_NAME)[1:]] == ["1", "2"]

    def test_resume_without_checkpoint_starts_fresh(self, tiny_train_config):
        result = TrainerService(tiny_train_config, progress=False).run(resume=True)
        assert result.epoch == 2

    def test_resume_rejects_foreign_experiment(self, tiny_train_config):
        trained(tiny_train_config)
        other = tiny_train_config.model_copy(update={"lr": 1e-3, "epochs": 3})
        with pytest.raises(CheckpointError, match="belongs to experiment"):
            TrainerService(other, progress=False).run(resume=True)

    def test_loss_decreases(self, tiny_train_config):
        _, result = trained(tiny_train_config, epochs=50, lr=1e-3, checkpoint_every=50)
        assert result.history[-1]["train_loss"] < result.history[0]["train_loss"]

    def test_full_isp_shrinks_patch(self, tiny_isp_train_config, caplog):
        trainer, result = trained(tiny_isp_train_config, epochs=1)
        assert "exceeds the smallest image side" in caplog.text
        assert trainer.patch_size_for(build_datasets(trainer.config).train) == 32
        assert result.history[0]["val_msssim"] is not None

    def test_non_finite_loss_aborts(self, tiny_train_config, output_root):
        trainer = TrainerService(tiny_train_config, progress=False)
        trainer.loss = lambda prediction, target: Tensor(np.nan)
        with pytest.raises(TrainingAbortedError) as info:
            trainer.run()
        assert (info.value.epoch, info.value.step) == (1, 0)
        assert info.value.last_checkpoint == str(output_root / "tiny" / "checkpoint.ckpt")
        assert CheckpointService(output_root / "tiny").load().epoch == 0
        assert trainer.handler.aborted is not None

    def test_empty_training_set_rejected(self, tiny_train_config):
        empty = DataSplits(Dataset([], "train"), Dataset([], "val"), Dataset([], "test"))
        with pytest.raises(DatasetError):
            TrainerService(tiny_train_config, progress=False).run(data=empty)

    def test_whole_images_below_minimum_rejected(self, tiny_isp_train_config):
        trainer = TrainerService(tiny_isp_train_config.model_copy(update={"patch_size": 0}), progress=False)
        small = Dataset([ImagePair(mosaic(np.full((8, 8, 3), 0.5)), np.full((8, 8, 3), 0.5))])
        with pytest.raises(ShapeError, match="minimum"):
            trainer.patch_size_for(small)


class TestTrainingEventHandler:
    def test_history_and_final(self, tmp_path):
        handler = TrainingEventHandler(tmp_path / "log.csv")
        handler.on_event(TrainingEvent("run_started", 0, {"resume_epoch": None}))
        handler.on_event(TrainingEvent("epoch_completed", 1, {"train_loss": 0.5, "val_loss": None}))
        handler.on_event(TrainingEvent("checkpoint_written", 1, {"path": "ckpt"}))
        handler.on_event(TrainingEvent("run_completed", 1))
        assert handler.final["train_loss"] == 0.5
        assert handler.last_checkpoint == "ckpt" and handler.is_complete
        assert read_log(tmp_path / "log.csv")[1] == ["1", "0.5", "", "", ""]


# =============================================================================
# Inference and evaluation
# =============================================================================


class TestInferenceService:
    def test_identity_model_reproduces_bilinear(self, tiny_denoise_config, tmp_path, rng):
        raw = mosaic(rng.uniform(size=(16, 16, 3)))
        source = write_image(tmp_path / "raw.png", raw.values)
        service = InferenceService(identity_params(tiny_denoise_config))
        [written] = service.infer_path(source, tmp_path / "out")
        expected = bilinear_demosaic(RawImage(read_image(source)))
        np.testing.assert_allclose(read_image(written), expected, atol=1.0 / 65535)

    def test_any_resolution_and_repeatable(self, tiny_isp_config, rng):
        service = InferenceService(init_params(0, tiny_isp_config))
        for size in ((16, 16), (24, 40)):
            rgb = rng.uniform(size=size + (3,))
            first, second = service.process(rgb), service.process(rgb)
            assert first.shape == rgb.shape
            assert first.min() >= 0.0 and first.max() <= 1.0
            assert first.tobytes() == second.tobytes()

    def test_directory_outputs_byte_identical(self, tiny_isp_config, tmp_path, rng):
        for name in ("a", "b"):
            write_image(tmp_path / "in" / f"{name}.png", rng.uniform(size=(16, 16)))
        service = InferenceService(init_params(0, tiny_isp_config))
        first = service.infer_path(tmp_path / "in", tmp_path / "out1", stretch=True)
        second = service.infer_path(tmp_path / "in", tmp_path / "out2", stretch=True)
        assert [p.name for p in first] == ["a.png", "b.png"]
        assert [p.read_bytes() for p in first] == [p.read_bytes() for p in second]

    def test_too_small_input_cites_minimum(self, rng):
        service = InferenceService(init_params(0, ModelConfig(n_ll=2, n_hl=2, width=8, hl_width=4)))
        with pytest.raises(ShapeError, match="16"):
            service.process(rng.uniform(size=(8, 8, 3)))

    def test_from_checkpoint(self, tiny_train_config):
        _, result = trained(tiny_train_config, no_skip=True)
        service = InferenceService.from_checkpoint(result.checkpoint_path)
        assert service.ablate_skip and not service.ablate_shared
        assert service.params.parameter_count == result.params.parameter_count

    def test_missing_input_rejected(self, tiny_denoise_config, tmp_path):
        with pytest.raises(OSError):
            InferenceService(identity_params(tiny_denoise_config)).infer_path(tmp_path / "absent.png", tmp_path)


class TestEvaluationService:
    @pytest.fixture
    def dataset(self, rng):
        targets = [rng.uniform(size=(16, 16, 3)) for _ in range(3)]
        return Dataset([ImagePair(t, t) for t in targets])

    def test_targets_against_themselves(self, tiny_denoise_config, dataset):
        service = EvaluationService(InferenceService(identity_params(tiny_denoise_config)))
        report = service.evaluate(dataset, baseline=True, fingerprint="f00")
        assert report.tags == ["model", "baseline"]
        for tag in report.tags:
            means = report.aggregate(tag)
            assert means["psnr_linear"] == 99.0
            assert means["ms_ssim"] == pytest.approx(1.0, abs=1e-12)
        assert report.fingerprint == "f00"

    def test_baseline_only(self, rng):
        clean = [rng.uniform(size=(16, 16, 3)) for _ in range(2)]
        dataset = Dataset([ImagePair(mosaic(c), c) for c in clean])
        report = EvaluationService().evaluate(dataset)
        assert report.tags == ["baseline"]
        rows = report.rows
        assert report.aggregate("baseline")["psnr_srgb"] == pytest.approx(np.mean([r.psnr_srgb for r in rows]))
        assert [row.image for row in rows] == ["0000", "0001"]


# =============================================================================
# Synthesis and experiments
# =============================================================================


class TestSynthService:
    def test_writes_flat_dataset_and_manifest(self, tiny_train_config, output_root):
        manifest = SynthService(tiny_train_config.model_copy(update={"synth_count": 2}), progress=False).run()
        assert manifest == output_root / "tiny" / MANIFEST_NAME
        content = json.loads(manifest.read_text(encoding="utf-8"))
        assert content["count"] == 2
        assert content["fingerprint"] == tiny_train_config.model_copy(update={"synth_count": 2}).fingerprint()
        assert (output_root / "tiny" / "001_input.png").exists()

    def test_zero_count(self, tiny_train_config):
        manifest = SynthService(tiny_train_config.model_copy(update={"synth_count": 0}), progress=False).run()
        assert json.loads(manifest.read_text(encoding="utf-8"))["pairs"] == []


class TestExperimentService:
    def test_single_value_sweep(self, tiny_train_config, output_root):
        path = ExperimentService(tiny_train_config, progress=False).sweep("width", [8])
        rows = read_log(path)
        assert path == output_root / "tiny" / "sweep_width.csv"
        assert rows[0] == ["value", "val_psnr", "val_msssim", "final_train_loss"]
        assert len(rows) == 2 and rows[1][0] == "8"
        assert (output_root / "tiny" / "width_8" / "checkpoint.ckpt").exists()

    def test_empty_sweep_rejected(self, tiny_train_config):
        with pytest.raises(ValueError):
            ExperimentService(tiny_train_config, progress=False).sweep("depth", [])

    def test_no_skip_ablation_reports_ratio(self, tiny_train_config, output_root):
        summary = ExperimentService(tiny_train_config, progress=False).ablate("no_skip")
        assert [row["arm"] for row in summary.rows] == ["baseline", "no_skip"]
        assert summary.final_loss_ratio is not None and summary.final_loss_ratio > 0
        assert "final_loss_ratio=" in (output_root / "tiny" / "ablation_no_skip.txt").read_text(encoding="utf-8")

    def test_no_shared_ablation_matches_budget(self, tiny_isp_train_config):
        summary = ExperimentService(tiny_isp_train_config.model_copy(update={"epochs": 1}), progress=False).ablate(
            "no_shared"
        )
        baseline, ablated = summary.rows
        assert baseline["parameters"] == ablated["parameters"]

    def test_no_shared_needs_highlevel_stage(self, tiny_train_config):
        with pytest.raises(ValueError):
            ExperimentService(tiny_train_config, progress=False).ablate("no_shared")
