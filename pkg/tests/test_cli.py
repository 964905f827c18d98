import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image as PILImage

from inpaintkit.cli import main
from inpaintkit.imaging import load_png
from inpaintkit.masking import Mask, save_mask_png
from inpaintkit.nn import layers as L


def tree_digest(root, skip_configs=False) -> dict:
    out = {}
    for p in sorted(Path(root).rglob("*")):
        if p.is_file():
            if skip_configs and p.name.endswith("_config.txt"):
                continue  # resolved configs record the differing out_dir
            out[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    code = main(["gen-data", "--out", str(root), "--count", "24", "--size", "16",
                 "--val-count", "8", "--seed", "1"])
    assert code == 0
    return root


@pytest.fixture(scope="module")
def trained(tmp_path_factory, data_dir):
    out = tmp_path_factory.mktemp("train")
    code = main([
        "train", "--data", str(data_dir), "--out", str(out),
        "--stages", "1,2,single", "--epochs", "1", "--batch-size", "8", "--seed", "0",
    ])
    assert code == 0
    return out


class TestGenData:
    def test_layout_and_manifest(self, data_dir):
        assert (data_dir / "manifest.json").exists()
        assert len(list((data_dir / "train").glob("*.png"))) == 16
        assert len(list((data_dir / "val").glob("*.png"))) == 8
        assert (data_dir / "gen_data_config.txt").exists()

    def test_rerun_from_resolved_config_is_bit_identical(self, data_dir):
        before = tree_digest(data_dir)
        # the resolved config alone reproduces the run, including out_dir
        assert main(["gen-data", "--config", str(data_dir / "gen_data_config.txt")]) == 0
        assert tree_digest(data_dir) == before

    def test_odd_size_rejected_with_message(self, tmp_path, capsys):
        code = main(["gen-data", "--out", str(tmp_path / "x"), "--count", "4",
                     "--size", "15"])
        assert code == 1
        assert "even" in capsys.readouterr().err

    def test_unknown_command_is_usage_error(self):
        assert main(["frobnicate"]) == 1

    def test_no_command_prints_help(self, capsys):
        assert main([]) == 1
        assert "usage" in capsys.readouterr().out.lower()


class TestTrain:
    def test_outputs_exist(self, trained):
        assert (trained / "stage1.cepk").exists()
        assert (trained / "cascade" / "stage1.cepk").exists()
        assert (trained / "cascade" / "stage2.cepk").exists()
        assert (trained / "cascade" / "manifest.json").exists()
        assert (trained / "single.cepk").exists()
        assert (trained / "train_config.txt").exists()

    def test_embedded_stage1_matches_standalone(self, trained):
        a = (trained / "stage1.cepk").read_bytes()
        b = (trained / "cascade" / "stage1.cepk").read_bytes()
        assert hashlib.sha256(a).hexdigest() == hashlib.sha256(b).hexdigest()

    def test_epoch_logs_are_jsonl(self, trained):
        for name in ("stage1_log.jsonl", "stage2_log.jsonl", "single_log.jsonl"):
            lines = (trained / name).read_text().splitlines()
            assert len(lines) == 1
            record = json.loads(lines[0])
            assert {"epoch", "rec_loss", "adv_loss", "wall_time_s"} <= set(record)

    def test_stage2_without_stage1_rejected(self, data_dir, tmp_path):
        code = main(["train", "--data", str(data_dir), "--out", str(tmp_path / "t"),
                     "--stages", "2"])
        assert code == 1

    def test_bad_stage_token_rejected(self, data_dir, tmp_path):
        assert main(["train", "--data", str(data_dir), "--out", str(tmp_path / "t"),
                     "--stages", "3"]) == 1

    def test_missing_dataset_is_usage_error(self, tmp_path):
        assert main(["train", "--data", str(tmp_path / "nope"), "--out",
                     str(tmp_path / "t"), "--stages", "1"]) == 1

    def test_smoke_config_completes_in_under_a_minute(self, tmp_path):
        import time

        data = tmp_path / "smoke_data"
        assert main(["gen-data", "--out", str(data), "--count", "8", "--size", "16",
                     "--val-count", "0", "--seed", "0"]) == 0
        t0 = time.perf_counter()
        assert main(["train", "--data", str(data), "--out", str(tmp_path / "smoke"),
                     "--stages", "1,2,single", "--epochs", "1", "--batch-size", "8"]) == 0
        assert time.perf_counter() - t0 < 60.0


class TestEvalNsd:
    def test_compare_two_models_and_reproducibility(self, data_dir, trained, tmp_path):
        out1, out2 = tmp_path / "e1", tmp_path / "e2"
        args = ["eval-nsd", "--data", str(data_dir),
                "--ckpt", f"cascade={trained / 'cascade'}",
                "--ckpt", f"single={trained / 'single.cepk'}",
                "--n", "6", "--k", "3", "--seed", "5", "--threads", "1"]
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert tree_digest(out1, skip_configs=True) == tree_digest(out2, skip_configs=True)
        report = (out1 / "report.txt").read_text()
        assert report.count("nsd = ") == 2
        assert "cascade" in report and "single" in report
        assert "masks=random_blocks" in report
        assert (out1 / "cascade" / "records.jsonl").exists()
        assert len(list((out1 / "single" / "latents").glob("*.ltnt"))) == 3
        for line in (out1 / "cascade" / "records.jsonl").read_text().splitlines():
            assert json.loads(line)["nsd"] > 0.0

    def test_identical_model_compared_with_itself(self, data_dir, trained, tmp_path):
        out = tmp_path / "self"
        assert main(["eval-nsd", "--data", str(data_dir),
                     "--ckpt", f"a={trained / 'single.cepk'}",
                     "--ckpt", f"b={trained / 'single.cepk'}",
                     "--n", "4", "--k", "2", "--out", str(out)]) == 0
        a = json.loads((out / "a" / "records.jsonl").read_text().splitlines()[0])
        b = json.loads((out / "b" / "records.jsonl").read_text().splitlines()[0])
        assert a == b

    def test_incompatible_latent_dims_runtime_error(self, data_dir, trained, tmp_path):
        narrow = tmp_path / "narrow"
        assert main(["train", "--data", str(data_dir), "--out", str(narrow),
                     "--stages", "single", "--epochs", "1",
                     "--config", str(_narrow_cfg(tmp_path))]) == 0
        code = main(["eval-nsd", "--data", str(data_dir),
                     "--ckpt", f"a={trained / 'single.cepk'}",
                     "--ckpt", f"b={narrow / 'single.cepk'}",
                     "--n", "4", "--k", "2", "--out", str(tmp_path / "bad")])
        assert code == 2

    def test_requires_checkpoints(self, data_dir, tmp_path):
        assert main(["eval-nsd", "--data", str(data_dir),
                     "--out", str(tmp_path / "x")]) == 1

    def test_rescore_from_latent_dumps(self, data_dir, trained, tmp_path):
        first = tmp_path / "first"
        assert main(["eval-nsd", "--data", str(data_dir),
                     "--ckpt", f"single={trained / 'single.cepk'}",
                     "--n", "6", "--k", "3", "--seed", "5",
                     "--out", str(first)]) == 0
        manifest = first / "single" / "latents" / "manifest.txt"
        rescored = tmp_path / "rescored"
        assert main(["eval-nsd", "--from-latents", f"single={manifest}",
                     "--out", str(rescored)]) == 0
        line = lambda p: [l for l in (p / "report.txt").read_text().splitlines()
                          if "nsd = " in l][0].split("nsd = ")[1]
        assert line(first) == line(rescored)


def _narrow_cfg(tmp_path):
    path = tmp_path / "narrow.cfg"
    path.write_text("channels = 8, 16, 32\n")
    return path


class TestInpaint:
    def test_writes_panels_with_preserved_context(self, data_dir, trained, tmp_path):
        out = tmp_path / "panels"
        assert main(["inpaint", "--data", str(data_dir),
                     "--ckpt", str(trained / "cascade"),
                     "--count", "3", "--out", str(out), "--seed", "2"]) == 0
        panels = sorted(out.glob("*_panel.png"))
        assert len(panels) == 3
        panel = load_png(panels[0])
        w = panel.shape[2] // 4
        original, masked, coarse, final = (
            panel[:, :, i * w : (i + 1) * w] for i in range(4)
        )
        # central strategy: context ring identical in all but the masked column
        from inpaintkit.masking import central_mask

        ctx = central_mask(16, 16, 0.25).bits == 0
        np.testing.assert_array_equal(original[:, ctx], coarse[:, ctx])
        np.testing.assert_array_equal(original[:, ctx], final[:, ctx])

    def test_empty_mask_gives_identity_columns(self, data_dir, trained, tmp_path):
        mask_png = tmp_path / "empty.png"
        save_mask_png(Mask(np.zeros((16, 16), dtype=np.uint8)), mask_png)
        out = tmp_path / "empty_out"
        assert main(["inpaint", "--data", str(data_dir),
                     "--ckpt", str(trained / "single.cepk"),
                     "--count", "1", "--out", str(out),
                     "--mask-png", str(mask_png)]) == 0
        panel = load_png(next(out.glob("*_panel.png")))
        w = panel.shape[2] // 4
        original = panel[:, :, :w]
        final = panel[:, :, 3 * w :]
        np.testing.assert_array_equal(original, final)


class TestGradCheckCommand:
    def test_stock_build_exits_zero(self, capsys):
        assert main(["grad-check"]) == 0
        out = capsys.readouterr().out
        for component in ("conv", "tconv", "cwfc", "relu", "leaky_relu", "tanh",
                          "sigmoid", "joint_generator", "cascade_rec"):
            assert component in out

    def test_sign_flip_mutation_exits_nonzero(self, monkeypatch):
        original = L.tanh_backward
        monkeypatch.setattr(L, "tanh_backward", lambda dy, cache: -original(dy, cache))
        assert main(["grad-check"]) == 3


class TestMaskPreview:
    def test_writes_masks_and_coverage(self, tmp_path, capsys):
        out = tmp_path / "masks"
        assert main(["mask-preview", "--strategy", "random_blocks", "--size", "32",
                     "--count", "4", "--seed", "9", "--out", str(out)]) == 0
        files = sorted(out.glob("mask_*.png"))
        assert len(files) == 4
        with PILImage.open(files[0]) as im:
            assert im.mode == "1"  # one bit per pixel
            values = set(np.asarray(im.convert("L")).ravel().tolist())
        assert values <= {0, 255}
        assert "coverage" in capsys.readouterr().out
