import numpy as np
import pytest

from inpaintkit.masking import central_mask, random_blocks_mask, apply_mask
from inpaintkit.nn import network as N
from inpaintkit.nn.checkpoint import read_checkpoint, write_checkpoint
from inpaintkit.nn.train import TrainConfig, train_context_encoder, evaluate_masked_mse
from inpaintkit.masking import make_sampler


class TestEncode:
    def setup_method(self):
        self.rng = np.random.default_rng(0)
        self.spec = N.context_encoder_spec(16)
        self.params = N.init_params(self.spec, self.rng)
        self.image = self.rng.uniform(-1, 1, (3, 16, 16)).astype(np.float32)

    def test_identical_inputs_give_identical_latents(self):
        a = N.encode(self.spec, self.params, self.image)
        b = N.encode(self.spec, self.params, self.image)
        np.testing.assert_array_equal(a, b)

    def test_different_masks_give_different_latents(self):
        m1 = central_mask(16, 16, 0.25)
        m2 = random_blocks_mask(16, 16, 0.25, (3, 6), np.random.default_rng(5))
        a = N.encode(self.spec, self.params, apply_mask(self.image, m1, 0.0))
        b = N.encode(self.spec, self.params, apply_mask(self.image, m2, 0.0))
        assert (a != b).any()

    def test_latent_dim_matches_bottleneck_product(self):
        lat = N.encode(self.spec, self.params, self.image)
        idx = self.spec.bottleneck_index
        c, h, w = self.spec.layer_shapes()[idx]
        assert lat.shape == (c * h * w,)
        assert lat.shape == (self.spec.latent_dim,)

    def test_encode_rejects_batches(self):
        with pytest.raises(ValueError, match="single"):
            N.encode(self.spec, self.params, np.zeros((2, 3, 16, 16)))

    def test_latent_equals_truncated_forward(self):
        outs = N.layer_outputs(self.spec, self.params, self.image)
        lat = N.encode(self.spec, self.params, self.image)
        np.testing.assert_array_equal(lat, outs[self.spec.bottleneck_index].reshape(-1))


class TestCheckpoint:
    def test_round_trip_exact_float32(self, tmp_path):
        rng = np.random.default_rng(1)
        spec = N.context_encoder_spec(16)
        params = N.init_params(spec, rng, np.float32)
        path = tmp_path / "net.cepk"
        write_checkpoint(path, spec, params, config={"epochs": 3}, seed=7,
                         extra={"normalization": {"scale": 127.5, "offset": -1.0}})
        ck = read_checkpoint(path)
        assert ck.spec == spec
        assert ck.header["seed"] == 7
        assert ck.header["config"] == {"epochs": 3}
        assert ck.header["normalization"] == {"scale": 127.5, "offset": -1.0}
        for a, b in zip(ck.params, params):
            if a is None:
                assert b is None
                continue
            np.testing.assert_array_equal(a["w"], b["w"])
            np.testing.assert_array_equal(a["b"], b["b"])

    def test_write_is_byte_deterministic(self, tmp_path):
        rng = np.random.default_rng(2)
        spec = N.discriminator_spec(16)
        params = N.init_params(spec, rng, np.float32)
        write_checkpoint(tmp_path / "a.cepk", spec, params, seed=1)
        write_checkpoint(tmp_path / "b.cepk", spec, params, seed=1)
        assert (tmp_path / "a.cepk").read_bytes() == (tmp_path / "b.cepk").read_bytes()

    def test_magic_validated(self, tmp_path):
        path = tmp_path / "junk.cepk"
        path.write_bytes(b"JUNKxxxxxxxx")
        with pytest.raises(ValueError, match="magic"):
            read_checkpoint(path)

    def test_loaded_params_run_forward(self, tmp_path):
        rng = np.random.default_rng(3)
        spec = N.context_encoder_spec(16)
        params = N.init_params(spec, rng, np.float32)
        x = rng.uniform(-1, 1, (3, 16, 16)).astype(np.float32)
        y0, _ = N.forward(spec, params, x)
        write_checkpoint(tmp_path / "n.cepk", spec, params)
        ck = read_checkpoint(tmp_path / "n.cepk")
        y1, _ = N.forward(ck.spec, ck.params, x)
        np.testing.assert_array_equal(y0, y1)


class TestTraining:
    def _tiny_images(self, count=8, size=16, seed=0):
        rng = np.random.default_rng(seed)
        return [rng.uniform(-1, 1, (3, size, size)).astype(np.float32) for _ in range(count)]

    def test_smoke_one_epoch_writes_log(self, tmp_path):
        images = self._tiny_images()
        spec = N.context_encoder_spec(16)
        cfg = TrainConfig(epochs=1, batch_size=4, seed=0)
        sampler = make_sampler("central", 16, 16)
        result = train_context_encoder(images, spec, cfg, sampler, 0.0,
                                       log_path=tmp_path / "log.jsonl")
        assert len(result.history) == 1
        assert {"epoch", "rec_loss", "adv_loss", "wall_time_s"} <= set(result.history[0])
        lines = (tmp_path / "log.jsonl").read_text().splitlines()
        assert len(lines) == 1

    def test_training_is_bit_deterministic(self):
        images = self._tiny_images()
        sampler = make_sampler("random_blocks", 16, 16, side_range=(3, 6))
        outs = []
        for _ in range(2):
            spec = N.context_encoder_spec(16)
            cfg = TrainConfig(epochs=2, batch_size=4, seed=11)
            result = train_context_encoder(images, spec, cfg, sampler, 0.0)
            outs.append(np.concatenate([p["w"].ravel() for p in result.params if p]))
        np.testing.assert_array_equal(outs[0], outs[1])

    def test_training_reduces_heldout_masked_mse(self):
        rng = np.random.default_rng(4)
        from inpaintkit.imaging import synth_dataset, dataset_mean_color

        ds = synth_dataset(48, 16, seed=4, val_count=8)
        fill = dataset_mean_color(ds).astype(np.float32)
        spec = N.context_encoder_spec(16)
        sampler = make_sampler("central", 16, 16)
        cfg = TrainConfig(epochs=0, batch_size=8, seed=1)
        untrained = train_context_encoder(ds.train, spec, cfg, sampler, fill)
        before = evaluate_masked_mse(ds.val, spec, untrained.params, sampler, fill, seed=9)
        cfg = TrainConfig(epochs=10, batch_size=8, seed=1)
        trained = train_context_encoder(ds.train, spec, cfg, sampler, fill)
        after = evaluate_masked_mse(ds.val, spec, trained.params, sampler, fill, seed=9)
        assert after < before

    def test_adversarial_mode_runs_and_logs(self, tmp_path):
        images = self._tiny_images(count=8)
        spec = N.context_encoder_spec(16)
        disc = N.discriminator_spec(16)
        cfg = TrainConfig(epochs=1, batch_size=4, seed=0,
                          lambda_adv=0.001, adversarial_enabled=True)
        result = train_context_encoder(images, spec, cfg, make_sampler("central", 16, 16),
                                       0.0, disc_spec=disc)
        assert result.history[0]["adv_loss"] > 0.0
        assert result.disc_params is not None

    def test_adversarial_needs_discriminator(self):
        cfg = TrainConfig(epochs=1, lambda_adv=0.001, adversarial_enabled=True)
        with pytest.raises(ValueError, match="discriminator"):
            train_context_encoder(self._tiny_images(), N.context_encoder_spec(16),
                                  cfg, make_sampler("central", 16, 16), 0.0)
