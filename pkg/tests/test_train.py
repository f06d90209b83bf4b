import numpy as np
import pytest

import freqselect.train as train_mod
from freqselect.encoder import LinearProjectionEncoder, make_block_dct_encoder, make_linear_projection_encoder
from freqselect.errors import NumericalError, ValidationError
from freqselect.gate import GateParameters, fuse
from freqselect.regression import ridge_fit, ridge_predict
from freqselect.spectral import band_decompose, make_band_masks
from freqselect.synth import SynthConfig, gen_images, make_dataset
from freqselect.train import (
    Stage1Config,
    band_latents,
    infer_stage1,
    loss_and_gradient,
    stage1_gradient_images,
    stage1_loss,
    train_stage1,
)
from oracles import central_difference, latent_mse_loop

SMALL = (3, 16, 16)


@pytest.fixture(scope="module")
def small_data():
    cfg = SynthConfig(n_samples=120, shape=SMALL, gt_profile=[1, 1, 0, 0], voxel_dim=40, nu_max=8.0)
    return make_dataset(cfg)


def small_config(**kw):
    base = dict(n_bands=4, nu_max=8.0, epochs=15)
    base.update(kw)
    return Stage1Config(**base)


class TestLoss:
    def test_identical(self, rng):
        z = rng.normal(size=(4, 6))
        assert stage1_loss(z, z) == 0

    def test_hand_value(self):
        assert stage1_loss([[1.0, 2.0]], [[0.0, 0.0]]) == 5.0

    def test_scalar_loop(self, rng):
        zt, zp = rng.normal(size=(7, 9)), rng.normal(size=(7, 9))
        assert stage1_loss(zt, zp) == pytest.approx(latent_mse_loop(zt, zp), abs=1e-10)

    def test_empty_batch(self):
        with pytest.raises(ValidationError):
            stage1_loss(np.zeros((0, 3)), np.zeros((0, 3)))

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            stage1_loss(np.zeros((2, 3)), np.zeros((2, 4)))


class TestGradientPathway:
    @pytest.fixture
    def setup(self, small_data, rng):
        enc = make_linear_projection_encoder(0, SMALL, 12)
        masks = make_band_masks(16, 16, 4, 8.0)
        images, voxels = small_data.images[:40], small_data.voxels[:40]
        gate = GateParameters(rng.normal(size=4))
        lat = band_latents(images, enc, masks)
        model = ridge_fit(voxels, train_mod.gated_latents(lat, gate), 1.0)
        return enc, masks, images, voxels, gate, model, lat

    def test_band_latents_match_encoded_fusion(self, setup):
        enc, masks, images, _, gate, _, lat = setup
        for b in range(3):
            direct = enc.encode(fuse(band_decompose(images[b], masks), gate))
            np.testing.assert_allclose(train_mod.gated_latents(lat[b : b + 1], gate)[0], direct, atol=1e-12)

    def test_matches_finite_differences(self, setup):
        enc, masks, images, voxels, gate, model, lat = setup
        z_pred = ridge_predict(model, voxels)
        decomps = [band_decompose(x, masks) for x in images]

        def forward(w):
            g = GateParameters(w)
            z = np.stack([enc.encode(fuse(d, g)) for d in decomps])
            return stage1_loss(z, z_pred)

        numeric = central_difference(forward, gate.w, 1e-5)
        _, analytic = loss_and_gradient(lat, voxels, gate, model)
        assert np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric) < 1e-4

    def test_image_space_route_agrees(self, setup):
        enc, masks, images, voxels, gate, model, lat = setup
        loss_a, grad_a = loss_and_gradient(lat, voxels, gate, model)
        loss_b, grad_b = stage1_gradient_images(images, voxels, enc, masks, gate, model)
        assert loss_a == pytest.approx(loss_b, rel=1e-10)
        np.testing.assert_allclose(grad_a, grad_b, rtol=1e-8, atol=1e-14)

    def test_block_dct_route(self, small_data, rng):
        enc = make_block_dct_encoder(SMALL, 4, 3)
        masks = make_band_masks(16, 16, 4, 8.0)
        images, voxels = small_data.images[:30], small_data.voxels[:30]
        gate = GateParameters(rng.normal(size=4))
        lat = band_latents(images, enc, masks)
        model = ridge_fit(voxels, train_mod.gated_latents(lat, gate), 1.0)
        _, grad_a = loss_and_gradient(lat, voxels, gate, model)
        _, grad_b = stage1_gradient_images(images, voxels, enc, masks, gate, model)
        np.testing.assert_allclose(grad_a, grad_b, rtol=1e-8, atol=1e-14)


class TestTraining:
    def test_zero_learning_rate_keeps_weights(self, small_data):
        enc = make_linear_projection_encoder(0, SMALL, 8)
        gate, _, traj = train_stage1(
            small_data.images, small_data.voxels, enc, small_config(learning_rate=0.0)
        )
        assert np.array_equal(gate.w, np.ones(4))
        assert all(np.array_equal(r.w, np.ones(4)) for r in traj.records)

    def test_zero_learning_rate_sgd(self, small_data):
        enc = make_linear_projection_encoder(0, SMALL, 8)
        gate, _, _ = train_stage1(
            small_data.images, small_data.voxels, enc, small_config(learning_rate=0.0, optimizer="sgd")
        )
        assert np.array_equal(gate.w, np.ones(4))

    def test_deterministic(self, small_data):
        enc = make_linear_projection_encoder(0, SMALL, 8)
        runs = [train_stage1(small_data.images, small_data.voxels, enc, small_config(batch_size=32)) for _ in range(2)]
        assert runs[0][2].to_csv() == runs[1][2].to_csv()
        assert np.array_equal(runs[0][0].w, runs[1][0].w)

    def test_trajectory_shape(self, small_data):
        enc = make_linear_projection_encoder(0, SMALL, 8)
        _, _, traj = train_stage1(small_data.images, small_data.voxels, enc, small_config(epochs=5))
        assert len(traj) == 5
        assert [r.epoch for r in traj.records] == list(range(5))
        lines = traj.to_csv().splitlines()
        assert lines[0] == (
            "epoch,loss_train,loss_heldout,w_0,w_1,w_2,w_3,alpha_0,alpha_1,alpha_2,alpha_3"
        )
        assert len(lines) == 6
        assert traj.alpha.shape == (5, 4)

    def test_ridge_refresh_interval(self, small_data):
        enc = make_linear_projection_encoder(0, SMALL, 8)
        _, model_1, _ = train_stage1(small_data.images, small_data.voxels, enc, small_config(epochs=4))
        _, model_9, _ = train_stage1(
            small_data.images, small_data.voxels, enc, small_config(epochs=4, ridge_refresh_every=9)
        )
        assert not np.allclose(model_1.weights, model_9.weights)

    def test_divergence_guard(self, small_data, monkeypatch):
        enc = make_linear_projection_encoder(0, SMALL, 8)
        real = train_mod.loss_and_gradient
        calls = {"n": 0}

        def exploding(*args):
            loss, grad = real(*args)
            calls["n"] += 1
            return loss * 10.0 ** (7 * (calls["n"] - 1)), grad

        monkeypatch.setattr(train_mod, "loss_and_gradient", exploding)
        with pytest.raises(NumericalError, match="diverged at epoch 1"):
            train_stage1(small_data.images, small_data.voxels, enc, small_config())

    def test_recovers_profile_n4(self):
        cfg = SynthConfig(n_samples=640, shape=(1, 16, 16), gt_profile=[1, 1, 0, 0], voxel_dim=96, nu_max=8.0)
        ds = make_dataset(cfg)
        enc = make_linear_projection_encoder(0, cfg.shape, 32)
        gate, _, traj = train_stage1(ds.images, ds.voxels, enc, Stage1Config(n_bands=4, nu_max=8.0))
        assert np.all(gate.alpha[:2] > 0.7)
        assert np.all(gate.alpha[2:] < 0.3)
        assert traj[-1].loss_train < traj[0].loss_train

    def test_identity_encoder_heldout_improves(self):
        cfg = SynthConfig(n_samples=300, shape=(1, 8, 8), gt_profile=[1] * 4, nu_max=4.0)
        images = gen_images(cfg)
        voxels = images.reshape(300, -1).copy()
        enc = LinearProjectionEncoder(np.eye(64), cfg.shape)
        _, _, traj = train_stage1(
            images, voxels, enc, Stage1Config(n_bands=4, nu_max=4.0, epochs=100, ridge_lambda=1e-6)
        )
        assert traj[-1].loss_heldout < traj[0].loss_heldout
        assert traj[0].loss_heldout < 1e-12

    @pytest.mark.parametrize(
        "kw", [{"epochs": 0}, {"learning_rate": -1}, {"optimizer": "rmsprop"}, {"mask_mode": "x"}, {"batch_size": 0}]
    )
    def test_config_validation(self, kw):
        with pytest.raises(ValidationError):
            Stage1Config(**kw)

    def test_input_validation(self, small_data):
        enc = make_linear_projection_encoder(0, SMALL, 8)
        with pytest.raises(ValidationError):
            train_stage1(small_data.images, small_data.voxels[:-1], enc, small_config())
        with pytest.raises(ValidationError):
            train_stage1(small_data.images[:0], small_data.voxels[:0], enc, small_config())


class TestInfer:
    def test_delegates_to_ridge(self, rng):
        X, Z = rng.normal(size=(30, 5)), rng.normal(size=(30, 3))
        m = ridge_fit(X, Z, 0.5)
        np.testing.assert_array_equal(infer_stage1(X, m), ridge_predict(m, X))

    def test_noiseless_heldout_recovery(self, rng):
        # voxels are an invertible linear function of the latents
        Z = rng.normal(size=(80, 6))
        A = rng.normal(size=(6, 10))
        X = Z @ A
        m = ridge_fit(X[:60], Z[:60], 1e-10)
        np.testing.assert_allclose(infer_stage1(X[60:], m), Z[60:], atol=1e-6)

    def test_noise_voxels_predict_mean(self, rng):
        X = rng.normal(size=(200, 30))
        Z = rng.normal(size=(200, 4)) + 2
        m = ridge_fit(X, Z, 1e6)
        pred = infer_stage1(rng.normal(size=(10, 30)), m)
        np.testing.assert_allclose(pred, np.broadcast_to(Z.mean(axis=0), pred.shape), atol=0.02)
