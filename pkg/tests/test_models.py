"""Tests for the MLP generator/discriminator pair.

The forward passes are checked against the straight-line numpy oracle in
oracles.py; parameter gradients against central finite differences.
"""

import numpy as np
import pytest

from srgan import autodiff as ad
from srgan.models import (
    Mlp,
    MlpSpec,
    discriminator_forward,
    discriminator_spec,
    dual_head,
    generator_forward,
    generator_spec,
    init_parameters,
    load_checkpoint,
    save_checkpoint,
)

from oracles import mlp_forward_plain, perturbed


class TestSpec:
    def test_defaults(self):
        d = discriminator_spec()
        assert d.widths == (50, 10, 10, 10, 10, 1)
        assert d.n_hidden == 4
        assert d.feature_layer == 3  # last hidden
        assert d.feature_dim == 10
        g = generator_spec()
        assert g.widths == (10, 10, 10, 10, 10, 50)
        assert g.output_dim == 50

    def test_dual_head_spec(self):
        d = discriminator_spec(output_dim=2)
        assert d.widths[-1] == 2

    def test_negative_feature_index_normalized(self):
        s = MlpSpec((5, 4, 3, 2), feature_layer=-2)
        assert s.feature_layer == 0

    def test_validation(self):
        with pytest.raises(ValueError):
            MlpSpec((5, 1))  # no hidden layer
        with pytest.raises(ValueError):
            MlpSpec((5, 0, 1))
        with pytest.raises(ValueError):
            MlpSpec((5, 4, 1), feature_layer=1)
        with pytest.raises(ValueError):
            MlpSpec((5, 4, 1), feature_layer=-2)


class TestInit:
    def test_biases_zero_and_weights_bounded(self):
        spec = discriminator_spec()
        params = init_parameters(spec, np.random.default_rng(0))
        assert len(params) == 2 * (len(spec.widths) - 1)
        for i, (n_in, n_out) in enumerate(zip(spec.widths, spec.widths[1:])):
            W, b = params[2 * i], params[2 * i + 1]
            assert W.shape == (n_in, n_out)
            assert b.shape == (1, n_out)
            assert np.all(b == 0.0)
            limit = np.sqrt(6.0 / (n_in + n_out))
            assert np.abs(W).max() <= limit

    def test_seed_determinism(self):
        spec = generator_spec()
        a = init_parameters(spec, np.random.default_rng(9))
        b = init_parameters(spec, np.random.default_rng(9))
        assert all(np.array_equal(x, y) for x, y in zip(a, b))
        c = init_parameters(spec, np.random.default_rng(10))
        assert any(not np.array_equal(x, y) for x, y in zip(a, c))

    def test_shape_mismatch_rejected(self):
        spec = MlpSpec((3, 4, 1))
        params = init_parameters(spec, np.random.default_rng(0))
        params[0] = np.zeros((3, 5))
        with pytest.raises(ValueError):
            Mlp(spec, params)


class TestForward:
    def test_zero_parameters_zero_prediction(self):
        spec = discriminator_spec()
        zeros = [np.zeros_like(p) for p in init_parameters(spec, np.random.default_rng(0))]
        d = Mlp(spec, zeros)
        x = np.random.default_rng(1).normal(size=(4, 50))
        tape = ad.Tape()
        pred, feats = discriminator_forward(d, x, tape)
        assert np.all(pred.value.data == 0.0)
        assert np.all(feats.value.data == 0.0)
        assert np.all(d.predict(x) == 0.0)

    def test_row_independence(self):
        d = Mlp.initialized(discriminator_spec(), np.random.default_rng(2))
        batch = np.random.default_rng(3).normal(size=(32, 50))
        pred_batch, _ = discriminator_forward(d, batch, ad.Tape())
        pred_one, _ = discriminator_forward(d, batch[7:8], ad.Tape())
        assert np.allclose(pred_batch.value.data[7:8], pred_one.value.data, atol=1e-12)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    @pytest.mark.parametrize("output_dim", [1, 2])
    def test_matches_plain_array_oracle(self, seed, output_dim):
        rng = np.random.default_rng(seed)
        spec = discriminator_spec(output_dim=output_dim)
        d = Mlp.initialized(spec, rng)
        x = rng.normal(size=(6, 50))
        pred, feats = discriminator_forward(d, x, ad.Tape())
        want_out, want_feats = mlp_forward_plain(d.params, x, spec.slope, spec.feature_layer)
        assert np.allclose(pred.value.data, want_out, atol=1e-12)
        assert np.allclose(feats.value.data, want_feats, atol=1e-12)

    def test_tape_and_numpy_paths_agree_exactly(self):
        rng = np.random.default_rng(4)
        d = Mlp.initialized(discriminator_spec(), rng)
        x = rng.normal(size=(5, 50))
        pred, feats = discriminator_forward(d, x, ad.Tape())
        out_np, feats_np = d.predict_with_features(x)
        assert np.array_equal(pred.value.data, out_np)
        assert np.array_equal(feats.value.data, feats_np)

    def test_width_mismatch_rejected(self):
        d = Mlp.initialized(discriminator_spec(), np.random.default_rng(0))
        with pytest.raises(ad.ShapeError):
            discriminator_forward(d, np.zeros((3, 49)), ad.Tape())
        with pytest.raises(ValueError):
            d.predict(np.zeros((3, 49)))

    def test_unbounded_output(self):
        # linear head: scaling the input scales the prediction without bound
        d = Mlp.initialized(discriminator_spec(), np.random.default_rng(5))
        x = np.random.default_rng(6).normal(size=(8, 50))
        big = d.predict(1e6 * x)
        assert np.abs(big).max() > 1.0


class TestGenerator:
    def test_zero_parameters_zero_output(self):
        spec = generator_spec()
        g = Mlp(spec, [np.zeros_like(p) for p in init_parameters(spec, np.random.default_rng(0))])
        fake = generator_forward(g, np.ones((3, 10)), ad.Tape())
        assert fake.value.shape == (3, 50)
        assert np.all(fake.value.data == 0.0)

    def test_same_noise_same_output(self):
        g = Mlp.initialized(generator_spec(), np.random.default_rng(1))
        z = np.random.default_rng(2).normal(size=(4, 10))
        a = generator_forward(g, z, ad.Tape())
        b = generator_forward(g, z, ad.Tape())
        assert np.array_equal(a.value.data, b.value.data)

    @pytest.mark.parametrize("n", [1, 2, 17])
    def test_output_shape(self, n):
        g = Mlp.initialized(generator_spec(), np.random.default_rng(1))
        fake = generator_forward(g, np.zeros((n, 10)), ad.Tape())
        assert fake.value.shape == (n, 50)

    def test_noise_width_mismatch_rejected(self):
        g = Mlp.initialized(generator_spec(), np.random.default_rng(1))
        with pytest.raises(ad.ShapeError):
            generator_forward(g, np.zeros((3, 11)), ad.Tape())


class TestDualHead:
    def test_split(self):
        d = Mlp.initialized(discriminator_spec(output_dim=2), np.random.default_rng(0))
        x = np.random.default_rng(1).normal(size=(5, 50))
        out, _ = discriminator_forward(d, x, ad.Tape())
        pred, logit = dual_head(out)
        full = d.predict(x)
        assert np.array_equal(pred.value.data, full[:, 0:1])
        assert np.array_equal(logit.value.data, full[:, 1:2])

    def test_rejects_single_output(self):
        d = Mlp.initialized(discriminator_spec(), np.random.default_rng(0))
        out, _ = discriminator_forward(d, np.zeros((2, 50)), ad.Tape())
        with pytest.raises(ad.ShapeError):
            dual_head(out)


class TestParameterGradients:
    def test_full_network_gradcheck_through_bind(self):
        # d(sum of predictions)/d(theta) for every parameter of a small net
        rng = np.random.default_rng(7)
        spec = MlpSpec((4, 3, 3, 1), slope=0.1, feature_layer=-1)
        m = Mlp.initialized(spec, rng)
        x = rng.normal(size=(5, 4))
        tape = ad.Tape()
        bound = m.bind(tape)
        out, _ = bound.forward(x)
        grads = ad.backward(tape, ad.sum(out))

        def loss_of(params):
            return mlp_forward_plain(params, x, spec.slope, spec.feature_layer)[0].sum()

        for i, leaf in enumerate(bound.leaves):
            analytic = grads[leaf.id].data
            numeric = np.zeros_like(m.params[i])
            it = np.nditer(numeric, flags=["multi_index"])
            while not it.finished:
                idx = it.multi_index
                numeric[idx] = (
                    loss_of(perturbed(m.params, i, idx, 1e-6))
                    - loss_of(perturbed(m.params, i, idx, -1e-6))
                ) / 2e-6
                it.iternext()
            assert np.allclose(analytic, numeric, rtol=1e-4, atol=1e-7)

    def test_binding_is_shared_across_forwards(self):
        # two forwards on one binding accumulate into the same leaves
        rng = np.random.default_rng(8)
        spec = MlpSpec((3, 2, 1))
        m = Mlp.initialized(spec, rng)
        xa = rng.normal(size=(2, 3))
        xb = rng.normal(size=(2, 3))

        tape = ad.Tape()
        bound = m.bind(tape)
        s = ad.add(ad.sum(bound.forward(xa)[0]), ad.sum(bound.forward(xb)[0]))
        combined = ad.backward(tape, s)

        def grad_on(x):
            t = ad.Tape()
            b = m.bind(t)
            return ad.backward(t, ad.sum(b.forward(x)[0])), b

        ga, ba = grad_on(xa)
        gb, bb = grad_on(xb)
        for i, leaf in enumerate(bound.leaves):
            want = ga[ba.leaves[i].id].data + gb[bb.leaves[i].id].data
            assert np.allclose(combined[leaf.id].data, want, atol=1e-12)

    def test_non_trainable_binding_yields_no_param_grads(self):
        m = Mlp.initialized(MlpSpec((3, 2, 1)), np.random.default_rng(0))
        tape = ad.Tape()
        bound = m.bind(tape, trainable=False)
        out, _ = bound.forward(np.ones((2, 3)))
        grads = ad.backward(tape, ad.sum(out))
        assert grads == {}


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(11)
        d = Mlp.initialized(discriminator_spec(output_dim=2), rng)
        path = tmp_path / "d.ckpt"
        save_checkpoint(d, path, seed=3, step=1234)
        loaded, meta = load_checkpoint(path)
        assert meta == {"seed": 3, "step": 1234}
        assert loaded.spec == d.spec
        assert all(np.array_equal(a, b) for a, b in zip(loaded.params, d.params))
        x = rng.normal(size=(4, 50))
        assert np.array_equal(loaded.predict(x), d.predict(x))

    def test_rejects_foreign_and_truncated_files(self, tmp_path):
        junk = tmp_path / "junk.ckpt"
        junk.write_bytes(b"hello world\n\n" + b"\x00" * 16)
        with pytest.raises(ValueError):
            load_checkpoint(junk)
        d = Mlp.initialized(MlpSpec((3, 2, 1)), np.random.default_rng(0))
        path = tmp_path / "d.ckpt"
        save_checkpoint(d, path, seed=0, step=0)
        blob = path.read_bytes()
        path.write_bytes(blob + b"\x00" * 8)
        with pytest.raises(ValueError):
            load_checkpoint(path)

    def test_copy_is_independent(self):
        d = Mlp.initialized(MlpSpec((3, 2, 1)), np.random.default_rng(0))
        c = d.copy()
        c.params[0][0, 0] += 1.0
        assert d.params[0][0, 0] != c.params[0][0, 0]
