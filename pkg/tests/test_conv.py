import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hebbpca import rules
from hebbpca.conv import (
    CenteringStats,
    HebbianLayer,
    Rule,
    apply_update,
    conv_hebbian_step,
    layer_forward,
    layer_forward_batch,
    layer_objective,
    update_centering,
)
from hebbpca.errors import DimensionError, DivergenceError
from hebbpca.nn_core import conv_forward, extract_patches, extract_patches_batch


def make_layer(f=4, c=2, k=3, stride=1, padding=0, rule="hpca-relu", seed=0, mean=None):
    d = c * k * k
    rng = np.random.default_rng(seed)
    w = rules.init_weights(f, d, rng)
    centering = None if mean is None else CenteringStats(np.asarray(mean, float), 1)
    return HebbianLayer(w, Rule.parse(rule), (k, k), stride, padding, c, centering, "conv_test")


def enumerated_oracle(layer, batch, eta):
    """Mean of the dense rule applied to each patch in batch-major, row-major order."""
    deltas = []
    for img in batch:
        for p in extract_patches(img, layer.kernel, layer.stride, layer.padding).data:
            x = p - layer.centering.mean
            if layer.rule.kind == "wta":
                deltas.append(rules.wta_update(layer.weights, x, eta))
            else:
                deltas.append(rules.hpca_update(layer.weights, x[None], layer.rule.f, eta))
    return np.mean(deltas, axis=0)


class TestRule:
    @pytest.mark.parametrize("text,kind,f", [("hpca", "hpca", "relu"), ("hpca-identity", "hpca", "identity"),
                                             ("hpca-relu", "hpca", "relu"), ("wta", "wta", "relu")])
    def test_parse(self, text, kind, f):
        r = Rule.parse(text)
        assert (r.kind, r.f.value) == (kind, f)

    @pytest.mark.parametrize("text", ["pca", "hpca-tanh", "wta-relu"])
    def test_parse_rejects(self, text):
        with pytest.raises(ValueError):
            Rule.parse(text)

    def test_str_round_trip(self):
        for t in ("hpca-relu", "hpca-identity", "wta"):
            assert str(Rule.parse(t)) == t


class TestCentering:
    def test_single_patch(self):
        p = np.array([[1.0, -2.0, 3.0]])
        s = update_centering(CenteringStats.empty(3), p)
        np.testing.assert_array_equal(s.mean, p[0])
        assert s.count == 1

    def test_empty_is_zero(self):
        s = CenteringStats.empty(4)
        assert s.count == 0 and np.all(s.mean == 0)

    def test_two_batches_vs_concatenation(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=(37, 5)), rng.normal(size=(91, 5)) + 3
        s = update_centering(update_centering(CenteringStats.empty(5), a), b)
        t = update_centering(CenteringStats.empty(5), np.vstack([a, b]))
        np.testing.assert_allclose(s.mean, t.mean, atol=1e-12)
        assert s.count == t.count == 128

    def test_direct_mean(self):
        x = np.random.default_rng(2).normal(size=(1000, 6)) * 5 + 2
        s = CenteringStats.empty(6)
        for chunk in np.array_split(x, 13):
            s = update_centering(s, chunk)
        np.testing.assert_allclose(s.mean, x.mean(axis=0), atol=1e-12)

    def test_accepts_patch_matrix_and_batches(self):
        imgs = np.random.default_rng(3).normal(size=(4, 2, 6, 6))
        cols = extract_patches_batch(imgs, 3)
        s = update_centering(CenteringStats.empty(18), cols)
        s2 = CenteringStats.empty(18)
        for im in imgs:
            s2 = update_centering(s2, extract_patches(im, 3))
        np.testing.assert_allclose(s.mean, s2.mean, atol=1e-12)
        assert s.count == 4 * 16

    def test_full_pass_matches_dataset_patch_mean(self):
        imgs = np.random.default_rng(4).uniform(0, 1, size=(50, 3, 8, 8))
        s = CenteringStats.empty(27)
        for i in range(0, 50, 16):
            s = update_centering(s, extract_patches_batch(imgs[i : i + 16], 3, 1, 1))
        ref = extract_patches_batch(imgs, 3, 1, 1).reshape(-1, 27).mean(axis=0)
        np.testing.assert_allclose(s.mean, ref, atol=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            update_centering(CenteringStats.empty(3), np.zeros((2, 4)))


class TestLayer:
    def test_width_checked(self):
        with pytest.raises(DimensionError):
            HebbianLayer(np.zeros((2, 10)), Rule(), (3, 3), in_channels=1)

    def test_output_shape(self):
        layer = make_layer(f=5, c=3, k=5, padding=2)
        assert layer.output_shape((3, 32, 32)) == (5, 32, 32)
        with pytest.raises(DimensionError):
            layer.output_shape((2, 32, 32))

    def test_dense_layer(self):
        layer = HebbianLayer(np.eye(3)[:2], Rule())
        assert not layer.is_conv
        assert layer.output_shape((3,)) == (2,)
        np.testing.assert_array_equal(layer_forward(layer, np.array([1.0, 2.0, 3.0])), [1, 2])


class TestConvHebbianStep:
    def test_single_patch_equals_dense_rule_exactly(self):
        rng = np.random.default_rng(0)
        mean = rng.normal(size=18)
        layer = make_layer(c=2, k=3, mean=mean)
        img = rng.normal(size=(1, 2, 3, 3))
        x = img.reshape(1, -1) - mean
        got = conv_hebbian_step(layer, img, 0.01)
        assert np.array_equal(got, rules.hpca_update(layer.weights, x, "relu", 0.01))

    def test_single_patch_wta_exact(self):
        rng = np.random.default_rng(1)
        layer = make_layer(c=1, k=2, rule="wta")
        img = rng.normal(size=(1, 1, 2, 2))
        assert np.array_equal(conv_hebbian_step(layer, img, 0.3), rules.wta_update(layer.weights, img.ravel(), 0.3))

    def test_constant_image_centered_to_zero(self):
        layer = make_layer(c=1, k=3, mean=np.full(9, 0.7))
        img = np.full((2, 1, 6, 6), 0.7)
        assert np.all(conv_hebbian_step(layer, img, 0.1) == 0)

    @pytest.mark.parametrize("rule", ["hpca-relu", "hpca-identity", "wta"])
    def test_two_images_3x3_on_5x5(self, rule):
        rng = np.random.default_rng(5)
        layer = make_layer(f=3, c=2, k=3, rule=rule, mean=rng.normal(size=18) * 0.1)
        batch = rng.normal(size=(2, 2, 5, 5))
        np.testing.assert_allclose(conv_hebbian_step(layer, batch, 0.05), enumerated_oracle(layer, batch, 0.05),
                                   rtol=0, atol=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(1, 2), st.integers(0, 1),
           st.integers(4, 7), st.sampled_from(["hpca-relu", "hpca-identity", "wta"]), st.integers(0, 10**6))
    def test_property_conv_dense_equivalence(self, b, c, k, s, p, size, rule, seed):
        rng = np.random.default_rng(seed)
        layer = make_layer(f=rng.integers(1, 5), c=c, k=k, stride=s, padding=p, rule=rule, seed=seed,
                           mean=rng.normal(size=c * k * k) * 0.2)
        batch = rng.normal(size=(b, c, size, size))
        np.testing.assert_allclose(conv_hebbian_step(layer, batch, 0.02), enumerated_oracle(layer, batch, 0.02),
                                   rtol=0, atol=1e-12)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(6)
        layer = make_layer(f=4, c=3, k=3, padding=1)
        batch = rng.normal(size=(6, 3, 8, 8))
        perm = rng.permutation(6)
        np.testing.assert_allclose(conv_hebbian_step(layer, batch, 0.01), conv_hebbian_step(layer, batch[perm], 0.01),
                                   rtol=0, atol=1e-12)

    def test_homogeneous_in_eta(self):
        rng = np.random.default_rng(7)
        layer = make_layer()
        batch = rng.normal(size=(3, 2, 6, 6))
        np.testing.assert_allclose(conv_hebbian_step(layer, batch, 0.04), 4 * conv_hebbian_step(layer, batch, 0.01),
                                   rtol=1e-12, atol=1e-17)

    def test_weights_not_mutated(self):
        layer = make_layer()
        w0 = layer.weights.copy()
        conv_hebbian_step(layer, np.random.default_rng(8).normal(size=(2, 2, 5, 5)), 0.1)
        np.testing.assert_array_equal(layer.weights, w0)

    def test_deterministic(self):
        layer = make_layer()
        batch = np.random.default_rng(9).normal(size=(4, 2, 9, 9))
        assert np.array_equal(conv_hebbian_step(layer, batch, 0.1), conv_hebbian_step(layer, batch, 0.1))

    def test_errors(self):
        layer = make_layer(c=2)
        with pytest.raises(DimensionError):
            conv_hebbian_step(layer, np.zeros((1, 3, 5, 5)), 0.1)
        with pytest.raises(ValueError):
            conv_hebbian_step(layer, np.zeros((1, 2, 5, 5)), 0.0)
        bad = np.zeros((1, 2, 5, 5))
        bad[0, 0, 2, 2] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            conv_hebbian_step(layer, bad, 0.1)


class TestApplyUpdate:
    def test_zero_delta(self):
        layer = make_layer()
        out = apply_update(layer, np.zeros_like(layer.weights))
        np.testing.assert_array_equal(out.weights, layer.weights)

    def test_inverse(self):
        layer = make_layer()
        d = np.random.default_rng(0).normal(size=layer.weights.shape) * 1e-3
        back = apply_update(apply_update(layer, d), -d)
        np.testing.assert_allclose(back.weights, layer.weights, rtol=0, atol=1e-15)

    def test_does_not_mutate(self):
        layer = make_layer()
        w0 = layer.weights.copy()
        apply_update(layer, np.ones_like(w0))
        np.testing.assert_array_equal(layer.weights, w0)

    def test_divergence_names_layer(self):
        layer = make_layer()
        d = np.zeros_like(layer.weights)
        d[0, 0] = np.inf
        with pytest.raises(DivergenceError, match="conv_test"):
            apply_update(layer, d)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            apply_update(make_layer(), np.zeros((1, 1)))

    def test_random_sequence_keeps_invariants(self):
        rng = np.random.default_rng(3)
        layer = make_layer(f=3, c=1, k=3, padding=1)
        stats = CenteringStats.empty(9)
        for _ in range(30):
            batch = rng.normal(size=(2, 1, 6, 6))
            stats = update_centering(stats, layer.patches(batch))
            layer = dataclasses.replace(layer, centering=stats)
            layer = apply_update(layer, conv_hebbian_step(layer, batch, 0.05))
            assert layer.weights.shape == (3, 9)
            assert np.all(np.isfinite(layer.weights))
            assert np.all(np.isfinite(layer.centering.mean))


class TestForward:
    def test_zero_weights(self):
        layer = dataclasses.replace(make_layer(), weights=np.zeros((4, 18)))
        assert np.all(layer_forward(layer, np.ones((2, 5, 5))) == 0)

    def test_selector_kernel(self):
        w = np.zeros((1, 4))
        w[0, 0] = 1.0
        layer = HebbianLayer(w, Rule(), (2, 2), in_channels=1)
        out = layer_forward(layer, np.arange(1, 10, dtype=float).reshape(1, 3, 3))
        np.testing.assert_array_equal(out, [[[1, 2], [4, 5]]])

    def test_equals_composition_exactly(self):
        layer = make_layer(f=5, c=3, k=3, stride=2, padding=1, mean=np.ones(27))
        img = np.random.default_rng(0).normal(size=(3, 9, 9))
        ref = conv_forward(extract_patches(img, 3, 2, 1), layer.weights)
        assert np.array_equal(layer_forward(layer, img), ref)

    def test_uncentered(self):
        mean = np.full(18, 5.0)
        a = make_layer(mean=mean)
        b = make_layer()
        img = np.random.default_rng(1).normal(size=(2, 6, 6))
        assert np.array_equal(layer_forward(a, img), layer_forward(b, img))

    def test_batch_matches_single(self):
        layer = make_layer(padding=1)
        batch = np.random.default_rng(2).normal(size=(3, 2, 7, 7))
        out = layer_forward_batch(layer, batch)
        for i in range(3):
            np.testing.assert_allclose(out[i], layer_forward(layer, batch[i]), rtol=0, atol=1e-12)


class TestObjective:
    def test_hpca_matches_representation_error(self):
        layer = make_layer(f=2, c=1, k=2, rule="hpca-identity")
        batch = np.random.default_rng(0).normal(size=(2, 1, 3, 3))
        x = extract_patches_batch(batch, 2).reshape(-1, 4)
        assert layer_objective(layer, batch) == pytest.approx(rules.representation_error(layer.weights, x, "identity"))

    def test_wta_quantization(self):
        w = np.array([[0.0, 0.0, 0.0, 0.0], [1.0, 1.0, 1.0, 1.0]])
        layer = HebbianLayer(w, Rule("wta"), (2, 2), in_channels=1)
        batch = np.ones((1, 1, 2, 2))
        assert layer_objective(layer, batch) == pytest.approx(0.0, abs=1e-15)
