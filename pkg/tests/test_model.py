"""Tests for the colour transform, the two network stages and initialization."""

import math

import numpy as np
import pytest

from app.autodiff import Graph, backward, ops
from app.core.errors import ShapeError
from app.core.schemas import ModelConfig
from app.model import (
    ColorTransform,
    ModelParams,
    apply_quadratic_transform,
    deepisp_forward,
    highlevel_forward,
    identity_params,
    init_params,
    init_w_affine,
    lowlevel_forward,
    monomials,
    parameter_shapes,
)
from app.model.network import shared_input


def oracle_monomials(pixel):
    v = list(pixel) + [1.0]
    return np.array([v[i] * v[j] for i in range(4) for j in range(i, 4)])


def apply_affine(affine, rgb):
    flat = rgb.reshape(-1, 3)
    return (np.hstack([flat, np.ones((flat.shape[0], 1))]) @ affine.T).reshape(rgb.shape)


# =============================================================================
# Quadratic colour transform
# =============================================================================


class TestMonomials:
    @pytest.mark.parametrize(
        "pixel,expected",
        [
            ((0.0, 0.0, 0.0), (0, 0, 0, 0, 0, 0, 0, 0, 0, 1)),
            ((1.0, 0.0, 0.0), (1, 0, 0, 1, 0, 0, 0, 0, 0, 1)),
            ((0.5, 0.25, 1.0), (0.25, 0.125, 0.5, 0.5, 0.0625, 0.25, 0.25, 1.0, 1.0, 1.0)),
        ],
    )
    def test_examples(self, pixel, expected):
        np.testing.assert_allclose(monomials(pixel), expected, atol=1e-15)

    def test_matches_outer_product_oracle(self, rng):
        for _ in range(50):
            pixel = rng.uniform(size=3)
            np.testing.assert_allclose(monomials(pixel), oracle_monomials(pixel), rtol=1e-12)


class TestColorTransform:
    def test_identity_selects_linear_monomials(self):
        matrix = ColorTransform.identity().matrix
        expected = np.zeros((3, 10))
        expected[0, 3] = expected[1, 6] = expected[2, 8] = 1.0
        np.testing.assert_array_equal(matrix, expected)

    def test_identity_reproduces_image(self, rng):
        image = rng.uniform(size=(5, 6, 3))
        out = apply_quadratic_transform(image, ColorTransform.identity())
        np.testing.assert_allclose(out.data, image, atol=1e-15)

    def test_constant_column(self):
        matrix = np.zeros((3, 10))
        matrix[:, 9] = [0.1, 0.2, 0.3]
        out = apply_quadratic_transform(np.random.default_rng(0).uniform(size=(4, 4, 3)), ColorTransform(matrix))
        np.testing.assert_allclose(out.data, np.broadcast_to([0.1, 0.2, 0.3], (4, 4, 3)), atol=1e-15)

    def test_matches_per_pixel_oracle(self, rng):
        for _ in range(50):
            image = rng.uniform(size=(4, 4, 3))
            matrix = rng.normal(size=(3, 10))
            expected = np.array([[matrix @ oracle_monomials(image[y, x]) for x in range(4)] for y in range(4)])
            np.testing.assert_allclose(apply_quadratic_transform(image, ColorTransform(matrix)).data, expected, rtol=1e-9, atol=1e-12)

    def test_linear_in_the_matrix(self, rng):
        image = rng.uniform(size=(6, 6, 3))
        w1, w2 = rng.normal(size=(3, 10)), rng.normal(size=(3, 10))
        combined = apply_quadratic_transform(image, ColorTransform(w1 + w2)).data
        separate = apply_quadratic_transform(image, ColorTransform(w1)).data + apply_quadratic_transform(image, ColorTransform(w2)).data
        np.testing.assert_allclose(combined, separate, rtol=1e-12, atol=1e-12)

    def test_jacobian_in_matrix_is_constant(self, rng):
        image = rng.uniform(size=(4, 4, 3))
        projection = rng.normal(size=(4, 4, 3))
        grads = []
        for _ in range(2):
            graph = Graph()
            w = graph.leaf(rng.normal(size=(3, 10)), "w")
            grads.append(backward(graph, ops.sum_(apply_quadratic_transform(image, w) * projection))["w"])
        np.testing.assert_allclose(grads[0], grads[1], rtol=1e-12)

    def test_affine_embedding(self, rng):
        affine = rng.normal(size=(3, 4))
        transform = ColorTransform.from_affine(affine)
        np.testing.assert_array_equal(transform.matrix[:, [3, 6, 8, 9]], affine)
        np.testing.assert_array_equal(transform.matrix[:, [0, 1, 2, 4, 5, 7]], 0.0)

    def test_invalid_matrices_rejected(self):
        with pytest.raises(ShapeError):
            ColorTransform(np.zeros((3, 9)))
        with pytest.raises(ValueError):
            ColorTransform(np.full((3, 10), np.nan))

    def test_clamp_option(self):
        matrix = np.zeros((3, 10))
        matrix[:, 9] = [-0.5, 0.5, 1.5]
        out = apply_quadratic_transform(np.zeros((2, 2, 3)), ColorTransform(matrix), clamp=True)
        np.testing.assert_array_equal(out.data[0, 0], [0.0, 0.5, 1.0])


# =============================================================================
# Network stages
# =============================================================================


class TestParameters:
    def test_shapes_follow_config(self, tiny_isp_config):
        shapes = parameter_shapes(tiny_isp_config)
        assert shapes["ll.0.kernel"] == (3, 3, 3, 8)
        assert shapes["ll.1.kernel"] == (3, 3, 8, 8)
        assert shapes["hl.0.kernel"] == (3, 3, 5, 4)
        assert shapes["head.weight"] == (30, 4)
        assert list(shapes)[-1] == "head.bias"

    def test_denoise_model_has_no_head(self, tiny_denoise_config):
        assert not any(name.startswith(("hl.", "head.")) for name in parameter_shapes(tiny_denoise_config))

    def test_wrong_shape_rejected(self, tiny_denoise_config):
        arrays = {name: np.zeros(shape) for name, shape in parameter_shapes(tiny_denoise_config).items()}
        arrays["ll.0.bias"] = np.zeros(5)
        with pytest.raises(ShapeError, match="ll.0.bias"):
            ModelParams(tiny_denoise_config, arrays)

    def test_missing_parameter_rejected(self, tiny_denoise_config):
        arrays = {name: np.zeros(shape) for name, shape in parameter_shapes(tiny_denoise_config).items()}
        del arrays["ll.1.kernel"]
        with pytest.raises(ShapeError, match="missing"):
            ModelParams(tiny_denoise_config, arrays)


class TestLowLevel:
    def test_zero_network_is_identity(self, rng, tiny_denoise_config):
        image = rng.uniform(size=(9, 7, 3))
        estimate, features = lowlevel_forward(image, ModelParams.zeros(tiny_denoise_config).bind())
        np.testing.assert_array_equal(estimate.data, image)
        np.testing.assert_array_equal(features.data, 0.0)
        assert features.shape == (9, 7, 5)

    def test_constant_residual_bias(self, rng):
        config = ModelConfig(n_ll=1, n_hl=0, width=8, highlevel=False)
        params = ModelParams.zeros(config)
        params.arrays["ll.0.bias"][5:] = math.atanh(0.1)
        image = rng.uniform(size=(6, 6, 3))
        estimate, _ = lowlevel_forward(image, params.bind())
        np.testing.assert_allclose(estimate.data, image + 0.1, atol=1e-12)

    def test_skip_ablation_replaces_estimate(self, rng):
        config = ModelConfig(n_ll=1, n_hl=0, width=8, highlevel=False)
        params = ModelParams.zeros(config)
        params.arrays["ll.0.bias"][5:] = math.atanh(0.1)
        estimate, _ = lowlevel_forward(rng.uniform(size=(6, 6, 3)), params.bind(), ablate_skip=True)
        np.testing.assert_allclose(estimate.data, 0.1, atol=1e-12)

    def test_too_small_rejected(self, tiny_denoise_config):
        with pytest.raises(ShapeError):
            lowlevel_forward(np.zeros((2, 8, 3)), ModelParams.zeros(tiny_denoise_config).bind())

    def test_receptive_field_locality(self, rng):
        config = ModelConfig(n_ll=5, n_hl=0, width=8, highlevel=False)
        bound = init_params(7, config).bind()
        image = rng.uniform(0.2, 0.8, size=(32, 32, 3))
        perturbed = image.copy()
        perturbed[16, 16] += 0.05
        base, _ = lowlevel_forward(image, bound)
        moved, _ = lowlevel_forward(perturbed, bound)
        changed = np.any(moved.data != base.data, axis=2)
        inside = np.zeros((32, 32), dtype=bool)
        inside[11:22, 11:22] = True
        assert not np.any(changed & ~inside)
        assert changed[16, 16]


class TestHighLevel:
    def test_constant_head_emits_its_bias(self, rng, tiny_isp_config):
        params = init_params(3, tiny_isp_config)
        params.arrays["head.weight"][:] = 0.0
        params.arrays["head.bias"][:] = ColorTransform.identity().flatten()
        features = rng.uniform(size=(8, 8, 5))
        transform = highlevel_forward(features, params.bind())
        np.testing.assert_array_equal(transform.data, ColorTransform.identity().matrix)

    def test_too_small_cites_minimum(self):
        config = ModelConfig(n_ll=1, n_hl=2, width=8)
        with pytest.raises(ShapeError, match="need H, W >= 16"):
            highlevel_forward(np.zeros((12, 20, 5)), ModelParams.zeros(config).bind())

    def test_minimum_extent(self):
        assert ModelConfig(n_hl=3).min_extent == 64
        assert ModelConfig(n_hl=0, highlevel=False).min_extent == 3


class TestDeepIspForward:
    def test_identity_network(self, rng, tiny_isp_config):
        image = rng.uniform(size=(16, 16, 3))
        out = deepisp_forward(image, identity_params(tiny_isp_config).bind())
        np.testing.assert_allclose(out.data, image, atol=1e-15)

    def test_shared_ablation_feeds_three_informative_channels(self, rng, tiny_isp_config):
        estimate = ops.lift(rng.uniform(size=(8, 8, 3)))
        features = ops.lift(rng.uniform(size=(8, 8, 5)))
        shared = shared_input(estimate, features, tiny_isp_config, ablate_shared=True)
        assert shared.shape == (8, 8, 5)
        np.testing.assert_array_equal(shared.data[..., :3], estimate.data)
        np.testing.assert_array_equal(shared.data[..., 3:], 0.0)

    def test_bit_identical_across_runs(self, rng, tiny_isp_config):
        image = rng.uniform(size=(16, 16, 3))
        first = deepisp_forward(image, init_params(11, tiny_isp_config).bind()).data
        second = deepisp_forward(image, init_params(11, tiny_isp_config).bind()).data
        assert first.tobytes() == second.tobytes()

    def test_inference_clamp(self, rng, tiny_isp_config):
        params = identity_params(tiny_isp_config, ColorTransform.from_affine(np.hstack([2.0 * np.eye(3), np.zeros((3, 1))])))
        out = deepisp_forward(rng.uniform(size=(8, 8, 3)), params.bind(), clamp_output=True)
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0

    def test_denoise_model_returns_estimate(self, rng, tiny_denoise_config):
        image = rng.uniform(size=(8, 8, 3))
        out = deepisp_forward(image, ModelParams.zeros(tiny_denoise_config).bind())
        np.testing.assert_array_equal(out.data, image)


# =============================================================================
# Initialization
# =============================================================================


class TestInitParams:
    def test_same_seed_same_parameters(self, tiny_isp_config):
        a, b = init_params(5, tiny_isp_config), init_params(5, tiny_isp_config)
        for name in a:
            np.testing.assert_array_equal(a[name], b[name])

    def test_biases_zero(self, tiny_isp_config):
        params = init_params(5, tiny_isp_config)
        for name in params:
            if name.endswith(".bias") and name != "head.bias":
                np.testing.assert_array_equal(params[name], 0.0)

    def test_kernel_variance_scaled_by_fan_in(self):
        config = ModelConfig(n_ll=2, n_hl=0, width=64, highlevel=False)
        kernel = init_params(0, config)["ll.1.kernel"]
        assert kernel.size >= 10_000
        assert kernel.var() == pytest.approx(2.0 / (3 * 3 * 64), rel=0.1)

    def test_head_starts_at_given_transform(self, tiny_isp_config, rng):
        transform = ColorTransform(rng.normal(size=(3, 10)))
        params = init_params(1, tiny_isp_config, transform)
        np.testing.assert_array_equal(params["head.weight"], 0.0)
        np.testing.assert_array_equal(params["head.bias"], transform.flatten())


class TestInitWAffine:
    def test_self_regression_gives_identity(self, rng):
        pairs = [(x, x) for x in (rng.uniform(size=(6, 6, 3)) for _ in range(3))]
        result = init_w_affine(pairs)
        np.testing.assert_allclose(result.affine, np.hstack([np.eye(3), np.zeros((3, 1))]), atol=1e-9)
        assert not result.rank_deficient

    def test_recovers_known_map(self, rng):
        affine = rng.normal(size=(3, 4))
        sources = [rng.uniform(size=(8, 8, 3)) for _ in range(2)]
        result = init_w_affine([(s, apply_affine(affine, s)) for s in sources])
        np.testing.assert_allclose(result.affine, affine, atol=1e-6)
        for source in sources:
            mapped = apply_quadratic_transform(source, result.transform).data
            np.testing.assert_allclose(mapped, apply_affine(affine, source), atol=1e-6)

    def test_average_of_two_maps(self, rng):
        a, b = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
        s1, s2 = rng.uniform(size=(8, 8, 3)), rng.uniform(size=(8, 8, 3))
        result = init_w_affine([(s1, apply_affine(a, s1)), (s2, apply_affine(b, s2))])
        np.testing.assert_allclose(result.affine, (a + b) / 2, atol=1e-6)

    def test_constant_image_flagged(self, caplog):
        constant = np.full((4, 4, 3), 0.5)
        result = init_w_affine([(constant, constant)])
        assert result.rank_deficient
        assert np.all(np.isfinite(result.affine))
        assert "rank-deficient" in caplog.text

    def test_needs_pairs(self):
        with pytest.raises(ValueError):
            init_w_affine([])

    def test_needs_four_pixels(self):
        with pytest.raises(ShapeError):
            init_w_affine([(np.zeros((1, 3, 3)), np.zeros((1, 3, 3)))])
