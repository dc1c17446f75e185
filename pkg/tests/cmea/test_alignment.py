"""Tests for token mixing, proxies and the InfoNCE alignment objective."""
import numpy as np
import pytest

from app.cmea import (
    CmeaParams,
    ProxyParams,
    contrastive_loss,
    enhance,
    infonce_loss,
    init_cmea_params,
    mix_tokens,
    proxy_forward,
    similarity_matrix,
    token_avg_cosine,
)
from app.exceptions import ContractError, DimensionError
from app.tensor import ParamStore, Tensor, finite_diff_check


class TestMixTokens:
    """Test random replacement of vision or audio tokens by text tokens."""

    def test_threshold_zero_replaces_all(self, rng):
        """Test p* = 0 returns the text tokens."""
        u_m, u_t = Tensor(rng.normal(size=(2, 5, 3))), Tensor(rng.normal(size=(2, 5, 3)))
        np.testing.assert_array_equal(mix_tokens(u_m, u_t, 0.0, seed=0).data, u_t.data)

    def test_threshold_one_replaces_none(self, rng):
        """Test p* = 1 returns the original tokens."""
        u_m, u_t = Tensor(rng.normal(size=(2, 5, 3))), Tensor(rng.normal(size=(2, 5, 3)))
        np.testing.assert_array_equal(mix_tokens(u_m, u_t, 1.0, seed=0).data, u_m.data)

    @pytest.mark.parametrize("p_star", [0.0, 0.3, 0.7, 1.0])
    def test_replaced_fraction(self, p_star):
        """Test the replaced share over 10^4 tokens lies within three standard errors of 1 - p*."""
        u_m, u_t = Tensor(np.zeros((100, 100, 1))), Tensor(np.ones((100, 100, 1)))
        replaced = mix_tokens(u_m, u_t, p_star, seed=1).data.mean()
        expected = 1.0 - p_star
        sigma = np.sqrt(p_star * (1.0 - p_star) / 1e4)
        assert abs(replaced - expected) <= 3.0 * sigma + 1e-12

    def test_tokens_are_exact_copies(self, rng):
        """Test every output token equals one of its two sources."""
        u_m, u_t = Tensor(rng.normal(size=(3, 6, 4))), Tensor(rng.normal(size=(3, 6, 4)))
        out = mix_tokens(u_m, u_t, 0.5, seed=2).data
        from_text = np.all(out == u_t.data, axis=-1)
        from_self = np.all(out == u_m.data, axis=-1)
        assert np.all(from_text | from_self)

    def test_shape_mismatch(self):
        """Test sources must have equal shapes."""
        with pytest.raises(DimensionError):
            mix_tokens(Tensor(np.zeros((2, 3))), Tensor(np.zeros((3, 3))), 0.5, seed=0)


class TestCosine:
    """Test token-averaged cosine similarity."""

    def test_identical(self, rng):
        """Test a sequence is fully similar to itself."""
        x = Tensor(rng.normal(size=(4, 3)))
        assert token_avg_cosine(x, x).item() == pytest.approx(1.0, abs=1e-6)

    def test_opposite(self, rng):
        """Test negated tokens give -1."""
        x = rng.normal(size=(4, 3))
        assert token_avg_cosine(Tensor(-x), Tensor(x)).item() == pytest.approx(-1.0, abs=1e-6)

    def test_orthogonal_and_zero_tokens(self):
        """Test orthogonal tokens give 0 and zero tokens contribute 0."""
        e = Tensor([[1.0, 0.0], [0.0, 0.0]])
        u = Tensor([[1.0, 0.0], [1.0, 0.0]])
        assert token_avg_cosine(e, u).item() == pytest.approx(0.5, abs=1e-6)
        assert token_avg_cosine(Tensor([[0.0, 1.0]]), Tensor([[1.0, 0.0]])).item() == pytest.approx(0.0, abs=1e-7)

    def test_matrix_diagonal_matches_pairwise(self, rng):
        """Test the similarity matrix agrees with pairwise cosine."""
        e, u = rng.normal(size=(3, 4, 2)), rng.normal(size=(3, 4, 2))
        sim = similarity_matrix(Tensor(e), Tensor(u)).data
        for i in range(3):
            for j in range(3):
                expected = token_avg_cosine(Tensor(e[i]), Tensor(u[j])).item()
                assert sim[i, j] == pytest.approx(expected, abs=1e-5)


class TestInfoNCE:
    """Test the contrastive alignment loss."""

    def test_single_sample_is_zero(self, rng):
        """Test a batch of one has no negatives and zero loss."""
        u = Tensor(rng.normal(size=(1, 4, 3)))
        loss = infonce_loss(Tensor(rng.normal(size=(1, 4, 3))), Tensor(rng.normal(size=(1, 4, 3))), u, 0.1)
        assert loss.item() == pytest.approx(0.0, abs=1e-6)

    @pytest.mark.parametrize("batch", [2, 4, 8])
    def test_indistinguishable_batch_is_log_b(self, rng, batch):
        """Test identical samples give ln B."""
        row = rng.normal(size=(4, 3))
        u = Tensor(np.stack([row] * batch))
        assert infonce_loss(u, u, u, 0.1).item() == pytest.approx(np.log(batch), rel=1e-5)

    def test_closed_form(self, float64):
        """Test S = +1 on the diagonal and -1 elsewhere at tau 0.1 gives ln(1 + (B - 1) e^-20)."""
        similarity = Tensor(2.0 * np.eye(4) - 1.0)
        expected = np.log1p(3.0 * np.exp(-20.0))
        assert abs(contrastive_loss(similarity, 0.1).item() - expected) < 1e-6

    def test_uniform_similarity_is_log_b(self):
        """Test a constant similarity matrix gives ln B."""
        assert contrastive_loss(Tensor(np.full((6, 6), 0.3)), 0.5).item() == pytest.approx(np.log(6.0), rel=1e-5)

    def test_similarity_must_be_square(self):
        """Test a rectangular similarity matrix is rejected."""
        with pytest.raises(DimensionError):
            contrastive_loss(Tensor(np.zeros((2, 3))), 0.1)

    def test_aligned_beats_shuffled(self, rng, float64):
        """Test matching proxies score lower than mismatched ones."""
        u = rng.normal(size=(4, 3, 5))
        aligned = infonce_loss(Tensor(u), Tensor(u), Tensor(u), 0.1).item()
        shuffled = infonce_loss(Tensor(u[::-1]), Tensor(u[::-1]), Tensor(u), 0.1).item()
        assert aligned < shuffled

    def test_scale_invariance(self, rng, float64):
        """Test positive rescaling of the proxies leaves the loss unchanged."""
        e_v, e_a, u = (rng.normal(size=(3, 4, 2)) for _ in range(3))
        base = infonce_loss(Tensor(e_v), Tensor(e_a), Tensor(u), 0.2).item()
        scaled = infonce_loss(Tensor(e_v * 7.0), Tensor(e_a * 0.5), Tensor(u), 0.2).item()
        assert scaled == pytest.approx(base, rel=1e-7)

    def test_non_negative(self, rng):
        """Test the loss is never negative."""
        e_v, e_a, u = (Tensor(rng.normal(size=(6, 3, 4))) for _ in range(3))
        assert infonce_loss(e_v, e_a, u, 0.05).item() >= 0.0

    def test_temperature_positive(self, rng):
        """Test tau must be positive."""
        u = Tensor(rng.normal(size=(2, 3, 4)))
        with pytest.raises(ContractError):
            infonce_loss(u, u, u, 0.0)

    def test_gradients(self, rng, float64):
        """Test gradients reach the proxies and the text tokens."""
        store = ParamStore()
        for name in ("e_v", "e_a", "u_t"):
            store.declare(name, rng.normal(size=(3, 2, 4)))
        error = finite_diff_check(
            lambda s: infonce_loss(s["e_v"], s["e_a"], s["u_t"], 0.5), store, samples=None, floor=1e-3
        )
        assert error < 1e-5


class TestEnhance:
    """Test the proxy stage."""

    def test_eval_skips_mixing(self, rng, tiny_config):
        """Test inference feeds the unmixed tokens to the proxies."""
        params = init_cmea_params(ParamStore(), "cmea", tiny_config, rng)
        u_t, u_v, u_a = (Tensor(rng.normal(size=(2, 4, tiny_config.d_model))) for _ in range(3))
        out = enhance(u_t, u_v, u_a, params, training=False)
        np.testing.assert_array_equal(out.mixed_vision.data, u_v.data)
        np.testing.assert_array_equal(out.vision.data, proxy_forward(u_v, params.vision).data)

    def test_training_mixing_is_seeded(self, rng, tiny_config):
        """Test a fixed seed reproduces the mixed tokens."""
        params = init_cmea_params(ParamStore(), "cmea", tiny_config, rng)
        u_t, u_v, u_a = (Tensor(rng.normal(size=(2, 4, tiny_config.d_model))) for _ in range(3))
        first = enhance(u_t, u_v, u_a, params, training=True, seed=9)
        second = enhance(u_t, u_v, u_a, params, training=True, seed=9)
        np.testing.assert_array_equal(first.mixed_audio.data, second.mixed_audio.data)

    def test_zero_proxies_output_zero(self, rng, tiny_config):
        """Test zero-initialized proxies map every token to zero."""
        params = init_cmea_params(ParamStore(), "cmea", tiny_config, rng, zero_branches=True)
        out = proxy_forward(Tensor(rng.normal(size=(3, tiny_config.d_model))), params.vision)
        np.testing.assert_array_equal(out.data, 0.0)

    def test_proxy_width(self, rng, tiny_config):
        """Test the proxy hidden layer defaults to 2D."""
        params = init_cmea_params(ParamStore(), "cmea", tiny_config, rng)
        assert isinstance(params.audio, ProxyParams)
        assert params.audio.w1.shape == (tiny_config.d_model, 2 * tiny_config.d_model)

    def test_threshold_range(self, rng, tiny_config):
        """Test the mixing threshold must be a probability."""
        params = init_cmea_params(ParamStore(), "cmea", tiny_config, rng)
        with pytest.raises(ContractError):
            CmeaParams(params.vision, params.audio, mix_threshold=1.5)
