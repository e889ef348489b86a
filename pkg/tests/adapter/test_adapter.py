"""
Adapter Tests
-------------
Prompt encoder, mask classifier, selection, checkpoints and the trainable
parameter budget.
"""

import pytest
import torch

from src.adapter import (
    AttentionBlock,
    DLOAdapter,
    MaskClassifier,
    count_parameters,
    keep_mask,
    load_adapter,
    save_adapter,
    select,
)
from src.backbones.stub import StubGateway
from src.core.config import PARAMETER_BUDGET, AdapterConfig, BackboneConfig
from src.core.records import ClassifierOutput, MaskBundle
from src.core.utils import CheckpointMismatchError, ConfigError, ShapeError


def _grid(cfg: AdapterConfig, seed: int, dtype=torch.float64) -> torch.Tensor:
    g = torch.Generator().manual_seed(seed)
    h, w = cfg.grid_size
    return torch.rand(h, w, cfg.semantic_dim, generator=g, dtype=torch.float64).to(dtype)


def _bundle(n: int, d: int = 16) -> MaskBundle:
    return MaskBundle(
        masks=torch.zeros(n, 4, 4),
        mask_tokens=torch.zeros(n, d),
        quality=torch.zeros(n),
        source_size=(4, 4),
    )


class TestShapeChain:
    def setup_method(self):
        torch.manual_seed(0)
        self.gateway = StubGateway(BackboneConfig(mode="stub"), AdapterConfig(), torch.float32)
        self.model = DLOAdapter.for_gateway(AdapterConfig(), self.gateway).eval()

    def test_encode_decode_classify_shapes(self, records):
        """22x22x64 -> 11x3x256 prompts -> 11 masks/tokens -> 11 logits, for 20 seeded inputs."""
        embedding = self.gateway.image_embedding(records[0].image)
        with torch.no_grad():
            for seed in range(20):
                prompts = self.model.encode(_grid(self.model.cfg, seed, torch.float32))
                assert prompts.tokens.shape == (11, 3, 256)
                assert prompts.final_tokens.shape == (11, 3, 256)
                assert prompts.category_logits.shape == (11, 3, 3)
                bundle = self.gateway.decode(embedding, prompts)
                assert bundle.masks.shape[0] == 11
                assert bundle.mask_tokens.shape == (11, 256)
                decision = self.model.classify(prompts, bundle)
                assert decision.logits.shape == (11,)
                assert torch.isfinite(prompts.final_tokens).all()

    def test_intermediate_shapes(self):
        """484x256 patches, 33x256 sampled encodings."""
        encoder = self.model.prompt_encoder
        with torch.no_grad():
            tokens = encoder.upscale(_grid(self.model.cfg, 0, torch.float32))
            assert tokens.shape == (484, 256)
            tokens = encoder.filter_patches(encoder.self_attend_patches(tokens))
            assert tokens.shape == (484, 256)
            assert encoder.sample_points(tokens).shape == (33, 256)

    def test_wrong_grid_is_shape_error(self):
        with pytest.raises(ShapeError):
            self.model.encode(torch.zeros(22, 22, 32))

    def test_parameter_budget(self):
        """Trainable parameters lie in the expected band."""
        low, high = PARAMETER_BUDGET
        assert low <= count_parameters(self.model) <= high


class TestPromptEncoder:
    def test_eval_mode_is_deterministic(self, tiny_model):
        """Two eval-mode encodings of one grid are identical."""
        tiny_model.eval()
        grid = _grid(tiny_model.cfg, 1)
        a, b = tiny_model.encode(grid), tiny_model.encode(grid)
        assert torch.equal(a.final_tokens, b.final_tokens)

    def test_upscale_is_per_patch(self, tiny_model):
        """Identical patches give identical rows."""
        grid = _grid(tiny_model.cfg, 2)
        grid[3, 1] = grid[0, 0]
        out = tiny_model.prompt_encoder.upscale(grid)
        torch.testing.assert_close(out[3 * 4 + 1], out[0])

    def test_duplicated_patches_stay_identical(self, tiny_model):
        """Duplicated rows with duplicated DPE remain equal after patch self-attention."""
        tiny_model.eval()
        encoder = tiny_model.prompt_encoder
        tokens = torch.randn(16, 16, dtype=torch.float64)
        dpe = encoder.dpe.clone()
        tokens[5], dpe[5] = tokens[2], dpe[2]
        out = encoder.self_attend_patches(tokens, dpe)
        torch.testing.assert_close(out[5], out[2])

    def test_attention_rows_sum_to_one(self, tiny_model):
        """Kept attention weights are normalized over the keys."""
        tiny_model.eval()
        encoder = tiny_model.prompt_encoder
        encoder.patch_attention.keep_weights = True
        encoder.sampler.keep_weights = True
        encoder.encode(_grid(tiny_model.cfg, 3))
        for block in (encoder.patch_attention, encoder.sampler):
            sums = block.last_weights.sum(-1)
            torch.testing.assert_close(sums, torch.ones_like(sums))

    def test_layer_norm_after_attention(self, tiny_model):
        """Normalized rows have zero mean and unit variance before the DPE is added back."""
        tiny_model.eval()
        encoder = tiny_model.prompt_encoder
        encoder.encode(_grid(tiny_model.cfg, 4))
        x = encoder.patch_attention.last_normalized
        torch.testing.assert_close(x.mean(-1), torch.zeros_like(x.mean(-1)), rtol=0, atol=1e-6)
        torch.testing.assert_close(x.var(-1, unbiased=False), torch.ones_like(x.mean(-1)), rtol=0, atol=1e-3)

    def test_one_hot_sampling_reads_one_dpe_vector(self, tiny_model):
        """A forced one-hot attention yields layernorm(query + projected DPE vector)."""
        tiny_model.eval()
        encoder = tiny_model.prompt_encoder
        filtered = torch.randn(16, 16, dtype=torch.float64)
        bias = torch.full((encoder.queries.shape[0], 16), -1e9, dtype=torch.float64)
        bias[:, 6] = 0.0
        out = encoder.sample_points(filtered, logit_bias=bias)

        attention = encoder.sampler.attention
        d = encoder.cfg.embed_dim
        w_v = attention.in_proj_weight[2 * d:]
        b_v = attention.in_proj_bias[2 * d:]
        value = encoder.dpe[6] @ w_v.T + b_v
        projected = attention.out_proj(value)
        expected = encoder.sampler.norm(encoder.queries + projected)
        torch.testing.assert_close(out, expected)

    def test_saturated_logits_add_one_embedding(self, tiny_model):
        """Foreground-saturated logits add exactly the foreground embedding."""
        encoder = tiny_model.prompt_encoder
        with torch.no_grad():
            encoder.label_head.weight.zero_()
            encoder.label_head.bias.copy_(torch.tensor([50.0, -50.0, -50.0]))
        sampled = torch.randn(4, 16, dtype=torch.float64)
        prompts = encoder.label_points(sampled)
        expected = (sampled + encoder.label_embeds[0]).reshape(2, 2, 16)
        torch.testing.assert_close(prompts.final_tokens, expected, rtol=0, atol=1e-12)

    def test_uniform_logits_add_mean_embedding(self, tiny_model):
        encoder = tiny_model.prompt_encoder
        with torch.no_grad():
            encoder.label_head.weight.zero_()
            encoder.label_head.bias.zero_()
        sampled = torch.randn(4, 16, dtype=torch.float64)
        prompts = encoder.label_points(sampled)
        expected = (sampled + encoder.label_embeds.mean(0)).reshape(2, 2, 16)
        torch.testing.assert_close(prompts.final_tokens, expected)

    def test_mixture_jacobian_matches_finite_differences(self, tiny_model):
        """final_tokens depend smoothly on the category logits."""
        embeds = tiny_model.prompt_encoder.label_embeds

        def mix(logits):
            return torch.softmax(logits, dim=-1) @ embeds

        logits = torch.randn(3, dtype=torch.float64, requires_grad=True)
        assert torch.autograd.gradcheck(mix, (logits,), eps=1e-6, atol=1e-8, rtol=1e-4)


class TestMaskClassifier:
    def setup_method(self):
        torch.manual_seed(0)
        self.cfg = AdapterConfig(
            num_prompts=5, points_per_prompt=2, embed_dim=16, num_heads=2, attention_dropout=0.0, ffn_dim=32,
            grid_size=[4, 4], semantic_dim=8,
        )
        self.classifier = MaskClassifier(self.cfg).double().eval()

    def test_pooling_shape_and_purity(self):
        """N x N_p x d -> N x d, batch order carried through."""
        tokens = torch.randn(5, 2, 16, dtype=torch.float64)
        pooled = self.classifier.pool_prompts(tokens)
        assert pooled.shape == (5, 16)
        perm = torch.tensor([3, 0, 4, 1, 2])
        torch.testing.assert_close(self.classifier.pool_prompts(tokens[perm]), pooled[perm])

    def test_permutation_equivariance(self):
        """Jointly permuting queries and mask tokens permutes the logits."""
        queries = torch.randn(5, 16, dtype=torch.float64)
        mask_tokens = torch.randn(5, 16, dtype=torch.float64)
        perm = torch.tensor([2, 4, 0, 1, 3])
        base = self.classifier.classify(queries, mask_tokens).logits
        permuted = self.classifier.classify(queries[perm], mask_tokens[perm]).logits
        torch.testing.assert_close(permuted, base[perm])

    def test_duplicates_get_equal_logits(self):
        queries = torch.randn(5, 16, dtype=torch.float64)
        mask_tokens = torch.randn(5, 16, dtype=torch.float64)
        queries[3], mask_tokens[3] = queries[1], mask_tokens[1]
        logits = self.classifier.classify(queries, mask_tokens).logits
        torch.testing.assert_close(logits[3], logits[1])

    def test_both_inputs_influence_logits(self):
        """Logits react to the queries and to the mask tokens."""
        queries = torch.randn(5, 16, dtype=torch.float64, requires_grad=True)
        mask_tokens = torch.randn(5, 16, dtype=torch.float64, requires_grad=True)
        self.classifier.classify(queries, mask_tokens).logits.sum().backward()
        assert queries.grad.abs().sum() > 0
        assert mask_tokens.grad.abs().sum() > 0

    def test_empty_input(self):
        """N = 0 gives empty outputs."""
        out = self.classifier.classify(torch.zeros(0, 16, dtype=torch.float64), torch.zeros(0, 16, dtype=torch.float64))
        assert out.logits.shape == (0,)
        assert self.classifier.pool_prompts(torch.zeros(0, 2, 16, dtype=torch.float64)).shape == (0, 16)

    def test_keep_flags_follow_threshold(self):
        out = self.classifier.classify(torch.randn(5, 16, dtype=torch.float64), torch.randn(5, 16, dtype=torch.float64), 0.5)
        assert out.keep_flags.tolist() == (out.probabilities >= 0.5).tolist()
        torch.testing.assert_close(out.probabilities, torch.sigmoid(out.logits))


class TestSelect:
    def _out(self, probabilities):
        p = torch.tensor(probabilities)
        return ClassifierOutput(logits=torch.logit(p), probabilities=p, keep_flags=p >= 0.5, threshold=0.5)

    def test_keeps_indices_in_order(self):
        """[0.9, 0.2, 0.6] at 0.5 keeps masks 0 and 2."""
        kept = select(self._out([0.9, 0.2, 0.6]), _bundle(3))
        assert kept.indices == [0, 2]
        assert kept.masks.shape == (2, 4, 4)

    def test_threshold_extremes(self):
        out = self._out([0.9, 0.2, 0.6])
        assert select(out, _bundle(3), threshold=0.0).indices == [0, 1, 2]
        assert select(out, _bundle(3), threshold=1.0).indices == []

    def test_threshold_one_drops_saturated_masks(self):
        """Probabilities that round to exactly 1 are still dropped at threshold 1."""
        logits = torch.tensor([100.0, 40.0, -3.0])
        p = torch.sigmoid(logits)
        assert p[0].item() == 1.0
        out = ClassifierOutput(logits=logits, probabilities=p, keep_flags=p >= 0.5, threshold=0.5)
        assert select(out, _bundle(3), threshold=1.0).indices == []
        assert keep_mask(p, 1.0).tolist() == [False, False, False]
        assert keep_mask(p, 0.5).tolist() == [True, True, False]


class TestCheckpoint:
    def test_round_trip_restores_outputs(self, tmp_path, tiny_gateway, tiny_model):
        """A reloaded adapter encodes exactly like the saved one."""
        path = save_adapter(tmp_path / "a.pt", tiny_model, {"note": "x"})
        torch.manual_seed(99)
        other = DLOAdapter.for_gateway(tiny_gateway.adapter_cfg, tiny_gateway).eval()
        assert load_adapter(path, other) == {"note": "x"}
        grid = _grid(tiny_model.cfg, 5)
        assert torch.equal(other.encode(grid).final_tokens, tiny_model.eval().encode(grid).final_tokens)

    def test_hyperparameter_mismatch_is_refused(self, tmp_path, tiny_gateway, tiny_model):
        """Loading into an adapter with another prompt count fails."""
        path = save_adapter(tmp_path / "a.pt", tiny_model)
        cfg = AdapterConfig(**{**tiny_gateway.adapter_cfg.__dict__, "num_prompts": 3})
        other = DLOAdapter(cfg, tiny_gateway.frequency_matrix(), tiny_gateway.label_embeddings()).double()
        with pytest.raises(CheckpointMismatchError):
            load_adapter(path, other)

    def test_missing_file_is_config_error(self, tmp_path, tiny_model):
        with pytest.raises(ConfigError):
            load_adapter(tmp_path / "missing.pt", tiny_model)

    def test_garbage_file_is_mismatch(self, tmp_path, tiny_model):
        path = tmp_path / "bad.pt"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(CheckpointMismatchError):
            load_adapter(path, tiny_model)
