"""Frame head and pretraining-objective checks."""

import math

import numpy as np
import pytest

from framemet.autodiff import Tensor
from framemet.concepts import (
    ConceptModel,
    FrameHeads,
    FrameInventory,
    frame_logits_cls,
    frame_logits_target,
    frame_loss,
    top_k_frames,
)
from framemet.data import build_vocab, make_batches, synth_generate
from framemet.encoder import EncoderConfig
from framemet.errors import DomainError, ShapeError, UsageError
from framemet.optim import Adam


def zeroed_heads(d=4, n_frames=3):
    heads = FrameHeads(d, n_frames, np.random.default_rng(0))
    for p in heads.params.values():
        p.data[...] = 0.0
    return heads


class TestFrameHeads:
    def test_zero_weights_give_half_probabilities(self):
        heads = zeroed_heads()
        out = frame_logits_cls(Tensor(np.random.default_rng(1).normal(size=(5, 4))),
                               heads)
        assert out.shape == (5, 3)
        assert np.all(out.data == 0.5)

    def test_one_hot_input_reads_one_weight_row(self):
        heads = zeroed_heads(d=4, n_frames=3)
        row = np.array([0.3, -1.2, 2.0])
        heads.params["cls.weight"].data[2, :] = row
        h = np.zeros((1, 4))
        h[0, 2] = 1.0
        out = frame_logits_cls(Tensor(h), heads)
        assert np.allclose(out.data[0], 1.0 / (1.0 + np.exp(-row)), atol=1e-12)

    def test_zero_weights_give_uniform_distribution(self):
        heads = zeroed_heads(d=4, n_frames=3)
        out = frame_logits_target(Tensor(np.ones((2, 4))), heads)
        assert np.allclose(out.data, 1.0 / 3.0, atol=1e-15)

    def test_rows_sum_to_one(self):
        heads = FrameHeads(6, 5, np.random.default_rng(2))
        out = frame_logits_target(
            Tensor(np.random.default_rng(3).normal(size=(4, 6))), heads
        )
        assert np.allclose(out.data.sum(axis=1), 1.0, atol=1e-9)

    def test_bias_only_distribution(self):
        heads = zeroed_heads(d=4, n_frames=2)
        heads.params["target.bias"].data[:] = [0.0, math.log(3.0)]
        out = frame_logits_target(Tensor(np.zeros((1, 4))), heads)
        assert np.allclose(out.data[0], [0.25, 0.75], atol=1e-12)

    def test_dimension_mismatch(self):
        heads = zeroed_heads(d=4)
        with pytest.raises(ShapeError):
            frame_logits_cls(Tensor(np.zeros((2, 5))), heads)
        with pytest.raises(ShapeError):
            frame_logits_target(Tensor(np.zeros((2, 5))), heads)


def np_frame_loss(pred_target, gold_idx, pred_cls, gold_rows, lam, eps=1e-7):
    """Plain-numpy recomputation of the two pieces, for composition checks."""
    picked = np.clip(pred_target[np.arange(len(gold_idx)), gold_idx], eps, 1 - eps)
    target_loss = float(np.mean(-np.log(picked)))
    p = np.clip(pred_cls, eps, 1 - eps)
    per = -(gold_rows * np.log(p) + (1 - gold_rows) * np.log(1 - p))
    cls_loss = float(np.mean(per.sum(axis=1)))
    return target_loss, cls_loss


class TestFrameLoss:
    def test_perfect_predictions_hit_clamp_floor(self):
        n_frames = 12
        gold_idx = np.array([3, 7])
        pred_target = np.zeros((2, n_frames))
        pred_target[np.arange(2), gold_idx] = 1.0
        gold_rows = np.zeros((2, n_frames))
        gold_rows[0, [3, 5]] = 1.0
        gold_rows[1, [7]] = 1.0
        loss = frame_loss(Tensor(pred_target), gold_idx, Tensor(gold_rows),
                          gold_rows, lam=2.0)
        assert loss.item() <= 2 * n_frames * 1.1e-7

    def test_uniform_target_loss_is_log_l(self):
        pred = Tensor(np.full((3, 4), 0.25))
        loss = frame_loss(pred, np.array([0, 1, 2]),
                          Tensor(np.full((3, 4), 0.5)),
                          np.zeros((3, 4)), lam=0.0)
        assert abs(loss.item() - math.log(4.0)) <= 1e-9

    def test_composition_matches_independent_pieces(self):
        rng = np.random.default_rng(4)
        pred_target = rng.dirichlet(np.ones(5), size=6)
        pred_cls = rng.uniform(0.05, 0.95, size=(6, 5))
        gold_idx = rng.integers(0, 5, size=6)
        gold_rows = (rng.uniform(size=(6, 5)) > 0.6).astype(float)
        gold_rows[np.arange(6), gold_idx] = 1.0
        target_loss, cls_loss = np_frame_loss(
            pred_target, gold_idx, pred_cls, gold_rows, lam=2.0
        )
        total = frame_loss(Tensor(pred_target), gold_idx, Tensor(pred_cls),
                           gold_rows, lam=2.0)
        assert abs(total.item() - (2.0 * cls_loss + target_loss)) <= 1e-12

    def test_lambda_zero_reduces_to_target_loss(self):
        rng = np.random.default_rng(5)
        pred_target = rng.dirichlet(np.ones(3), size=4)
        pred_cls = rng.uniform(0.1, 0.9, size=(4, 3))
        gold_idx = rng.integers(0, 3, size=4)
        gold_rows = np.zeros((4, 3))
        gold_rows[np.arange(4), gold_idx] = 1.0
        target_loss, _ = np_frame_loss(pred_target, gold_idx, pred_cls,
                                       gold_rows, lam=0.0)
        total = frame_loss(Tensor(pred_target), gold_idx, Tensor(pred_cls),
                           gold_rows, lam=0.0)
        assert abs(total.item() - target_loss) <= 1e-12

    def test_gold_index_out_of_range(self):
        with pytest.raises(DomainError):
            frame_loss(Tensor(np.full((1, 3), 1 / 3)), np.array([3]),
                       Tensor(np.full((1, 3), 0.5)), np.zeros((1, 3)), lam=1.0)

    def test_negative_lambda_rejected(self):
        with pytest.raises(DomainError):
            frame_loss(Tensor(np.full((1, 3), 1 / 3)), np.array([0]),
                       Tensor(np.full((1, 3), 0.5)), np.zeros((1, 3)), lam=-1.0)

    def test_gold_row_replacement_never_increases_loss(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            pred_target = rng.dirichlet(np.ones(4), size=5)
            pred_cls = rng.uniform(0.05, 0.95, size=(5, 4))
            gold_idx = rng.integers(0, 4, size=5)
            gold_rows = (rng.uniform(size=(5, 4)) > 0.5).astype(float)
            gold_rows[np.arange(5), gold_idx] = 1.0
            base = frame_loss(Tensor(pred_target), gold_idx, Tensor(pred_cls),
                              gold_rows, lam=2.0).item()
            i = int(rng.integers(0, 5))
            better_target = pred_target.copy()
            better_target[i] = np.eye(4)[gold_idx[i]]
            improved = frame_loss(Tensor(better_target), gold_idx,
                                  Tensor(pred_cls), gold_rows, lam=2.0).item()
            assert improved <= base + 1e-12
            better_cls = pred_cls.copy()
            better_cls[i] = gold_rows[i]
            improved2 = frame_loss(Tensor(pred_target), gold_idx,
                                   Tensor(better_cls), gold_rows, lam=2.0).item()
            assert improved2 <= base + 1e-12


class TestTopK:
    def make(self):
        inventory = FrameInventory(["alpha", "beta", "gamma"])
        heads = zeroed_heads(d=3, n_frames=3)
        heads.params["target.weight"].data[...] = np.eye(3)
        return inventory, heads

    def test_k_equals_l_returns_everything(self):
        inventory, heads = self.make()
        out = top_k_frames(np.array([0.1, 0.9, 0.3]), heads, inventory, k=3)
        assert [name for name, _ in out] == ["beta", "gamma", "alpha"]
        assert abs(sum(p for _, p in out) - 1.0) <= 1e-9

    def test_k_one_is_argmax(self):
        inventory, heads = self.make()
        out = top_k_frames(np.array([0.0, 0.0, 2.0]), heads, inventory, k=1)
        assert out[0][0] == "gamma"

    def test_ties_break_by_inventory_order(self):
        inventory, heads = self.make()
        out = top_k_frames(np.zeros(3), heads, inventory, k=3)
        assert [name for name, _ in out] == ["alpha", "beta", "gamma"]

    def test_k_out_of_range(self):
        inventory, heads = self.make()
        with pytest.raises(UsageError):
            top_k_frames(np.zeros(3), heads, inventory, k=4)
        with pytest.raises(UsageError):
            top_k_frames(np.zeros(3), heads, inventory, k=0)


def pretrain_toy(seed=11, steps_epochs=20, lam=2.0):
    corpus = synth_generate(seed=9, n_frames=3, n_train=50, n_eval=10)
    vocab = build_vocab([corpus.frame_train])
    cfg = EncoderConfig(vocab_size=len(vocab), hidden_dim=8, num_layers=1,
                        num_heads=2, max_seq_len=16)
    model = ConceptModel.build(cfg, corpus.inventory,
                               np.random.default_rng(seed),
                               np.random.default_rng(seed + 1))
    opt = Adam(list(model.parameters().values()), lr=1e-3)
    batches, _ = make_batches(corpus.frame_train, vocab, 16, 10)
    losses = []
    for _ in range(steps_epochs):
        for batch in batches:
            idx = np.array([corpus.inventory.index[s.target_frame]
                            for s in batch.samples])
            rows = np.stack([corpus.inventory.multi_hot(s.sentence_frames)
                             for s in batch.samples])
            losses.append(model.pretrain_step(batch.tokens, idx, rows, opt, lam))
    return model, losses, corpus, vocab


class TestPretrainStep:
    def test_loss_descends_over_100_steps(self):
        _, losses, _, _ = pretrain_toy()
        assert len(losses) == 100
        assert losses[-1] < losses[0]

    def test_same_seed_gives_identical_trace(self):
        _, a, _, _ = pretrain_toy(seed=13)
        _, b, _, _ = pretrain_toy(seed=13)
        assert a == b

    def test_lambda_zero_trains_target_head_only(self):
        model, losses, corpus, vocab = pretrain_toy(steps_epochs=2, lam=0.0)
        batches, _ = make_batches(corpus.frame_train, vocab, 16, 10)
        batch = batches[0]
        idx = np.array([corpus.inventory.index[s.target_frame]
                        for s in batch.samples])
        rows = np.stack([corpus.inventory.multi_hot(s.sentence_frames)
                         for s in batch.samples])
        from framemet.concepts import frame_logits_target, frame_loss
        out = model.encoder.encode(batch.tokens)
        pred = frame_logits_target(out.target, model.heads)
        expected = frame_loss(pred, idx, Tensor(np.full(rows.shape, 0.5)),
                              rows, lam=0.0)
        picked = np.clip(pred.data[np.arange(len(idx)), idx], 1e-7, 1 - 1e-7)
        assert abs(expected.item() - float(np.mean(-np.log(picked)))) <= 1e-12

    def test_empty_batch_rejected(self):
        corpus = synth_generate(seed=9, n_frames=3, n_train=5, n_eval=2)
        vocab = build_vocab([corpus.frame_train])
        cfg = EncoderConfig(vocab_size=len(vocab), hidden_dim=8, num_layers=1,
                            num_heads=2, max_seq_len=16)
        model = ConceptModel.build(cfg, corpus.inventory,
                                   np.random.default_rng(0),
                                   np.random.default_rng(1))

        class Empty:
            batch_size = 0

        with pytest.raises(UsageError):
            model.pretrain_step(Empty(), np.array([]), np.zeros((0, 3)),
                                None, 2.0)

    def test_frozen_model_predicts_identically(self):
        model, _, corpus, vocab = pretrain_toy(steps_epochs=3)
        batches, _ = make_batches(corpus.frame_eval, vocab, 16, 10)
        from framemet.autodiff import no_grad
        with no_grad():
            first = frame_logits_target(
                model.encoder.encode(batches[0].tokens).target, model.heads
            ).data
            second = frame_logits_target(
                model.encoder.encode(batches[0].tokens).target, model.heads
            ).data
        assert np.array_equal(first, second)
