"""Full-model wiring and checkpoint round-trips."""

import numpy as np
import pytest

from framemet.checkpoint import load_checkpoint, save_checkpoint
from framemet.data import build_vocab, synth_generate
from framemet.encoder import EncoderConfig
from framemet.errors import CheckpointError, UsageError
from framemet.fusion import SHUFFLE_FRAMES
from framemet.model import MetaphorModel

from helpers import check_gradients


def tiny_model(seed=5, d_s=8, d_f=8):
    corpus = synth_generate(seed=2, n_frames=3, n_train=30, n_eval=10)
    vocab = build_vocab([corpus.frame_train, corpus.metaphor_train])
    sent_cfg = EncoderConfig(vocab_size=len(vocab), hidden_dim=d_s,
                             num_layers=1, num_heads=2, max_seq_len=16)
    conc_cfg = EncoderConfig(vocab_size=len(vocab), hidden_dim=d_f,
                             num_layers=1, num_heads=2, max_seq_len=16)
    model = MetaphorModel.build(vocab, corpus.inventory, sent_cfg, conc_cfg,
                                seed=seed)
    return model, corpus


class TestWiring:
    def test_parameter_prefixes_are_disjoint(self):
        model, _ = tiny_model()
        names = list(model.parameters())
        sentence = {n for n in names if n.startswith("sentence_encoder.")}
        concept = {n for n in names if n.startswith("concept_encoder.")}
        heads = {n for n in names if n.startswith("frame_heads.")}
        pred = {n for n in names if n.startswith("prediction_head.")}
        assert sentence and concept and heads and pred
        assert len(names) == len(set(names))
        assert sentence | concept | heads | pred == set(names)
        # no shared arrays between the two encoders
        sent_arrays = {id(model.parameters()[n].data) for n in sentence}
        conc_arrays = {id(model.parameters()[n].data) for n in concept}
        assert not sent_arrays & conc_arrays

    def test_frame_heads_excluded_from_metaphor_training(self):
        model, _ = tiny_model()
        trainable = model.trainable_metaphor_parameters()
        assert not any(n.startswith("frame_heads.") for n in trainable)
        assert len(trainable) == len(model.parameters()) - 4

    def test_forward_is_deterministic(self):
        model, corpus = tiny_model()
        samples = corpus.metaphor_train[:6]
        a = model.forward(samples).data
        b = model.forward(samples).data
        assert np.array_equal(a, b)
        assert np.all((a > 0.0) & (a < 1.0))

    def test_forward_does_not_mutate_parameters(self):
        model, corpus = tiny_model()
        before = {n: p.data.copy() for n, p in model.parameters().items()}
        model.forward(corpus.metaphor_train[:4])
        for n, p in model.parameters().items():
            assert np.array_equal(before[n], p.data), n

    def test_forward_rejects_empty_batch(self):
        model, _ = tiny_model()
        with pytest.raises(UsageError):
            model.forward([])

    def test_shuffled_forward_with_identity_matches_normal(self):
        model, corpus = tiny_model()
        samples = corpus.metaphor_train[:5]
        normal = model.forward(samples).data
        shuffled = model.forward(samples, mode=SHUFFLE_FRAMES,
                                 permutation=np.arange(5)).data
        assert np.array_equal(normal, shuffled)

    def test_full_pipeline_gradients(self):
        model, corpus = tiny_model()
        samples = corpus.metaphor_train[:2]
        labels = np.array([s.label for s in samples])
        from framemet.fusion import metaphor_loss

        def build():
            return metaphor_loss(model.forward(samples), labels)

        # spot-check a representative subset; the acceptance suite sweeps all
        params = model.parameters()
        subset = {
            n: params[n]
            for n in (
                "sentence_encoder.emb.word",
                "sentence_encoder.layer0.attn.wq",
                "concept_encoder.layer0.ffn.w2",
                "concept_encoder.final_ln.gain",
                "prediction_head.weight",
                "prediction_head.bias",
            )
        }
        check_gradients(build, subset)


class TestCheckpoint:
    def test_round_trip_preserves_everything(self, tmp_path):
        model, corpus = tiny_model()
        path = tmp_path / "model.ckpt"
        save_checkpoint(model, path)
        loaded = load_checkpoint(path)
        assert loaded.vocab == model.vocab
        assert loaded.inventory == model.inventory
        for name, p in model.parameters().items():
            assert np.array_equal(loaded.parameters()[name].data, p.data), name
        samples = corpus.metaphor_train[:4]
        assert np.array_equal(
            model.forward(samples).data, loaded.forward(samples).data
        )

    def test_save_is_byte_deterministic(self, tmp_path):
        model, _ = tiny_model()
        a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(model, a)
        save_checkpoint(model, b)
        assert a.read_bytes() == b.read_bytes()

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"not a checkpoint at all")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_rejects_truncated_magic(self, tmp_path):
        model, _ = tiny_model()
        path = tmp_path / "model.ckpt"
        save_checkpoint(model, path)
        raw = path.read_bytes()
        path.write_bytes(b"XXXX" + raw[4:])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
