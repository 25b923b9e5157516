import torch

from conftest import toy_model
from kurdft.config import TrainConfig
from kurdft.masks import build_freeze_mask
from kurdft.resize import resize_for_hybrid
from kurdft.train import batches_from_dataset, load_checkpoint, lr_at, save_checkpoint, train
from kurdft.vocabio import Vocab


def _memorizable_batch(seed=0, vocab=60):
    torch.manual_seed(seed)
    features = torch.randn(2, 14, 16)
    tokens = torch.randint(0, vocab, (2, 9))
    return [(features, tokens)]


class TestSchedule:
    def test_linear_warmup_then_constant(self):
        config = TrainConfig(learning_rate=1e-5, warmup_steps=500, max_steps=1000)
        assert lr_at(1, config) == 1e-5 / 500
        assert lr_at(250, config) == 1e-5 / 2
        assert lr_at(500, config) == 1e-5
        assert lr_at(501, config) == 1e-5
        assert lr_at(1000, config) == 1e-5

    def test_zero_warmup(self):
        config = TrainConfig(warmup_steps=0, max_steps=10)
        assert lr_at(1, config) == config.learning_rate


class TestFreezeDuringTraining:
    def _run(self, strategy, adapter_size=0, resize=False, steps=3):
        model = toy_model(adapter_size=adapter_size, seed=2)
        if resize:
            rows = model.embed.num_rows
            hybrid = Vocab(tuple(f"t{i}" for i in range(rows + 3)), (), id_offset=rows)
            resize_for_hybrid(model, hybrid, seed=2)
        names = [name for name, _ in model.named_parameters()]
        mask = build_freeze_mask(strategy, names)
        before = {name: p.detach().clone() for name, p in model.named_parameters()}
        config = TrainConfig(learning_rate=1e-3, warmup_steps=0, max_steps=steps)
        train(model, _memorizable_batch(vocab=model.embed.num_rows), config, mask)
        return model, mask, before

    def test_frozen_tensors_bitwise_unchanged_every_strategy(self):
        for strategy, kwargs in (
            ("specific", {}),
            ("additional", {"adapter_size": 8, "resize": True}),
        ):
            model, mask, before = self._run(strategy, **kwargs)
            frozen = set(mask.frozen)
            for name, parameter in model.named_parameters():
                if name in frozen:
                    assert torch.equal(parameter, before[name]), (strategy, name)

    def test_at_least_one_trainable_tensor_changes(self):
        for strategy, kwargs in (
            ("vanilla", {}),
            ("specific", {}),
            ("additional", {"adapter_size": 8, "resize": True}),
        ):
            model, mask, before = self._run(strategy, **kwargs)
            changed = [
                name
                for name, parameter in model.named_parameters()
                if name in set(mask.trainable) and not torch.equal(parameter, before[name])
            ]
            assert changed, strategy


class TestOverfitOrdering:
    def test_vanilla_beats_specific_and_both_decrease(self):
        batch = _memorizable_batch(seed=4)
        config = TrainConfig(learning_rate=3e-3, warmup_steps=0, max_steps=40)
        final = {}
        for strategy in ("vanilla", "specific_parameter"):
            model = toy_model(seed=4)
            mask = build_freeze_mask(strategy, [n for n, _ in model.named_parameters()])
            losses = train(model, batch, config, mask)
            for earlier, later in zip(losses, losses[1:]):
                assert later < earlier + 1e-9, strategy
            final[strategy] = losses[-1]
            assert losses[-1] < losses[0]
        assert final["vanilla"] < final["specific_parameter"]


class TestArtifacts:
    def test_metrics_and_checkpoint_written(self, tmp_path):
        model = toy_model(seed=1)
        config = TrainConfig(learning_rate=1e-3, warmup_steps=2, max_steps=5, checkpoint_every=2)
        mask = build_freeze_mask("vanilla", [n for n, _ in model.named_parameters()])
        losses = train(model, _memorizable_batch(), config, mask, out_dir=tmp_path)
        assert len(losses) == 5
        metrics = (tmp_path / "metrics.tsv").read_text(encoding="utf-8").splitlines()
        assert metrics[0] == "step\tlr\tloss"
        assert len(metrics) == 6
        assert (tmp_path / "checkpoint.pt").is_file()

    def test_checkpoint_round_trip(self, tmp_path):
        model = toy_model(seed=6)
        rows = model.embed.num_rows
        resize_for_hybrid(model, Vocab(tuple(f"t{i}" for i in range(rows + 2)), (), id_offset=rows), seed=6)
        path = tmp_path / "ckpt.pt"
        save_checkpoint(model, path)
        loaded = load_checkpoint(path)
        assert loaded.embed.num_rows == model.embed.num_rows
        for (name_a, a), (name_b, b) in zip(
            model.named_parameters(), loaded.named_parameters()
        ):
            assert name_a == name_b
            assert torch.equal(a, b)
        torch.manual_seed(0)
        features = torch.randn(1, 8, 16)
        tokens = torch.randint(0, rows, (1, 5))
        with torch.no_grad():
            assert torch.equal(model(features, tokens), loaded(features, tokens))


class TestBatching:
    def test_padding_and_delimiters(self):
        examples = [
            (torch.zeros(5, 16), [7, 8]),
            (torch.zeros(3, 16), [9]),
        ]
        (features, tokens), = batches_from_dataset(examples, bos_id=2, eos_id=3, batch_size=2)
        assert features.shape == (2, 5, 16)
        assert tokens[0].tolist() == [2, 7, 8, 3]
        assert tokens[1].tolist() == [2, 9, 3, -100]
