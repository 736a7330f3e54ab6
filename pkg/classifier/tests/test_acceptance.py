"""Acceptance gate for the classifier; prints one line per criterion."""

import copy
import time

import torch

from temporal_classifier.data import make_synthetic_pairs
from temporal_classifier.model import FusionModel
from temporal_classifier.train import TrainConfig, evaluate, predict, train


class Budget:
    def __init__(self, name: str, seconds: float):
        self.name = name
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            return False
        elapsed = time.perf_counter() - self.start
        assert elapsed < self.seconds, (
            f"{self.name} took {elapsed:.2f}s, budget {self.seconds}s"
        )
        print(f"[ACCEPTANCE] {self.name}: PASS ({elapsed:.2f}s)")
        return False


def test_gradient_check_on_time_embedding_path():
    """Backprop gradient of the loss w.r.t. a time-embedding row matches
    central finite differences within 1e-4 relative error."""
    with Budget("fusion-gradient-check", 60.0):
        torch.manual_seed(7)
        model = FusionModel(text_width=8, time_width=4, hidden=8, dropout=0.0).double()
        model.eval()
        texts = ["fever [SEP] rash", "fall [SEP] surgery", "pain [SEP] fluids"]
        bins = torch.tensor([5, 5, 5])
        labels = torch.tensor([0, 1, 2])
        loss_fn = torch.nn.CrossEntropyLoss()

        model.zero_grad()
        loss_fn(model(texts, bins), labels).backward()
        analytic = model.time_embedding.weight.grad[5].clone()

        eps = 1e-6
        numeric = torch.zeros_like(analytic)
        with torch.no_grad():
            for j in range(numeric.numel()):
                original = model.time_embedding.weight[5, j].item()
                model.time_embedding.weight[5, j] = original + eps
                up = loss_fn(model(texts, bins), labels).item()
                model.time_embedding.weight[5, j] = original - eps
                down = loss_fn(model(texts, bins), labels).item()
                model.time_embedding.weight[5, j] = original
                numeric[j] = (up - down) / (2 * eps)

        rel = (analytic - numeric).norm() / (analytic.norm() + numeric.norm() + 1e-12)
        assert rel < 1e-4, f"relative gradient error {rel:.2e}"


def test_overfit_sanity_200_pairs():
    """200 separable synthetic pairs reach >= 95% train accuracy within
    5 epochs at the documented fine-tuning rate (Adam, lr 2e-5)."""
    with Budget("overfit-sanity", 300.0):
        torch.manual_seed(1)
        model = FusionModel()
        dataset = make_synthetic_pairs(200, seed=0)
        config = TrainConfig(learning_rate=2e-5, epochs=5, batch_size=4, seed=1)
        model, trace = train(model, dataset, config)
        accuracy = evaluate(model, dataset)
        assert accuracy >= 0.95, f"train accuracy {accuracy:.3f} after {trace}"


def test_bin_ablation_identity():
    """With a zeroed frozen time table, predictions equal a text-only
    model's on every test input."""
    with Budget("bin-ablation-identity", 60.0):
        torch.manual_seed(3)
        model = FusionModel(text_width=32, time_width=16, hidden=32)
        dataset = make_synthetic_pairs(120, seed=2)
        model, _ = train(model, dataset, TrainConfig(epochs=1, batch_size=8, seed=3))
        model.zero_time_embedding(freeze=True)

        frozen = copy.deepcopy(model)

        class TextOnly(torch.nn.Module):
            def __init__(self, src):
                super().__init__()
                self.src = src

            def forward(self, texts, bins):
                h_text = self.src.encoder(texts)
                h_time = torch.zeros(len(texts), self.src.time_embedding.embedding_dim)
                fused = torch.cat([h_text, h_time], dim=1)
                return self.src.fc2(self.src.dropout(self.src.activation(self.src.fc1(fused))))

        baseline = TextOnly(frozen)
        baseline.eval()
        model.eval()
        test_inputs = make_synthetic_pairs(90, seed=11)
        fused_preds = predict(model, test_inputs)
        with torch.no_grad():
            texts = [r.text for r in test_inputs]
            bins = torch.tensor([r.t for r in test_inputs])
            baseline_preds = baseline(texts, bins).argmax(dim=1)
        assert torch.equal(fused_preds, baseline_preds)
