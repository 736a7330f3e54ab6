"""Training and evaluation loop for the fusion classifier."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import torch
from torch import nn

from .data import PairSample
from .errors import ClassifierError, DataSchemaError, EmptyTestSet
from .model import FusionModel

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 2e-5
    batch_size: int = 4
    epochs: int = 5
    mixed_precision: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ClassifierError("learning_rate must be > 0")
        if self.batch_size < 1 or self.epochs < 1:
            raise ClassifierError("batch_size and epochs must be >= 1")


def _batches(order: Sequence[int], size: int):
    for start in range(0, len(order), size):
        yield order[start:start + size]


def train(
    model: FusionModel,
    dataset: Sequence[PairSample],
    config: TrainConfig,
) -> tuple[FusionModel, list[float]]:
    """Minimize cross-entropy with Adam; returns the model and the
    per-epoch mean training loss. Fixed seed gives a bit-identical trace."""
    if not dataset:
        raise DataSchemaError("training dataset is empty")
    torch.manual_seed(config.seed)
    device = next(model.parameters()).device
    use_amp = config.mixed_precision and device.type == "cuda"
    if config.mixed_precision and not use_amp:
        logger.warning("mixed precision requested but no CUDA device; ignoring")
    scaler = torch.amp.GradScaler(device.type, enabled=use_amp)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    loss_fn = nn.CrossEntropyLoss()
    generator = torch.Generator().manual_seed(config.seed)

    trace: list[float] = []
    for _ in range(config.epochs):
        model.train()
        order = torch.randperm(len(dataset), generator=generator).tolist()
        total = 0.0
        for batch_idx in _batches(order, config.batch_size):
            rows = [dataset[i] for i in batch_idx]
            texts = [r.text for r in rows]
            bins = torch.tensor([r.t for r in rows], device=device)
            labels = torch.tensor([r.y for r in rows], device=device)
            optimizer.zero_grad()
            with torch.autocast(device.type, enabled=use_amp):
                loss = loss_fn(model(texts, bins), labels)
            scaler.scale(loss).backward()
            scaler.step(optimizer)
            scaler.update()
            total += loss.item() * len(rows)
        trace.append(total / len(dataset))
    return model, trace


def predict(model: FusionModel, dataset: Sequence[PairSample]) -> torch.Tensor:
    model.eval()
    device = next(model.parameters()).device
    outputs = []
    with torch.no_grad():
        for start in range(0, len(dataset), 64):
            rows = dataset[start:start + 64]
            texts = [r.text for r in rows]
            bins = torch.tensor([r.t for r in rows], device=device)
            outputs.append(model(texts, bins).argmax(dim=1))
    return torch.cat(outputs) if outputs else torch.empty(0, dtype=torch.long)


def evaluate(model: FusionModel, test_set: Sequence[PairSample]) -> float:
    """Plain accuracy: mean of the correct-prediction indicator."""
    if not test_set:
        raise EmptyTestSet("cannot evaluate on an empty test set")
    predictions = predict(model, test_set)
    labels = torch.tensor([r.y for r in test_set])
    return float((predictions == labels).float().mean())


def save_model(model: FusionModel, config: TrainConfig, out_dir: str | Path) -> Path:
    """Weights plus the exact config snapshot that produced them."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), out / "model.pt")
    (out / "train_config.json").write_text(
        json.dumps(asdict(config), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return out


def load_model(model: FusionModel, model_dir: str | Path) -> FusionModel:
    state = torch.load(Path(model_dir) / "model.pt", weights_only=True)
    model.load_state_dict(state)
    return model


def write_metrics(accuracy: float, loss_trace: Sequence[float], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps({"accuracy": accuracy, "loss_trace": list(loss_trace)},
                   sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
