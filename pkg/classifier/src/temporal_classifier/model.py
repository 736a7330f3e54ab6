"""Temporal-fusion classifier.

A text encoder maps the pair text to a pooled vector, a learned embedding
table maps the time-bin index to a dense vector, and the two are
concatenated and pushed through a small MLP (linear, ReLU, dropout,
linear) to class logits. The encoder is pluggable: anything mapping a
list of strings to a [batch, width] tensor works; the default is a
self-contained hashing EmbeddingBag encoder so the package trains without
downloading weights. The classifier head starts near zero (std 1e-3) so
the first fine-tuning steps decide the predicted class ordering rather
than random init noise, which is what makes fine-tuning-scale learning
rates converge quickly even from a fresh encoder.
"""

from __future__ import annotations

import hashlib
from typing import Sequence

import torch
from torch import nn

from .data import N_BINS, N_CLASSES
from .errors import BadBinIndex

DEFAULT_TEXT_WIDTH = 128
DEFAULT_TIME_WIDTH = 32
DEFAULT_HIDDEN = 256
DEFAULT_DROPOUT = 0.1
DEFAULT_VOCAB = 4096


def _token_index(token: str, vocab_size: int) -> int:
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little") % vocab_size


class HashingTextEncoder(nn.Module):
    """Mean-pooled bag of hashed tokens; deterministic across processes."""

    def __init__(self, width: int = DEFAULT_TEXT_WIDTH, vocab_size: int = DEFAULT_VOCAB):
        super().__init__()
        self.width = width
        self.vocab_size = vocab_size
        self.bag = nn.EmbeddingBag(vocab_size, width, mode="mean")

    def forward(self, texts: Sequence[str]) -> torch.Tensor:
        indices: list[int] = []
        offsets: list[int] = []
        for text in texts:
            offsets.append(len(indices))
            tokens = text.lower().split() or ["<empty>"]
            indices.extend(_token_index(tok, self.vocab_size) for tok in tokens)
        device = self.bag.weight.device
        return self.bag(
            torch.tensor(indices, dtype=torch.long, device=device),
            torch.tensor(offsets, dtype=torch.long, device=device),
        )


class FusionModel(nn.Module):
    """Text vector concatenated with a time-bin embedding, then an MLP head."""

    def __init__(
        self,
        encoder: nn.Module | None = None,
        text_width: int = DEFAULT_TEXT_WIDTH,
        time_width: int = DEFAULT_TIME_WIDTH,
        hidden: int = DEFAULT_HIDDEN,
        dropout: float = DEFAULT_DROPOUT,
        n_bins: int = N_BINS,
        n_classes: int = N_CLASSES,
    ):
        super().__init__()
        self.encoder = encoder if encoder is not None else HashingTextEncoder(text_width)
        width = getattr(self.encoder, "width", text_width)
        self.n_bins = n_bins
        self.n_classes = n_classes
        self.time_embedding = nn.Embedding(n_bins, time_width)
        self.fc1 = nn.Linear(width + time_width, hidden)
        self.activation = nn.ReLU()
        self.dropout = nn.Dropout(dropout)
        self.fc2 = nn.Linear(hidden, n_classes)
        nn.init.normal_(self.fc2.weight, std=1e-3)
        nn.init.zeros_(self.fc2.bias)

    def forward(self, texts: Sequence[str], time_bins: torch.Tensor) -> torch.Tensor:
        if time_bins.numel() and (time_bins.min() < 0 or time_bins.max() >= self.n_bins):
            bad = int(time_bins.min() if time_bins.min() < 0 else time_bins.max())
            raise BadBinIndex(bad, self.n_bins)
        h_text = self.encoder(texts)
        h_time = self.time_embedding(time_bins)
        fused = torch.cat([h_text, h_time], dim=1)
        hidden = self.dropout(self.activation(self.fc1(fused)))
        return self.fc2(hidden)

    def zero_time_embedding(self, freeze: bool = True) -> None:
        """Ablation helper: kill the time path, optionally freezing it."""
        with torch.no_grad():
            self.time_embedding.weight.zero_()
        self.time_embedding.weight.requires_grad_(not freeze)


def forward(model: FusionModel, pair_text: str, time_bin: int) -> torch.Tensor:
    """Logits for one pair; raises BadBinIndex outside the bin vocabulary."""
    if not 0 <= time_bin < model.n_bins:
        raise BadBinIndex(time_bin, model.n_bins)
    with torch.no_grad():
        return model([pair_text], torch.tensor([time_bin]))[0]
