"""Transformer encoder over token+position+segment embeddings with a 2-way head."""

from __future__ import annotations

import torch
import torch.nn as nn

# d_model, heads, layers, feed-forward width
PRESETS = {
    "tiny": (96, 4, 2, 192),
    "small": (160, 4, 3, 320),
}


class PairClassifier(nn.Module):
    """Binary same-sense classifier; score = positive-class probability."""

    def __init__(self, vocab_size: int, preset: str = "tiny", max_len: int = 256,
                 dropout: float = 0.1):
        super().__init__()
        if preset not in PRESETS:
            raise ValueError(f"unknown model preset {preset!r}; choose from {sorted(PRESETS)}")
        d_model, heads, layers, ff = PRESETS[preset]
        self.preset = preset
        self.max_len = max_len
        self.token_embedding = nn.Embedding(vocab_size, d_model, padding_idx=0)
        self.position_embedding = nn.Embedding(max_len, d_model)
        self.segment_embedding = nn.Embedding(2, d_model)
        layer = nn.TransformerEncoderLayer(d_model, heads, ff, dropout=dropout,
                                           batch_first=True, norm_first=True)
        self.encoder = nn.TransformerEncoder(layer, layers, enable_nested_tensor=False)
        self.head = nn.Linear(d_model, 2)

    def forward(self, token_ids: torch.Tensor, segment_ids: torch.Tensor,
                attention_mask: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(token_ids.size(1), device=token_ids.device).unsqueeze(0)
        hidden = (self.token_embedding(token_ids)
                  + self.position_embedding(positions)
                  + self.segment_embedding(segment_ids))
        hidden = self.encoder(hidden, src_key_padding_mask=~attention_mask)
        return self.head(hidden[:, 0])


def batch_tensors(encoded: list[tuple[list[int], list[int]]]):
    """Pad a list of (ids, segments) to a (ids, segments, mask) tensor triple."""
    width = max(len(ids) for ids, _ in encoded)
    n = len(encoded)
    token_ids = torch.zeros(n, width, dtype=torch.long)
    segment_ids = torch.zeros(n, width, dtype=torch.long)
    mask = torch.zeros(n, width, dtype=torch.bool)
    for row, (ids, segs) in enumerate(encoded):
        token_ids[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
        segment_ids[row, : len(segs)] = torch.tensor(segs, dtype=torch.long)
        mask[row, : len(ids)] = True
    return token_ids, segment_ids, mask
