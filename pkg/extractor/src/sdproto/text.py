"""Conditioning encoder: a causal transformer over token ids.

Extraction always runs unconditionally, so the only sequence this model
ever sees is the empty prompt: start-of-text followed by end-of-text
padding. That pattern is fixed by the config token ids; no tokenizer is
involved.
"""

from __future__ import annotations

import torch
from torch import nn

from .blocks import MultiHeadAttention
from .config import TextConfig


class QuickGelu(nn.Module):
    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x * torch.sigmoid(1.702 * x)


class TextLayer(nn.Module):
    def __init__(self, cfg: TextConfig):
        super().__init__()
        self.norm1 = nn.LayerNorm(cfg.hidden_size)
        self.attn = MultiHeadAttention(cfg.hidden_size, cfg.hidden_size, cfg.num_heads)
        self.norm2 = nn.LayerNorm(cfg.hidden_size)
        self.mlp = nn.Sequential(
            nn.Linear(cfg.hidden_size, cfg.hidden_size * 4),
            QuickGelu(),
            nn.Linear(cfg.hidden_size * 4, cfg.hidden_size),
        )

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.norm1(x), mask=mask)
        x = x + self.mlp(self.norm2(x))
        return x


class TextEncoder(nn.Module):
    def __init__(self, cfg: TextConfig):
        super().__init__()
        self.cfg = cfg
        self.token_embedding = nn.Embedding(cfg.vocab_size, cfg.hidden_size)
        self.position_embedding = nn.Embedding(cfg.max_length, cfg.hidden_size)
        self.layers = nn.ModuleList(TextLayer(cfg) for _ in range(cfg.num_layers))
        self.final_norm = nn.LayerNorm(cfg.hidden_size)

    def forward(self, token_ids: torch.Tensor) -> torch.Tensor:
        """(N, L) ids -> (N, L, hidden) sequence states."""
        n, length = token_ids.shape
        positions = torch.arange(length, device=token_ids.device)
        x = self.token_embedding(token_ids) + self.position_embedding(positions)
        mask = torch.full((length, length), float("-inf"), device=x.device)
        mask = torch.triu(mask, diagonal=1)
        for layer in self.layers:
            x = layer(x, mask)
        return self.final_norm(x)

    def empty_prompt(self) -> torch.Tensor:
        """(1, L, hidden) conditioning for the unconditional forward pass."""
        ids = torch.tensor([self.cfg.empty_prompt_ids()], dtype=torch.long)
        return self.forward(ids)
