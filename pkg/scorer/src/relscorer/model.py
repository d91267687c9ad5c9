"""The cross-encoder: a small transformer with a single-logit head.

The relevance prediction is read off the first ([CLS]) position's final
representation and squashed through a sigmoid, so scores always lie in
(0, 1). Dropout is zero everywhere: inference is a pure function of the
inputs and the weights.

Model identifiers:
    "tiny"        random-weight CI-sized encoder (2 layers, width 64)
    a file path   a checkpoint previously written with `save_model`
"""

import os
from dataclasses import asdict, dataclass

import torch
from torch import nn

from . import tokenizer


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int = tokenizer.VOCAB_SIZE
    max_sequence_length: int = tokenizer.MAX_SEQUENCE_LENGTH
    max_query_units: int = tokenizer.MAX_QUERY_UNITS
    width: int = 64
    heads: int = 4
    layers: int = 2
    ffn_width: int = 128


class CrossEncoder(nn.Module):
    """Joint query/passage encoder emitting one relevance logit."""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        self.embedding = nn.Embedding(config.vocab_size, config.width,
                                      padding_idx=tokenizer.PAD_ID)
        self.position = nn.Embedding(config.max_sequence_length, config.width)
        layer = nn.TransformerEncoderLayer(
            d_model=config.width, nhead=config.heads,
            dim_feedforward=config.ffn_width, dropout=0.0,
            batch_first=True, norm_first=True)
        self.encoder = nn.TransformerEncoder(layer, config.layers,
                                             enable_nested_tensor=False)
        self.head = nn.Linear(config.width, 1)

    def forward(self, ids, pad_mask):
        """ids: (batch, seq) int64; pad_mask: True at padding positions.
        Returns (batch,) relevance logits from the [CLS] position."""
        positions = torch.arange(ids.shape[1], device=ids.device)
        x = self.embedding(ids) + self.position(positions)
        x = self.encoder(x, src_key_padding_mask=pad_mask)
        return self.head(x[:, 0, :]).squeeze(-1)


def _batch_ids(pairs, config):
    """Encode (query, passage) pairs into padded id/mask tensors."""
    sequences = [tokenizer.encode_pair(q, p, config.max_sequence_length,
                                       config.max_query_units)
                 for q, p in pairs]
    longest = max(len(s) for s in sequences)
    ids = torch.full((len(sequences), longest), tokenizer.PAD_ID,
                     dtype=torch.long)
    mask = torch.ones((len(sequences), longest), dtype=torch.bool)
    for i, seq in enumerate(sequences):
        ids[i, :len(seq)] = torch.tensor(seq, dtype=torch.long)
        mask[i, :len(seq)] = False
    return ids, mask


def score_logits(model, pairs):
    """Relevance logits for a list of (query, passage) pairs (grads on)."""
    ids, mask = _batch_ids(pairs, model.config)
    return model(ids, mask)


def score_batch(model, pairs):
    """Probabilities in (0, 1) for (query, passage) pairs, no gradients."""
    model.eval()
    with torch.no_grad():
        return torch.sigmoid(score_logits(model, pairs)).tolist()


def score(model, query_text, passage_text):
    return score_batch(model, [(query_text, passage_text)])[0]


def build_model(identifier, seed=0):
    """Instantiate a model by identifier ("tiny" or a checkpoint path)."""
    if identifier == "tiny":
        torch.manual_seed(seed)
        return CrossEncoder(EncoderConfig())
    if os.path.exists(identifier):
        return load_model(identifier)
    raise ValueError(f"unknown model identifier {identifier!r}; expected "
                     "'tiny' or a checkpoint path")


def save_model(model, path):
    torch.save({"config": asdict(model.config),
                "state": model.state_dict()}, path)


def load_model(path):
    payload = torch.load(path, map_location="cpu", weights_only=True)
    model = CrossEncoder(EncoderConfig(**payload["config"]))
    model.load_state_dict(payload["state"])
    return model
