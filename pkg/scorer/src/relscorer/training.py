"""Pairwise trainer and training-pair construction.

The per-pair loss is the binary cross-entropy form

    L = -log(p_plus) - log(1 - p_minus)

where p = score(query, passage): the relevant passage is pushed toward
probability 1 and the non-relevant one toward 0. (A loss of
-log p_plus - log p_minus, which one sometimes sees misprinted, would be
minimized by scoring *both* passages 1 and cannot rank.) Internally the
loss is computed in logit space for numerical stability.
"""

import json
import random
from dataclasses import dataclass

import torch
from torch.nn import functional as F

from .model import score_logits


@dataclass(frozen=True)
class TrainingPair:
    query: str
    d_plus: str
    d_minus: str

    def __post_init__(self):
        if not (self.query and self.d_plus and self.d_minus):
            raise ValueError("query, d_plus, and d_minus must be non-empty")
        if self.d_plus == self.d_minus:
            raise ValueError("d_plus and d_minus must differ")


def pairwise_loss_from_probs(p_plus, p_minus):
    """L = -log(p_plus) - log(1 - p_minus), for probability inputs."""
    p_plus = torch.as_tensor(p_plus, dtype=torch.float64)
    p_minus = torch.as_tensor(p_minus, dtype=torch.float64)
    return (-torch.log(p_plus) - torch.log(1 - p_minus)).mean()


def pairwise_loss(logit_plus, logit_minus):
    """The same loss on raw logits, numerically stable:
    softplus(-z_plus) + softplus(z_minus)."""
    return (F.softplus(-logit_plus) + F.softplus(logit_minus)).mean()


@dataclass(frozen=True)
class TrainingReport:
    initial_loss: float
    final_loss: float
    losses: tuple  # mean loss per epoch


def train(model, pairs, learning_rate=2e-5, steps=1, batch_size=32, seed=0):
    """Optimize the pairwise loss over `pairs` for `steps` epochs.

    Returns a TrainingReport; the model is updated in place. Aborts on a
    non-finite loss.
    """
    if not pairs:
        raise ValueError("training needs at least one pair")
    rng = random.Random(seed)
    torch.manual_seed(seed)
    optimizer = torch.optim.AdamW(model.parameters(), lr=learning_rate)
    report_losses = []
    initial = evaluate_loss(model, pairs, batch_size)
    for _ in range(steps):
        order = list(range(len(pairs)))
        rng.shuffle(order)
        model.train()
        epoch_losses = []
        for start in range(0, len(order), batch_size):
            batch = [pairs[i] for i in order[start:start + batch_size]]
            plus = score_logits(model, [(p.query, p.d_plus) for p in batch])
            minus = score_logits(model, [(p.query, p.d_minus) for p in batch])
            loss = pairwise_loss(plus, minus)
            if not torch.isfinite(loss):
                raise RuntimeError(f"non-finite training loss: {loss.item()}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_losses.append(loss.item())
        report_losses.append(sum(epoch_losses) / len(epoch_losses))
    final = evaluate_loss(model, pairs, batch_size)
    return TrainingReport(initial, final, tuple(report_losses))


def evaluate_loss(model, pairs, batch_size=32):
    """Mean pairwise loss without updating the model."""
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for start in range(0, len(pairs), batch_size):
            batch = pairs[start:start + batch_size]
            plus = score_logits(model, [(p.query, p.d_plus) for p in batch])
            minus = score_logits(model, [(p.query, p.d_minus) for p in batch])
            total += pairwise_loss(plus, minus).item() * len(batch)
            count += len(batch)
    return total / count


def pairwise_accuracy(model, pairs, batch_size=32):
    """Fraction of pairs where the relevant passage outscores the other."""
    model.eval()
    correct = 0
    with torch.no_grad():
        for start in range(0, len(pairs), batch_size):
            batch = pairs[start:start + batch_size]
            plus = score_logits(model, [(p.query, p.d_plus) for p in batch])
            minus = score_logits(model, [(p.query, p.d_minus) for p in batch])
            correct += int((plus > minus).sum())
    return correct / len(pairs)


def build_training_pairs(queries, positives, candidates,
                         negatives_per_query=1, seed=0):
    """Assemble pairs under a shallow labeling scheme.

    queries: query_id -> text. positives: query_id -> iterable of
    relevant passage texts. candidates: query_id -> iterable of candidate
    passage texts (negatives are drawn uniformly from the unlabeled
    ones, with a fixed seed). Queries without a positive are skipped.

    Returns (pairs, skipped_query_count).
    """
    rng = random.Random(seed)
    pairs = []
    skipped = 0
    for query_id in sorted(queries):
        labeled = list(positives.get(query_id, ()))
        if not labeled:
            skipped += 1
            continue
        pool = [c for c in candidates.get(query_id, ()) if c not in set(labeled)]
        for d_plus in labeled:
            if not pool:
                continue
            take = min(negatives_per_query, len(pool))
            for d_minus in rng.sample(pool, take):
                pairs.append(TrainingPair(queries[query_id], d_plus, d_minus))
    return pairs, skipped


def read_pairs_file(path):
    """JSON-lines pairs: {"query": ..., "positive": ..., "negative": ...}."""
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                pairs.append(TrainingPair(record["query"], record["positive"],
                                          record["negative"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad training pair: {exc}")
    return pairs
