"""Training loop for the WiC pair classifier.

The configuration mirrors the reference recipe: AdamW, weight decay 0.01,
a 20-epoch budget. The default 1e-5 learning rate assumes a pretrained
starting point; training the tiny preset from scratch (the offline test
path) wants ~1e-3. Runs are single-threaded and fully seeded, so identical
config + seed reproduces the metrics log bit for bit.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import torch
import torch.nn as nn

from .data import Vocab, check_marker_alignment, encode_pair, mark_target
from .model import PairClassifier, batch_tensors

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    base_model: str = "tiny"  # preset name, or a path to a saved artifact to fine-tune
    epochs: int = 20
    weight_decay: float = 0.01
    learning_rate: float = 1e-5
    batch_size: int = 16
    max_len: int = 256
    seed: int = 0
    marking: str = "reserved-tokens"
    max_vocab: int = 20000

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1 or self.max_len < 8:
            raise ValueError("bad batch_size/max_len")

    def digest(self) -> str:
        payload = json.dumps(dataclasses.asdict(self), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


@dataclass
class TrainResult:
    artifact_dir: Path
    metrics: list[dict] = field(default_factory=list)


def _validate_records(records: list[dict]) -> None:
    if not records:
        raise ValueError("training dataset is empty")
    for rec in records:
        check_marker_alignment(rec["s1"], rec["s1_start"], rec["s1_end"])
        check_marker_alignment(rec["s2"], rec["s2_start"], rec["s2_end"])
    positives = sum(int(r["label"]) for r in records)
    if positives * 2 != len(records):
        logger.warning("label imbalance: %d positive of %d pairs", positives, len(records))


def _marked_texts(records):
    for rec in records:
        yield mark_target(rec["s1"], rec["s1_start"], rec["s1_end"])
        yield mark_target(rec["s2"], rec["s2_start"], rec["s2_end"])


def _evaluate(model, vocab, records, max_len, batch_size) -> float:
    model.eval()
    correct = 0
    with torch.no_grad():
        for start in range(0, len(records), batch_size):
            chunk = records[start : start + batch_size]
            ids, segs, mask = batch_tensors([encode_pair(vocab, r, max_len) for r in chunk])
            predicted = model(ids, segs, mask).argmax(dim=1)
            gold = torch.tensor([int(r["label"]) for r in chunk])
            correct += (predicted == gold).sum().item()
    return correct / len(records)


def load_artifact(artifact_dir) -> tuple[PairClassifier, Vocab, dict]:
    artifact_dir = Path(artifact_dir)
    meta = json.loads((artifact_dir / "config.json").read_text(encoding="utf-8"))
    vocab = Vocab.from_dict(meta["vocab"])
    model = PairClassifier(len(vocab), meta["preset"], meta["max_len"])
    model.load_state_dict(torch.load(artifact_dir / "weights.pt", map_location="cpu"))
    model.eval()
    return model, vocab, meta


def train(
    train_records: list[dict],
    config: TrainConfig,
    out_dir,
    val_records: Optional[list[dict]] = None,
) -> TrainResult:
    """Train (or continue training) the classifier and save an artifact."""
    _validate_records(train_records)
    torch.manual_seed(config.seed)
    torch.set_num_threads(1)

    base = Path(config.base_model)
    if base.is_dir():
        model, vocab, meta = load_artifact(base)
        preset = meta["preset"]
        model.train()
    else:
        preset = config.base_model
        vocab = Vocab.build(_marked_texts(train_records), config.max_vocab)
        model = PairClassifier(len(vocab), preset, config.max_len)

    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate,
                                  weight_decay=config.weight_decay)
    loss_fn = nn.CrossEntropyLoss()
    shuffler = random.Random(config.seed)
    encoded = [encode_pair(vocab, r, config.max_len) for r in train_records]
    labels = [int(r["label"]) for r in train_records]

    metrics: list[dict] = []
    for epoch in range(config.epochs):
        order = list(range(len(train_records)))
        shuffler.shuffle(order)
        model.train()
        loss_sum, correct = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            ids, segs, mask = batch_tensors([encoded[i] for i in batch])
            gold = torch.tensor([labels[i] for i in batch])
            logits = model(ids, segs, mask)
            loss = loss_fn(logits, gold)
            if not math.isfinite(loss.item()):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}: "
                    f"{loss.item()} (lr={config.learning_rate})"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            loss_sum += loss.item() * len(batch)
            correct += (logits.argmax(dim=1) == gold).sum().item()
        row = {
            "epoch": epoch,
            "train_loss": round(loss_sum / len(order), 6),
            "train_acc": round(correct / len(order), 6),
        }
        if val_records:
            row["val_acc"] = round(
                _evaluate(model, vocab, val_records, config.max_len, config.batch_size), 6
            )
        metrics.append(row)
        logger.info("epoch %d: loss %.4f acc %.3f", epoch, row["train_loss"], row["train_acc"])

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), out_dir / "weights.pt")
    (out_dir / "config.json").write_text(
        json.dumps({
            "model_id": preset,
            "preset": preset,
            "max_len": config.max_len,
            "config": dataclasses.asdict(config),
            "digest": config.digest(),
            "vocab": vocab.to_dict(),
        }, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    with (out_dir / "metrics.jsonl").open("w", encoding="utf-8") as fh:
        for row in metrics:
            fh.write(json.dumps(row) + "\n")
    return TrainResult(out_dir, metrics)


def score_pairs(model: PairClassifier, vocab: Vocab, records: list[dict],
                max_len: int = 256, batch_size: int = 64) -> list[float]:
    """Positive-class probabilities, order-preserving."""
    model.eval()
    scores: list[float] = []
    with torch.no_grad():
        for start in range(0, len(records), batch_size):
            chunk = records[start : start + batch_size]
            ids, segs, mask = batch_tensors([encode_pair(vocab, r, max_len) for r in chunk])
            probs = torch.softmax(model(ids, segs, mask), dim=1)[:, 1]
            scores.extend(float(p) for p in probs)
    return scores
