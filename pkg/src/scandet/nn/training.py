"""Generic mini-batch training loop with early stopping, plus checkpoints.

Checkpoint files are ``.npz`` containers holding one float64 array per named
parameter/buffer and a ``__meta__`` JSON string with ``format_version`` and
caller-supplied metadata.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .optim import AdamW

CHECKPOINT_FORMAT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-3
    weight_decay: float = 0.0
    patience: int = 20
    min_delta: float = 1e-3
    seed: int = 0


@dataclass
class History:
    train_losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0


def _batches(items, batch_size):
    for i in range(0, len(items), batch_size):
        yield items[i : i + batch_size]


def train_loop(model, loss_fn, train_items, val_items, config: TrainConfig,
               log=None, trainable=None) -> History:
    """Train until the epoch limit or until the validation loss fails to
    improve on its running minimum by min_delta for `patience` consecutive
    epochs. Restores the best epoch's weights into the model.

    loss_fn(model, batch) must return a scalar autograd tensor.
    """
    if config.epochs > 0 and (not len(train_items) or not len(val_items)):
        raise ValueError("train and validation sets must be non-empty")
    history = History()
    if config.epochs <= 0:
        return history

    params = model.parameters() if trainable is None else list(trainable)
    opt = AdamW(params, lr=config.lr, weight_decay=config.weight_decay)
    rng = np.random.default_rng(config.seed)
    order = np.arange(len(train_items))

    best_state = model.state_dict()
    reference = math.inf
    bad_epochs = 0

    for epoch in range(1, config.epochs + 1):
        model.train()
        rng.shuffle(order)
        total, count = 0.0, 0
        for batch_idx in _batches(order, config.batch_size):
            batch = [train_items[i] for i in batch_idx]
            opt.zero_grad()
            loss = loss_fn(model, batch)
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingDivergedError(
                    f"non-finite training loss {value} at epoch {epoch}"
                )
            loss.backward()
            opt.step()
            total += value * len(batch)
            count += len(batch)
        train_loss = total / count

        model.eval()
        vtotal, vcount = 0.0, 0
        for batch_idx in _batches(np.arange(len(val_items)), config.batch_size):
            batch = [val_items[i] for i in batch_idx]
            value = loss_fn(model, batch).item()
            vtotal += value * len(batch)
            vcount += len(batch)
        val_loss = vtotal / vcount
        if not math.isfinite(val_loss):
            raise TrainingDivergedError(
                f"non-finite validation loss {val_loss} at epoch {epoch}"
            )

        history.train_losses.append(train_loss)
        history.val_losses.append(val_loss)
        history.stopped_epoch = epoch
        if log:
            log(f"epoch {epoch}: train {train_loss:.5f} val {val_loss:.5f}")

        if val_loss < reference - config.min_delta or history.best_epoch == 0:
            history.best_epoch = epoch
            best_state = model.state_dict()
            bad_epochs = 0
        else:
            bad_epochs += 1
        reference = min(reference, val_loss)
        if bad_epochs >= config.patience:
            break

    model.load_state_dict(best_state)
    return history


def save_checkpoint(path, state: dict, meta: dict | None = None) -> None:
    doc = {"format_version": CHECKPOINT_FORMAT_VERSION, **(meta or {})}
    np.savez(path, __meta__=np.frombuffer(json.dumps(doc).encode(), dtype=np.uint8),
             **{k: np.asarray(v, dtype=np.float64) for k, v in state.items()})


def load_checkpoint(path) -> tuple[dict, dict]:
    """Returns (state_dict, meta)."""
    with np.load(path) as f:
        meta = json.loads(bytes(f["__meta__"]).decode())
        if meta.get("format_version") != CHECKPOINT_FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('format_version')}")
        state = {k: f[k] for k in f.files if k != "__meta__"}
    return state, meta
