"""Mini-batch training with warmup schedules and decoupled weight decay."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import NonFiniteLoss, StepOutOfRange
from .evaluator import aggregate, confusion, metrics
from .nn import functional as F

log = logging.getLogger(__name__)

DEFAULT_EPOCHS = {"transformer": 10, "bilstm": 100, "bigru": 20}
SCHEDULES = ("linear", "stepwise6pct")
OPTIMIZERS = ("sgd", "adamw")
RUN_LOG_COLUMNS = ("epoch", "step", "lr", "loss", "eval_fpr", "eval_fnr",
                   "eval_precision", "eval_recall", "eval_f1")


@dataclass
class TrainConfig:
    learning_rate: float = 1.0e-5
    weight_decay: float = 0.06
    warmup_steps: int = 500
    batch_size: int = 16
    epochs: int = 10
    seed: int = 0
    schedule: str = "linear"
    optimizer: str = "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ValueError("learning rate and weight decay must be non-negative")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be non-negative")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be at least 1")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.schedule == "stepwise6pct" and self.warmup_steps == 0:
            raise ValueError("stepwise6pct needs a positive step interval")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    @classmethod
    def for_arch(cls, arch: str, **overrides) -> "TrainConfig":
        overrides.setdefault("epochs", DEFAULT_EPOCHS.get(arch, 10))
        return cls(**overrides)

    @classmethod
    def field_types(cls) -> dict[str, type]:
        return {f.name: type(f.default) for f in fields(cls)}

    def to_kv(self) -> dict[str, str]:
        return {k: str(v) for k, v in asdict(self).items()}


def total_iterations(samples: int, epochs: int, batch_size: int) -> int:
    """Optimizer steps in a run; a trailing short batch still costs one step."""
    if samples < 1 or epochs < 1 or batch_size < 1:
        raise ValueError("samples, epochs and batch_size must be positive")
    return -(-samples // batch_size) * epochs


def lr_at(step: float, config: TrainConfig, total: int) -> float:
    """Learning rate used at optimizer step ``step`` (0-based).

    linear: ramps from 0 at step 0 to the peak at ``warmup_steps``, then falls
    linearly to exactly 0 at the final step ``total - 1``.
    stepwise6pct: peak * 0.94 ** floor(step / warmup_steps).
    Fractional steps are accepted so the curve can be probed between steps.
    """
    if not 0 <= step < total:
        raise StepOutOfRange(f"step {step} outside [0, {total})")
    lr = config.learning_rate
    w = config.warmup_steps
    if config.schedule == "stepwise6pct":
        return lr * 0.94 ** math.floor(step / w)
    if step < w:
        return lr * (step / w)
    span = total - 1 - w
    if span <= 0:
        return lr
    return lr * ((total - 1 - step) / span)


@dataclass
class TokenizedSet:
    ids: np.ndarray  # (N, max_len) int64
    mask: np.ndarray  # (N, max_len)
    labels: np.ndarray  # (N,) int64

    def __post_init__(self):
        if not (len(self.ids) == len(self.mask) == len(self.labels)):
            raise ValueError("ids, mask and labels disagree in length")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, index) -> "TokenizedSet":
        index = np.asarray(index, dtype=np.int64)
        return TokenizedSet(self.ids[index], self.mask[index], self.labels[index])


@dataclass
class EvalResult:
    fpr: float
    fnr: float
    precision: float
    recall: float
    f1: float
    loss: float
    predictions: np.ndarray


def evaluate_model(model, data: TokenizedSet, batch_size: int = 64) -> EvalResult:
    """Vulnerable-class metrics: class 1 for binary models, global aggregate otherwise."""
    logits = model.logits(data.ids, data.mask, batch_size)
    loss, _ = F.batch_cross_entropy(logits, data.labels)
    preds = logits.argmax(axis=1)
    k = logits.shape[1]
    counts = [confusion(preds, data.labels, c) for c in range(1, k)]
    ms = metrics(counts[0]) if k == 2 else aggregate([metrics(c) for c in counts], counts, "global")
    return EvalResult(ms.FPR.value, ms.FNR.value, ms.Precision.value, ms.Recall.value,
                      ms.F1.value, loss, preds)


class _Optimizer:
    def __init__(self, params: dict, config: TrainConfig):
        self.config = config
        self.t = 0
        if config.optimizer == "adamw":
            self.m = {k: np.zeros_like(v) for k, v in params.items()}
            self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict, lr: float) -> None:
        c = self.config
        self.t += 1
        for k, p in params.items():
            g = grads[k]
            decay = c.weight_decay if p.ndim >= 2 else 0.0
            if c.optimizer == "sgd":
                update = g
            else:
                m, v = self.m[k], self.v[k]
                m *= c.beta1
                m += (1.0 - c.beta1) * g
                v *= c.beta2
                v += (1.0 - c.beta2) * g * g
                mhat = m / (1.0 - c.beta1 ** self.t)
                vhat = v / (1.0 - c.beta2 ** self.t)
                update = mhat / (np.sqrt(vhat) + c.adam_eps)
            # decoupled decay acts on the weights directly
            p -= lr * (update + decay * p)


@dataclass
class TrainResult:
    rows: list[dict] = field(default_factory=list)
    steps: int = 0
    best_f1: float = -1.0
    best_epoch: int = 0
    best_params: dict | None = None
    final_eval: EvalResult | None = None

    def run_log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=RUN_LOG_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: _fmt(r.get(k)) for k in RUN_LOG_COLUMNS})
        return buf.getvalue()

    def train_losses(self) -> list[float]:
        return [r["loss"] for r in self.rows if r.get("eval_f1") is None]

    def epoch_mean_losses(self) -> list[float]:
        by_epoch: dict[int, list[float]] = {}
        for r in self.rows:
            if r.get("eval_f1") is None:
                by_epoch.setdefault(r["epoch"], []).append(r["loss"])
        return [float(np.mean(v)) for _, v in sorted(by_epoch.items())]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def train(model, train_set: TokenizedSet, eval_set: TokenizedSet | None, config: TrainConfig, *,
          checkpoint_path=None, log_path=None, restore_best: bool = False) -> TrainResult:
    """Train ``model`` in place.

    Each optimizer step appends a row (eval columns empty); after every epoch
    one evaluation row follows whose ``loss`` is the eval-set loss.  The
    parameters with the best eval F1 (first one wins ties) are kept in the
    result and written to ``checkpoint_path`` when given.
    """
    from .corpus_io import atomic_write
    from .nn.checkpoint import save_model

    n = len(train_set)
    total = total_iterations(n, config.epochs, config.batch_size)
    seeds = np.random.SeedSequence(config.seed).spawn(2)
    order_rng = np.random.default_rng(seeds[0])
    drop_rng = np.random.default_rng(seeds[1])
    opt = _Optimizer(model.params, config)
    result = TrainResult()
    step = 0
    for epoch in range(1, config.epochs + 1):
        perm = order_rng.permutation(n)
        for s in range(0, n, config.batch_size):
            idx = perm[s:s + config.batch_size]
            lr = lr_at(step, config, total)
            loss, grads = model.loss_and_grad(train_set.ids[idx], train_set.mask[idx],
                                              train_set.labels[idx], training=True, rng=drop_rng)
            if not math.isfinite(loss):
                raise NonFiniteLoss(step, loss)
            opt.step(model.params, grads, lr)
            result.rows.append({"epoch": epoch, "step": step, "lr": lr, "loss": loss})
            step += 1
        if eval_set is not None and len(eval_set):
            ev = evaluate_model(model, eval_set)
            result.final_eval = ev
            result.rows.append({"epoch": epoch, "step": step, "lr": None, "loss": ev.loss,
                                "eval_fpr": ev.fpr, "eval_fnr": ev.fnr, "eval_precision": ev.precision,
                                "eval_recall": ev.recall, "eval_f1": ev.f1})
            log.info("epoch %d: eval f1 %.4f loss %.4f", epoch, ev.f1, ev.loss)
            if ev.f1 > result.best_f1:
                result.best_f1, result.best_epoch = ev.f1, epoch
                result.best_params = {k: v.copy() for k, v in model.params.items()}
                if checkpoint_path is not None:
                    save_model(model, checkpoint_path, {"train.best_epoch": str(epoch),
                                                        "train.best_f1": repr(ev.f1)})
    result.steps = step
    if result.best_params is None:
        result.best_params = {k: v.copy() for k, v in model.params.items()}
        if checkpoint_path is not None:
            save_model(model, checkpoint_path, {"train.best_epoch": str(config.epochs)})
    if restore_best:
        for k, v in result.best_params.items():
            model.params[k][...] = v
    if log_path is not None:
        atomic_write(log_path, result.run_log_csv())
    return result
