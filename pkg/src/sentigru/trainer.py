"""Mini-batch training loop with adaptive-moment updates.

One epoch = one seeded shuffle of the training set, sliced into batches
with the final partial batch kept. Validation runs after every epoch in
infer mode. Everything is single-threaded and bit-reproducible for a
fixed seed.
"""

import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import corpus as corpus_mod
from .layers import softmax_cross_entropy


class TrainingError(RuntimeError):
    """Training cannot proceed: bad split or non-finite numbers."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    batch_size: int = 64
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    train_fraction: float = 0.8
    stratify: bool = False
    clip_norm: float | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        # rate 0 is allowed: it must leave parameters bitwise unchanged
        if self.learning_rate < 0:
            raise ValueError("learning_rate must not be negative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("moment decays must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive when set")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    seconds: float

    def __post_init__(self):
        if self.train_loss < 0 or self.val_loss < 0:
            raise ValueError("losses must be non-negative")
        if not (0 <= self.train_acc <= 1 and 0 <= self.val_acc <= 1):
            raise ValueError("accuracies must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class OptimizerState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params: dict, grads: dict, state: OptimizerState, config) -> OptimizerState:
    """One adaptive-moment update, in place on the parameter arrays.

    m and v track decaying first and second gradient moments; both are
    bias-corrected before the step. ``config`` needs learning_rate, beta1,
    beta2, epsilon, and clip_norm attributes (TrainConfig or Adam works).
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in parameter {name!r}")
    clip = getattr(config, "clip_norm", None)
    if clip is not None:
        sq = 0.0
        for g in grads.values():
            sq += float(np.sum(np.square(g, dtype=np.float64)))
        norm = sq ** 0.5
        if norm > clip:
            for g in grads.values():
                g *= g.dtype.type(clip / norm)
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.epsilon)
    return state


class Adam:
    """Stateful wrapper around :func:`adam_step` keyed by parameter name."""

    def __init__(self, learning_rate: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, epsilon: float = 1e-8, clip_norm=None):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.clip_norm = clip_norm
        self.state = OptimizerState()

    @classmethod
    def from_config(cls, config: TrainConfig) -> "Adam":
        return cls(config.learning_rate, config.beta1, config.beta2,
                   config.epsilon, config.clip_norm)

    def step(self, triples) -> None:
        """Apply one update to model.trainable() (name, param, grad) triples."""
        params = {name: p for name, p, _ in triples}
        grads = {name: g for name, _, g in triples}
        adam_step(params, grads, self.state, self)


def train_epoch(model, ids: np.ndarray, labels: np.ndarray, optimizer: Adam,
                rng, batch_size: int = 64) -> tuple[float, float]:
    """One shuffled pass; returns (per-sample mean loss, train-mode accuracy)."""
    n = len(ids)
    if n == 0:
        raise TrainingError("cannot train on an empty dataset")
    order = rng.permutation(n)
    total_loss = 0.0
    correct = 0
    for start in range(0, n, batch_size):
        batch = order[start:start + batch_size]
        x, y = ids[batch], labels[batch]
        logits = model.forward(x, mode="train", rng=rng)
        loss, dlogits = softmax_cross_entropy(logits, y)
        if not np.isfinite(loss):
            raise TrainingError(
                f"non-finite loss {float(loss)!r} in the batch at offset {start}")
        model.zero_grad()
        model.backward(dlogits)
        optimizer.step(model.trainable())
        total_loss += float(loss) * len(batch)
        correct += int(np.sum(np.argmax(logits, axis=1) == y))
    return total_loss / n, correct / n


def evaluate(model, ids: np.ndarray, labels: np.ndarray,
             batch_size: int = 64) -> tuple[float, float]:
    """Infer-mode mean loss and accuracy, in dataset order."""
    n = len(ids)
    if n == 0:
        raise TrainingError("cannot evaluate an empty dataset")
    total_loss = 0.0
    correct = 0
    for start in range(0, n, batch_size):
        x, y = ids[start:start + batch_size], labels[start:start + batch_size]
        logits = model.forward(x, mode="infer")
        loss, _ = softmax_cross_entropy(logits, y)
        total_loss += float(loss) * len(x)
        correct += int(np.sum(np.argmax(logits, axis=1) == y))
    return total_loss / n, correct / n


def predict_codes(model, ids: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Infer-mode argmax class codes for every row of ids."""
    out = []
    for start in range(0, len(ids), batch_size):
        logits = model.forward(ids[start:start + batch_size], mode="infer")
        out.append(np.argmax(logits, axis=1))
    if not out:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(out)


def fit(model, corpus: corpus_mod.LabeledCorpus, config: TrainConfig,
        vocab: corpus_mod.Vocabulary, stopwords=None) -> list[EpochRecord]:
    """Split once, then train for config.epochs; returns the epoch history.

    The split, the shuffles, and the dropout draws all derive from
    config.seed, so a fixed (seed, config, corpus) triple reproduces the
    history exactly.
    """
    train_c, val_c = corpus_mod.split(
        corpus, config.train_fraction, config.seed, config.stratify)
    if len(train_c) == 0 or len(val_c) == 0:
        raise TrainingError(
            f"train_fraction {config.train_fraction} left an empty split "
            f"({len(train_c)} train / {len(val_c)} validation)")
    seq_len = model.config.seq_len
    train_ids, train_y = corpus_mod.encode_corpus(train_c, vocab, seq_len, stopwords)
    val_ids, val_y = corpus_mod.encode_corpus(val_c, vocab, seq_len, stopwords)
    rng = np.random.default_rng(config.seed)
    optimizer = Adam.from_config(config)
    history = []
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        train_loss, train_acc = train_epoch(
            model, train_ids, train_y, optimizer, rng, config.batch_size)
        val_loss, val_acc = evaluate(model, val_ids, val_y, config.batch_size)
        history.append(EpochRecord(
            epoch, train_loss, train_acc, val_loss, val_acc,
            time.perf_counter() - t0))
    return history
