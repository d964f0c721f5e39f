"""Training loop, Adam, and entity-level evaluation."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .attention import AttentionConfig
from .capsnet import CapsuleConfig
from .corpus import Corpus, bioes_decode
from .embedding import COMPOSED, FILE_BACKED, EmbeddingConfig
from .model import ABLATIONS, FULL, NO_ATTENTION, TRAINABLE_EMBED, ModelConfig, Tagger
from .numerics import ConfigurationError, NumericError, Tape

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """Flat hyperparameter record; defaults follow the reference settings."""

    ablation: str = FULL
    embedding_dim: int = 768
    max_position: int = 512
    hidden_dim: int = 100
    attention_heads: int = 4
    scale_by_head_dim: bool = False
    num_primary: int = 32
    primary_dim: int = 8
    digit_dim: int = 16
    routing_iterations: int = 3
    routing_axis: str = "digit"
    dropout: float = 0.5
    hard_mask: bool | None = None
    use_stop: bool = True
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 20
    epochs: int = 30
    seed: int = 0
    clip_norm: float | None = None
    dev_fraction: float = 0.1

    def __post_init__(self):
        if self.ablation not in ABLATIONS:
            raise ConfigurationError(f"unknown ablation {self.ablation!r}; choose from {ABLATIONS}")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigurationError("epochs must be >= 0")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigurationError("Adam betas must lie in [0, 1)")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must be in [0, 1), got {self.dropout}")
        if not 0.0 < self.dev_fraction < 1.0:
            raise ConfigurationError("dev_fraction must be in (0, 1)")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ConfigurationError("clip_norm must be positive when set")
        self.model_config()  # validates the nested pieces
        if self.ablation != NO_ATTENTION:
            AttentionConfig(2 * self.hidden_dim, self.attention_heads)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    def to_dict(self):
        return asdict(self)

    def model_config(self):
        mode = COMPOSED if self.ablation == TRAINABLE_EMBED else FILE_BACKED
        return ModelConfig(
            ablation=self.ablation,
            embedding=EmbeddingConfig(mode, self.embedding_dim, self.max_position),
            hidden_dim=self.hidden_dim,
            attention_heads=self.attention_heads,
            scale_by_head_dim=self.scale_by_head_dim,
            capsule=CapsuleConfig(
                self.num_primary,
                self.primary_dim,
                self.digit_dim,
                self.routing_iterations,
                self.routing_axis,
            ),
            dropout=self.dropout,
            hard_mask=self.hard_mask,
            use_stop=self.use_stop,
        )


# -- optimisation -------------------------------------------------------------------


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params, state, t, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update using each parameter's ``.grad``."""
    if t < 1:
        raise ValueError(f"Adam step index starts at 1, got {t}")
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise NumericError(f"non-finite gradient in parameter {p.name}")
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for p in params:
        g = p.grad
        m = state.m.get(p.name)
        if m is None:
            m = state.m[p.name] = np.zeros_like(p.data)
            state.v[p.name] = np.zeros_like(p.data)
        v = state.v[p.name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    state.t = t


class Adam:
    def __init__(self, params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.state = AdamState()

    def step(self):
        adam_step(
            self.params, self.state, self.state.t + 1, self.lr, self.beta1, self.beta2, self.eps
        )


def clip_gradients(params, max_norm):
    total = math.sqrt(sum(float((p.grad * p.grad).sum()) for p in params))
    if total > max_norm:
        scale = max_norm / total
        for p in params:
            p.grad *= scale
    return total


# -- evaluation -------------------------------------------------------------------


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self):
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self):
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self):
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    per_type: dict

    def format(self):
        lines = [
            f"overall\tP={self.precision:.4f}\tR={self.recall:.4f}\tF1={self.f1:.4f}"
            f"\tTP={self.tp}\tFP={self.fp}\tFN={self.fn}"
        ]
        for etype, c in sorted(self.per_type.items()):
            lines.append(
                f"{etype}\tP={c.precision:.4f}\tR={c.recall:.4f}\tF1={c.f1:.4f}"
                f"\tTP={c.tp}\tFP={c.fp}\tFN={c.fn}"
            )
        return "\n".join(lines)


def score_spans(gold, predicted, entity_types=()):
    """Exact-match (type, start, end) scoring over parallel lists of span lists."""
    total = Counts()
    per_type = {t: Counts() for t in entity_types}
    for g_spans, p_spans in zip(gold, predicted):
        g, p = set(g_spans), set(p_spans)
        for span, attr in [(s, "tp") for s in g & p] + [(s, "fp") for s in p - g] + [
            (s, "fn") for s in g - p
        ]:
            setattr(total, attr, getattr(total, attr) + 1)
            c = per_type.setdefault(span.entity_type, Counts())
            setattr(c, attr, getattr(c, attr) + 1)
    return EvalReport(
        total.precision, total.recall, total.f1, total.tp, total.fp, total.fn, per_type
    )


def evaluate(model, corpus, predictions=None):
    """Viterbi-decode every sentence and score entity spans (lenient extraction)."""
    if predictions is None:
        predictions = [model.decode(s.chars) for s in corpus.sentences]
    gold = [bioes_decode(s.tags, strict=False) for s in corpus.sentences]
    pred = [bioes_decode(tags, strict=False) for tags in predictions]
    return score_spans(gold, pred, model.label_set.entity_types)


# -- training -------------------------------------------------------------------


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    report: EvalReport
    steps: int


@dataclass
class TrainResult:
    model: Tagger
    history: list
    best_epoch: int
    best_f1: float
    steps: int


def split_dev(corpus, fraction, seed):
    """Seeded hold-out of ``fraction`` of the sentences (at least one)."""
    n = len(corpus.sentences)
    if n < 2:
        raise ConfigurationError("need at least two sentences to carve out a dev split")
    rng = np.random.default_rng([seed, 1])
    order = rng.permutation(n)
    k = max(1, int(round(fraction * n)))
    dev_idx, train_idx = sorted(order[:k]), sorted(order[k:])
    pick = lambda idx: Corpus.from_sentences(
        [corpus.sentences[i] for i in idx], corpus.label_set
    )
    return pick(train_idx), pick(dev_idx)


def check_label_compat(label_set, corpus):
    for s in corpus.sentences:
        for t in s.tags:
            if t not in label_set:
                raise ConfigurationError(f"tag {t!r} is not in the model's label set")


def train(
    config,
    corpus_train,
    corpus_dev=None,
    *,
    embeddings=None,
    on_epoch=None,
    on_improve=None,
):
    """Fit a fresh tagger; keeps the parameters of the best dev-F1 epoch.

    ``on_epoch(record)`` is called after each epoch, ``on_improve(model, record)``
    whenever dev F1 reaches a new maximum (e.g. to write a checkpoint).
    """
    if not corpus_train.sentences:
        raise ConfigurationError("training corpus is empty")
    if corpus_dev is None:
        corpus_train, corpus_dev = split_dev(corpus_train, config.dev_fraction, config.seed)
    label_set = corpus_train.label_set
    check_label_compat(label_set, corpus_dev)

    seeds = np.random.SeedSequence(config.seed).spawn(3)
    init_seed = int(seeds[0].generate_state(1)[0])
    shuffle_rng = np.random.default_rng(seeds[1])
    dropout_rng = np.random.default_rng(seeds[2])

    model = Tagger(
        config.model_config(),
        label_set,
        chars=corpus_train.char_vocabulary,
        embeddings=embeddings,
        seed=init_seed,
    )
    params = model.parameters()
    opt = Adam(params, config.learning_rate, config.beta1, config.beta2, config.adam_eps)

    history = []
    best_f1, best_epoch = -1.0, 0
    best_state = [p.data.copy() for p in params]
    sentences = corpus_train.sentences
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(sentences))
        total = 0.0
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo : lo + config.batch_size]
            model.zero_grad()
            weight = 1.0 / len(batch)
            for idx in batch:
                s = sentences[idx]
                with Tape() as tape:
                    loss = model.loss(s.chars, s.tags, training=True, rng=dropout_rng)
                tape.backward(loss, grad=weight)
                total += loss.item()
            if config.clip_norm is not None:
                clip_gradients(params, config.clip_norm)
            opt.step()
        report = evaluate(model, corpus_dev)
        record = EpochRecord(epoch, total / len(sentences), report, opt.state.t)
        history.append(record)
        log.info(
            "epoch %d loss %.4f dev P %.4f R %.4f F1 %.4f",
            epoch,
            record.loss,
            report.precision,
            report.recall,
            report.f1,
        )
        if on_epoch is not None:
            on_epoch(record)
        if report.f1 > best_f1:
            best_f1, best_epoch = report.f1, epoch
            best_state = [p.data.copy() for p in params]
            if on_improve is not None:
                on_improve(model, record)
    for p, saved in zip(params, best_state):
        p.data[...] = saved
    return TrainResult(model, history, best_epoch, max(best_f1, 0.0), opt.state.t)
