"""scikit-learn style wrapper around the training loop."""

from __future__ import annotations

from pathlib import Path

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import Corpus, bioes_decode
from .embedding import FileEmbeddings, load_embedding_file, random_embeddings
from .model import TRAINABLE_EMBED
from .numerics import ConfigurationError
from .training import TrainConfig, evaluate, train
from .validation import check_sequences, check_tagged


class CapsuleTagger(BaseEstimator):
    """Character-level BIOES tagger: BiGRU, self-attention, capsules, transitions.

    ``X`` is a list of strings (or character sequences, or a Corpus) and ``y``
    a list of per-character tag sequences.  ``embeddings`` is a
    :class:`FileEmbeddings`, a path to an embedding text file, or ``"random"``
    for seeded Gaussian vectors over the training characters; it is unused
    when ``ablation="trainable_embed"``.
    """

    def __init__(
        self,
        embeddings=None,
        ablation="full",
        embedding_dim=768,
        max_position=512,
        hidden_dim=100,
        attention_heads=4,
        scale_by_head_dim=False,
        num_primary=32,
        primary_dim=8,
        digit_dim=16,
        routing_iterations=3,
        routing_axis="digit",
        dropout=0.5,
        hard_mask=None,
        use_stop=True,
        learning_rate=0.001,
        beta1=0.9,
        beta2=0.999,
        adam_eps=1e-8,
        batch_size=20,
        epochs=30,
        seed=0,
        clip_norm=None,
        dev_fraction=0.1,
    ):
        self.embeddings = embeddings
        self.ablation = ablation
        self.embedding_dim = embedding_dim
        self.max_position = max_position
        self.hidden_dim = hidden_dim
        self.attention_heads = attention_heads
        self.scale_by_head_dim = scale_by_head_dim
        self.num_primary = num_primary
        self.primary_dim = primary_dim
        self.digit_dim = digit_dim
        self.routing_iterations = routing_iterations
        self.routing_axis = routing_axis
        self.dropout = dropout
        self.hard_mask = hard_mask
        self.use_stop = use_stop
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.adam_eps = adam_eps
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.clip_norm = clip_norm
        self.dev_fraction = dev_fraction

    def _config(self):
        params = self.get_params()
        params.pop("embeddings")
        return TrainConfig(**params)

    def _resolve_embeddings(self, corpus):
        if self.ablation == TRAINABLE_EMBED:
            return None
        emb = self.embeddings
        if isinstance(emb, FileEmbeddings):
            return emb
        if emb == "random":
            return random_embeddings(corpus.char_vocabulary, self.embedding_dim, self.seed)
        if isinstance(emb, (str, Path)):
            return load_embedding_file(emb)
        raise ConfigurationError(
            "embeddings must be a FileEmbeddings, a file path or 'random' "
            "unless ablation='trainable_embed'"
        )

    def fit(self, X, y=None, X_dev=None, y_dev=None):
        config = self._config()
        corpus = Corpus.from_sentences(check_tagged(X, y))
        dev = None
        if X_dev is not None:
            dev = Corpus.from_sentences(check_tagged(X_dev, y_dev), corpus.label_set)
        result = train(config, corpus, dev, embeddings=self._resolve_embeddings(corpus))
        self.model_ = result.model
        self.config_ = config
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        self.label_set_ = result.model.label_set
        self.classes_ = list(self.label_set_.tags)
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return [list(self.model_.decode(chars)) for chars in check_sequences(X)]

    def predict_spans(self, X):
        return [bioes_decode(tags, strict=False) for tags in self.predict(X)]

    def evaluate(self, X, y=None):
        check_is_fitted(self, "model_")
        corpus = Corpus.from_sentences(check_tagged(X, y), self.label_set_)
        return evaluate(self.model_, corpus)

    def score(self, X, y=None):
        """Entity-level exact-match F1."""
        return self.evaluate(X, y).f1

    def save(self, directory):
        check_is_fitted(self, "model_")
        return save_checkpoint(self.model_, directory, self.config_)

    @classmethod
    def load(cls, directory):
        model, config = load_checkpoint(directory)
        file_backed = isinstance(model.embeddings, FileEmbeddings)
        est = cls(embeddings=model.embeddings if file_backed else None, **config.to_dict())
        est.model_ = model
        est.config_ = config
        est.history_ = []
        est.best_epoch_ = None
        est.label_set_ = model.label_set
        est.classes_ = list(model.label_set.tags)
        return est
