"""GenTrap, LSTM+, the LSTM autoencoder and their pair-aggregating variants.

Classifiers map a ``Batch`` to ``[b, 2]`` logits; autoencoders map it to
per-sample reconstruction errors. Inputs come from ``FeatureEncoder``:
``pairs`` is ``[b, max_k, window, link + weather + 1]``, ``temporal`` is
``[b, window, link + 4 * weather]`` and ``static`` is a one-hot block.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, PreconditionError
from ..numerics import (
    Tensor,
    concat_lastdim,
    global_average_pool_time,
    linear,
    mean,
    repeat_axis,
    reshape,
    square,
    sub,
)
from .base import Model
from .blocks import (
    aggregate_max,
    check_k,
    encode_pairs,
    feed_forward,
    lstm_stack,
    register_ff,
    register_lstm_stack,
    register_transformer,
    transformer_pair_encoder,
)
from .config import ModelConfig


class _Classifier(Model):
    kind = "classifier"

    def __init__(self, cfg: ModelConfig, pair_width: int, temporal_width: int, static_width: int,
                 seed: int = 0, dtype=np.float32):
        super().__init__(seed, dtype)
        self.cfg = cfg
        self.pair_width = pair_width
        self.temporal_width = temporal_width
        self.static_width = static_width
        self._build()
        emb = self.embedding_width
        register_ff(self, "static", static_width, cfg.static_ff_widths)
        register_ff(self, "head", emb + cfg.static_ff_widths[-1], cfg.head_ff_widths)

    embedding_width = 0

    def _build(self) -> None:
        raise NotImplementedError

    def embed(self, batch, k: int | None = None) -> Tensor:
        raise NotImplementedError

    def _input(self, arr) -> Tensor:
        if isinstance(arr, Tensor):
            return arr
        return Tensor(np.asarray(arr, dtype=self.dtype))

    def logits(self, batch, k: int | None = None) -> Tensor:
        if len(batch) == 0:
            raise PreconditionError("empty batch")
        node = self.embed(batch, k)
        st = feed_forward(self, "static", self._input(batch.static), len(self.cfg.static_ff_widths))
        return feed_forward(self, "head", concat_lastdim([node, st]), len(self.cfg.head_ff_widths))


class GenTrap(_Classifier):
    """Transformer-encoded link/station pairs, max-aggregated, joined with a static branch."""

    tag = "gentrap"

    def _build(self) -> None:
        t = self.cfg.transformer
        if t.feat_width != self.pair_width:
            raise ConfigError(f"transformer width {t.feat_width} != pair window width {self.pair_width}")
        register_transformer(self, "encoder", t)
        self.embedding_width = t.feat_width

    def pair_embeddings(self, pairs, k: int) -> Tensor:
        enc = transformer_pair_encoder(self, "encoder", self.cfg.transformer)
        return encode_pairs(self._input(pairs), k, enc, joint=self.training)

    def aggregate_weather(self, pairs, k: int) -> Tensor:
        return aggregate_max(self.pair_embeddings(pairs, k))

    def embed(self, batch, k=None):
        return self.aggregate_weather(batch.pairs, self.cfg.infer_k if k is None else k)


class LSTMPlus(_Classifier):
    """Stacked LSTMs over link KPIs plus fixed k-NN weather statistics."""

    tag = "lstmplus"

    def _build(self) -> None:
        register_lstm_stack(self, "temporal", self.temporal_width, self.cfg.lstm_widths)
        self.embedding_width = self.cfg.lstm_widths[-1]

    def embed(self, batch, k=None):
        if batch.temporal is None:
            raise PreconditionError("LSTM+ needs the derived k-NN weather features")
        if batch.temporal.shape[-1] != self.temporal_width:
            raise PreconditionError(
                f"temporal input width {batch.temporal.shape[-1]} != {self.temporal_width}")
        _, last = lstm_stack(self, "temporal", self._input(batch.temporal), len(self.cfg.lstm_widths))
        return last


class GenLSTMPlus(_Classifier):
    """LSTM+ with the LSTM stack applied per link/station pair and max-aggregated."""

    tag = "gen_lstmplus"

    def _build(self) -> None:
        register_lstm_stack(self, "encoder", self.pair_width, self.cfg.lstm_widths)
        self.embedding_width = self.cfg.lstm_widths[-1]

    def pair_embeddings(self, pairs, k: int) -> Tensor:
        n = len(self.cfg.lstm_widths)
        return encode_pairs(self._input(pairs), k, lambda x: lstm_stack(self, "encoder", x, n)[1],
                            joint=self.training)

    def aggregate_weather(self, pairs, k: int) -> Tensor:
        return aggregate_max(self.pair_embeddings(pairs, k))

    def embed(self, batch, k=None):
        return self.aggregate_weather(batch.pairs, self.cfg.infer_k if k is None else k)


def _per_sample_mse(recon: Tensor, target: Tensor) -> Tensor:
    err = square(sub(recon, target))
    return mean(reshape(err, (err.shape[0], -1)), axis=1)


class _Autoencoder(Model):
    kind = "autoencoder"

    def __init__(self, cfg: ModelConfig, pair_width: int, temporal_width: int, static_width: int = 0,
                 seed: int = 0, dtype=np.float32):
        super().__init__(seed, dtype)
        self.cfg = cfg
        self.pair_width = pair_width
        self.temporal_width = temporal_width
        self.static_width = static_width
        width = self.input_width
        enc = cfg.ae_widths
        register_lstm_stack(self, "encoder", width, enc)
        register_lstm_stack(self, "decoder", enc[-1], tuple(reversed(enc)))
        self._dense("output", enc[0], width)

    @property
    def input_width(self) -> int:
        raise NotImplementedError

    def _input(self, arr) -> Tensor:
        if isinstance(arr, Tensor):
            return arr
        return Tensor(np.asarray(arr, dtype=self.dtype))

    def _decode(self, latent: Tensor, steps: int) -> Tensor:
        n = len(self.cfg.ae_widths)
        seq, _ = lstm_stack(self, "decoder", repeat_axis(latent, steps, axis=1), n)
        out = self.group("output")
        return linear(seq, out["w"], out["b"])


class LSTMAutoencoder(_Autoencoder):
    """Sequence autoencoder over the LSTM+ temporal input."""

    tag = "lstmae"

    @property
    def input_width(self) -> int:
        return self.temporal_width

    def reconstruct(self, batch, k=None) -> Tensor:
        x = self._input(batch.temporal)
        _, latent = lstm_stack(self, "encoder", x, len(self.cfg.ae_widths))
        return self._decode(latent, x.shape[1])

    def reconstruction_error(self, batch, k=None) -> Tensor:
        if len(batch) == 0:
            raise PreconditionError("empty batch")
        return _per_sample_mse(self.reconstruct(batch), self._input(batch.temporal))


class GNNLSTMAutoencoder(_Autoencoder):
    """Encodes each link/station pair, max-aggregates the pooled codes, decodes every pair from it."""

    tag = "gnn_lstmae"

    @property
    def input_width(self) -> int:
        return self.pair_width

    def latent(self, pairs, k: int) -> Tensor:
        n = len(self.cfg.ae_widths)

        def enc(x):
            seq, _ = lstm_stack(self, "encoder", x, n)
            return global_average_pool_time(seq)

        return aggregate_max(encode_pairs(self._input(pairs), k, enc, joint=self.training))

    def reconstruct(self, batch, k=None) -> Tensor:
        """``[b, k, time, feat]``; all k reconstructions decode from the shared latent."""
        k = self.cfg.infer_k if k is None else k
        check_k(k, batch.pairs.shape[1])
        z = self.latent(batch.pairs, k)
        one = self._decode(z, batch.pairs.shape[2])
        return repeat_axis(one, k, axis=1)

    def reconstruction_error(self, batch, k=None) -> Tensor:
        if len(batch) == 0:
            raise PreconditionError("empty batch")
        k = self.cfg.infer_k if k is None else k
        recon = self.reconstruct(batch, k)
        target = self._input(batch.pairs[:, :k])
        # mean over pairs of each pair's MSE equals the MSE over the stacked pairs
        return _per_sample_mse(recon, target)


ARCHITECTURES = {
    cls.tag: cls for cls in (GenTrap, GenLSTMPlus, LSTMPlus, GNNLSTMAutoencoder, LSTMAutoencoder)
}


def build_model(tag: str, cfg: ModelConfig, pair_width: int, temporal_width: int, static_width: int,
                seed: int = 0, dtype=np.float32) -> Model:
    try:
        cls = ARCHITECTURES[tag]
    except KeyError:
        raise ConfigError(f"unknown architecture {tag!r}; choose from {sorted(ARCHITECTURES)}") from None
    return cls(cfg, pair_width, temporal_width, static_width, seed=seed, dtype=dtype)
