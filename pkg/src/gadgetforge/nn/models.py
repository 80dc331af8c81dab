"""BiLSTM, BiGRU and transformer-encoder sequence classifiers.

All models keep their parameters in a flat ``name -> ndarray`` dict so the
trainer and checkpoint code can treat them uniformly.  Inputs are id arrays
(B, n) with a matching 0/1 mask; PAD positions never influence the output.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from ..errors import ConfigMismatch, EmptySequence, ShapeMismatch
from . import functional as F
from . import kernels
from .heads import HeadSpec, head_backward, head_forward, preset

ARCHS = ("bilstm", "bigru", "transformer")


@dataclass
class ModelConfig:
    arch: str = "transformer"
    vocab_size: int = 1000
    num_classes: int = 2
    max_len: int = 128
    embed_dim: int = 32  # d_model for the transformer
    hidden: int = 32  # recurrent units per direction
    layers: int = 2
    heads: int = 2
    pooling: str = "first"  # first | last
    head: str = "bert"  # preset name or explicit layer list
    head_width: int = 0  # 0 means 4 * feature dim
    head_dropout: float = 0.1

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ConfigMismatch(f"unknown architecture {self.arch!r}")
        if self.pooling not in ("first", "last"):
            raise ConfigMismatch(f"unknown pooling {self.pooling!r}")
        if self.arch == "transformer":
            if self.embed_dim % 2:
                raise ConfigMismatch("d_model must be even for sinusoidal positions")
            if self.embed_dim % self.heads:
                raise ConfigMismatch(f"d_model {self.embed_dim} not divisible by {self.heads} heads")

    @property
    def feature_dim(self) -> int:
        return self.embed_dim if self.arch == "transformer" else 2 * self.hidden

    def head_spec(self) -> HeadSpec:
        width = self.head_width or 4 * self.feature_dim
        if ":" in self.head or "," in self.head:
            spec = HeadSpec.parse(self.head)
            if spec.num_classes != self.num_classes:
                raise ConfigMismatch("head output width differs from the class count")
            return spec
        return preset(self.head, self.num_classes, width, self.head_dropout)

    def to_kv(self) -> dict[str, str]:
        return {k: str(v) for k, v in asdict(self).items()}

    @classmethod
    def from_kv(cls, kv: dict) -> "ModelConfig":
        out = {}
        for f in fields(cls):
            if f.name in kv:
                raw = kv[f.name]
                out[f.name] = type(f.default)(raw) if not isinstance(f.default, str) else raw
        return cls(**out)


def _uniform(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Classifier:
    """Common plumbing: parameter dict, head, loss and prediction."""

    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray]):
        self.config = config
        self.params = params
        self.spec = config.head_spec()

    @classmethod
    def initialize(cls, config: ModelConfig, seed: int = 0):
        rng = np.random.default_rng(seed)
        params = cls._init_body(config, rng)
        d = config.feature_dim
        for k, (fan_in, out) in enumerate(config.head_spec().linear_shapes(d)):
            params[f"head.{k}.W"] = _uniform(rng, (fan_in, out), fan_in)
            params[f"head.{k}.b"] = _uniform(rng, (out,), fan_in)
        return cls(config, params)

    @staticmethod
    def _init_body(config, rng) -> dict:
        raise NotImplementedError

    def _head_weights(self):
        n = len(self.spec.linear_shapes(self.config.feature_dim))
        return [(self.params[f"head.{k}.W"], self.params[f"head.{k}.b"]) for k in range(n)]

    def _check_inputs(self, ids, mask):
        ids = np.asarray(ids, dtype=np.int64)
        mask = np.asarray(mask)
        if ids.ndim == 1:
            ids, mask = ids[None], mask[None]
        if ids.shape != mask.shape:
            raise ShapeMismatch(f"ids {ids.shape} vs mask {mask.shape}")
        if ids.shape[1] == 0:
            raise EmptySequence("sequence has no positions")
        if ids.shape[1] > self.config.max_len:
            raise ConfigMismatch(f"sequence length {ids.shape[1]} exceeds max_len {self.config.max_len}")
        if ids.min() < 0 or ids.max() >= self.config.vocab_size:
            raise ConfigMismatch("token id outside the model vocabulary")
        if (mask.sum(axis=1) == 0).any():
            raise EmptySequence("a sequence in the batch has no unmasked tokens")
        return ids, mask.astype(np.float64)

    # subclasses provide features / features_backward
    def forward(self, ids, mask, *, training: bool = False, rng=None):
        ids, m = self._check_inputs(ids, mask)
        feats, body_cache = self._features(ids, m)
        logits, head_cache = head_forward(feats, self.spec, self._head_weights(), rng, training)
        return logits, (ids, m, body_cache, head_cache)

    def backward(self, dlogits, cache) -> dict[str, np.ndarray]:
        ids, m, body_cache, head_cache = cache
        dfeat, hgrads = head_backward(dlogits, self.spec, self._head_weights(), head_cache)
        grads = self._features_backward(dfeat, ids, m, body_cache)
        for k, (dW, db) in enumerate(hgrads):
            grads[f"head.{k}.W"] = dW
            grads[f"head.{k}.b"] = db
        return grads

    def loss_and_grad(self, ids, mask, labels, *, training: bool = True, rng=None):
        logits, cache = self.forward(ids, mask, training=training, rng=rng)
        loss, dlogits = F.batch_cross_entropy(logits, labels)
        return loss, self.backward(dlogits, cache)

    def logits(self, ids, mask, batch_size: int = 64) -> np.ndarray:
        ids = np.asarray(ids)
        mask = np.asarray(mask)
        out = [self.forward(ids[s:s + batch_size], mask[s:s + batch_size])[0]
               for s in range(0, len(ids), batch_size)]
        return np.concatenate(out, axis=0)

    def predict(self, ids, mask, batch_size: int = 64) -> np.ndarray:
        return self.logits(ids, mask, batch_size).argmax(axis=1)

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))


# -- recurrent ---------------------------------------------------------------------


def _time_major(emb, ids):
    return np.ascontiguousarray(emb[ids].transpose(1, 0, 2))


class RecurrentClassifier(Classifier):
    """Bidirectional LSTM or GRU; the feature is concat(final forward, final backward)."""

    @staticmethod
    def _init_body(config, rng):
        E, H = config.embed_dim, config.hidden
        p = {"emb": rng.uniform(-1.0, 1.0, size=(config.vocab_size, E))}
        for d in ("fwd", "bwd"):
            if config.arch == "bilstm":
                p[f"{d}.W"] = _uniform(rng, (4, H, H + E), H + E)
                p[f"{d}.b"] = _uniform(rng, (4, H), H + E)
            else:
                p[f"{d}.W"] = _uniform(rng, (3, H, E), E + H)
                p[f"{d}.U"] = _uniform(rng, (3, H, H), E + H)
                p[f"{d}.b"] = _uniform(rng, (3, H), E + H)
        return p

    def _features(self, ids, m):
        X = _time_major(self.params["emb"], ids)
        M = np.ascontiguousarray(m.T)
        cache = {"X": X, "M": M}
        finals = []
        for d, rev in (("fwd", False), ("bwd", True)):
            if self.config.arch == "bilstm":
                A, C, G, Z = kernels.lstm_seq_forward(X, M, self.params[f"{d}.W"], self.params[f"{d}.b"], rev)
                cache[d] = (A, C, G, Z)
                finals.append(A[-1])
            else:
                C, G = kernels.gru_seq_forward(X, M, self.params[f"{d}.W"], self.params[f"{d}.U"],
                                               self.params[f"{d}.b"], rev)
                cache[d] = (C, G)
                finals.append(C[-1])
        return np.concatenate(finals, axis=1), cache

    def _features_backward(self, dfeat, ids, m, cache):
        H = self.config.hidden
        X, M = cache["X"], cache["M"]
        grads = {}
        dX = np.zeros_like(X)
        for k, (d, rev) in enumerate((("fwd", False), ("bwd", True))):
            dfinal = np.ascontiguousarray(dfeat[:, k * H:(k + 1) * H])
            if self.config.arch == "bilstm":
                A, C, G, Z = cache[d]
                dW, db, dx = kernels.lstm_seq_backward(dfinal, M, self.params[f"{d}.W"], A, C, G, Z, rev)
            else:
                C, G = cache[d]
                dW, dU, db, dx = kernels.gru_seq_backward(dfinal, X, M, self.params[f"{d}.W"],
                                                          self.params[f"{d}.U"], C, G, rev)
                grads[f"{d}.U"] = dU
            grads[f"{d}.W"] = dW
            grads[f"{d}.b"] = db
            dX += dx
        demb = np.zeros_like(self.params["emb"])
        np.add.at(demb, ids, dX.transpose(1, 0, 2))
        grads["emb"] = demb
        return grads


def bilstm_forward(embeddings, params: dict, mask=None) -> np.ndarray:
    """Feature concat(a_T forward, a_1 backward) for one (T, E) or batched (B, T, E) input.

    ``params`` maps ``fwd.W``/``fwd.b``/``bwd.W``/``bwd.b`` to packed LSTM weights.
    """
    X = np.asarray(embeddings, dtype=np.float64)
    single = X.ndim == 2
    if single:
        X = X[None]
    if X.shape[1] == 0:
        raise EmptySequence("bilstm_forward needs at least one step")
    M = np.ones(X.shape[:2]) if mask is None else np.asarray(mask, dtype=np.float64).reshape(X.shape[:2])
    Xt = np.ascontiguousarray(X.transpose(1, 0, 2))
    Mt = np.ascontiguousarray(M.T)
    f = kernels.lstm_seq_forward(Xt, Mt, params["fwd.W"], params["fwd.b"], False)[0][-1]
    b = kernels.lstm_seq_forward(Xt, Mt, params["bwd.W"], params["bwd.b"], True)[0][-1]
    out = np.concatenate([f, b], axis=1)
    return out[0] if single else out


# -- transformer ---------------------------------------------------------------------


class TransformerClassifier(Classifier):
    """Post-norm encoder: x = LN(x + MHA(x)); x = LN(x + FFN(x)); pooled feature into the head."""

    def __init__(self, config, params):
        super().__init__(config, params)
        self.pe = F.positional_encoding(config.max_len, config.embed_dim)

    @staticmethod
    def _init_body(config, rng):
        d, h = config.embed_dim, config.heads
        dk = d // h
        p = {"emb": rng.uniform(-1.0, 1.0, size=(config.vocab_size, d))}
        for l in range(config.layers):
            pre = f"layer{l}."
            for name in ("W_Q", "W_K", "W_V"):
                p[pre + name] = _uniform(rng, (h, d, dk), d)
            p[pre + "W_O"] = _uniform(rng, (h * dk, d), h * dk)
            p[pre + "ln1.g"] = np.ones(d)
            p[pre + "ln1.b"] = np.zeros(d)
            p[pre + "ff.W1"] = _uniform(rng, (d, 4 * d), d)
            p[pre + "ff.b1"] = _uniform(rng, (4 * d,), d)
            p[pre + "ff.W2"] = _uniform(rng, (4 * d, d), 4 * d)
            p[pre + "ff.b2"] = _uniform(rng, (d,), 4 * d)
            p[pre + "ln2.g"] = np.ones(d)
            p[pre + "ln2.b"] = np.zeros(d)
        return p

    def _attn(self, l):
        pre = f"layer{l}."
        return F.AttentionParams(self.params[pre + "W_Q"], self.params[pre + "W_K"],
                                 self.params[pre + "W_V"], self.params[pre + "W_O"])

    def _pool_index(self, m):
        if self.config.pooling == "first":
            return np.zeros(len(m), dtype=np.int64)
        return m.sum(axis=1).astype(np.int64) - 1

    def encode(self, ids, m):
        """Final hidden states (B, n, d) plus per-layer caches."""
        n = ids.shape[1]
        x = self.params["emb"][ids] + self.pe[:n]
        caches = []
        for l in range(self.config.layers):
            pre = f"layer{l}."
            a, acache = F.multi_head_attention(x, self._attn(l), m, return_cache=True)
            h1, ln1 = F.layer_norm(x + a, self.params[pre + "ln1.g"], self.params[pre + "ln1.b"])
            u = h1 @ self.params[pre + "ff.W1"] + self.params[pre + "ff.b1"]
            r = np.maximum(u, 0.0)
            f = r @ self.params[pre + "ff.W2"] + self.params[pre + "ff.b2"]
            x, ln2 = F.layer_norm(h1 + f, self.params[pre + "ln2.g"], self.params[pre + "ln2.b"])
            caches.append((acache, ln1, h1, u, r, ln2))
        return x, caches

    def _features(self, ids, m):
        x, caches = self.encode(ids, m)
        pos = self._pool_index(m)
        return x[np.arange(len(ids)), pos], (x.shape, pos, caches)

    def _features_backward(self, dfeat, ids, m, cache):
        shape, pos, caches = cache
        dx = np.zeros(shape)
        dx[np.arange(shape[0]), pos] = dfeat
        grads = {}
        for l in reversed(range(self.config.layers)):
            pre = f"layer{l}."
            acache, ln1, h1, u, r, ln2 = caches[l]
            dsum2, grads[pre + "ln2.g"], grads[pre + "ln2.b"] = F.layer_norm_backward(dx, ln2)
            df = dsum2
            grads[pre + "ff.W2"] = np.einsum("bti,btj->ij", r, df)
            grads[pre + "ff.b2"] = df.sum(axis=(0, 1))
            du = (df @ self.params[pre + "ff.W2"].T) * (u > 0)
            grads[pre + "ff.W1"] = np.einsum("bti,btj->ij", h1, du)
            grads[pre + "ff.b1"] = du.sum(axis=(0, 1))
            dh1 = dsum2 + du @ self.params[pre + "ff.W1"].T
            dsum1, grads[pre + "ln1.g"], grads[pre + "ln1.b"] = F.layer_norm_backward(dh1, ln1)
            dxa, dattn = F.multi_head_attention_backward(dsum1, self._attn(l), acache)
            grads[pre + "W_Q"], grads[pre + "W_K"] = dattn.W_Q, dattn.W_K
            grads[pre + "W_V"], grads[pre + "W_O"] = dattn.W_V, dattn.W_O
            dx = dsum1 + dxa
        demb = np.zeros_like(self.params["emb"])
        np.add.at(demb, ids, dx)
        grads["emb"] = demb
        return grads


def encoder_forward(sequence, model: TransformerClassifier) -> np.ndarray:
    """Inference logits for one encoded ``TokenSequence``."""
    if not isinstance(model, TransformerClassifier):
        raise ConfigMismatch("encoder_forward needs a transformer model")
    if sequence.length != model.config.max_len:
        raise ConfigMismatch(f"sequence length {sequence.length} != model max_len {model.config.max_len}")
    return model.forward(sequence.ids, sequence.mask)[0][0]


def build_model(config: ModelConfig, seed: int = 0) -> Classifier:
    cls = TransformerClassifier if config.arch == "transformer" else RecurrentClassifier
    return cls.initialize(config, seed)


def from_params(config: ModelConfig, params: dict) -> Classifier:
    cls = TransformerClassifier if config.arch == "transformer" else RecurrentClassifier
    expected = cls.initialize(config, 0).params
    if set(expected) != set(params):
        raise ConfigMismatch(f"parameter names differ: {sorted(set(expected) ^ set(params))}")
    for k, v in expected.items():
        if v.shape != params[k].shape:
            raise ConfigMismatch(f"{k}: shape {params[k].shape} != {v.shape}")
    return cls(config, params)
