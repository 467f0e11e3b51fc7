"""The BTA network: two feature streams, centrality encodings, spatial attention.

Shapes follow the channel-major convention: a batch of temporal inputs is
(b, E, N), spectral inputs are (b, E, B), and every stream is projected to
(b, E, H) before attention.
"""

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ..eeg.montage import default_centralities
from ..eeg.signals import zscore_channels
from ..errors import ConfigError, DataError
from ..numerics import (ParameterStore, batch_norm, batch_norm_backward, cross_entropy,
                        cross_entropy_grad, dense, dense_backward, gelu, gelu_backward, linear,
                        linear_backward, masked_mse, multihead_attention,
                        multihead_attention_backward, softmax, softmax_backward)
from ..seeding import STREAM_INIT, derive_rng
from .geometry import channel_geometry

STREAMS = ("t", "s")
STREAM_NAMES = {"temporal": "t", "spectral": "s"}
HYPERPARAMETER_GRID = {"lr": (0.01, 0.05), "batch_size": (8, 32), "hidden": (8, 16, 32)}
EMBEDDING_AXES = ("rho", "theta", "phi")


@dataclass
class BtaConfig:
    E: int
    N: int
    B: int
    channels: list
    hidden: int = 16
    heads: int = 8
    centralities: list = field(default_factory=lambda: [list(c) for c in default_centralities()])
    bands: list = field(default_factory=list)
    lr: float = 0.01
    batch_size: int = 32
    epochs: int = 50
    patience: int = 5
    pretrain_epochs: int = 20
    mask_ratio: float = 0.15
    seed: int = 0
    use_attention: bool = True
    use_centrality: bool = True
    transfer_full_encoder: bool = False

    def __post_init__(self):
        self.channels = list(self.channels)
        self.centralities = [[float(v) for v in c] for c in self.centralities]
        self.bands = [list(b) for b in self.bands]
        if len(self.channels) != self.E:
            raise ConfigError(f"{len(self.channels)} channel names for E={self.E}")
        if min(self.E, self.N, self.B, self.hidden, self.heads) < 1:
            raise ConfigError("E, N, B, hidden and heads must be positive")
        if self.hidden % self.heads:
            raise ConfigError(f"hidden size {self.hidden} is not divisible by {self.heads} heads")
        if not self.centralities or any(len(c) != 3 for c in self.centralities):
            raise ConfigError("need at least one 3-D centrality point")
        if not 0.0 < self.mask_ratio < 1.0:
            raise ConfigError("mask_ratio must lie in (0, 1)")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be at least 2 for batch normalization")
        if self.epochs < 1 or self.pretrain_epochs < 0 or self.patience < 1:
            raise ConfigError("epochs and patience must be positive")

    @property
    def M(self):
        return len(self.centralities)

    @classmethod
    def for_dataset(cls, dataset, **overrides):
        return cls(E=dataset.E, N=dataset.N, B=dataset.B, channels=list(dataset.channels),
                   bands=[list(b) for b in dataset.bands], **overrides)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)

    def replace(self, **changes):
        d = self.to_dict()
        d.update(changes)
        return BtaConfig.from_dict(d)


def centrality_names(M):
    return [f"centrality.{j}.{axis}" for j in range(M) for axis in EMBEDDING_AXES]


class BtaNetwork:
    """Parameters plus the forward/backward passes of BTA.

    The parameter store is the whole state: learnable tensors in
    ``store.params`` and batch-norm statistics, spectral normalization and
    channel geometry in ``store.buffers``.
    """

    def __init__(self, config, store):
        self.config = config
        self.store = store

    @classmethod
    def initialize(cls, config, montage, *keys):
        """Fresh parameters drawn from ``config.seed`` and optional sub-keys."""
        cfg = config
        rng = derive_rng(cfg.seed, STREAM_INIT, *keys)
        H, E = cfg.hidden, cfg.E
        st = ParameterStore()

        def uniform(shape, fan_in):
            bound = 1.0 / math.sqrt(fan_in)
            return rng.uniform(-bound, bound, size=shape)

        for s, F in (("t", cfg.N), ("s", cfg.B)):
            st.add(f"input.{s}.weight", uniform((H, F), F))
            st.add(f"input.{s}.bias", np.zeros((H, E)))
        for name in centrality_names(cfg.M):
            st.add(name, rng.normal(0.0, 0.02, size=H))
        for s in STREAMS:
            for part in ("query", "key", "value", "out"):
                st.add(f"attn.{s}.{part}", uniform((H, H), H))
            st.add(f"bn.{s}.gamma", np.ones((E, H)))
            st.add(f"bn.{s}.beta", np.zeros((E, H)))
            st.add_buffer(f"bn.{s}.running_mean", np.zeros((E, H)))
            st.add_buffer(f"bn.{s}.running_var", np.ones((E, H)))
        st.add("fusion.weight", uniform((2 * E * H, 2), 2 * E * H))
        st.add("fusion.bias", np.zeros(2))
        for s, F in (("t", cfg.N), ("s", cfg.B)):
            st.add(f"recon.{s}.weight", uniform((H, F), H))
            st.add(f"recon.{s}.bias", np.zeros(F))
        st.add_buffer("geometry", channel_geometry(montage.coordinates(cfg.channels), cfg.centralities))
        st.add_buffer("norm.s.mean", np.zeros((E, cfg.B)))
        st.add_buffer("norm.s.std", np.ones((E, cfg.B)))
        return cls(cfg, st)

    def copy(self):
        return BtaNetwork(self.config, self.store.copy())

    # -- inputs ------------------------------------------------------------

    def fit_normalization(self, spectral):
        """Per (channel, band) standardization of DE features from training data."""
        spectral = np.asarray(spectral, dtype=np.float64)
        self.store.buffers["norm.s.mean"] = spectral.mean(axis=0)
        self.store.buffers["norm.s.std"] = np.maximum(spectral.std(axis=0), 1e-6)

    def prepare(self, xt, xs):
        xt = np.asarray(xt, dtype=np.float64)
        xs = np.asarray(xs, dtype=np.float64)
        cfg = self.config
        if xt.shape[-2:] != (cfg.E, cfg.N) or xs.shape[-2:] != (cfg.E, cfg.B):
            raise DataError(f"inputs {xt.shape}/{xs.shape} do not match E={cfg.E}, N={cfg.N}, B={cfg.B}")
        st = self.store.buffers
        return zscore_channels(xt), (xs - st["norm.s.mean"]) / st["norm.s.std"]

    # -- building blocks -----------------------------------------------------

    def encodings(self):
        """Sum over frames of the centrality encodings: (E, H)."""
        st, cfg = self.store, self.config
        P = np.zeros((cfg.E, cfg.hidden))
        if not cfg.use_centrality:
            return P
        geo = st.buffers["geometry"]
        for j in range(cfg.M):
            for a, axis in enumerate(EMBEDDING_AXES):
                P += np.outer(geo[:, j, a], st.params[f"centrality.{j}.{axis}"])
        return P

    def _encodings_backward(self, dP):
        if not self.config.use_centrality:
            return
        geo = self.store.buffers["geometry"]
        for j in range(self.config.M):
            for a, axis in enumerate(EMBEDDING_AXES):
                self.store.accumulate(f"centrality.{j}.{axis}", geo[:, j, a] @ dP)

    def _attn_weights(self, s):
        p = self.store.params
        return tuple(p[f"attn.{s}.{part}"] for part in ("query", "key", "value", "out"))

    def _encode(self, s, x, P, training):
        st, cfg = self.store, self.config
        xT = np.swapaxes(x, -1, -2)
        Hm = linear(xT, st.params[f"input.{s}.weight"], st.params[f"input.{s}.bias"])
        Z = np.swapaxes(Hm, -1, -2) + P
        cache = {"xT": xT}
        if cfg.use_attention:
            Z1, A, cache["attn"] = multihead_attention(Z, *self._attn_weights(s), cfg.heads)
        else:
            Z1, A = Z, None
        Z2, cache["bn"], (rm, rv) = batch_norm(
            Z1, st.params[f"bn.{s}.gamma"], st.params[f"bn.{s}.beta"],
            st.buffers[f"bn.{s}.running_mean"], st.buffers[f"bn.{s}.running_var"], training)
        if training:
            st.buffers[f"bn.{s}.running_mean"] = rm
            st.buffers[f"bn.{s}.running_var"] = rv
        return Z2, A, cache

    def _encode_backward(self, s, dZ2, cache):
        st = self.store
        dZ1, dgamma, dbeta = batch_norm_backward(dZ2, cache["bn"])
        st.accumulate(f"bn.{s}.gamma", dgamma)
        st.accumulate(f"bn.{s}.beta", dbeta)
        if "attn" in cache:
            dZ, *dWs = multihead_attention_backward(dZ1, cache["attn"], *self._attn_weights(s))
            for part, dW in zip(("query", "key", "value", "out"), dWs):
                st.accumulate(f"attn.{s}.{part}", dW)
        else:
            dZ = dZ1
        W = st.params[f"input.{s}.weight"]
        _, dW, dB = linear_backward(np.swapaxes(dZ, -1, -2), cache["xT"], W, st.params[f"input.{s}.bias"].shape)
        st.accumulate(f"input.{s}.weight", dW)
        st.accumulate(f"input.{s}.bias", dB)
        return dZ.sum(axis=0)

    # -- classification ------------------------------------------------------

    def _forward(self, xt, xs, training):
        P = self.encodings()
        Z2t, At, ct = self._encode("t", xt, P, training)
        Z2s, As, cs = self._encode("s", xs, P, training)
        b = Z2t.shape[0]
        Z3 = np.concatenate([Z2t.reshape(b, -1), Z2s.reshape(b, -1)], axis=1)
        G = gelu(Z3)
        logits = dense(G, self.store.params["fusion.weight"], self.store.params["fusion.bias"])
        probs = softmax(logits)
        cache = {"t": ct, "s": cs, "Z3": Z3, "G": G, "probs": probs, "shape": Z2t.shape}
        return probs, {"temporal": At, "spectral": As}, cache

    def forward(self, xt, xs, training=False):
        """Returns ``(probs, attention)``; probs is (b, 2), column 1 = satisfied.

        ``attention`` maps stream name to the (b, D, E, E) attention tensor,
        or None when attention is disabled.
        """
        xt, xs = self.prepare(xt, xs)
        probs, attention, _ = self._forward(xt, xs, training)
        return probs, attention

    def loss_and_grads(self, xt, xs, y):
        """Mean cross-entropy over the batch in train mode; fills ``store.grads``."""
        st = self.store
        st.zero_grad()
        xt, xs = self.prepare(xt, xs)
        y = np.asarray(y, dtype=np.float64)
        probs, _, cache = self._forward(xt, xs, training=True)
        b = len(y)
        p = probs[:, 1]
        loss = float(np.mean(cross_entropy(p, y)))
        dprobs = np.zeros_like(probs)
        dprobs[:, 1] = cross_entropy_grad(p, y) / b
        dlogits = softmax_backward(dprobs, probs)
        dG, dWf, dbf = dense_backward(dlogits, cache["G"], st.params["fusion.weight"])
        st.accumulate("fusion.weight", dWf)
        st.accumulate("fusion.bias", dbf)
        dZ3 = gelu_backward(dG, cache["Z3"])
        half = dZ3.shape[1] // 2
        dP = self._encode_backward("t", dZ3[:, :half].reshape(cache["shape"]), cache["t"])
        dP += self._encode_backward("s", dZ3[:, half:].reshape(cache["shape"]), cache["s"])
        self._encodings_backward(dP)
        return loss

    def predict_proba(self, xt, xs, batch_size=256):
        out = []
        for i in range(0, len(xt), batch_size):
            probs, _ = self.forward(xt[i:i + batch_size], xs[i:i + batch_size], training=False)
            out.append(probs[:, 1])
        return np.concatenate(out) if out else np.zeros(0)

    def attention_maps(self, xt, xs, stream="spectral", batch_size=256):
        """Per-sample attention (n, D, E, E) of one stream, eval mode."""
        if not self.config.use_attention:
            raise ConfigError("attention is disabled in this model")
        if stream not in STREAM_NAMES:
            raise ConfigError(f"unknown stream {stream!r}")
        out = []
        for i in range(0, len(xt), batch_size):
            _, attention = self.forward(xt[i:i + batch_size], xs[i:i + batch_size], training=False)
            out.append(attention[stream])
        return np.concatenate(out)

    # -- masked reconstruction -------------------------------------------------

    def reconstruct(self, xt, xs, training=False):
        """Reconstructions of the prepared inputs from the encoder output."""
        xt, xs = self.prepare(xt, xs)
        return self._reconstruct(xt, xs, training)[:2]

    def _reconstruct(self, xt, xs, training):
        p = self.store.params
        P = self.encodings()
        Z2t, _, ct = self._encode("t", xt, P, training)
        Z2s, _, cs = self._encode("s", xs, P, training)
        rec_t = dense(Z2t, p["recon.t.weight"], p["recon.t.bias"])
        rec_s = dense(Z2s, p["recon.s.weight"], p["recon.s.bias"])
        return rec_t, rec_s, (Z2t, ct, Z2s, cs)

    def reconstruction_loss_and_grads(self, xt, xs, mask_t, mask_s):
        """Masked squared error on hidden entries (mask == 0), averaged per sample.

        The encoder only ever sees ``mask * x``; the loss compares against the
        unmasked prepared input.
        """
        st = self.store
        st.zero_grad()
        xt, xs = self.prepare(xt, xs)
        rec_t, rec_s, (Z2t, ct, Z2s, cs) = self._reconstruct(mask_t * xt, mask_s * xs, training=True)
        b = xt.shape[0]
        loss_t, g_t = masked_mse(rec_t, xt, mask_t)
        loss_s, g_s = masked_mse(rec_s, xs, mask_s)
        dP = np.zeros((self.config.E, self.config.hidden))
        for s, g, Z2, cache in (("t", g_t, Z2t, ct), ("s", g_s, Z2s, cs)):
            dZ2, dW, db = dense_backward(g / b, Z2, st.params[f"recon.{s}.weight"])
            st.accumulate(f"recon.{s}.weight", dW)
            st.accumulate(f"recon.{s}.bias", db)
            dP += self._encode_backward(s, dZ2, cache)
        self._encodings_backward(dP)
        return (loss_t + loss_s) / b
