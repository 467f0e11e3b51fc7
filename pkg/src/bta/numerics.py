"""Differentiable numpy primitives with hand-written backward passes.

Every forward function returns its output plus whatever the matching
``*_backward`` needs; backward functions return gradients and never mutate
their inputs. All arithmetic is float64.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .errors import ConfigError, DimensionError, NumericError

PROB_CLAMP = 1e-12
BN_EPS = 1e-5
BN_MOMENTUM = 0.1


class EmptyMaskWarning(UserWarning):
    pass


def _contract(A, B):
    """Sum of outer products over all leading axes: A2.T @ B2 on flattened rows."""
    return A.reshape(-1, A.shape[-1]).T @ B.reshape(-1, B.shape[-1])


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# linear maps


def linear(X, W, B):
    """Column-form affine map ``W @ X + B``.

    X has shape (..., d, n), W (h, d) and B anything broadcastable to (h, n).
    Leading axes of X are treated as a batch.
    """
    X = np.asarray(X, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if W.ndim != 2 or X.ndim < 2 or X.shape[-2] != W.shape[1]:
        raise DimensionError(f"cannot apply W{W.shape} to X{X.shape}")
    out_shape = (W.shape[0], X.shape[-1])
    try:
        if np.broadcast_shapes(B.shape, out_shape) != out_shape:
            raise ValueError
    except ValueError:
        raise DimensionError(f"bias B{B.shape} does not fit output {out_shape}") from None
    return W @ X + B


def linear_backward(dout, X, W, B_shape):
    """Gradients of :func:`linear` w.r.t. X, W and B."""
    dX = W.T @ dout
    dW = _contract(np.swapaxes(dout, -1, -2), np.swapaxes(X, -1, -2))
    dB = _unbroadcast(dout, tuple(B_shape))
    return dX, dW, dB


def dense(X, W, b):
    """Row-form affine map ``X @ W + b`` over the last axis of X."""
    if X.shape[-1] != W.shape[0]:
        raise DimensionError(f"cannot apply W{W.shape} to X{X.shape}")
    return X @ W + b


def dense_backward(dout, X, W):
    dX = dout @ W.T
    dW = _contract(X, dout)
    db = dout.reshape(-1, dout.shape[-1]).sum(axis=0)
    return dX, dW, db


# ---------------------------------------------------------------------------
# activations and losses


def gelu(x):
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


def gelu_backward(dout, x):
    cdf = 0.5 * (1.0 + erf(x / math.sqrt(2.0)))
    pdf = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return dout * (cdf + x * pdf)


def softmax(v, axis=-1):
    v = np.asarray(v, dtype=np.float64)
    shifted = v - v.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_backward(dout, y, axis=-1):
    return y * (dout - (dout * y).sum(axis=axis, keepdims=True))


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def cross_entropy(p, y):
    """Elementwise binary cross-entropy with natural log.

    ``y`` may be a soft target in [0, 1]. ``p`` is clamped to
    [1e-12, 1 - 1e-12] before taking logs.
    """
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = np.asarray(y, dtype=np.float64)
    return -y * np.log(p) - (1.0 - y) * np.log1p(-p)


def cross_entropy_grad(p, y):
    """dL/dp of :func:`cross_entropy`; zero where the clamp is active."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    inside = (p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP)
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return np.where(inside, -y / pc + (1.0 - y) / (1.0 - pc), 0.0)


def masked_mse(X_rec, X, mask):
    """Squared error summed over hidden entries (``mask == 0``).

    Returns ``(loss, grad)`` with ``grad`` w.r.t. ``X_rec``. Visible entries
    get exactly zero gradient. An all-visible mask yields 0 and emits
    :class:`EmptyMaskWarning`.
    """
    X_rec = np.asarray(X_rec, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    mask = np.asarray(mask)
    if X_rec.shape != X.shape or mask.shape != X.shape:
        raise DimensionError(f"shapes differ: {X_rec.shape}, {X.shape}, {mask.shape}")
    hidden = mask == 0
    if not hidden.any():
        warnings.warn("mask hides no entries; reconstruction loss is 0", EmptyMaskWarning, stacklevel=2)
        return 0.0, np.zeros_like(X_rec)
    diff = np.where(hidden, X_rec - X, 0.0)
    return float(np.sum(diff * diff)), 2.0 * diff


# ---------------------------------------------------------------------------
# multihead attention


def _split_heads(T, heads):
    *lead, E, H = T.shape
    return T.reshape(*lead, E, heads, H // heads).swapaxes(-2, -3)


def _merge_heads(T):
    *lead, D, E, dh = T.shape
    return T.swapaxes(-2, -3).reshape(*lead, E, D * dh)


@dataclass
class AttentionCache:
    Z: np.ndarray
    Q: np.ndarray
    K: np.ndarray
    V: np.ndarray
    A: np.ndarray
    concat: np.ndarray
    heads: int


def multihead_attention(Z, Wq, Wk, Wv, Wo, heads):
    """Scaled dot-product self-attention over the rows of ``Z``.

    Z has shape (..., E, H). Wq/Wk/Wv are (H, H): head ``i`` owns columns
    ``i*H/D:(i+1)*H/D``, which is the per-head (H, H/D) projection laid side
    by side. No bias terms. Returns ``(out, A, cache)`` where ``A`` has shape
    (..., D, E, E) and each row of ``A`` is a probability distribution.
    """
    H = Z.shape[-1]
    if heads < 1 or H % heads:
        raise ConfigError(f"hidden size {H} is not divisible by {heads} heads")
    for name, W in (("query", Wq), ("key", Wk), ("value", Wv), ("out", Wo)):
        if W.shape != (H, H):
            raise DimensionError(f"{name} weight {W.shape} does not match hidden size {H}")
    dh = H // heads
    Q = _split_heads(Z @ Wq, heads)
    K = _split_heads(Z @ Wk, heads)
    V = _split_heads(Z @ Wv, heads)
    A = softmax(Q @ K.swapaxes(-1, -2) / math.sqrt(dh))
    concat = _merge_heads(A @ V)
    out = concat @ Wo
    return out, A, AttentionCache(Z, Q, K, V, A, concat, heads)


def multihead_attention_backward(dout, cache, Wq, Wk, Wv, Wo):
    """Returns ``(dZ, dWq, dWk, dWv, dWo)``."""
    c = cache
    dh = c.Z.shape[-1] // c.heads
    dWo = _contract(c.concat, dout)
    dO = _split_heads(dout @ Wo.T, c.heads)
    dA = dO @ c.V.swapaxes(-1, -2)
    dV = c.A.swapaxes(-1, -2) @ dO
    dS = softmax_backward(dA, c.A) / math.sqrt(dh)
    dQ = _merge_heads(dS @ c.K)
    dK = _merge_heads(dS.swapaxes(-1, -2) @ c.Q)
    dV = _merge_heads(dV)
    dWq = _contract(c.Z, dQ)
    dWk = _contract(c.Z, dK)
    dWv = _contract(c.Z, dV)
    dZ = dQ @ Wq.T + dK @ Wk.T + dV @ Wv.T
    return dZ, dWq, dWk, dWv, dWo


# ---------------------------------------------------------------------------
# batch normalization


@dataclass
class BatchNormCache:
    xhat: np.ndarray
    inv_std: np.ndarray
    gamma: np.ndarray
    training: bool


def batch_norm(Z, gamma, beta, running_mean, running_var, training,
               momentum=BN_MOMENTUM, eps=BN_EPS):
    """Normalize every non-batch coordinate of ``Z`` over axis 0.

    Returns ``(out, cache, (new_running_mean, new_running_var))``. The running
    statistics are returned rather than updated in place; in eval mode they
    come back unchanged. Running variance uses the unbiased batch estimate.
    """
    Z = np.asarray(Z, dtype=np.float64)
    if training:
        n = Z.shape[0]
        if n < 2:
            raise ConfigError("batch norm in train mode needs a batch of at least 2")
        mean = Z.mean(axis=0)
        var = Z.var(axis=0)
        new_mean = (1.0 - momentum) * running_mean + momentum * mean
        new_var = (1.0 - momentum) * running_var + momentum * var * n / (n - 1)
    else:
        mean, var = running_mean, running_var
        new_mean, new_var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (Z - mean) * inv_std
    out = gamma * xhat + beta
    return out, BatchNormCache(xhat, inv_std, gamma, training), (new_mean, new_var)


def batch_norm_backward(dout, cache):
    """Returns ``(dZ, dgamma, dbeta)``."""
    dgamma = np.sum(dout * cache.xhat, axis=0)
    dbeta = np.sum(dout, axis=0)
    dxhat = dout * cache.gamma
    if not cache.training:
        return dxhat * cache.inv_std, dgamma, dbeta
    n = dout.shape[0]
    dZ = (cache.inv_std / n) * (
        n * dxhat - dxhat.sum(axis=0) - cache.xhat * np.sum(dxhat * cache.xhat, axis=0)
    )
    return dZ, dgamma, dbeta


# ---------------------------------------------------------------------------
# parameters and optimization


class ParameterStore:
    """Named float64 parameters, one gradient buffer each, plus buffers.

    Buffers hold non-learnable state (batch-norm running statistics, input
    normalization, channel geometry) and are never touched by the optimizer.
    """

    def __init__(self):
        self.params = {}
        self.grads = {}
        self.buffers = {}

    def add(self, name, value):
        if name in self.params or name in self.buffers:
            raise ValueError(f"duplicate parameter name {name!r}")
        value = np.array(value, dtype=np.float64)
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)
        return value

    def add_buffer(self, name, value):
        if name in self.params:
            raise ValueError(f"{name!r} is already a parameter")
        self.buffers[name] = np.array(value, dtype=np.float64)

    def __getitem__(self, name):
        if name in self.params:
            return self.params[name]
        return self.buffers[name]

    def __contains__(self, name):
        return name in self.params or name in self.buffers

    def __iter__(self):
        return iter(self.params)

    def __len__(self):
        return len(self.params)

    def zero_grad(self):
        for g in self.grads.values():
            g.fill(0.0)

    def accumulate(self, name, grad):
        target = self.grads[name]
        if grad.shape != target.shape:
            raise DimensionError(f"gradient for {name!r} has shape {grad.shape}, expected {target.shape}")
        target += grad

    def copy(self):
        other = ParameterStore()
        for name, value in self.params.items():
            other.params[name] = value.copy()
            other.grads[name] = self.grads[name].copy()
        for name, value in self.buffers.items():
            other.buffers[name] = value.copy()
        return other


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")


def adam_step(store, state):
    """One bias-corrected Adam update of every parameter in ``store``."""
    for name, g in store.grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name!r}")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in store.params.items():
        g = store.grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


# ---------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_parameter: dict
    n_checked: int
    tolerance: float

    @property
    def passed(self):
        return self.max_rel_error < self.tolerance


def relative_error(a, b, floor=1e-6):
    """|a - b| / max(|a| + |b|, floor); the floor keeps near-zero pairs sane."""
    return np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), floor)


def finite_diff_check(loss_fn, store, tolerance=1e-4, h=1e-5, n_coords=64, seed=0):
    """Compare analytic gradients to central differences.

    ``loss_fn(store)`` must return the scalar loss and leave analytic
    gradients in ``store.grads`` (it is responsible for zeroing them). Up to
    ``n_coords`` coordinates per parameter are probed; smaller parameters are
    checked exhaustively.
    """
    rng = np.random.default_rng(seed)
    loss_fn(store)
    analytic = {name: g.copy() for name, g in store.grads.items()}
    per_param = {}
    total = 0
    for name, p in store.params.items():
        flat = p.reshape(-1)
        if flat.size <= n_coords:
            coords = np.arange(flat.size)
        else:
            coords = np.sort(rng.choice(flat.size, size=n_coords, replace=False))
        worst = 0.0
        for i in coords:
            orig = flat[i]
            flat[i] = orig + h
            plus = loss_fn(store)
            flat[i] = orig - h
            minus = loss_fn(store)
            flat[i] = orig
            numeric = (plus - minus) / (2.0 * h)
            err = float(relative_error(analytic[name].reshape(-1)[i], numeric))
            worst = max(worst, err)
        per_param[name] = worst
        total += len(coords)
    loss_fn(store)
    max_err = max(per_param.values()) if per_param else 0.0
    return GradCheckReport(max_err, per_param, total, tolerance)
