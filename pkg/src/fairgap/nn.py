"""Dense MLP engine: forward/backward passes, losses, optimizers, clipping.

Everything is float64 numpy. Weight matrices are stored ``(out, in)`` so a
layer computes ``act(x @ W.T + b)`` on a row-major batch ``x``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, ShapeError

BCE_CLAMP = 1e-7


class Activation(str, Enum):
    RELU = "relu"
    SIGMOID = "sigmoid"
    IDENTITY = "identity"


class AdversaryKind(str, Enum):
    NONE = "none"
    CROSS_ENTROPY = "cross_entropy"
    WASSERSTEIN_CRITIC = "wasserstein_critic"


@dataclass
class Layer:
    weights: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.IDENTITY

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        self.activation = Activation(self.activation)
        if self.weights.ndim != 2:
            raise ShapeError(f"weights must be 2-D, got shape {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(
                f"bias shape {self.bias.shape} does not match {self.weights.shape[0]} outputs"
            )

    @property
    def in_width(self) -> int:
        return self.weights.shape[1]

    @property
    def out_width(self) -> int:
        return self.weights.shape[0]

    def copy(self) -> "Layer":
        return Layer(self.weights.copy(), self.bias.copy(), self.activation)


@dataclass
class ForwardCache:
    inputs: list = field(default_factory=list)
    pre: list = field(default_factory=list)
    post: list = field(default_factory=list)


@dataclass
class MlpModel:
    """Feature map g, regression head h and (optional) adversary f.

    The adversary reads ``[Z, y_scaled]`` where ``y_scaled`` maps the
    training-split label range onto [0, 1] using ``y_min``/``y_max``.
    """

    feature_map: list
    head: list
    adversary: list = field(default_factory=list)
    adversary_kind: AdversaryKind = AdversaryKind.NONE
    y_min: float = 0.0
    y_max: float = 1.0

    def __post_init__(self):
        self.adversary_kind = AdversaryKind(self.adversary_kind)
        check_chain(self.feature_map)
        check_chain(self.head)
        if self.head[0].in_width != self.feature_width:
            raise ShapeError("head input width must equal feature width")
        if self.adversary_kind is AdversaryKind.NONE:
            return
        check_chain(self.adversary)
        if self.adversary[0].in_width != self.feature_width + 1:
            raise ShapeError("adversary input width must be feature width + 1")
        last = self.adversary[-1]
        if last.out_width != 1:
            raise ShapeError("adversary must have a single output")
        want = (
            Activation.SIGMOID
            if self.adversary_kind is AdversaryKind.CROSS_ENTROPY
            else Activation.IDENTITY
        )
        if last.activation is not want:
            raise ShapeError(f"{self.adversary_kind.value} adversary must end in {want.value}")

    @property
    def feature_width(self) -> int:
        return self.feature_map[-1].out_width

    def scale_y(self, y: np.ndarray) -> np.ndarray:
        span = self.y_max - self.y_min
        if span <= 0:
            return np.zeros_like(y, dtype=np.float64)
        return (np.asarray(y, dtype=np.float64) - self.y_min) / span

    def predict(self, x: np.ndarray) -> np.ndarray:
        z, _ = forward(self.feature_map, x)
        out, _ = forward(self.head, z)
        return out[:, 0]

    def parameters(self) -> list:
        return [
            arr
            for part in (self.feature_map, self.head, self.adversary)
            for layer in part
            for arr in (layer.weights, layer.bias)
        ]

    def copy(self) -> "MlpModel":
        return MlpModel(
            [l.copy() for l in self.feature_map],
            [l.copy() for l in self.head],
            [l.copy() for l in self.adversary],
            self.adversary_kind,
            self.y_min,
            self.y_max,
        )


def check_chain(layers: Sequence[Layer]) -> None:
    if not layers:
        raise ShapeError("layer stack is empty")
    for k in range(len(layers) - 1):
        if layers[k].out_width != layers[k + 1].in_width:
            raise ShapeError(
                f"layer {k} outputs {layers[k].out_width} but layer {k + 1} expects "
                f"{layers[k + 1].in_width}"
            )


def _activate(kind: Activation, pre: np.ndarray) -> np.ndarray:
    if kind is Activation.RELU:
        return np.maximum(pre, 0.0)
    if kind is Activation.SIGMOID:
        # split by sign so exp never overflows
        out = np.empty_like(pre)
        pos = pre >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-pre[pos]))
        e = np.exp(pre[~pos])
        out[~pos] = e / (1.0 + e)
        return out
    return pre


def _activation_grad(kind: Activation, pre: np.ndarray, post: np.ndarray, grad: np.ndarray):
    if kind is Activation.RELU:
        return grad * (pre > 0)
    if kind is Activation.SIGMOID:
        return grad * post * (1.0 - post)
    return grad


def forward(layers: Sequence[Layer], x) -> tuple[np.ndarray, ForwardCache]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"input must be 2-D, got shape {x.shape}")
    if x.shape[1] != layers[0].in_width:
        raise ShapeError(f"input has {x.shape[1]} columns, first layer expects {layers[0].in_width}")
    cache = ForwardCache()
    h = x
    for layer in layers:
        pre = h @ layer.weights.T + layer.bias
        post = _activate(layer.activation, pre)
        cache.inputs.append(h)
        cache.pre.append(pre)
        cache.post.append(post)
        h = post
    return h, cache


def backward(layers: Sequence[Layer], cache: ForwardCache, output_grad):
    """Backpropagate ``output_grad`` (dL/d output) through ``layers``.

    Returns ``(param_grads, input_grad)`` where ``param_grads`` is a list of
    ``(dW, db)`` pairs aligned with ``layers``.
    """
    grad = np.asarray(output_grad, dtype=np.float64)
    if len(cache.post) != len(layers):
        raise ShapeError("cache does not match layer stack")
    if grad.shape != cache.post[-1].shape:
        raise ShapeError(f"output_grad shape {grad.shape} != forward output {cache.post[-1].shape}")
    grads = [None] * len(layers)
    for k in range(len(layers) - 1, -1, -1):
        layer = layers[k]
        delta = _activation_grad(layer.activation, cache.pre[k], cache.post[k], grad)
        grads[k] = (delta.T @ cache.inputs[k], delta.sum(axis=0))
        grad = delta @ layer.weights
    return grads, grad


def grl_backward(upstream_grad, lam: float) -> np.ndarray:
    """Gradient reversal: identity forward, ``-lam * grad`` backward."""
    if not np.isfinite(lam):
        raise DomainError("GRL coefficient must be finite")
    return -lam * np.asarray(upstream_grad, dtype=np.float64)


def mse_loss(pred, target) -> tuple[float, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} vs target {target.shape}")
    n = pred.size
    if n == 0:
        raise DomainError("mse_loss of an empty batch")
    diff = pred - target
    return float(np.mean(diff * diff)), (2.0 / n) * diff


def bce_loss(pred, labels) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy in nats; predictions clamped to [1e-7, 1 - 1e-7]."""
    pred = np.asarray(pred, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if pred.shape != labels.shape:
        raise ShapeError(f"pred {pred.shape} vs labels {labels.shape}")
    n = pred.size
    if n == 0:
        raise DomainError("bce_loss of an empty batch")
    p = np.clip(pred, BCE_CLAMP, 1.0 - BCE_CLAMP)
    loss = -np.mean(labels * np.log(p) + (1.0 - labels) * np.log1p(-p))
    grad = (p - labels) / (p * (1.0 - p)) / n
    # clamped entries have zero derivative w.r.t. the raw prediction
    grad[(pred < BCE_CLAMP) | (pred > 1.0 - BCE_CLAMP)] = 0.0
    return float(loss), grad


def wasserstein_penalty(critic_out, groups) -> Optional[tuple[float, np.ndarray]]:
    """|mean f over group 1 - mean f over group 0| and its subgradient.

    Returns None when the batch lacks one of the groups; callers skip the
    penalty for that step.
    """
    out = np.asarray(critic_out, dtype=np.float64)
    groups = np.asarray(groups)
    if out.shape != groups.shape:
        raise ShapeError(f"critic_out {out.shape} vs groups {groups.shape}")
    g1 = groups == 1
    g0 = ~g1
    n0, n1 = int(g0.sum()), int(g1.sum())
    if n0 == 0 or n1 == 0:
        return None
    diff = out[g1].mean() - out[g0].mean()
    sign = 1.0 if diff >= 0 else -1.0
    grad = np.where(g1, sign / n1, -sign / n0)
    return float(abs(diff)), grad


class OptimizerKind(str, Enum):
    SGD = "sgd"
    ADADELTA = "adadelta"


@dataclass
class OptimizerState:
    kind: OptimizerKind = OptimizerKind.ADADELTA
    learning_rate: float = 1.0
    adadelta_rho: float = 0.9
    adadelta_eps: float = 1e-6
    square_avg: list = field(default_factory=list)
    delta_avg: list = field(default_factory=list)

    def __post_init__(self):
        self.kind = OptimizerKind(self.kind)
        if not 0.0 < self.adadelta_rho < 1.0:
            raise DomainError("adadelta_rho must lie in (0, 1)")
        if self.adadelta_eps <= 0:
            raise DomainError("adadelta_eps must be positive")

    def fresh(self) -> "OptimizerState":
        """Same hyper-parameters, empty accumulators."""
        return OptimizerState(self.kind, self.learning_rate, self.adadelta_rho, self.adadelta_eps)


def optimizer_step(state: OptimizerState, params: list, grads: list) -> None:
    """Update ``params`` in place."""
    if len(params) != len(grads):
        raise ShapeError("params and grads differ in length")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ShapeError(f"param {p.shape} vs grad {g.shape}")
    lr = state.learning_rate
    if state.kind is OptimizerKind.SGD:
        for p, g in zip(params, grads):
            p -= lr * g
        return

    if not state.square_avg:
        state.square_avg = [np.zeros_like(p) for p in params]
        state.delta_avg = [np.zeros_like(p) for p in params]
    rho, eps = state.adadelta_rho, state.adadelta_eps
    for p, g, sq, acc in zip(params, grads, state.square_avg, state.delta_avg):
        if sq.shape != p.shape:
            raise ShapeError("optimizer accumulators do not match parameters")
        sq *= rho
        sq += (1.0 - rho) * g * g
        delta = np.sqrt(acc + eps) / np.sqrt(sq + eps) * g
        acc *= rho
        acc += (1.0 - rho) * delta * delta
        p -= lr * delta


def clip_weights(layers: Sequence[Layer], c: float) -> None:
    if not c > 0:
        raise DomainError("clip norm must be positive")
    for layer in layers:
        np.clip(layer.weights, -c, c, out=layer.weights)
        np.clip(layer.bias, -c, c, out=layer.bias)


def init_glorot(shape, rng) -> np.ndarray:
    """Glorot-uniform matrix of ``shape = (fan_out, fan_in)``.

    ``rng`` is an int seed or a ``numpy.random.Generator``.
    """
    fan_out, fan_in = shape
    if fan_out <= 0 or fan_in <= 0:
        raise DomainError(f"invalid shape {shape}")
    rng = np.random.default_rng(rng)
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def build_layers(widths: Sequence[int], activations: Sequence, rng) -> list:
    """Stack of ``len(widths) - 1`` layers with Glorot weights and zero biases."""
    if len(activations) != len(widths) - 1:
        raise ShapeError("need one activation per layer")
    rng = np.random.default_rng(rng)
    return [
        Layer(init_glorot((widths[k + 1], widths[k]), rng), np.zeros(widths[k + 1]), act)
        for k, act in enumerate(activations)
    ]
