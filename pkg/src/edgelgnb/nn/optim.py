"""Adagrad and the minibatch training loop."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 0.05
    epochs: int = 1000
    dropout_keep: float = 1.0
    l2_coeff: float = 1e-4
    batch_size: int = 32
    seed: int = 0
    adagrad_epsilon: float = 1e-8
    hidden: tuple = field(default=(16, 16))

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError("epochs must be a positive integer")
        if not 0.0 < self.dropout_keep <= 1.0:
            raise ValueError("dropout_keep must be in (0, 1]")
        if self.l2_coeff < 0:
            raise ValueError("l2_coeff must be nonnegative")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ValueError("batch_size must be a positive integer")
        if not self.adagrad_epsilon > 0:
            raise ValueError("adagrad_epsilon must be positive")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def with_(self, **changes):
        return replace(self, **changes)


class AdagradState:
    """Per-parameter running sums of squared gradients."""

    def __init__(self, params):
        self.accum = [{k: np.zeros_like(v) for k, v in p.items()} for p in params]

    def to_dict(self):
        return [{k: v.tolist() for k, v in p.items()} for p in self.accum]


def adagrad_step(params, grads, state, learning_rate, epsilon=1e-8):
    """One Adagrad update, in place.

    ``state += g**2`` then ``param -= lr * g / (sqrt(state) + eps)``
    elementwise. ``params`` and ``grads`` are lists of dicts of arrays;
    ``state`` is an :class:`AdagradState` built for the same shapes.
    """
    if len(params) != len(grads) or len(params) != len(state.accum):
        raise ValueError("params, grads and state disagree in length")
    for p, g, acc in zip(params, grads, state.accum):
        for name, value in p.items():
            grad = g[name]
            if grad.shape != value.shape or acc[name].shape != value.shape:
                raise ValueError(f"shape mismatch for parameter {name}")
            acc[name] += grad * grad
            value -= learning_rate * grad / (np.sqrt(acc[name]) + epsilon)
    return params, state


def train(net, inputs, targets, loss_fn, config: TrainingConfig, on_epoch=None):
    """Minibatch Adagrad over ``config.epochs`` shuffled passes.

    ``loss_fn(prediction, target) -> (value, grad)`` defines the objective.
    The seed fixes both the shuffling and the dropout masks, so reruns are
    bitwise identical. Returns the per-epoch mean loss.
    """
    rng = np.random.default_rng(config.seed)
    state = AdagradState(net.params)
    n = inputs.shape[0]
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            out, cache = net.forward(inputs[idx], mode="train", rng=rng)
            value, dout = loss_fn(out, targets[idx])
            grads = net.backward(cache, dout, l2=config.l2_coeff)
            adagrad_step(net.params, grads, state, config.learning_rate, config.adagrad_epsilon)
            net.touch()
            total += value * idx.size
        history.append(total / n)
        if on_epoch is not None:
            on_epoch(epoch, history[-1])
    return history
